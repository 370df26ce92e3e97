//! Reduced thrust-minimization problem over `U = [δ_e, θ_ref]`.
//!
//! The thrust pair is eliminated through the force balance
//!
//! ```text
//! T_p =  F_des,x + D1
//! T_r = −(F_des,y + L − D2)
//! ```
//!
//! so the cost `J = T_r + T_p` and the nonnegativity constraints become
//! functions of `U` and time only. Aerodynamic terms are evaluated at the
//! reference velocity seen from the body frame at `θ_ref`.

use nalgebra::Vector2;

use crate::jet::{Jet, Scalar};
use crate::trajectory::{ReferenceSample, ReferenceTrajectory};
use crate::tvopt::{LocalModel, Objective};
use crate::vehicle::{VehicleParams, VehicleState};

pub const NUM_CONSTRAINTS: usize = 6;

/// Decision variable `U = [δ_e, θ_ref]` (rad).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DecisionVars {
    pub delta_e: f64,
    pub theta_ref: f64,
}

impl DecisionVars {
    pub fn new(delta_e: f64, theta_ref: f64) -> Self {
        Self { delta_e, theta_ref }
    }

    pub fn to_array(self) -> [f64; 2] {
        [self.delta_e, self.theta_ref]
    }

    pub fn from_slice(u: &[f64]) -> Self {
        Self::new(u[0], u[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesiredForce {
    pub x: f64,
    pub y: f64,
}

/// Thrusts implied by a decision through the force balance. Negative values
/// mean the corresponding nonnegativity constraint is violated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thrusts {
    pub rotor: f64,
    pub pusher: f64,
}

/// Snapshot of measured state and position gains. When present the desired
/// force tracks `p̈_ref − k_D (ṗ − ṗ_ref) − k_P (p − p_ref)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionFeedback {
    pub state: VehicleState,
    pub k_p: f64,
    pub k_d: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemContext {
    pub params: VehicleParams,
    pub reference: ReferenceTrajectory,
    pub feedback: Option<PositionFeedback>,
}

struct ForceBalance<S> {
    force: [S; 2],
    lift: S,
    drag_horizontal: S,
    drag_vertical: S,
}

impl<S: Scalar> ForceBalance<S> {
    fn rotor(&self) -> S {
        -(self.force[1] + self.lift - self.drag_vertical)
    }

    fn pusher(&self) -> S {
        self.force[0] + self.drag_horizontal
    }
}

/// Desired force `m R(θ)(a − g e₂)` and aerodynamic terms at body velocity
/// `R(θ)ᵀ v`, written once for plain floats and for jets.
fn force_balance<S: Scalar>(
    params: &VehicleParams,
    delta_e: S,
    theta: S,
    velocity: [S; 2],
    accel: [S; 2],
) -> ForceBalance<S> {
    let (s, c) = theta.sin_cos();
    let wx = accel[0];
    let wy = accel[1] + (-params.gravity);
    let force = [
        (c * wx - s * wy) * params.mass,
        (s * wx + c * wy) * params.mass,
    ];
    let u = c * velocity[0] + s * velocity[1];
    let v = c * velocity[1] - s * velocity[0];
    let cl = theta * params.cl_theta + delta_e * params.cl_delta_e + params.cl0;
    let cd1 = cl * cl * params.cd1_k + params.cd1_0;
    let u2 = u * u;
    ForceBalance {
        force,
        lift: u2 * cl,
        drag_horizontal: u2 * cd1,
        drag_vertical: v * v * params.cd2_0,
    }
}

impl ProblemContext {
    pub fn feedforward(params: VehicleParams, reference: ReferenceTrajectory) -> Self {
        Self {
            params,
            reference,
            feedback: None,
        }
    }

    /// Commanded acceleration and its time derivative.
    fn commanded_accel(&self, sample: &ReferenceSample) -> (Vector2<f64>, Vector2<f64>) {
        let jerk = self.reference.jerk(sample.t);
        match &self.feedback {
            None => (sample.acceleration, jerk),
            Some(fb) => {
                let s = &fb.state;
                let accel = sample.acceleration
                    - (s.velocity - sample.velocity) * fb.k_d
                    - (s.position - sample.position) * fb.k_p;
                let rate = jerk + sample.acceleration * fb.k_d + sample.velocity * fb.k_p;
                (accel, rate)
            }
        }
    }

    fn balance(&self, u: DecisionVars, t: f64) -> ForceBalance<f64> {
        let sample = self.reference.sample(t);
        let (accel, _) = self.commanded_accel(&sample);
        force_balance(
            &self.params,
            u.delta_e,
            u.theta_ref,
            [sample.velocity.x, sample.velocity.y],
            [accel.x, accel.y],
        )
    }

    pub fn desired_force(&self, theta_ref: f64, t: f64) -> DesiredForce {
        let f = self.balance(DecisionVars::new(0.0, theta_ref), t).force;
        DesiredForce { x: f[0], y: f[1] }
    }

    /// `J = F_des,x − F_des,y + D1 − L + D2`.
    pub fn cost(&self, u: DecisionVars, t: f64) -> f64 {
        let b = self.balance(u, t);
        b.force[0] - b.force[1] + b.drag_horizontal - b.lift + b.drag_vertical
    }

    /// `h₁..h₆`, each feasible when `≤ 0`.
    pub fn constraints(&self, u: DecisionVars, t: f64) -> [f64; NUM_CONSTRAINTS] {
        let b = self.balance(u, t);
        let p = &self.params;
        [
            b.force[1] + b.lift - b.drag_vertical,
            -b.force[0] - b.drag_horizontal,
            p.theta_min - u.theta_ref,
            u.theta_ref - p.theta_max,
            p.delta_e_min - u.delta_e,
            u.delta_e - p.delta_e_max,
        ]
    }

    pub fn recover_thrusts(&self, u: DecisionVars, t: f64) -> Thrusts {
        let b = self.balance(u, t);
        Thrusts {
            rotor: b.rotor(),
            pusher: b.pusher(),
        }
    }

    /// Box `[δe_min, δe_max] × [θ_min, θ_max]` in decision-variable order.
    pub fn decision_box(&self) -> [(f64, f64); 2] {
        let p = &self.params;
        [(p.delta_e_min, p.delta_e_max), (p.theta_min, p.theta_max)]
    }
}

impl Objective for ProblemContext {
    fn dim(&self) -> usize {
        2
    }

    fn num_constraints(&self) -> usize {
        NUM_CONSTRAINTS
    }

    fn cost(&self, u: &[f64], t: f64) -> f64 {
        ProblemContext::cost(self, DecisionVars::from_slice(u), t)
    }

    fn constraints(&self, u: &[f64], t: f64) -> Vec<f64> {
        ProblemContext::constraints(self, DecisionVars::from_slice(u), t).to_vec()
    }

    /// Exact derivatives by second-order forward differentiation in
    /// `(δ_e, θ_ref, t)`. Time enters through the reference velocity and the
    /// commanded acceleration, both seeded to first order.
    fn local_model(&self, u: &[f64], t: f64) -> Option<LocalModel> {
        type J3 = Jet<3>;
        let sample = self.reference.sample(t);
        let (accel, accel_rate) = self.commanded_accel(&sample);
        let delta = J3::variable(u[0], 0);
        let theta = J3::variable(u[1], 1);
        let velocity = [
            J3::linear(sample.velocity.x, 2, sample.acceleration.x),
            J3::linear(sample.velocity.y, 2, sample.acceleration.y),
        ];
        let accel = [
            J3::linear(accel.x, 2, accel_rate.x),
            J3::linear(accel.y, 2, accel_rate.y),
        ];
        let b = force_balance(&self.params, delta, theta, velocity, accel);
        let rotor = b.rotor();
        let pusher = b.pusher();
        let p = &self.params;

        let mut m = LocalModel::zeros(2, NUM_CONSTRAINTS);
        let jet = |j: J3| {
            (
                j.v,
                j.g[2],
                [j.g[0], j.g[1]],
                [j.h[0][2], j.h[1][2]],
                [j.h[0][0], j.h[0][1], j.h[1][0], j.h[1][1]],
            )
        };
        let (v, dt, g, gt, h) = jet(rotor + pusher);
        m.set_cost(v, dt, &g, &gt, &h);
        for (i, j) in [-rotor, -pusher].into_iter().enumerate() {
            let (v, dt, g, gt, h) = jet(j);
            m.set_constraint(i, v, dt, &g, &gt, &h);
        }
        let affine = [
            (p.theta_min - u[1], [0.0, -1.0]),
            (u[1] - p.theta_max, [0.0, 1.0]),
            (p.delta_e_min - u[0], [-1.0, 0.0]),
            (u[0] - p.delta_e_max, [1.0, 0.0]),
        ];
        for (i, (v, g)) in affine.into_iter().enumerate() {
            m.set_constraint(i + 2, v, 0.0, &g, &[0.0; 2], &[0.0; 4]);
        }
        Some(m)
    }
}
