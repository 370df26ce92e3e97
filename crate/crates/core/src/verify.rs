//! Self-checks against independent references: a brute-force grid for the
//! pointwise solver, the closed-form gradient decay of the update law, and
//! the linear error dynamics the tracking controllers should impose.

use std::fmt;

use nalgebra::Vector2;

use crate::config::Settings;
use crate::control::{pitch_controller, position_controller, PitchReference};
use crate::error::Result;
use crate::ode;
use crate::olopt::{oracle_grid_min, solve_pointwise};
use crate::sim::Setup;
use crate::trajectory::{ReferenceSample, ScenarioKind};
use crate::tvopt::{BarrierProblem, Objective, TvOptConfig};
use crate::vehicle::{dynamics, ControlInput, VehicleState};

/// Convex synthetic objectives with known minimizers.
pub mod synthetic {
    use crate::tvopt::Objective;

    /// `J = ½‖U − b(t)‖²`, `b(t) = b0 + w·t`, optionally boxed by
    /// `|U_i| ≤ bound`.
    #[derive(Debug, Clone, PartialEq)]
    pub struct MovingQuadratic {
        pub b0: Vec<f64>,
        pub w: Vec<f64>,
        pub bound: Option<f64>,
    }

    impl MovingQuadratic {
        pub fn new(b0: Vec<f64>, w: Vec<f64>) -> Self {
            assert_eq!(b0.len(), w.len());
            Self { b0, w, bound: None }
        }

        pub fn boxed(mut self, bound: f64) -> Self {
            self.bound = Some(bound);
            self
        }

        pub fn target(&self, t: f64) -> Vec<f64> {
            self.b0
                .iter()
                .zip(&self.w)
                .map(|(b, w)| b + w * t)
                .collect()
        }
    }

    impl Objective for MovingQuadratic {
        fn dim(&self) -> usize {
            self.b0.len()
        }

        fn num_constraints(&self) -> usize {
            if self.bound.is_some() {
                2 * self.dim()
            } else {
                0
            }
        }

        fn cost(&self, u: &[f64], t: f64) -> f64 {
            let b = self.target(t);
            0.5 * u.iter().zip(&b).map(|(x, b)| (x - b).powi(2)).sum::<f64>()
        }

        fn constraints(&self, u: &[f64], _t: f64) -> Vec<f64> {
            match self.bound {
                Some(r) => u.iter().flat_map(|&x| [x - r, -x - r]).collect(),
                None => Vec::new(),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub suite: &'static str,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mark = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{mark} [{}] {}: {}", self.suite, self.name, self.detail)
    }
}

fn check(
    suite: &'static str,
    name: impl Into<String>,
    passed: bool,
    detail: String,
) -> CheckResult {
    CheckResult {
        suite,
        name: name.into(),
        passed,
        detail,
    }
}

/// Resolution of the brute-force grid per axis.
pub const ORACLE_RESOLUTION: usize = 100;
/// Allowed excess of the Newton barrier value over the grid value.
pub const ORACLE_TOLERANCE: f64 = 1e-3;

/// Timestamps at the centres of `count` equal slices of `[t0, tf]`.
pub fn sample_times(t0: f64, tf: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|k| t0 + (k as f64 + 0.5) / count as f64 * (tf - t0))
        .collect()
}

/// Barrier-Newton against a brute-force grid at `count` timestamps of each
/// transition scenario.
pub fn grid_oracle(settings: &Settings, count: usize) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    for kind in [ScenarioKind::HoverToCruise, ScenarioKind::CruiseToHover] {
        let s = settings.clone().with_scenario(kind);
        let setup = Setup::new(&s)?;
        let problem = setup.barrier_problem()?;
        let bounds = setup.context.decision_box();
        for t in sample_times(s.scenario.t0, s.scenario.tf, count) {
            let newton = solve_pointwise(&problem, t, &bounds, None, &s.newton, &s.tvopt_config())?;
            let grid = oracle_grid_min(&problem, t, &bounds, ORACLE_RESOLUTION)?;
            let excess = newton.value - grid.value;
            out.push(check(
                "grid-oracle",
                format!("{kind} t={t:.2}"),
                excess <= ORACLE_TOLERANCE,
                format!(
                    "newton {:.9} grid {:.9} excess {excess:.3e}",
                    newton.value, grid.value
                ),
            ));
        }
    }
    Ok(out)
}

/// Relative tolerance on the `e^{-αt}` gradient envelope.
pub const DECAY_TOLERANCE: f64 = 1e-3;

/// Tracks `problem` from `u0` and compares `‖∇Φ‖` with `e^{-αt}‖∇Φ(0)‖`,
/// both pointwise at `probes` and as an envelope over every step.
pub fn decay_check<O: Objective>(
    name: &str,
    problem: &BarrierProblem<O>,
    u0: &[f64],
    horizon: f64,
    probes: &[f64],
    config: &TvOptConfig,
) -> Vec<CheckResult> {
    let history = match problem.track(u0, 0.0, horizon, config, |_| {}) {
        Ok(h) => h,
        Err(e) => return vec![check("gradient-decay", name, false, e.to_string())],
    };
    let g0 = history[0].grad_norm;
    let envelope = |t: f64| (-config.alpha * t).exp() * g0;
    let mut out = Vec::new();
    for &tp in probes {
        let point = history
            .iter()
            .min_by(|a, b| (a.t - tp).abs().total_cmp(&(b.t - tp).abs()))
            .expect("history is never empty");
        let rel = (point.grad_norm - envelope(point.t)).abs() / envelope(point.t);
        out.push(check(
            "gradient-decay",
            format!("{name} t={tp}"),
            rel <= DECAY_TOLERANCE,
            format!(
                "|grad| {:.6e} expected {:.6e} rel {rel:.2e}",
                point.grad_norm,
                envelope(point.t)
            ),
        ));
    }
    let worst = history
        .iter()
        .map(|p| p.grad_norm / envelope(p.t))
        .fold(0.0, f64::max);
    out.push(check(
        "gradient-decay",
        format!("{name} envelope"),
        worst <= 1.0 + DECAY_TOLERANCE,
        format!("max ratio to envelope {worst:.6}"),
    ));
    out
}

/// Gradient decay on an unconstrained and a boxed moving quadratic.
pub fn gradient_decay(settings: &Settings) -> Result<Vec<CheckResult>> {
    use synthetic::MovingQuadratic;
    let mut config = TvOptConfig::new(2, 1.0);
    config.integrator_dt = settings.dt_sim;
    config.use_analytic = false;
    let probes = [1.0, 2.0, 5.0];

    let free =
        BarrierProblem::with_defaults(MovingQuadratic::new(vec![1.0, -2.0], vec![0.3, -0.1]));
    let mut out = decay_check(
        "moving quadratic",
        &free,
        &[0.0, 0.0],
        5.0,
        &probes,
        &config,
    );

    let boxed = BarrierProblem::uniform(
        MovingQuadratic::new(vec![0.5, -0.5], vec![0.1, 0.05]).boxed(2.0),
        10.0,
        0.1,
    )?;
    out.extend(decay_check(
        "boxed quadratic",
        &boxed,
        &[-1.0, 1.0],
        5.0,
        &probes,
        &config,
    ));
    Ok(out)
}

/// Solution of `ë + a·ė + b·e = 0` with `e(0) = e0`, `ė(0) = v0`.
pub fn linear_error(a: f64, b: f64, e0: f64, v0: f64, t: f64) -> f64 {
    let disc = a * a - 4.0 * b;
    if disc > 1e-12 {
        let s = disc.sqrt();
        let (r1, r2) = ((-a + s) / 2.0, (-a - s) / 2.0);
        let c2 = (v0 - r1 * e0) / (r2 - r1);
        let c1 = e0 - c2;
        c1 * (r1 * t).exp() + c2 * (r2 * t).exp()
    } else if disc < -1e-12 {
        let (sigma, omega) = (-a / 2.0, (-disc).sqrt() / 2.0);
        let c2 = (v0 - sigma * e0) / omega;
        (sigma * t).exp() * (e0 * (omega * t).cos() + c2 * (omega * t).sin())
    } else {
        let r = -a / 2.0;
        (e0 + (v0 - r * e0) * t) * (r * t).exp()
    }
}

/// Rig step size and duration.
pub const RIG_DT: f64 = 1e-3;
pub const RIG_DURATION: f64 = 2.0;
pub const RIG_TOLERANCE: f64 = 1e-6;

/// Worst deviation of the plant under both controllers, without saturation,
/// from the analytic error responses. Returns `(position, pitch)` maxima.
pub fn controller_rig(
    settings: &Settings,
    initial: &VehicleState,
    reference: impl Fn(f64) -> ReferenceSample,
    delta_e: f64,
) -> (f64, f64) {
    let p = &settings.params;
    let g = &settings.gains;
    let pitch_ref = PitchReference::default();
    let rhs = |t: f64, y: &[f64]| -> std::result::Result<Vec<f64>, ()> {
        let s = VehicleState::from_slice(y);
        let th = position_controller(&s, &reference(t), delta_e, g, p);
        let input = ControlInput {
            rotor_thrust: th.rotor,
            pusher_thrust: th.pusher,
            torque: pitch_controller(&s, &pitch_ref, g, p),
            delta_e,
        };
        Ok(dynamics(&s, &input, p).to_vec())
    };
    let r0 = reference(0.0);
    let e0 = initial.position - r0.position;
    let v0 = initial.velocity - r0.velocity;
    let steps = ode::step_count(0.0, RIG_DURATION, RIG_DT);
    let mut y = initial.to_array().to_vec();
    let (mut pos_err, mut pitch_err) = (0.0f64, 0.0f64);
    for k in 0..=steps {
        let t = k as f64 * RIG_DT;
        let s = VehicleState::from_slice(&y);
        let expected = Vector2::new(
            linear_error(g.k_d_pos, g.k_p_pos, e0.x, v0.x, t),
            linear_error(g.k_d_pos, g.k_p_pos, e0.y, v0.y, t),
        );
        pos_err = pos_err.max((s.position - reference(t).position - expected).amax());
        // Rate error is weighted by k_p_pitch, angle error by k_d_pitch.
        let theta = linear_error(
            g.k_p_pitch,
            g.k_d_pitch,
            initial.theta,
            initial.theta_dot,
            t,
        );
        pitch_err = pitch_err.max((s.theta - theta).abs());
        if k < steps {
            y = ode::rk4_step(t, &y, RIG_DT, rhs).expect("rig dynamics are total");
        }
    }
    (pos_err, pitch_err)
}

/// Constant-velocity reference through the origin.
pub fn steady_reference(velocity: Vector2<f64>) -> impl Fn(f64) -> ReferenceSample {
    move |t| ReferenceSample {
        t,
        position: velocity * t,
        velocity,
        acceleration: Vector2::zeros(),
    }
}

/// Controller error dynamics at hover and in level flight.
pub fn controller_dynamics(settings: &Settings) -> Vec<CheckResult> {
    let perturbed = |v: Vector2<f64>| VehicleState {
        position: Vector2::new(0.1, -0.05),
        theta: 0.05,
        velocity: v + Vector2::new(-0.2, 0.1),
        theta_dot: -0.1,
    };
    let cruise = Vector2::new(settings.scenario.cruise_speed, 0.0);
    let mut out = Vec::new();
    for (name, velocity) in [("hover", Vector2::zeros()), ("cruise", cruise)] {
        let (pos, pitch) = controller_rig(
            settings,
            &perturbed(velocity),
            steady_reference(velocity),
            0.0,
        );
        out.push(check(
            "controller",
            format!("{name} position"),
            pos <= RIG_TOLERANCE,
            format!("max deviation {pos:.3e} m"),
        ));
        out.push(check(
            "controller",
            format!("{name} pitch"),
            pitch <= RIG_TOLERANCE,
            format!("max deviation {pitch:.3e} rad"),
        ));
    }
    out
}

/// Every suite, in order.
pub fn run_all(settings: &Settings) -> Result<Vec<CheckResult>> {
    let mut out = controller_dynamics(settings);
    out.extend(gradient_decay(settings)?);
    out.extend(grid_oracle(settings, 10)?);
    Ok(out)
}
