//! Position and pitch tracking controllers and reference-pitch derivatives.

use nalgebra::Vector2;

use crate::error::{Error, Result};
use crate::problem::Thrusts;
use crate::trajectory::ReferenceSample;
use crate::vehicle::{rotation, state_aero_forces, VehicleParams, VehicleState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerGains {
    /// Position stiffness (1/s²).
    pub k_p_pos: f64,
    /// Position damping (1/s).
    pub k_d_pos: f64,
    /// Pitch gain applied to the rate error.
    pub k_p_pitch: f64,
    /// Pitch gain applied to the angle error.
    pub k_d_pitch: f64,
}

impl Default for ControllerGains {
    fn default() -> Self {
        Self {
            k_p_pos: 20.0,
            k_d_pos: 20.0,
            k_p_pitch: 10.0,
            k_d_pitch: 10.0,
        }
    }
}

impl ControllerGains {
    pub fn validate(&self) -> Result<()> {
        let all = [self.k_p_pos, self.k_d_pos, self.k_p_pitch, self.k_d_pitch];
        if all.iter().all(|g| g.is_finite() && *g > 0.0) {
            Ok(())
        } else {
            Err(Error::config("controller gains must be positive"))
        }
    }
}

/// Commanded acceleration `p̈_ref − k_D(ṗ − ṗ_ref) − k_P(p − p_ref)`.
pub fn commanded_accel(
    state: &VehicleState,
    sample: &ReferenceSample,
    gains: &ControllerGains,
) -> Vector2<f64> {
    sample.acceleration
        - (state.velocity - sample.velocity) * gains.k_d_pos
        - (state.position - sample.position) * gains.k_p_pos
}

/// Thrust pair realising the commanded acceleration at the measured pitch.
///
/// `F_cmd = m R(θ)(a_cmd − g e₂)`, then `T_p = F_cmd,x + D1` and
/// `T_r = −(F_cmd,y + L − D2)` with aerodynamics from the measured state and
/// `delta_e`. The result is not saturated.
pub fn position_controller(
    state: &VehicleState,
    sample: &ReferenceSample,
    delta_e: f64,
    gains: &ControllerGains,
    params: &VehicleParams,
) -> Thrusts {
    let accel = commanded_accel(state, sample, gains) - Vector2::new(0.0, params.gravity);
    let force = rotation(state.theta) * accel * params.mass;
    let aero = state_aero_forces(state, delta_e, params);
    Thrusts {
        rotor: -(force.y + aero.lift - aero.drag_vertical),
        pusher: force.x + aero.drag_horizontal,
    }
}

/// Pitch reference and its first two derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PitchReference {
    pub theta: f64,
    pub rate: f64,
    pub accel: f64,
}

/// `M = J(θ̈_ref − k_P,θ(θ̇ − θ̇_ref) − k_D,θ(θ − θ_ref))`.
pub fn pitch_controller(
    state: &VehicleState,
    reference: &PitchReference,
    gains: &ControllerGains,
    params: &VehicleParams,
) -> f64 {
    params.inertia
        * (reference.accel
            - gains.k_p_pitch * (state.theta_dot - reference.rate)
            - gains.k_d_pitch * (state.theta - reference.theta))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericDerivatives {
    pub rate: f64,
    pub accel: f64,
    /// A one-sided stencil was used because `t ± h` left the horizon.
    pub one_sided: bool,
}

/// Finite-difference rate and acceleration of `f` at `t` with spacing `h`.
///
/// Central three-point stencils inside `[t0, tf]`; forward or backward
/// stencils of the same width near the ends.
pub fn numeric_ref_derivatives(
    f: impl Fn(f64) -> f64,
    t: f64,
    h: f64,
    horizon: (f64, f64),
) -> NumericDerivatives {
    let (t0, tf) = horizon;
    let tol = 1e-9 * h;
    if t - h >= t0 - tol && t + h <= tf + tol {
        let (fm, f0, fp) = (f(t - h), f(t), f(t + h));
        NumericDerivatives {
            rate: (fp - fm) / (2.0 * h),
            accel: (fp - 2.0 * f0 + fm) / (h * h),
            one_sided: false,
        }
    } else {
        // Step inward from whichever end is nearer.
        let s = if t - h < t0 - tol { h } else { -h };
        let (f0, f1, f2) = (f(t), f(t + s), f(t + 2.0 * s));
        NumericDerivatives {
            rate: (f1 - f0) / s,
            accel: (f2 - 2.0 * f1 + f0) / (h * h),
            one_sided: true,
        }
    }
}

/// First-order dirty-derivative filter on the reference pitch rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PitchRefState {
    pub theta_ref: f64,
    pub theta_ref_dot: f64,
    /// Low-passed copy of `θ̇_ref`.
    pub filter_state: f64,
    pub tau: f64,
}

pub const DEFAULT_FILTER_TAU: f64 = 0.01;

impl PitchRefState {
    pub fn new(theta_ref: f64, theta_ref_dot: f64, tau: f64) -> Self {
        Self {
            theta_ref,
            theta_ref_dot,
            filter_state: theta_ref_dot,
            tau,
        }
    }

    /// Current acceleration estimate `(θ̇_ref − filter)/τ`.
    pub fn estimate(&self) -> f64 {
        filter_rate(self.filter_state, self.theta_ref_dot, self.tau)
    }
}

/// Filter state derivative, which is also the acceleration estimate.
pub fn filter_rate(filter_state: f64, input: f64, tau: f64) -> f64 {
    (input - filter_state) / tau
}

/// Advances the filter one RK4 step with the input held at `rate_in`.
/// Returns the estimate at the start of the step and the updated state.
pub fn filtered_ref_accel(prs: PitchRefState, rate_in: f64, dt: f64) -> (f64, PitchRefState) {
    let f = |y: f64| filter_rate(y, rate_in, prs.tau);
    let y = prs.filter_state;
    let k1 = f(y);
    let k2 = f(y + 0.5 * dt * k1);
    let k3 = f(y + 0.5 * dt * k2);
    let k4 = f(y + dt * k3);
    let next = PitchRefState {
        theta_ref: prs.theta_ref + dt * rate_in,
        theta_ref_dot: rate_in,
        filter_state: y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4),
        tau: prs.tau,
    };
    (k1, next)
}
