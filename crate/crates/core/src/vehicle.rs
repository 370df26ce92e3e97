//! Planar Lift+Cruise rigid-body model.
//!
//! Inertial frame is x forward, z down. The pitch angle rotates body
//! quantities into the inertial frame through [`rotation`], and the body
//! velocity used by the aerodynamic model is `R(θ)ᵀ ṗ`.
//!
//! Drag terms are computed from squared speeds and are never sign-flipped
//! with the direction of motion.

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};

/// Physical constants, aerodynamic coefficients and actuator/pitch bounds.
///
/// All angles are radians. Aerodynamic coefficients are dimensional
/// (N·s²/m², the `½ρS` factor folded in), so `L = u²·C_L` is in newtons.
///
/// The [`Default`] values are placeholders, not measured data: a 1 kg
/// vehicle whose wing carries its weight in level flight at 30 m/s with
/// `θ = δ_e = 0`, and a lift-to-drag ratio near 9.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleParams {
    /// kg
    pub mass: f64,
    /// kg·m²
    pub inertia: f64,
    /// m/s²
    pub gravity: f64,
    pub cl0: f64,
    /// per rad
    pub cl_theta: f64,
    /// per rad
    pub cl_delta_e: f64,
    pub cd1_0: f64,
    pub cd1_k: f64,
    pub cd2_0: f64,
    pub delta_e_min: f64,
    pub delta_e_max: f64,
    pub theta_min: f64,
    pub theta_max: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            mass: 1.0,
            inertia: 1.0,
            gravity: 9.81,
            cl0: 0.011,
            cl_theta: 0.11,
            cl_delta_e: 0.018,
            cd1_0: 0.0011,
            cd1_k: 1.4,
            cd2_0: 0.036,
            delta_e_min: (-30.0f64).to_radians(),
            delta_e_max: 30.0f64.to_radians(),
            theta_min: (-15.0f64).to_radians(),
            theta_max: 15.0f64.to_radians(),
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mass", self.mass),
            ("inertia", self.inertia),
            ("gravity", self.gravity),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{name} must be positive, got {v}")));
            }
        }
        let coeffs = [
            self.cl0,
            self.cl_theta,
            self.cl_delta_e,
            self.cd1_0,
            self.cd1_k,
            self.cd2_0,
        ];
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::config("aerodynamic coefficients must be finite"));
        }
        if !(self.delta_e_min < self.delta_e_max) {
            return Err(Error::config("delta_e_min must be below delta_e_max"));
        }
        if !(self.theta_min < self.theta_max) {
            return Err(Error::config("theta_min must be below theta_max"));
        }
        Ok(())
    }

    /// Weight `m·g`, the natural thrust scale.
    pub fn weight(&self) -> f64 {
        self.mass * self.gravity
    }
}

/// State `[x, z, θ, ẋ, ż, θ̇]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VehicleState {
    pub position: Vector2<f64>,
    pub theta: f64,
    pub velocity: Vector2<f64>,
    pub theta_dot: f64,
}

impl VehicleState {
    pub fn at_rest() -> Self {
        Self::default()
    }

    pub fn to_array(&self) -> [f64; 6] {
        [
            self.position.x,
            self.position.y,
            self.theta,
            self.velocity.x,
            self.velocity.y,
            self.theta_dot,
        ]
    }

    pub fn from_slice(x: &[f64]) -> Self {
        Self {
            position: Vector2::new(x[0], x[1]),
            theta: x[2],
            velocity: Vector2::new(x[3], x[4]),
            theta_dot: x[5],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Input `[T_r, T_p, M, δ_e]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlInput {
    /// Total vertical rotor thrust (N).
    pub rotor_thrust: f64,
    /// Total pusher thrust (N).
    pub pusher_thrust: f64,
    /// Pitch torque (N·m).
    pub torque: f64,
    /// Elevator deflection (rad).
    pub delta_e: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AeroCoefficients {
    pub cl: f64,
    pub cd1: f64,
    pub cd2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AeroForces {
    pub lift: f64,
    pub drag_horizontal: f64,
    pub drag_vertical: f64,
}

pub fn rotation(theta: f64) -> Matrix2<f64> {
    let (s, c) = theta.sin_cos();
    Matrix2::new(c, -s, s, c)
}

/// Body-frame velocity `(u, v) = R(θ)ᵀ ṗ`.
pub fn body_velocity(theta: f64, p_dot: &Vector2<f64>) -> Vector2<f64> {
    rotation(theta).transpose() * p_dot
}

pub fn aero_coefficients(theta: f64, delta_e: f64, params: &VehicleParams) -> AeroCoefficients {
    let cl = params.cl0 + params.cl_theta * theta + params.cl_delta_e * delta_e;
    AeroCoefficients {
        cl,
        cd1: params.cd1_0 + params.cd1_k * cl * cl,
        cd2: params.cd2_0,
    }
}

pub fn aero_forces(u: f64, v: f64, coeffs: &AeroCoefficients) -> AeroForces {
    AeroForces {
        lift: u * u * coeffs.cl,
        drag_horizontal: u * u * coeffs.cd1,
        drag_vertical: v * v * coeffs.cd2,
    }
}

/// Aerodynamic forces acting on `state` with elevator at `delta_e`.
pub fn state_aero_forces(state: &VehicleState, delta_e: f64, params: &VehicleParams) -> AeroForces {
    let uv = body_velocity(state.theta, &state.velocity);
    aero_forces(uv.x, uv.y, &aero_coefficients(state.theta, delta_e, params))
}

/// State derivative ordered `(ẋ, ż, θ̇, ẍ, z̈, θ̈)`. The input is used as given;
/// saturate it first.
pub fn dynamics(state: &VehicleState, input: &ControlInput, params: &VehicleParams) -> [f64; 6] {
    let aero = state_aero_forces(state, input.delta_e, params);
    let force = Vector2::new(
        input.pusher_thrust - aero.drag_horizontal,
        -(input.rotor_thrust + aero.lift - aero.drag_vertical),
    );
    let accel =
        rotation(state.theta).transpose() * force / params.mass + Vector2::new(0.0, params.gravity);
    [
        state.velocity.x,
        state.velocity.y,
        state.theta_dot,
        accel.x,
        accel.y,
        input.torque / params.inertia,
    ]
}

pub fn saturate(input: &ControlInput, params: &VehicleParams) -> ControlInput {
    ControlInput {
        rotor_thrust: input.rotor_thrust.max(0.0),
        pusher_thrust: input.pusher_thrust.max(0.0),
        torque: input.torque,
        delta_e: input.delta_e.clamp(params.delta_e_min, params.delta_e_max),
    }
}
