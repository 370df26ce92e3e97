//! Bézier position references and the transition scenarios built from them.

use nalgebra::Vector2;

use crate::error::{Error, Result};
use crate::vehicle::VehicleState;

const STACK_POINTS: usize = 16;

fn de_casteljau(work: &mut [Vector2<f64>], s: f64) -> Vector2<f64> {
    let n = work.len();
    for level in 1..n {
        for i in 0..n - level {
            work[i] = work[i] * (1.0 - s) + work[i + 1] * s;
        }
    }
    work[0]
}

/// Bézier curve in time: the curve parameter is `s = (t - t0) / (tf - t0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BezierCurve {
    control_points: Vec<Vector2<f64>>,
    t0: f64,
    tf: f64,
}

/// Result of evaluating a curve; `clamped` is set when `t` fell outside
/// `[t0, tf]` and was moved to the nearest endpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub value: Vector2<f64>,
    pub clamped: bool,
}

impl BezierCurve {
    pub fn new(control_points: Vec<Vector2<f64>>, t0: f64, tf: f64) -> Result<Self> {
        if control_points.is_empty() {
            return Err(Error::config(
                "a Bézier curve needs at least one control point",
            ));
        }
        if !(tf > t0) || !t0.is_finite() || !tf.is_finite() {
            return Err(Error::config(format!("invalid curve horizon [{t0}, {tf}]")));
        }
        Ok(Self {
            control_points,
            t0,
            tf,
        })
    }

    pub fn control_points(&self) -> &[Vector2<f64>] {
        &self.control_points
    }

    pub fn degree(&self) -> usize {
        self.control_points.len() - 1
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn tf(&self) -> f64 {
        self.tf
    }

    pub fn duration(&self) -> f64 {
        self.tf - self.t0
    }

    /// de Casteljau evaluation.
    pub fn eval(&self, t: f64) -> CurvePoint {
        let clamped = !(self.t0..=self.tf).contains(&t);
        let s = ((t - self.t0) / self.duration()).clamp(0.0, 1.0);
        let n = self.control_points.len();
        let value = if n <= STACK_POINTS {
            let mut work = [Vector2::zeros(); STACK_POINTS];
            work[..n].copy_from_slice(&self.control_points);
            de_casteljau(&mut work[..n], s)
        } else {
            de_casteljau(&mut self.control_points.clone(), s)
        };
        CurvePoint { value, clamped }
    }

    /// Hodograph in physical time. A constant curve maps to the zero curve.
    pub fn derivative(&self) -> BezierCurve {
        let n = self.degree();
        let points = if n == 0 {
            vec![Vector2::zeros()]
        } else {
            let scale = n as f64 / self.duration();
            self.control_points
                .windows(2)
                .map(|w| (w[1] - w[0]) * scale)
                .collect()
        };
        BezierCurve {
            control_points: points,
            t0: self.t0,
            tf: self.tf,
        }
    }
}

/// Position reference with its first two time derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceSample {
    pub t: f64,
    pub position: Vector2<f64>,
    pub velocity: Vector2<f64>,
    pub acceleration: Vector2<f64>,
}

/// A position curve together with its hodographs up to jerk.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTrajectory {
    position: BezierCurve,
    velocity: BezierCurve,
    acceleration: BezierCurve,
    jerk: BezierCurve,
}

impl ReferenceTrajectory {
    pub fn new(position: BezierCurve) -> Self {
        let velocity = position.derivative();
        let acceleration = velocity.derivative();
        let jerk = acceleration.derivative();
        Self {
            position,
            velocity,
            acceleration,
            jerk,
        }
    }

    pub fn curve(&self) -> &BezierCurve {
        &self.position
    }

    pub fn t0(&self) -> f64 {
        self.position.t0
    }

    pub fn tf(&self) -> f64 {
        self.position.tf
    }

    /// Outside the horizon the position is held at the endpoint and all
    /// derivatives are zero.
    pub fn sample(&self, t: f64) -> ReferenceSample {
        let p = self.position.eval(t);
        if p.clamped {
            return ReferenceSample {
                t,
                position: p.value,
                velocity: Vector2::zeros(),
                acceleration: Vector2::zeros(),
            };
        }
        ReferenceSample {
            t,
            position: p.value,
            velocity: self.velocity.eval(t).value,
            acceleration: self.acceleration.eval(t).value,
        }
    }

    /// Third derivative of position; zero outside the horizon.
    pub fn jerk(&self, t: f64) -> Vector2<f64> {
        let j = self.jerk.eval(t);
        if j.clamped {
            Vector2::zeros()
        } else {
            j.value
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioKind {
    HoverToCruise,
    CruiseToHover,
    StaticHover,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 3] = [
        ScenarioKind::HoverToCruise,
        ScenarioKind::CruiseToHover,
        ScenarioKind::StaticHover,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::HoverToCruise => "hover-to-cruise",
            ScenarioKind::CruiseToHover => "cruise-to-hover",
            ScenarioKind::StaticHover => "static-hover",
        }
    }
}

impl std::str::FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::config(format!("unknown scenario `{s}`")))
    }
}

impl std::fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    /// m/s
    pub cruise_speed: f64,
    /// Altitude change in the down-positive frame for hover-to-cruise
    /// (negative is a climb). Cruise-to-hover applies the opposite change.
    pub delta_h: f64,
    pub t0: f64,
    pub tf: f64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            kind: ScenarioKind::HoverToCruise,
            cruise_speed: 30.0,
            delta_h: -50.0,
            t0: 0.0,
            tf: 125.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub reference: ReferenceTrajectory,
    pub initial_state: VehicleState,
}

/// Quintic references. Hover-to-cruise starts at rest with zero acceleration
/// and ends at `cruise_speed` with zero acceleration; cruise-to-hover is the
/// time-mirrored profile. The altitude channel is a rest-to-rest quintic.
pub fn build_scenario(spec: &ScenarioSpec) -> Result<Scenario> {
    let horizon = spec.tf - spec.t0;
    if !(horizon > 0.0) {
        return Err(Error::config(format!(
            "scenario horizon must be positive, got [{}, {}]",
            spec.t0, spec.tf
        )));
    }
    if !spec.cruise_speed.is_finite() || !spec.delta_h.is_finite() {
        return Err(Error::config("cruise_speed and delta_h must be finite"));
    }
    let v = spec.cruise_speed;
    // Spacing of control points for a degree-5 curve: velocity control
    // values are 5·ΔP / T.
    let step = horizon / 5.0;
    let (xs, dz, initial_state) = match spec.kind {
        ScenarioKind::HoverToCruise => {
            // Velocity control values [0, 0, v/2, v, v].
            let xs = [0.0, 0.0, 0.0, 0.5 * v, 1.5 * v, 2.5 * v].map(|c| c * step);
            (xs, spec.delta_h, VehicleState::at_rest())
        }
        ScenarioKind::CruiseToHover => {
            // Velocity control values [v, v, v/2, 0, 0].
            let xs = [0.0, v, 2.0 * v, 2.5 * v, 2.5 * v, 2.5 * v].map(|c| c * step);
            let state = VehicleState {
                velocity: Vector2::new(v, 0.0),
                ..VehicleState::at_rest()
            };
            (xs, -spec.delta_h, state)
        }
        ScenarioKind::StaticHover => ([0.0; 6], 0.0, VehicleState::at_rest()),
    };
    let zs = [0.0, 0.0, 0.0, dz, dz, dz];
    let points = xs
        .iter()
        .zip(zs.iter())
        .map(|(&x, &z)| Vector2::new(x, z))
        .collect();
    let curve = BezierCurve::new(points, spec.t0, spec.tf)?;
    Ok(Scenario {
        kind: spec.kind,
        reference: ReferenceTrajectory::new(curve),
        initial_state,
    })
}
