//! Flat `key = value` run configuration.
//!
//! Lines are `key = value`; `#` starts a comment. Angles are written in
//! degrees and stored in radians. Unknown keys are rejected so typos surface
//! as configuration errors.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::control::{ControllerGains, DEFAULT_FILTER_TAU};
use crate::error::{Error, Result};
use crate::olopt::{NewtonOptions, TableMode};
use crate::trajectory::{ScenarioKind, ScenarioSpec};
use crate::tvopt::{TvOptConfig, DEFAULT_BARRIER_OFFSET, DEFAULT_BARRIER_WEIGHT};
use crate::vehicle::VehicleParams;

/// How CL-TVOpt picks `U(t0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialDecision {
    /// Pointwise barrier-Newton solve at `t0`.
    Pointwise,
    /// Fixed `(δ_e, θ_ref)` in radians; must be strictly feasible.
    Fixed { delta_e: f64, theta_ref: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub params: VehicleParams,
    pub scenario: ScenarioSpec,
    pub gains: ControllerGains,
    /// Reference-acceleration filter time constant (s).
    pub tau: f64,
    pub barrier_c: f64,
    pub barrier_eps: f64,
    /// Scalar `P = gain_p·I` of the update law.
    pub gain_p: f64,
    pub dt_sim: f64,
    pub olopt_dt: f64,
    pub olopt_mode: TableMode,
    pub newton: NewtonOptions,
    pub analytic_derivatives: bool,
    pub fd_step_u: f64,
    pub fd_step_hess: f64,
    pub fd_step_t: f64,
    pub hessian_reg: f64,
    pub condition_limit: f64,
    /// Feed measured position errors into the optimizer's desired force.
    pub optimizer_feedback: bool,
    /// Start cruise-to-hover at the optimizer's trim pitch instead of level.
    pub trim_initial_pitch: bool,
    /// Start closed-loop runs at the generator's initial `θ_ref`.
    pub sync_initial_pitch: bool,
    pub cl_init: InitialDecision,
    /// Reserved; the simulation is deterministic.
    pub seed: u64,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            params: VehicleParams::default(),
            scenario: ScenarioSpec::default(),
            gains: ControllerGains::default(),
            tau: DEFAULT_FILTER_TAU,
            barrier_c: DEFAULT_BARRIER_WEIGHT,
            barrier_eps: DEFAULT_BARRIER_OFFSET,
            gain_p: 1.0,
            dt_sim: 0.01,
            olopt_dt: 0.1,
            olopt_mode: TableMode::SequentialWarm,
            newton: NewtonOptions::default(),
            analytic_derivatives: true,
            fd_step_u: 1e-6,
            fd_step_hess: 1e-4,
            fd_step_t: 1e-5,
            hessian_reg: 1e-6,
            condition_limit: 1e8,
            optimizer_feedback: false,
            trim_initial_pitch: false,
            sync_initial_pitch: true,
            cl_init: InitialDecision::Pointwise,
            seed: 0,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(format!("{key}: cannot parse '{value}'")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::config(format!(
            "{key}: expected a boolean, got '{value}'"
        ))),
    }
}

fn deg(key: &str, value: &str) -> Result<f64> {
    parse_num::<f64>(key, value).map(f64::to_radians)
}

/// Degrees for display. Values within round-off of a short decimal are
/// snapped to it so that `30` does not print as `29.999999999999996`.
fn degrees(rad: f64) -> String {
    let d = rad.to_degrees();
    let snapped = (d * 1e9).round() / 1e9;
    if (d - snapped).abs() <= 1e-12 * d.abs().max(1.0) {
        snapped.to_string()
    } else {
        d.to_string()
    }
}

impl Settings {
    /// Applies one `key = value` assignment. A dotted section prefix such
    /// as `vehicle.mass` is accepted and ignored.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let (key, value) = (key.trim(), value.trim());
        let key = key.rsplit_once('.').map_or(key, |(_, k)| k);
        let num = |v: &str| parse_num::<f64>(key, v);
        let p = &mut self.params;
        match key {
            "mass" => p.mass = num(value)?,
            "inertia" => p.inertia = num(value)?,
            "gravity" => p.gravity = num(value)?,
            "cl0" => p.cl0 = num(value)?,
            "cl_theta" => p.cl_theta = num(value)?,
            "cl_delta_e" => p.cl_delta_e = num(value)?,
            "cd1_0" => p.cd1_0 = num(value)?,
            "cd1_k" => p.cd1_k = num(value)?,
            "cd2_0" => p.cd2_0 = num(value)?,
            "delta_e_min" => p.delta_e_min = deg(key, value)?,
            "delta_e_max" => p.delta_e_max = deg(key, value)?,
            "theta_min" => p.theta_min = deg(key, value)?,
            "theta_max" => p.theta_max = deg(key, value)?,
            "scenario" => self.scenario.kind = value.parse()?,
            "cruise_speed" => self.scenario.cruise_speed = num(value)?,
            "delta_h" => self.scenario.delta_h = num(value)?,
            "t0" => self.scenario.t0 = num(value)?,
            "tf" => self.scenario.tf = num(value)?,
            "k_p_pos" => self.gains.k_p_pos = num(value)?,
            "k_d_pos" => self.gains.k_d_pos = num(value)?,
            "k_p_pitch" => self.gains.k_p_pitch = num(value)?,
            "k_d_pitch" => self.gains.k_d_pitch = num(value)?,
            "tau" => self.tau = num(value)?,
            "barrier_c" => self.barrier_c = num(value)?,
            "barrier_eps" => self.barrier_eps = num(value)?,
            "gain_p" => self.gain_p = num(value)?,
            "dt_sim" => self.dt_sim = num(value)?,
            "olopt_dt" => self.olopt_dt = num(value)?,
            "olopt_mode" => {
                self.olopt_mode = match value {
                    "sequential" => TableMode::SequentialWarm,
                    "parallel" => TableMode::ParallelCold,
                    _ => return Err(Error::config(format!("olopt_mode: unknown '{value}'"))),
                }
            }
            "newton_tol" => self.newton.grad_tol = num(value)?,
            "newton_max_iter" => self.newton.max_iterations = parse_num(key, value)?,
            "cold_grid" => self.newton.cold_grid = parse_num(key, value)?,
            "derivatives" => {
                self.analytic_derivatives = match value {
                    "analytic" => true,
                    "fd" | "finite-difference" => false,
                    _ => return Err(Error::config(format!("derivatives: unknown '{value}'"))),
                }
            }
            "fd_step_u" => self.fd_step_u = num(value)?,
            "fd_step_hess" => self.fd_step_hess = num(value)?,
            "fd_step_t" => self.fd_step_t = num(value)?,
            "hessian_reg" => self.hessian_reg = num(value)?,
            "condition_limit" => self.condition_limit = num(value)?,
            "optimizer_feedback" => self.optimizer_feedback = parse_bool(key, value)?,
            "trim_initial_pitch" => self.trim_initial_pitch = parse_bool(key, value)?,
            "sync_initial_pitch" => self.sync_initial_pitch = parse_bool(key, value)?,
            "cl_init" => {
                self.cl_init = match value {
                    "pointwise" => InitialDecision::Pointwise,
                    _ => {
                        let parts: Vec<&str> = value.split(',').collect();
                        if parts.len() != 2 {
                            return Err(Error::config(
                                "cl_init: expected 'pointwise' or 'delta_e,theta_ref' in degrees",
                            ));
                        }
                        InitialDecision::Fixed {
                            delta_e: deg(key, parts[0].trim())?,
                            theta_ref: deg(key, parts[1].trim())?,
                        }
                    }
                }
            }
            "seed" => self.seed = parse_num(key, value)?,
            _ => return Err(Error::config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Applies a `key=value` override string.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::config(format!("expected key=value, got '{pair}'")))?;
        self.set(k, v)
    }

    /// Applies every assignment in `text` on top of `self`.
    pub fn merge_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}: expected key = value", n + 1)))?;
            self.set(k, v)
                .map_err(|e| Error::config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut s = Self::default();
        s.merge_text(text)?;
        s.validate()?;
        Ok(s)
    }

    /// Reads `path` (if given) over the defaults, then applies `overrides`.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut s = Self::default();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
            s.merge_text(&text)?;
        }
        for o in overrides {
            s.set_pair(o)?;
        }
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.gains.validate()?;
        let positive = [
            ("tau", self.tau),
            ("barrier_c", self.barrier_c),
            ("barrier_eps", self.barrier_eps),
            ("gain_p", self.gain_p),
            ("dt_sim", self.dt_sim),
            ("olopt_dt", self.olopt_dt),
            ("newton_tol", self.newton.grad_tol),
            ("fd_step_u", self.fd_step_u),
            ("fd_step_hess", self.fd_step_hess),
            ("fd_step_t", self.fd_step_t),
            ("hessian_reg", self.hessian_reg),
            ("condition_limit", self.condition_limit),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.scenario.tf > self.scenario.t0) {
            return Err(Error::config("tf must exceed t0"));
        }
        if self.newton.max_iterations == 0 || self.newton.cold_grid < 2 {
            return Err(Error::config(
                "newton_max_iter ≥ 1 and cold_grid ≥ 2 required",
            ));
        }
        self.tvopt_config().validate()
    }

    pub fn tvopt_config(&self) -> TvOptConfig {
        let mut cfg = TvOptConfig::new(2, self.gain_p);
        cfg.fd_step_u = self.fd_step_u;
        cfg.fd_step_hess = self.fd_step_hess;
        cfg.fd_step_t = self.fd_step_t;
        cfg.hessian_reg = self.hessian_reg;
        cfg.condition_limit = self.condition_limit;
        cfg.integrator_dt = self.dt_sim;
        cfg.use_analytic = self.analytic_derivatives;
        cfg
    }

    pub fn with_scenario(mut self, kind: ScenarioKind) -> Self {
        self.scenario.kind = kind;
        self
    }

    /// Effective configuration in the file syntax, angles in degrees.
    pub fn to_text(&self) -> String {
        let p = &self.params;
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("mass", p.mass.to_string());
        kv("inertia", p.inertia.to_string());
        kv("gravity", p.gravity.to_string());
        kv("cl0", p.cl0.to_string());
        kv("cl_theta", p.cl_theta.to_string());
        kv("cl_delta_e", p.cl_delta_e.to_string());
        kv("cd1_0", p.cd1_0.to_string());
        kv("cd1_k", p.cd1_k.to_string());
        kv("cd2_0", p.cd2_0.to_string());
        kv("delta_e_min", degrees(p.delta_e_min));
        kv("delta_e_max", degrees(p.delta_e_max));
        kv("theta_min", degrees(p.theta_min));
        kv("theta_max", degrees(p.theta_max));
        kv("scenario", self.scenario.kind.name().to_string());
        kv("cruise_speed", self.scenario.cruise_speed.to_string());
        kv("delta_h", self.scenario.delta_h.to_string());
        kv("t0", self.scenario.t0.to_string());
        kv("tf", self.scenario.tf.to_string());
        kv("k_p_pos", self.gains.k_p_pos.to_string());
        kv("k_d_pos", self.gains.k_d_pos.to_string());
        kv("k_p_pitch", self.gains.k_p_pitch.to_string());
        kv("k_d_pitch", self.gains.k_d_pitch.to_string());
        kv("tau", self.tau.to_string());
        kv("barrier_c", self.barrier_c.to_string());
        kv("barrier_eps", self.barrier_eps.to_string());
        kv("gain_p", self.gain_p.to_string());
        kv("dt_sim", self.dt_sim.to_string());
        kv("olopt_dt", self.olopt_dt.to_string());
        kv(
            "olopt_mode",
            match self.olopt_mode {
                TableMode::SequentialWarm => "sequential",
                TableMode::ParallelCold => "parallel",
            }
            .to_string(),
        );
        kv("newton_tol", self.newton.grad_tol.to_string());
        kv("newton_max_iter", self.newton.max_iterations.to_string());
        kv("cold_grid", self.newton.cold_grid.to_string());
        kv(
            "derivatives",
            if self.analytic_derivatives {
                "analytic"
            } else {
                "fd"
            }
            .to_string(),
        );
        kv("fd_step_u", self.fd_step_u.to_string());
        kv("fd_step_hess", self.fd_step_hess.to_string());
        kv("fd_step_t", self.fd_step_t.to_string());
        kv("hessian_reg", self.hessian_reg.to_string());
        kv("condition_limit", self.condition_limit.to_string());
        kv("optimizer_feedback", self.optimizer_feedback.to_string());
        kv("trim_initial_pitch", self.trim_initial_pitch.to_string());
        kv("sync_initial_pitch", self.sync_initial_pitch.to_string());
        kv(
            "cl_init",
            match self.cl_init {
                InitialDecision::Pointwise => "pointwise".to_string(),
                InitialDecision::Fixed { delta_e, theta_ref } => {
                    format!("{},{}", degrees(delta_e), degrees(theta_ref))
                }
            },
        );
        kv("seed", self.seed.to_string());
        out
    }
}
