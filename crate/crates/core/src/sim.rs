//! Closed-loop simulation of the vehicle tracking either reference generator.
//!
//! Both methods share the plant, the position and pitch controllers and input
//! saturation. They differ in where `(δ_e, θ_ref)` and the pitch-reference
//! derivatives come from:
//!
//! * OL-Opt interpolates an offline table and differentiates the interpolant
//!   numerically;
//! * CL-TVOpt integrates the update law in the same RK4 state as the plant
//!   (`[x, z, θ, ẋ, ż, θ̇, δ_e, θ_ref, filter]`) and estimates `θ̈_ref` with a
//!   first-order filter.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::time::Instant;

use nalgebra::Vector2;

use crate::config::{InitialDecision, Settings};
use crate::control::{
    filter_rate, numeric_ref_derivatives, pitch_controller, position_controller, PitchReference,
};
use crate::error::{Error, Result};
use crate::ode;
use crate::olopt::{build_table, solve_pointwise, Schedule, SolutionTable};
use crate::problem::{DecisionVars, PositionFeedback, ProblemContext};
use crate::trajectory::{build_scenario, ReferenceSample, Scenario, ScenarioKind};
use crate::tvopt::BarrierProblem;
use crate::vehicle::{dynamics, saturate, ControlInput, VehicleState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    OlOpt,
    ClTvOpt,
}

impl Method {
    pub const ALL: [Method; 2] = [Method::OlOpt, Method::ClTvOpt];

    pub fn name(self) -> &'static str {
        match self {
            Method::OlOpt => "olopt",
            Method::ClTvOpt => "cltvopt",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::config(format!("unknown method `{s}`")))
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One plant step: state and inputs at the start of the step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRecord {
    pub t: f64,
    pub state: VehicleState,
    /// Controller output before saturation.
    pub command: ControlInput,
    /// Input applied to the plant.
    pub applied: ControlInput,
    pub theta_ref: f64,
    pub theta_ref_dot: f64,
    pub position_ref: Vector2<f64>,
    /// `‖∇_UΦ‖`, CL-TVOpt only.
    pub grad_norm: Option<f64>,
}

impl LogRecord {
    pub fn rotor_saturated(&self) -> bool {
        self.command.rotor_thrust != self.applied.rotor_thrust
    }

    pub fn pusher_saturated(&self) -> bool {
        self.command.pusher_thrust != self.applied.pusher_thrust
    }

    pub fn elevator_saturated(&self) -> bool {
        self.command.delta_e != self.applied.delta_e
    }

    pub fn decision(&self) -> DecisionVars {
        DecisionVars::new(self.command.delta_e, self.theta_ref)
    }
}

pub const LOG_CSV_HEADER: [&str; 19] = [
    "t",
    "x",
    "z",
    "theta",
    "xdot",
    "zdot",
    "thetadot",
    "Tr_cmd",
    "Tp_cmd",
    "M_cmd",
    "delta_e_cmd",
    "Tr_sat",
    "Tp_sat",
    "delta_e_sat",
    "theta_ref",
    "theta_ref_dot",
    "x_ref",
    "z_ref",
    "grad_norm",
];

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryLog {
    pub records: Vec<LogRecord>,
}

impl TrajectoryLog {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Writes the log with angles in radians.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(LOG_CSV_HEADER)?;
        for r in &self.records {
            let s = &r.state;
            let fields = [
                r.t,
                s.position.x,
                s.position.y,
                s.theta,
                s.velocity.x,
                s.velocity.y,
                s.theta_dot,
                r.command.rotor_thrust,
                r.command.pusher_thrust,
                r.command.torque,
                r.command.delta_e,
                r.applied.rotor_thrust,
                r.applied.pusher_thrust,
                r.applied.delta_e,
                r.theta_ref,
                r.theta_ref_dot,
                r.position_ref.x,
                r.position_ref.y,
            ];
            let mut row: Vec<String> = fields.iter().map(f64::to_string).collect();
            row.push(r.grad_norm.map(|g| g.to_string()).unwrap_or_default());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
        if header != LOG_CSV_HEADER {
            return Err(Error::Csv(format!("unexpected log header {header:?}")));
        }
        let mut records = Vec::new();
        for (line, record) in r.records().enumerate() {
            let record = record?;
            let mut v = [0.0; 18];
            for (i, slot) in v.iter_mut().enumerate() {
                *slot = record[i].parse().map_err(|e| {
                    Error::Csv(format!(
                        "row {} column {}: {e}",
                        line + 1,
                        LOG_CSV_HEADER[i]
                    ))
                })?;
            }
            let grad_norm =
                match &record[18] {
                    "" => None,
                    g => Some(g.parse().map_err(|e| {
                        Error::Csv(format!("row {} column grad_norm: {e}", line + 1))
                    })?),
                };
            records.push(LogRecord {
                t: v[0],
                state: VehicleState::from_slice(&v[1..7]),
                command: ControlInput {
                    rotor_thrust: v[7],
                    pusher_thrust: v[8],
                    torque: v[9],
                    delta_e: v[10],
                },
                applied: ControlInput {
                    rotor_thrust: v[11],
                    pusher_thrust: v[12],
                    torque: v[9],
                    delta_e: v[13],
                },
                theta_ref: v[14],
                theta_ref_dot: v[15],
                position_ref: Vector2::new(v[16], v[17]),
                grad_norm,
            });
        }
        Ok(Self { records })
    }
}

/// Wall time spent producing reference commands.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Timing {
    pub total_s: f64,
    /// Timestamps solved (OL-Opt) or plant steps integrated (CL-TVOpt).
    pub points: usize,
}

impl Timing {
    pub fn per_point(&self) -> f64 {
        self.total_s / self.points.max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub method: Method,
    pub scenario: ScenarioKind,
    pub log: TrajectoryLog,
    pub timing: Timing,
    /// OL-Opt only.
    pub table: Option<SolutionTable>,
    /// CL-TVOpt steps whose Hessian needed regularization.
    pub regularized_steps: usize,
}

/// Failed run with everything logged up to the failure.
#[derive(Debug)]
pub struct SimFailure {
    pub error: Error,
    pub log: TrajectoryLog,
}

impl std::fmt::Display for SimFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} (after {} logged steps)", self.error, self.log.len())
    }
}

impl std::error::Error for SimFailure {}

impl From<Error> for SimFailure {
    fn from(error: Error) -> Self {
        Self {
            error,
            log: TrajectoryLog::default(),
        }
    }
}

/// Scenario, feedforward problem and barrier constants derived from settings.
pub struct Setup {
    pub scenario: Scenario,
    pub context: ProblemContext,
    pub barrier_c: Vec<f64>,
    pub barrier_eps: Vec<f64>,
}

impl Setup {
    pub fn new(settings: &Settings) -> Result<Self> {
        settings.validate()?;
        let scenario = build_scenario(&settings.scenario)?;
        let context =
            ProblemContext::feedforward(settings.params.clone(), scenario.reference.clone());
        Ok(Self {
            scenario,
            context,
            barrier_c: vec![settings.barrier_c; 6],
            barrier_eps: vec![settings.barrier_eps; 6],
        })
    }

    pub fn barrier_problem(&self) -> Result<BarrierProblem<ProblemContext>> {
        BarrierProblem::new(
            self.context.clone(),
            self.barrier_c.clone(),
            self.barrier_eps.clone(),
        )
    }

    /// Pointwise optimum of the feedforward problem at `t`, cold-started.
    pub fn pointwise_decision(&self, settings: &Settings, t: f64) -> Result<DecisionVars> {
        let problem = self.barrier_problem()?;
        let sol = solve_pointwise(
            &problem,
            t,
            &self.context.decision_box(),
            None,
            &settings.newton,
            &settings.tvopt_config(),
        )
        .map_err(|e| Error::Timestamp {
            t,
            source: Box::new(e),
        })?;
        Ok(DecisionVars::from_slice(&sol.u))
    }

    /// Scenario initial state, with cruise-to-hover pitched to the trim
    /// optimum when requested.
    pub fn initial_state(&self, settings: &Settings) -> Result<VehicleState> {
        let mut state = self.scenario.initial_state;
        if settings.trim_initial_pitch && self.scenario.kind == ScenarioKind::CruiseToHover {
            state.theta = self
                .pointwise_decision(settings, settings.scenario.t0)?
                .theta_ref;
        }
        Ok(state)
    }
}

/// Controller outputs for a given state and pitch reference.
fn closed_loop_inputs(
    settings: &Settings,
    sample: &ReferenceSample,
    state: &VehicleState,
    delta_e: f64,
    pitch: &PitchReference,
) -> (ControlInput, ControlInput) {
    let p = &settings.params;
    // Thrusts are computed for the elevator the plant will actually see.
    let elevator = delta_e.clamp(p.delta_e_min, p.delta_e_max);
    let thrusts = position_controller(state, sample, elevator, &settings.gains, p);
    let command = ControlInput {
        rotor_thrust: thrusts.rotor,
        pusher_thrust: thrusts.pusher,
        torque: pitch_controller(state, pitch, &settings.gains, p),
        delta_e,
    };
    (command, saturate(&command, p))
}

/// Runs one method on the configured scenario.
pub fn run(settings: &Settings, method: Method) -> std::result::Result<SimOutput, SimFailure> {
    let setup = Setup::new(settings)?;
    match method {
        Method::OlOpt => run_olopt(settings, &setup),
        Method::ClTvOpt => run_cltvopt(settings, &setup),
    }
}

fn plant_steps(settings: &Settings) -> usize {
    ode::step_count(settings.scenario.t0, settings.scenario.tf, settings.dt_sim)
}

fn step_time(settings: &Settings, k: usize, n: usize) -> f64 {
    if k == n {
        settings.scenario.tf
    } else {
        settings.scenario.t0 + k as f64 * settings.dt_sim
    }
}

/// Builds the OL-Opt table, timing the whole build.
pub fn olopt_table(settings: &Settings, setup: &Setup) -> Result<(SolutionTable, Timing)> {
    let s = &settings.scenario;
    let schedule = Schedule::new(s.t0, s.tf, settings.olopt_dt)?;
    let start = Instant::now();
    let table = build_table(
        &setup.context,
        (&setup.barrier_c, &setup.barrier_eps),
        &schedule,
        settings.olopt_mode,
        &settings.newton,
        &settings.tvopt_config(),
    )?;
    let timing = Timing {
        total_s: start.elapsed().as_secs_f64(),
        points: table.rows.len(),
    };
    Ok((table, timing))
}

fn run_olopt(settings: &Settings, setup: &Setup) -> std::result::Result<SimOutput, SimFailure> {
    let (table, timing) = olopt_table(settings, setup)?;
    let horizon = (settings.scenario.t0, settings.scenario.tf);
    let h = settings.olopt_dt;
    let theta_of = |s: f64| table.interpolate(s).u.theta_ref;

    let rhs = |t: f64, y: &[f64]| -> Result<(Vec<f64>, LogRecord)> {
        let state = VehicleState::from_slice(y);
        let u = table.interpolate(t).u;
        let d = numeric_ref_derivatives(theta_of, t, h, horizon);
        let pitch = PitchReference {
            theta: u.theta_ref,
            rate: d.rate,
            accel: d.accel,
        };
        let sample = setup.scenario.reference.sample(t);
        let (command, applied) = closed_loop_inputs(settings, &sample, &state, u.delta_e, &pitch);
        let record = LogRecord {
            t,
            state,
            command,
            applied,
            theta_ref: u.theta_ref,
            theta_ref_dot: d.rate,
            position_ref: sample.position,
            grad_norm: None,
        };
        Ok((
            dynamics(&state, &applied, &settings.params).to_vec(),
            record,
        ))
    };

    let y0 = setup.initial_state(settings)?.to_array().to_vec();
    let (log, _) = integrate_logged(settings, y0, rhs)?;
    Ok(SimOutput {
        method: Method::OlOpt,
        scenario: setup.scenario.kind,
        log,
        timing,
        table: Some(table),
        regularized_steps: 0,
    })
}

/// Steps the combined ODE, logging the first-stage record of every step and
/// the end point. Returns the log and the wall time of the loop.
fn integrate_logged(
    settings: &Settings,
    y0: Vec<f64>,
    mut rhs: impl FnMut(f64, &[f64]) -> Result<(Vec<f64>, LogRecord)>,
) -> std::result::Result<(TrajectoryLog, f64), SimFailure> {
    let n = plant_steps(settings);
    let mut log = TrajectoryLog {
        records: Vec::with_capacity(n + 1),
    };
    let mut y = y0;
    let start = Instant::now();
    for k in 0..=n {
        let t = step_time(settings, k, n);
        let outcome = if k == n {
            rhs(t, &y).map(|(_, rec)| (y.clone(), rec))
        } else {
            let dt = step_time(settings, k + 1, n) - t;
            ode::rk4_step_with(t, &y, dt, &mut rhs)
        };
        match outcome {
            Ok((next, rec)) => {
                if !rec.state.is_finite() {
                    return Err(SimFailure {
                        error: Error::Config(format!("plant state diverged at t = {t}")),
                        log,
                    });
                }
                log.records.push(rec);
                y = next;
            }
            Err(error) => return Err(SimFailure { error, log }),
        }
    }
    Ok((log, start.elapsed().as_secs_f64()))
}

fn run_cltvopt(settings: &Settings, setup: &Setup) -> std::result::Result<SimOutput, SimFailure> {
    let t0 = settings.scenario.t0;
    let cfg = settings.tvopt_config();
    let gains = settings.gains;
    let tau = settings.tau;
    let mut problem = setup.barrier_problem()?;

    let mut initial_state = setup.initial_state(settings)?;
    let u0 = match settings.cl_init {
        InitialDecision::Pointwise => setup.pointwise_decision(settings, t0)?,
        InitialDecision::Fixed { delta_e, theta_ref } => DecisionVars::new(delta_e, theta_ref),
    };
    if settings.sync_initial_pitch {
        initial_state.theta = u0.theta_ref;
    }
    let feedback = |state: &VehicleState| {
        settings.optimizer_feedback.then_some(PositionFeedback {
            state: *state,
            k_p: gains.k_p_pos,
            k_d: gains.k_d_pos,
        })
    };
    problem.objective_mut().feedback = feedback(&initial_state);
    // Start the filter at the initial rate so the acceleration estimate
    // begins at zero.
    let rate0 = problem.update_rhs(&u0.to_array(), t0, &cfg)?.u_dot[1];

    let mut regularized = 0usize;
    let rhs = |t: f64, y: &[f64]| -> Result<(Vec<f64>, LogRecord)> {
        let state = VehicleState::from_slice(&y[..6]);
        let u = DecisionVars::from_slice(&y[6..8]);
        let filter = y[8];
        problem.objective_mut().feedback = feedback(&state);
        let step = problem.update_rhs(&y[6..8], t, &cfg)?;
        let rate = step.u_dot[1];
        let accel = filter_rate(filter, rate, tau);
        let pitch = PitchReference {
            theta: u.theta_ref,
            rate,
            accel,
        };
        let sample = setup.scenario.reference.sample(t);
        let (command, applied) = closed_loop_inputs(settings, &sample, &state, u.delta_e, &pitch);
        let mut dy = dynamics(&state, &applied, &settings.params).to_vec();
        dy.extend_from_slice(&[step.u_dot[0], rate, accel]);
        if step.regularized {
            regularized += 1;
        }
        let record = LogRecord {
            t,
            state,
            command,
            applied,
            theta_ref: u.theta_ref,
            theta_ref_dot: rate,
            position_ref: sample.position,
            grad_norm: Some(step.grad_norm),
        };
        Ok((dy, record))
    };

    let mut y0 = initial_state.to_array().to_vec();
    y0.extend_from_slice(&[u0.delta_e, u0.theta_ref, rate0]);
    let (log, elapsed) = integrate_logged(settings, y0, rhs)?;
    let steps = log.len().saturating_sub(1);
    Ok(SimOutput {
        method: Method::ClTvOpt,
        scenario: setup.scenario.kind,
        log,
        timing: Timing {
            total_s: elapsed,
            points: steps,
        },
        table: None,
        // Counted per RK4 stage; four stages per step.
        regularized_steps: regularized.div_ceil(4),
    })
}

/// Smallest barrier slack `ε_i − h_i` over a CL-TVOpt log, with the problem
/// rebuilt from the settings (including measured-state feedback if enabled).
pub fn min_barrier_slack(settings: &Settings, log: &TrajectoryLog) -> Result<f64> {
    let setup = Setup::new(settings)?;
    let mut problem = setup.barrier_problem()?;
    let mut min = f64::INFINITY;
    for r in &log.records {
        if settings.optimizer_feedback {
            problem.objective_mut().feedback = Some(PositionFeedback {
                state: r.state,
                k_p: settings.gains.k_p_pos,
                k_d: settings.gains.k_d_pos,
            });
        }
        let slack = problem.slacks(&r.decision().to_array(), r.t);
        min = slack.into_iter().fold(min, f64::min);
    }
    Ok(min)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub max_position_error: f64,
    pub terminal_position_error: f64,
    /// Peak `T_r/(mg)` over the cruise-end 10% window.
    pub sparsity_rotor: f64,
    /// Peak `T_p/(mg)` over the hover-end 10% window.
    pub sparsity_pusher: f64,
    /// Largest `|Δθ_ref|/dt` between consecutive records (rad/s).
    pub smoothness: f64,
    pub max_theta_ref_rate: f64,
    pub max_theta_error: f64,
    pub rotor_saturation_duty: f64,
    pub pusher_saturation_duty: f64,
    pub elevator_saturation_duty: f64,
    pub max_grad_norm: Option<f64>,
    pub per_point_time_s: f64,
    pub total_time_s: f64,
    pub points: usize,
}

/// Index ranges of the first and last 10% of the horizon.
fn windows(log: &TrajectoryLog) -> (Vec<usize>, Vec<usize>) {
    let t0 = log.records[0].t;
    let tf = log.records[log.len() - 1].t;
    let span = 0.1 * (tf - t0);
    let tol = 1e-9 * (tf - t0).max(1.0);
    let first = (0..log.len())
        .filter(|&i| log.records[i].t <= t0 + span + tol)
        .collect();
    let last = (0..log.len())
        .filter(|&i| log.records[i].t >= tf - span - tol)
        .collect();
    (first, last)
}

/// Metrics of a log. Sparsity windows follow the scenario: the rotor is
/// measured where the vehicle cruises and the pusher where it hovers.
pub fn compute_metrics(
    log: &TrajectoryLog,
    scenario: ScenarioKind,
    weight: f64,
    timing: Timing,
) -> Result<Metrics> {
    if log.is_empty() {
        return Err(Error::config("cannot compute metrics of an empty log"));
    }
    let recs = &log.records;
    let err = |r: &LogRecord| (r.state.position - r.position_ref).norm();
    let (first, last) = windows(log);
    let (cruise, hover) = match scenario {
        ScenarioKind::CruiseToHover => (first, last),
        _ => (last, first),
    };
    let peak = |idx: &[usize], f: &dyn Fn(&LogRecord) -> f64| {
        idx.iter().map(|&i| f(&recs[i])).fold(0.0, f64::max)
    };
    let n = recs.len() as f64;
    let duty = |f: fn(&LogRecord) -> bool| recs.iter().filter(|r| f(r)).count() as f64 / n;
    let smoothness = recs
        .windows(2)
        .map(|w| (w[1].theta_ref - w[0].theta_ref).abs() / (w[1].t - w[0].t))
        .fold(0.0, f64::max);
    let grads: Vec<f64> = recs.iter().filter_map(|r| r.grad_norm).collect();
    Ok(Metrics {
        max_position_error: recs.iter().map(err).fold(0.0, f64::max),
        terminal_position_error: err(&recs[recs.len() - 1]),
        sparsity_rotor: peak(&cruise, &|r| r.applied.rotor_thrust / weight),
        sparsity_pusher: peak(&hover, &|r| r.applied.pusher_thrust / weight),
        smoothness,
        max_theta_ref_rate: recs
            .iter()
            .map(|r| r.theta_ref_dot.abs())
            .fold(0.0, f64::max),
        max_theta_error: recs
            .iter()
            .map(|r| (r.state.theta - r.theta_ref).abs())
            .fold(0.0, f64::max),
        rotor_saturation_duty: duty(LogRecord::rotor_saturated),
        pusher_saturation_duty: duty(LogRecord::pusher_saturated),
        elevator_saturation_duty: duty(LogRecord::elevator_saturated),
        max_grad_norm: (!grads.is_empty()).then(|| grads.iter().copied().fold(0.0, f64::max)),
        per_point_time_s: timing.per_point(),
        total_time_s: timing.total_s,
        points: timing.points,
    })
}

impl SimOutput {
    pub fn metrics(&self, weight: f64) -> Result<Metrics> {
        compute_metrics(&self.log, self.scenario, weight, self.timing)
    }
}

impl Metrics {
    fn fields(&self) -> Vec<(&'static str, String)> {
        vec![
            ("max_position_error_m", self.max_position_error.to_string()),
            (
                "terminal_position_error_m",
                self.terminal_position_error.to_string(),
            ),
            ("sparsity_rotor", self.sparsity_rotor.to_string()),
            ("sparsity_pusher", self.sparsity_pusher.to_string()),
            ("smoothness_rad_s", self.smoothness.to_string()),
            (
                "max_theta_ref_rate_rad_s",
                self.max_theta_ref_rate.to_string(),
            ),
            ("max_theta_error_rad", self.max_theta_error.to_string()),
            (
                "rotor_saturation_duty",
                self.rotor_saturation_duty.to_string(),
            ),
            (
                "pusher_saturation_duty",
                self.pusher_saturation_duty.to_string(),
            ),
            (
                "elevator_saturation_duty",
                self.elevator_saturation_duty.to_string(),
            ),
            (
                "max_grad_norm",
                self.max_grad_norm
                    .map(|g| g.to_string())
                    .unwrap_or_default(),
            ),
            ("per_point_time_s", self.per_point_time_s.to_string()),
            ("total_time_s", self.total_time_s.to_string()),
            ("points", self.points.to_string()),
        ]
    }

    /// `key = value` lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.fields() {
            let v = if v.is_empty() { "n/a".to_string() } else { v };
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn csv_header() -> Vec<&'static str> {
        Metrics::default_fields()
            .into_iter()
            .map(|(k, _)| k)
            .collect()
    }

    fn default_fields() -> Vec<(&'static str, String)> {
        Metrics {
            max_position_error: 0.0,
            terminal_position_error: 0.0,
            sparsity_rotor: 0.0,
            sparsity_pusher: 0.0,
            smoothness: 0.0,
            max_theta_ref_rate: 0.0,
            max_theta_error: 0.0,
            rotor_saturation_duty: 0.0,
            pusher_saturation_duty: 0.0,
            elevator_saturation_duty: 0.0,
            max_grad_norm: None,
            per_point_time_s: 0.0,
            total_time_s: 0.0,
            points: 0,
        }
        .fields()
    }

    /// Header line and one data line.
    pub fn to_csv(&self) -> String {
        let header = Metrics::csv_header().join(",");
        let row: Vec<String> = self.fields().into_iter().map(|(_, v)| v).collect();
        format!("{header}\n{}\n", row.join(","))
    }
}

/// Mean per-point times of one method on one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkCell {
    pub method: Method,
    pub scenario: ScenarioKind,
    pub repetitions: usize,
    /// Mean wall time of one repetition (s).
    pub mean_total_s: f64,
    /// Timestamps (OL-Opt) or logged plant states (CL-TVOpt), endpoints
    /// included.
    pub points_inclusive: usize,
    pub per_point_inclusive_s: f64,
    /// Same quotient with one endpoint excluded.
    pub per_point_exclusive_s: f64,
}

/// Times `repetitions` runs after one untimed warm-up. OL-Opt is timed on
/// the table build; CL-TVOpt on the coupled integration loop.
pub fn benchmark(
    settings: &Settings,
    method: Method,
    repetitions: usize,
) -> std::result::Result<BenchmarkCell, SimFailure> {
    if repetitions < 1 {
        return Err(Error::config("repetitions must be at least 1").into());
    }
    let setup = Setup::new(settings)?;
    let once = || -> std::result::Result<Timing, SimFailure> {
        match method {
            Method::OlOpt => Ok(olopt_table(settings, &setup)?.1),
            Method::ClTvOpt => Ok(run_cltvopt(settings, &setup)?.timing),
        }
    };
    once()?;
    let mut total = 0.0;
    let mut inclusive = 0;
    for _ in 0..repetitions {
        let timing = once()?;
        total += timing.total_s;
        inclusive = match method {
            Method::OlOpt => timing.points,
            Method::ClTvOpt => timing.points + 1,
        };
    }
    let mean = total / repetitions as f64;
    Ok(BenchmarkCell {
        method,
        scenario: setup.scenario.kind,
        repetitions,
        mean_total_s: mean,
        points_inclusive: inclusive,
        per_point_inclusive_s: mean / inclusive as f64,
        per_point_exclusive_s: mean / (inclusive.max(2) - 1) as f64,
    })
}
