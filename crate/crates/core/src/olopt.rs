//! Pointwise-in-time baseline: barrier-Newton solves on a timestamp grid,
//! then piecewise-linear interpolation between them.

use std::io::{Read, Write};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::problem::{DecisionVars, ProblemContext, Thrusts};
use crate::tvopt::{BarrierProblem, Objective, TvOptConfig};

/// Evenly spaced timestamps `t0, t0 + dt, …` up to `tf`.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    t0: f64,
    tf: f64,
    dt: f64,
    len: usize,
}

impl Schedule {
    pub fn new(t0: f64, tf: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !(tf >= t0) || !t0.is_finite() || !tf.is_finite() {
            return Err(Error::config(format!(
                "invalid schedule t0 = {t0}, tf = {tf}, dt = {dt}"
            )));
        }
        let len = ((tf - t0) / dt + 1e-9).floor() as usize + 1;
        Ok(Self { t0, tf, dt, len })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn tf(&self) -> f64 {
        self.tf
    }

    pub fn timestamp(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn timestamps(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(|k| self.timestamp(k))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonOptions {
    pub grad_tol: f64,
    pub max_iterations: usize,
    /// Armijo sufficient-decrease constant.
    pub armijo: f64,
    /// Backtracking factor.
    pub backtrack: f64,
    /// Points per axis of the cold-start scan.
    pub cold_grid: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            grad_tol: 1e-8,
            max_iterations: 100,
            armijo: 1e-4,
            backtrack: 0.5,
            cold_grid: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointwiseSolution {
    pub u: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    /// False when the iteration limit was hit or the line search stalled.
    pub converged: bool,
    pub warm_started: bool,
}

/// Cell-centred grid points inside `bounds`, `per_axis` per dimension.
fn grid_points(bounds: &[(f64, f64)], per_axis: usize) -> impl Iterator<Item = Vec<f64>> + '_ {
    let total = per_axis.pow(bounds.len() as u32);
    (0..total).map(move |mut idx| {
        bounds
            .iter()
            .map(|&(lo, hi)| {
                let i = idx % per_axis;
                idx /= per_axis;
                lo + (i as f64 + 0.5) * (hi - lo) / per_axis as f64
            })
            .collect()
    })
}

/// Lowest-barrier strictly feasible point of a coarse grid.
fn cold_start<O: Objective>(
    problem: &BarrierProblem<O>,
    t: f64,
    bounds: &[(f64, f64)],
    per_axis: usize,
) -> Result<Vec<f64>> {
    grid_points(bounds, per_axis)
        .filter_map(|u| problem.barrier(&u, t).ok().map(|v| (v, u)))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, u)| u)
        .ok_or(Error::InfeasibleProblem { t })
}

/// Newton direction on the Hessian with eigenvalues reflected and floored so
/// that the step always descends.
fn descent_direction(hess: &DMatrix<f64>, grad: &DVector<f64>) -> DVector<f64> {
    let eig = hess.clone().symmetric_eigen();
    let scale = eig.eigenvalues.amax().max(1.0);
    let floor = 1e-12 * scale;
    let inv = eig.eigenvalues.map(|l| 1.0 / l.abs().max(floor));
    let q = &eig.eigenvectors;
    -(q * DMatrix::from_diagonal(&inv) * q.transpose() * grad)
}

/// Damped Newton on `Φ(·, t)` with Armijo backtracking. Trial points that are
/// not strictly feasible are rejected by the same backtracking loop, so every
/// iterate stays in the barrier's domain.
pub fn solve_pointwise<O: Objective>(
    problem: &BarrierProblem<O>,
    t: f64,
    bounds: &[(f64, f64)],
    warm_start: Option<&[f64]>,
    options: &NewtonOptions,
    derivative_config: &TvOptConfig,
) -> Result<PointwiseSolution> {
    let warm = warm_start.filter(|u| problem.is_strictly_feasible(u, t));
    let warm_started = warm.is_some();
    let mut u = match warm {
        Some(u) => u.to_vec(),
        None => cold_start(problem, t, bounds, options.cold_grid)?,
    };
    let mut iterations = 0;
    let mut converged = false;
    let mut d = problem.derivatives(&u, t, derivative_config)?;
    let mut trial = vec![0.0; u.len()];
    loop {
        let grad_norm = d.grad.norm();
        if grad_norm <= options.grad_tol {
            converged = true;
            break;
        }
        if iterations >= options.max_iterations {
            break;
        }
        let p = descent_direction(&d.hess, &d.grad);
        let slope = d.grad.dot(&p);
        // Predicted decrease below round-off: Armijo cannot discriminate.
        let negligible = slope.abs() <= 1e-13 * (1.0 + d.value.abs());
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            for i in 0..u.len() {
                trial[i] = u[i] + alpha * p[i];
            }
            if let Ok(v) = problem.barrier(&trial, t) {
                if negligible || v <= d.value + options.armijo * alpha * slope {
                    accepted = true;
                    break;
                }
            }
            alpha *= options.backtrack;
        }
        if !accepted {
            break;
        }
        let next = problem.derivatives(&trial, t, derivative_config)?;
        if negligible && next.grad.norm() >= grad_norm {
            break;
        }
        u.copy_from_slice(&trial);
        d = next;
        iterations += 1;
    }
    Ok(PointwiseSolution {
        grad_norm: d.grad.norm(),
        value: d.value,
        u,
        iterations,
        converged,
        warm_started,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridMinimum {
    pub u: Vec<f64>,
    pub value: f64,
    /// Barrier value before the refinement pass.
    pub coarse_value: f64,
}

/// Exhaustive search of `Φ(·, t)` over a strictly interior grid, followed
/// by one refinement pass at ten times the resolution within one coarse cell
/// of the incumbent.
pub fn oracle_grid_min<O: Objective + Sync>(
    problem: &BarrierProblem<O>,
    t: f64,
    bounds: &[(f64, f64)],
    resolution: usize,
) -> Result<GridMinimum> {
    let best = |bounds: &[(f64, f64)], per_axis: usize| {
        grid_points(bounds, per_axis)
            .filter(|u| u.iter().zip(bounds).all(|(x, (lo, hi))| x > lo && x < hi))
            .filter_map(|u| problem.barrier(&u, t).ok().map(|v| (v, u)))
            .min_by(|a, b| a.0.total_cmp(&b.0))
    };
    let (coarse_value, coarse) = best(bounds, resolution).ok_or(Error::InfeasibleProblem { t })?;
    let local: Vec<(f64, f64)> = coarse
        .iter()
        .zip(bounds)
        .map(|(&x, &(lo, hi))| {
            let cell = (hi - lo) / resolution as f64;
            ((x - cell).max(lo), (x + cell).min(hi))
        })
        .collect();
    let (value, u) = match best(&local, 20) {
        Some((v, u)) if v < coarse_value => (v, u),
        _ => (coarse_value, coarse),
    };
    Ok(GridMinimum {
        u,
        value,
        coarse_value,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableMode {
    /// Each solve warm-starts from the previous row.
    SequentialWarm,
    /// Independent cold-started solves in parallel.
    ParallelCold,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub t: f64,
    pub u: DecisionVars,
    pub thrusts: Thrusts,
    pub iterations: usize,
    pub converged: bool,
    pub warm_started: bool,
    pub solve_time_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionTable {
    pub schedule: Schedule,
    pub rows: Vec<TableRow>,
}

pub const TABLE_CSV_HEADER: [&str; 7] = [
    "t",
    "delta_e",
    "theta_ref",
    "T_r",
    "T_p",
    "iters",
    "solve_time_s",
];

/// Solves one row, warm-starting from the first strictly feasible candidate.
fn solve_row(
    problem: &BarrierProblem<&ProblemContext>,
    t: f64,
    candidates: &[[f64; 2]],
    options: &NewtonOptions,
    config: &TvOptConfig,
) -> Result<TableRow> {
    let ctx = *problem.objective();
    let bounds = ctx.decision_box();
    let start = Instant::now();
    let warm = candidates
        .iter()
        .find(|u| problem.is_strictly_feasible(&u[..], t))
        .map(|u| &u[..]);
    let sol = solve_pointwise(problem, t, &bounds, warm, options, config).map_err(|e| {
        Error::Timestamp {
            t,
            source: Box::new(e),
        }
    })?;
    let solve_time_s = start.elapsed().as_secs_f64();
    let u = DecisionVars::from_slice(&sol.u);
    Ok(TableRow {
        t,
        u,
        thrusts: ctx.recover_thrusts(u, t),
        iterations: sol.iterations,
        converged: sol.converged,
        warm_started: sol.warm_started,
        solve_time_s,
    })
}

/// Solves the reduced problem at every timestamp of `schedule`.
pub fn build_table(
    ctx: &ProblemContext,
    barrier: (&[f64], &[f64]),
    schedule: &Schedule,
    mode: TableMode,
    options: &NewtonOptions,
    config: &TvOptConfig,
) -> Result<SolutionTable> {
    let problem = BarrierProblem::new(ctx, barrier.0.to_vec(), barrier.1.to_vec())?;
    let rows = match mode {
        TableMode::SequentialWarm => {
            let mut rows: Vec<TableRow> = Vec::with_capacity(schedule.len());
            for t in schedule.timestamps() {
                // The previous solution, or its linear extrapolation when the
                // moving constraints have already overtaken it.
                let candidates: Vec<[f64; 2]> = match rows.as_slice() {
                    [] => Vec::new(),
                    [only] => vec![only.u.to_array()],
                    [.., prev, last] => {
                        let (a, b) = (prev.u.to_array(), last.u.to_array());
                        vec![b, [2.0 * b[0] - a[0], 2.0 * b[1] - a[1]]]
                    }
                };
                rows.push(solve_row(&problem, t, &candidates, options, config)?);
            }
            rows
        }
        TableMode::ParallelCold => (0..schedule.len())
            .into_par_iter()
            .map(|k| solve_row(&problem, schedule.timestamp(k), &[], options, config))
            .collect::<Result<Vec<_>>>()?,
    };
    Ok(SolutionTable {
        schedule: schedule.clone(),
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interpolated {
    pub u: DecisionVars,
    pub clamped: bool,
}

impl SolutionTable {
    /// Piecewise-linear interpolation of `U`; outside the schedule the
    /// nearest end row is returned and flagged.
    pub fn interpolate(&self, t: f64) -> Interpolated {
        let last = self.rows.len() - 1;
        let s = &self.schedule;
        let t_last = s.timestamp(last);
        if t < s.t0() || t > t_last {
            let row = if t < s.t0() { 0 } else { last };
            return Interpolated {
                u: self.rows[row].u,
                clamped: true,
            };
        }
        let pos = (t - s.t0()) / s.dt();
        let k = (pos.floor() as usize).min(last.saturating_sub(1));
        if last == 0 {
            return Interpolated {
                u: self.rows[0].u,
                clamped: false,
            };
        }
        let w = (t - s.timestamp(k)) / s.dt();
        let (a, b) = (self.rows[k].u, self.rows[k + 1].u);
        Interpolated {
            u: DecisionVars::new(
                a.delta_e + w * (b.delta_e - a.delta_e),
                a.theta_ref + w * (b.theta_ref - a.theta_ref),
            ),
            clamped: false,
        }
    }

    pub fn total_solve_time(&self) -> f64 {
        self.rows.iter().map(|r| r.solve_time_s).sum()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(TABLE_CSV_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.t.to_string(),
                r.u.delta_e.to_string(),
                r.u.theta_ref.to_string(),
                r.thrusts.rotor.to_string(),
                r.thrusts.pusher.to_string(),
                r.iterations.to_string(),
                r.solve_time_s.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads rows written by [`SolutionTable::write_csv`]. The schedule spacing
    /// is taken from the first two rows.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
        if header != TABLE_CSV_HEADER {
            return Err(Error::Csv(format!("unexpected table header {header:?}")));
        }
        let mut rows = Vec::new();
        for record in r.records() {
            let record = record?;
            let f = |i: usize| -> Result<f64> {
                record[i]
                    .parse::<f64>()
                    .map_err(|e| Error::Csv(format!("column {}: {e}", TABLE_CSV_HEADER[i])))
            };
            let iterations = record[5]
                .parse::<usize>()
                .map_err(|e| Error::Csv(format!("iters: {e}")))?;
            rows.push(TableRow {
                t: f(0)?,
                u: DecisionVars::new(f(1)?, f(2)?),
                thrusts: Thrusts {
                    rotor: f(3)?,
                    pusher: f(4)?,
                },
                iterations,
                converged: true,
                warm_started: false,
                solve_time_s: f(6)?,
            });
        }
        if rows.len() < 2 {
            return Err(Error::Csv("a table needs at least two rows".into()));
        }
        let dt = rows[1].t - rows[0].t;
        let schedule = Schedule::new(rows[0].t, rows[rows.len() - 1].t, dt)?;
        Ok(Self { schedule, rows })
    }
}
