//! Prediction-correction interior-point tracking of a time-varying minimizer.
//!
//! Inequality constraints `h_i(U, t) ≤ 0` are folded into the log-barrier
//!
//! ```text
//! Φ(U, t) = J(U, t) − Σ_i (1/c_i) · log(ε_i − h_i(U, t))
//! ```
//!
//! and the decision variable follows the ODE
//!
//! ```text
//! U̇ = −∇_UU Φ⁻¹ (P ∇_U Φ + ∇_Ut Φ)
//! ```
//!
//! Along exact solutions `d/dt ∇_U Φ = −P ∇_U Φ`, so the gradient norm decays
//! at least like `exp(−α t)` when `P ⪰ α I`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::ode;

/// Value and derivatives of one scalar function of `(U, t)`, borrowed
/// from a [`LocalModel`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondOrder<'a> {
    pub value: f64,
    /// `∂/∂t` of the value.
    pub dt: f64,
    pub grad: &'a [f64],
    /// `∂/∂t` of the gradient.
    pub grad_dt: &'a [f64],
    /// Row-major `dim × dim`.
    pub hess: &'a [f64],
}

/// Analytic derivatives of the cost and of every constraint at one point,
/// packed into one buffer. Row 0 is the cost, row `i + 1` constraint `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalModel {
    dim: usize,
    rows: usize,
    data: Vec<f64>,
}

impl LocalModel {
    pub fn zeros(dim: usize, num_constraints: usize) -> Self {
        let rows = num_constraints + 1;
        Self {
            dim,
            rows,
            data: vec![0.0; rows * Self::stride_for(dim)],
        }
    }

    fn stride_for(dim: usize) -> usize {
        2 + 2 * dim + dim * dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_constraints(&self) -> usize {
        self.rows - 1
    }

    fn row(&self, r: usize) -> SecondOrder<'_> {
        let n = self.dim;
        let d = &self.data[r * Self::stride_for(n)..(r + 1) * Self::stride_for(n)];
        SecondOrder {
            value: d[0],
            dt: d[1],
            grad: &d[2..2 + n],
            grad_dt: &d[2 + n..2 + 2 * n],
            hess: &d[2 + 2 * n..],
        }
    }

    fn set_row(
        &mut self,
        r: usize,
        value: f64,
        dt: f64,
        grad: &[f64],
        grad_dt: &[f64],
        hess: &[f64],
    ) {
        let n = self.dim;
        assert!(grad.len() == n && grad_dt.len() == n && hess.len() == n * n);
        let stride = Self::stride_for(n);
        let d = &mut self.data[r * stride..(r + 1) * stride];
        d[0] = value;
        d[1] = dt;
        d[2..2 + n].copy_from_slice(grad);
        d[2 + n..2 + 2 * n].copy_from_slice(grad_dt);
        d[2 + 2 * n..].copy_from_slice(hess);
    }

    pub fn cost(&self) -> SecondOrder<'_> {
        self.row(0)
    }

    pub fn constraint(&self, i: usize) -> SecondOrder<'_> {
        self.row(i + 1)
    }

    pub fn constraints(&self) -> impl Iterator<Item = SecondOrder<'_>> {
        (1..self.rows).map(|r| self.row(r))
    }

    pub fn set_cost(&mut self, value: f64, dt: f64, grad: &[f64], grad_dt: &[f64], hess: &[f64]) {
        self.set_row(0, value, dt, grad, grad_dt, hess);
    }

    pub fn set_constraint(
        &mut self,
        i: usize,
        value: f64,
        dt: f64,
        grad: &[f64],
        grad_dt: &[f64],
        hess: &[f64],
    ) {
        self.set_row(i + 1, value, dt, grad, grad_dt, hess);
    }
}

/// Cost `J(U, t)` and inequality constraints `h(U, t) ≤ 0`.
///
/// Implementations must be pure; they are evaluated concurrently.
pub trait Objective {
    fn dim(&self) -> usize;
    fn num_constraints(&self) -> usize;
    fn cost(&self, u: &[f64], t: f64) -> f64;
    fn constraints(&self, u: &[f64], t: f64) -> Vec<f64>;

    /// Analytic derivatives. When this returns `Some`, they replace the
    /// finite-difference stencils (unless the config forbids it).
    fn local_model(&self, _u: &[f64], _t: f64) -> Option<LocalModel> {
        None
    }
}

impl<O: Objective + ?Sized> Objective for &O {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn num_constraints(&self) -> usize {
        (**self).num_constraints()
    }
    fn cost(&self, u: &[f64], t: f64) -> f64 {
        (**self).cost(u, t)
    }
    fn constraints(&self, u: &[f64], t: f64) -> Vec<f64> {
        (**self).constraints(u, t)
    }
    fn local_model(&self, u: &[f64], t: f64) -> Option<LocalModel> {
        (**self).local_model(u, t)
    }
}

/// Objective plus barrier weights `c_i` and offsets `ε_i`.
#[derive(Debug, Clone)]
pub struct BarrierProblem<O> {
    objective: O,
    c: Vec<f64>,
    eps: Vec<f64>,
}

/// Weights used for every constraint unless overridden.
pub const DEFAULT_BARRIER_WEIGHT: f64 = 1e3;
pub const DEFAULT_BARRIER_OFFSET: f64 = 1e-3;

impl<O: Objective> BarrierProblem<O> {
    pub fn new(objective: O, c: Vec<f64>, eps: Vec<f64>) -> Result<Self> {
        let m = objective.num_constraints();
        if c.len() != m || eps.len() != m {
            return Err(Error::config(format!(
                "expected {m} barrier weights and offsets, got {} and {}",
                c.len(),
                eps.len()
            )));
        }
        if c.iter()
            .chain(eps.iter())
            .any(|v| !(*v > 0.0 && v.is_finite()))
        {
            return Err(Error::config(
                "barrier weights and offsets must be positive",
            ));
        }
        Ok(Self { objective, c, eps })
    }

    /// Same `c` and `ε` for every constraint.
    pub fn uniform(objective: O, c: f64, eps: f64) -> Result<Self> {
        let m = objective.num_constraints();
        Self::new(objective, vec![c; m], vec![eps; m])
    }

    pub fn with_defaults(objective: O) -> Self {
        Self::uniform(objective, DEFAULT_BARRIER_WEIGHT, DEFAULT_BARRIER_OFFSET)
            .expect("default barrier constants are positive")
    }

    pub fn objective(&self) -> &O {
        &self.objective
    }

    pub fn objective_mut(&mut self) -> &mut O {
        &mut self.objective
    }

    pub fn dim(&self) -> usize {
        self.objective.dim()
    }

    pub fn weights(&self) -> &[f64] {
        &self.c
    }

    pub fn offsets(&self) -> &[f64] {
        &self.eps
    }

    /// Slack `ε_i − h_i` of every constraint.
    pub fn slacks(&self, u: &[f64], t: f64) -> Vec<f64> {
        self.objective
            .constraints(u, t)
            .iter()
            .zip(&self.eps)
            .map(|(h, e)| e - h)
            .collect()
    }

    /// Index of the first constraint without positive slack, if any.
    fn check_slacks(&self, slacks: &[f64], t: f64) -> Result<()> {
        match slacks.iter().position(|s| !(*s > 0.0)) {
            Some(index) => Err(Error::Infeasible {
                index,
                slack: slacks[index],
                t,
            }),
            None => Ok(()),
        }
    }

    pub fn is_strictly_feasible(&self, u: &[f64], t: f64) -> bool {
        self.slacks(u, t).iter().all(|s| *s > 0.0)
    }

    /// `Φ(U, t)`; errors at points that are not strictly feasible.
    pub fn barrier(&self, u: &[f64], t: f64) -> Result<f64> {
        let slacks = self.slacks(u, t);
        self.check_slacks(&slacks, t)?;
        let penalty: f64 = slacks.iter().zip(&self.c).map(|(s, c)| s.ln() / c).sum();
        Ok(self.objective.cost(u, t) - penalty)
    }

    /// Gradient, Hessian and mixed time derivative of `Φ`.
    pub fn derivatives(&self, u: &[f64], t: f64, config: &TvOptConfig) -> Result<Derivatives> {
        if config.use_analytic {
            if let Some(model) = self.objective.local_model(u, t) {
                return self.assemble(&model, t);
            }
        }
        match self.finite_differences(u, t, config, 1.0) {
            Err(Error::Infeasible { .. }) => self.finite_differences(u, t, config, 0.1),
            other => other,
        }
    }

    /// Chain rule through the log-barrier.
    fn assemble(&self, model: &LocalModel, t: f64) -> Result<Derivatives> {
        let n = model.dim();
        let slacks: Vec<f64> = model
            .constraints()
            .zip(&self.eps)
            .map(|(h, e)| e - h.value)
            .collect();
        self.check_slacks(&slacks, t)?;

        let cost = model.cost();
        let mut value = cost.value;
        let mut grad = DVector::from_column_slice(cost.grad);
        let mut hess = DMatrix::from_row_slice(n, n, cost.hess);
        let mut mixed = DVector::from_column_slice(cost.grad_dt);
        for ((h, s), c) in model.constraints().zip(&slacks).zip(&self.c) {
            let w = 1.0 / (c * s);
            value -= s.ln() / c;
            for i in 0..n {
                grad[i] += w * h.grad[i];
                mixed[i] += w * h.grad_dt[i] + w * h.dt / s * h.grad[i];
                for k in 0..n {
                    hess[(i, k)] += w * h.hess[i * n + k] + w / s * h.grad[i] * h.grad[k];
                }
            }
        }
        Ok(Derivatives {
            value,
            grad,
            hess: symmetrize(hess),
            mixed_t: mixed,
            analytic: true,
        })
    }

    fn finite_differences(
        &self,
        u: &[f64],
        t: f64,
        config: &TvOptConfig,
        shrink: f64,
    ) -> Result<Derivatives> {
        let n = self.dim();
        let hg = config.fd_step_u * shrink;
        let hh = config.fd_step_hess * shrink;
        let ht = config.fd_step_t * shrink;
        let mut point = u.to_vec();
        let mut at = |offsets: &[(usize, f64)], dt: f64| -> Result<f64> {
            point.copy_from_slice(u);
            for &(i, d) in offsets {
                point[i] += d;
            }
            self.barrier(&point, t + dt)
        };

        let value = at(&[], 0.0)?;
        let mut grad = DVector::zeros(n);
        let mut hess = DMatrix::zeros(n, n);
        let mut mixed = DVector::zeros(n);
        for i in 0..n {
            grad[i] = (at(&[(i, hg)], 0.0)? - at(&[(i, -hg)], 0.0)?) / (2.0 * hg);
            hess[(i, i)] = (at(&[(i, hh)], 0.0)? - 2.0 * value + at(&[(i, -hh)], 0.0)?) / (hh * hh);
            for k in 0..i {
                let v = (at(&[(i, hh), (k, hh)], 0.0)?
                    - at(&[(i, hh), (k, -hh)], 0.0)?
                    - at(&[(i, -hh), (k, hh)], 0.0)?
                    + at(&[(i, -hh), (k, -hh)], 0.0)?)
                    / (4.0 * hh * hh);
                hess[(i, k)] = v;
                hess[(k, i)] = v;
            }
            mixed[i] = (at(&[(i, hh)], ht)? - at(&[(i, hh)], -ht)? - at(&[(i, -hh)], ht)?
                + at(&[(i, -hh)], -ht)?)
                / (4.0 * hh * ht);
        }
        Ok(Derivatives {
            value,
            grad,
            hess: symmetrize(hess),
            mixed_t: mixed,
            analytic: false,
        })
    }

    /// Right-hand side of the prediction-correction ODE.
    pub fn update_rhs(&self, u: &[f64], t: f64, config: &TvOptConfig) -> Result<UpdateStep> {
        let d = self.derivatives(u, t, config)?;
        let mut rhs = d.mixed_t;
        rhs.gemv(-1.0, &config.gain, &d.grad, -1.0);
        let mut hess = d.hess;
        let regularized = condition_number(&hess) > config.condition_limit;
        if regularized {
            for i in 0..hess.nrows() {
                hess[(i, i)] += config.hessian_reg;
            }
        }
        let mut u_dot = rhs;
        if !hess.lu().solve_mut(&mut u_dot) || !u_dot.iter().all(|v| v.is_finite()) {
            return Err(Error::Singular { t });
        }
        Ok(UpdateStep {
            u_dot,
            grad_norm: d.grad.norm(),
            regularized,
        })
    }

    /// Integrates the update law with RK4 from `(u0, t0)` to `tf`, calling
    /// `observer` at the start point and after every step.
    pub fn track(
        &self,
        u0: &[f64],
        t0: f64,
        tf: f64,
        config: &TvOptConfig,
        mut observer: impl FnMut(&TrackPoint),
    ) -> Result<Vec<TrackPoint>, TrackFailure> {
        let mut history: Vec<TrackPoint> = Vec::new();
        let fail = |error: Error, history: Vec<TrackPoint>| TrackFailure { error, history };
        let h = config.integrator_dt;
        let steps = ode::step_count(t0, tf, h);
        let mut u = u0.to_vec();
        let mut t = t0;
        for k in 0..=steps {
            if k == steps {
                // Log the end point; this also checks its feasibility.
                match self.update_rhs(&u, t, config) {
                    Ok(step) => {
                        let point = TrackPoint::new(t, &u, &step);
                        observer(&point);
                        history.push(point);
                    }
                    Err(e) => return Err(fail(e, history)),
                }
                break;
            }
            let dt = h.min(tf - t);
            let result = ode::rk4_step_with(t, &u, dt, |s, y| {
                self.update_rhs(y, s, config)
                    .map(|step| (step.u_dot.as_slice().to_vec(), step))
            });
            match result {
                Ok((next, step)) => {
                    let point = TrackPoint::new(t, &u, &step);
                    observer(&point);
                    history.push(point);
                    u = next;
                    t = t0 + (k + 1) as f64 * h;
                    if k + 1 == steps {
                        t = tf;
                    }
                }
                Err(e) => return Err(fail(e, history)),
            }
        }
        Ok(history)
    }
}

fn symmetrize(mut m: DMatrix<f64>) -> DMatrix<f64> {
    for i in 0..m.nrows() {
        for k in 0..i {
            let v = 0.5 * (m[(i, k)] + m[(k, i)]);
            m[(i, k)] = v;
            m[(k, i)] = v;
        }
    }
    m
}

/// Ratio of largest to smallest eigenvalue magnitude of a symmetric matrix.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let (lo, hi) = if m.nrows() == 2 {
        let (a, b, d) = (m[(0, 0)], m[(0, 1)], m[(1, 1)]);
        let mean = 0.5 * (a + d);
        let radius = (0.25 * (a - d) * (a - d) + b * b).sqrt();
        let (l1, l2) = ((mean - radius).abs(), (mean + radius).abs());
        (l1.min(l2), l1.max(l2))
    } else {
        let eig = m.clone().symmetric_eigenvalues();
        let abs = eig.iter().map(|v| v.abs());
        (
            abs.clone().fold(f64::INFINITY, f64::min),
            abs.fold(0.0, f64::max),
        )
    };
    if lo == 0.0 || !lo.is_finite() || !hi.is_finite() {
        f64::INFINITY
    } else {
        hi / lo
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Derivatives {
    pub value: f64,
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
    pub mixed_t: DVector<f64>,
    /// Whether the analytic path produced these values.
    pub analytic: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpdateStep {
    pub u_dot: DVector<f64>,
    pub grad_norm: f64,
    pub regularized: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackPoint {
    pub t: f64,
    pub u: Vec<f64>,
    pub u_dot: Vec<f64>,
    pub grad_norm: f64,
    pub regularized: bool,
}

impl TrackPoint {
    fn new(t: f64, u: &[f64], step: &UpdateStep) -> Self {
        Self {
            t,
            u: u.to_vec(),
            u_dot: step.u_dot.as_slice().to_vec(),
            grad_norm: step.grad_norm,
            regularized: step.regularized,
        }
    }
}

/// Tracking stopped early; `history` holds every point accepted so far.
#[derive(Debug, Clone, thiserror::Error)]
#[error("tracking stopped after {} points: {error}", history.len())]
pub struct TrackFailure {
    pub error: Error,
    pub history: Vec<TrackPoint>,
}

impl TrackFailure {
    pub fn last_good(&self) -> Option<&TrackPoint> {
        self.history.last()
    }
}

/// Gains and numerical settings for the update law.
#[derive(Debug, Clone, PartialEq)]
pub struct TvOptConfig {
    /// Symmetric positive-definite gain `P`.
    pub gain: DMatrix<f64>,
    /// Lower spectral bound of `gain` (1/s).
    pub alpha: f64,
    /// Gradient stencil step in `U`.
    pub fd_step_u: f64,
    /// Hessian and mixed-derivative stencil step in `U`.
    pub fd_step_hess: f64,
    /// Time stencil step (s).
    pub fd_step_t: f64,
    /// Diagonal shift added when the Hessian is ill-conditioned.
    pub hessian_reg: f64,
    pub condition_limit: f64,
    /// RK4 step (s).
    pub integrator_dt: f64,
    pub use_analytic: bool,
}

impl TvOptConfig {
    /// Defaults with `P = gain · I`.
    pub fn new(dim: usize, gain: f64) -> Self {
        Self {
            gain: DMatrix::identity(dim, dim) * gain,
            alpha: gain,
            fd_step_u: 1e-6,
            fd_step_hess: 1e-4,
            fd_step_t: 1e-5,
            hessian_reg: 1e-6,
            condition_limit: 1e8,
            integrator_dt: 0.01,
            use_analytic: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.gain;
        if !p.is_square() || p.nrows() == 0 {
            return Err(Error::config("gain matrix must be square and non-empty"));
        }
        if (p - p.transpose()).abs().max() > 1e-12 * p.abs().max().max(1.0) {
            return Err(Error::config("gain matrix must be symmetric"));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::config("alpha must be positive"));
        }
        let min_eig = p.clone().symmetric_eigenvalues().min();
        if min_eig < self.alpha * (1.0 - 1e-12) {
            return Err(Error::config(format!(
                "gain matrix smallest eigenvalue {min_eig} is below alpha {}",
                self.alpha
            )));
        }
        let steps = [
            self.fd_step_u,
            self.fd_step_hess,
            self.fd_step_t,
            self.integrator_dt,
            self.hessian_reg,
            self.condition_limit,
        ];
        if steps.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::config(
                "step sizes and regularization must be positive",
            ));
        }
        Ok(())
    }
}
