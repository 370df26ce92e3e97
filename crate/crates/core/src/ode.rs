//! Classical fixed-step fourth-order Runge–Kutta.

/// One RK4 step of `ẏ = f(t, y)` from `(t, y)` with step `h`.
///
/// `f` also returns an auxiliary value; the one produced by the first stage
/// (evaluated exactly at `(t, y)`) is handed back with the new state so
/// callers can log step-start quantities without an extra evaluation.
pub fn rk4_step_with<A, E>(
    t: f64,
    y: &[f64],
    h: f64,
    mut f: impl FnMut(f64, &[f64]) -> Result<(Vec<f64>, A), E>,
) -> Result<(Vec<f64>, A), E> {
    let n = y.len();
    let mut stage = vec![0.0; n];
    let shifted = |stage: &mut Vec<f64>, k: &[f64], scale: f64| {
        for i in 0..n {
            stage[i] = y[i] + scale * k[i];
        }
    };

    let (k1, aux) = f(t, y)?;
    shifted(&mut stage, &k1, 0.5 * h);
    let (k2, _) = f(t + 0.5 * h, &stage)?;
    shifted(&mut stage, &k2, 0.5 * h);
    let (k3, _) = f(t + 0.5 * h, &stage)?;
    shifted(&mut stage, &k3, h);
    let (k4, _) = f(t + h, &stage)?;

    let next = (0..n)
        .map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect();
    Ok((next, aux))
}

pub fn rk4_step<E>(
    t: f64,
    y: &[f64],
    h: f64,
    mut f: impl FnMut(f64, &[f64]) -> Result<Vec<f64>, E>,
) -> Result<Vec<f64>, E> {
    rk4_step_with(t, y, h, |t, y| f(t, y).map(|d| (d, ()))).map(|(y, ())| y)
}

/// Number of fixed steps of size `h` covering `[t0, tf]`; the last step is
/// shortened when the span is not a multiple of `h`.
pub fn step_count(t0: f64, tf: f64, h: f64) -> usize {
    let ratio = (tf - t0) / h;
    let rounded = ratio.round();
    if (ratio - rounded).abs() <= 1e-9 * ratio.max(1.0) {
        rounded as usize
    } else {
        ratio.ceil() as usize
    }
}

/// Integrates `ẏ = f(t, y)` over `[t0, tf]` and returns the final state.
pub fn integrate<E>(
    mut f: impl FnMut(f64, &[f64]) -> Result<Vec<f64>, E>,
    y0: &[f64],
    t0: f64,
    tf: f64,
    h: f64,
) -> Result<Vec<f64>, E> {
    let n = step_count(t0, tf, h);
    let mut y = y0.to_vec();
    for k in 0..n {
        let t = t0 + k as f64 * h;
        let step = h.min(tf - t);
        y = rk4_step(t, &y, step, &mut f)?;
    }
    Ok(y)
}
