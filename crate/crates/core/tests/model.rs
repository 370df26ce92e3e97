//! Vehicle model, reference curves and the reduced problem against
//! hand-written formulas.

use approx::assert_relative_eq;
use nalgebra::Vector2;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use vtolref::trajectory::build_scenario;
use vtolref::tvopt::{BarrierProblem, Objective, TvOptConfig};
use vtolref::vehicle::{
    aero_coefficients, aero_forces, body_velocity, dynamics, rotation, saturate, state_aero_forces,
};
use vtolref::{
    BezierCurve, ControlInput, DecisionVars, ProblemContext, ScenarioKind, ScenarioSpec,
    VehicleParams, VehicleState,
};

fn params() -> VehicleParams {
    VehicleParams::default()
}

#[test]
fn aero_matches_textbook_formulas() {
    let p = params();
    let mut rng = StdRng::seed_from_u64(11);
    for _ in 0..200 {
        let theta = rng.random_range(-0.5..0.5);
        let delta = rng.random_range(-0.5..0.5);
        let vel = Vector2::new(rng.random_range(-40.0..40.0), rng.random_range(-10.0..10.0));
        let state = VehicleState {
            theta,
            velocity: vel,
            ..VehicleState::default()
        };
        let u = vel.x * theta.cos() + vel.y * theta.sin();
        let v = -vel.x * theta.sin() + vel.y * theta.cos();
        let cl = 0.011 + 0.11 * theta + 0.018 * delta;
        let a = state_aero_forces(&state, delta, &p);
        assert_relative_eq!(a.lift, u * u * cl, max_relative = 1e-12, epsilon = 1e-12);
        assert_relative_eq!(
            a.drag_horizontal,
            u * u * (0.0011 + 1.4 * cl * cl),
            max_relative = 1e-12,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            a.drag_vertical,
            v * v * 0.036,
            max_relative = 1e-12,
            epsilon = 1e-12
        );
    }
}

#[test]
fn aero_examples() {
    let p = params();
    let c = aero_coefficients(0.0, 0.0, &p);
    let f = aero_forces(30.0, 0.0, &c);
    assert_relative_eq!(f.lift, 900.0 * 0.011, max_relative = 1e-14);
    assert_relative_eq!(
        f.drag_horizontal,
        900.0 * (0.0011 + 1.4 * 0.011 * 0.011),
        max_relative = 1e-14
    );
    assert_eq!(f.drag_vertical, 0.0);
    // Level cruise at 30 m/s: the wing carries roughly the weight.
    assert!((f.lift - p.weight()).abs() / p.weight() < 0.02);
}

#[test]
fn body_velocity_examples() {
    let v = body_velocity(0.0, &Vector2::new(3.0, -4.0));
    assert_eq!(v, Vector2::new(3.0, -4.0));
    let v = body_velocity(std::f64::consts::FRAC_PI_2, &Vector2::new(1.0, 0.0));
    assert!((v - Vector2::new(0.0, -1.0)).norm() < 1e-15);
    let v = body_velocity(0.3, &Vector2::new(3.0, -4.0));
    assert_relative_eq!(v.norm(), 5.0, max_relative = 1e-12);
}

#[test]
fn dynamics_hover_balance_and_free_fall() {
    let p = params();
    let hover = ControlInput {
        rotor_thrust: p.weight(),
        ..ControlInput::default()
    };
    let d = dynamics(&VehicleState::at_rest(), &hover, &p);
    assert!(d.iter().all(|v| v.abs() < 1e-12), "{d:?}");

    let d = dynamics(&VehicleState::at_rest(), &ControlInput::default(), &p);
    assert_eq!(d[4], p.gravity);
    assert_eq!(d[3], 0.0);
}

#[test]
fn dynamics_matches_rotated_force() {
    let p = params();
    let mut rng = StdRng::seed_from_u64(12);
    for _ in 0..200 {
        let state = VehicleState {
            position: Vector2::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)),
            theta: rng.random_range(-0.4..0.4),
            velocity: Vector2::new(rng.random_range(-30.0..30.0), rng.random_range(-5.0..5.0)),
            theta_dot: rng.random_range(-1.0..1.0),
        };
        let input = ControlInput {
            rotor_thrust: rng.random_range(0.0..20.0),
            pusher_thrust: rng.random_range(0.0..20.0),
            torque: rng.random_range(-2.0..2.0),
            delta_e: rng.random_range(-0.5..0.5),
        };
        let a = state_aero_forces(&state, input.delta_e, &p);
        let fx = input.pusher_thrust - a.drag_horizontal;
        let fz = -(input.rotor_thrust + a.lift - a.drag_vertical);
        let (s, c) = state.theta.sin_cos();
        let ax = (c * fx + s * fz) / p.mass;
        let az = (-s * fx + c * fz) / p.mass + p.gravity;
        let d = dynamics(&state, &input, &p);
        assert_eq!(
            &d[..3],
            &[state.velocity.x, state.velocity.y, state.theta_dot]
        );
        assert_relative_eq!(d[3], ax, max_relative = 1e-12, epsilon = 1e-12);
        assert_relative_eq!(d[4], az, max_relative = 1e-12, epsilon = 1e-12);
        assert_relative_eq!(d[5], input.torque / p.inertia, max_relative = 1e-15);
    }
}

#[test]
fn saturate_examples() {
    let p = params();
    let raw = ControlInput {
        rotor_thrust: -1.0,
        pusher_thrust: 2.0,
        torque: -3.0,
        delta_e: 1.0,
    };
    let s = saturate(&raw, &p);
    assert_eq!(s.rotor_thrust, 0.0);
    assert_eq!(s.pusher_thrust, 2.0);
    assert_eq!(s.torque, -3.0);
    assert_eq!(s.delta_e, p.delta_e_max);
    let low = saturate(
        &ControlInput {
            delta_e: -2.0,
            ..raw
        },
        &p,
    );
    assert_eq!(low.delta_e, p.delta_e_min);
}

#[test]
fn rotation_composes() {
    let r = rotation(0.2) * rotation(0.3);
    assert!((r - rotation(0.5)).abs().max() < 1e-15);
}

fn bernstein(points: &[Vector2<f64>], s: f64) -> Vector2<f64> {
    let n = points.len() - 1;
    let mut binom = 1.0;
    let mut sum = Vector2::zeros();
    for (i, p) in points.iter().enumerate() {
        sum += p * binom * s.powi(i as i32) * (1.0 - s).powi((n - i) as i32);
        binom = binom * (n - i) as f64 / (i + 1) as f64;
    }
    sum
}

#[test]
fn bezier_matches_bernstein_sum() {
    let pts = vec![
        Vector2::new(0.0, 1.0),
        Vector2::new(2.0, -3.0),
        Vector2::new(5.0, 4.0),
        Vector2::new(-1.0, 2.0),
        Vector2::new(3.0, 3.0),
    ];
    let c = BezierCurve::new(pts.clone(), 10.0, 20.0).unwrap();
    let got = c.eval(13.7).value;
    let want = bernstein(&pts, 0.37);
    assert!((got - want).norm() < 1e-12, "{got} vs {want}");
}

#[test]
fn hodograph_matches_finite_differences() {
    let pts: Vec<_> = (0..6)
        .map(|i| Vector2::new((i * i) as f64, (3 - i) as f64 * 0.7))
        .collect();
    let c = BezierCurve::new(pts, 0.0, 5.0).unwrap();
    let d = c.derivative();
    let h = 1e-5;
    for k in 1..50 {
        let t = 5.0 * k as f64 / 50.0;
        let fd = (c.eval(t + h).value - c.eval(t - h).value) / (2.0 * h);
        let an = d.eval(t).value;
        assert!(
            (fd - an).norm() <= 1e-6 * an.norm().max(1.0),
            "t={t}: {fd} vs {an}"
        );
    }
}

#[test]
fn scenario_endpoints() {
    let spec = ScenarioSpec::default();
    let h2c = build_scenario(&spec).unwrap();
    let start = h2c.reference.sample(0.0);
    let end = h2c.reference.sample(spec.tf);
    assert_eq!(start.velocity, Vector2::zeros());
    assert_eq!(start.acceleration, Vector2::zeros());
    assert_relative_eq!(end.velocity.x, spec.cruise_speed, max_relative = 1e-12);
    assert!(end.velocity.y.abs() < 1e-12);
    assert!(end.acceleration.norm() < 1e-12);
    assert_relative_eq!(end.position.y, spec.delta_h, max_relative = 1e-12);
    assert_eq!(h2c.initial_state, VehicleState::at_rest());

    let c2h = build_scenario(&ScenarioSpec {
        kind: ScenarioKind::CruiseToHover,
        ..spec.clone()
    })
    .unwrap();
    let start = c2h.reference.sample(0.0);
    let end = c2h.reference.sample(spec.tf);
    assert_relative_eq!(start.velocity.x, spec.cruise_speed, max_relative = 1e-12);
    assert!(end.velocity.norm() < 1e-12);
    assert_relative_eq!(end.position.y, -spec.delta_h, max_relative = 1e-12);
    assert_eq!(
        c2h.initial_state.velocity,
        Vector2::new(spec.cruise_speed, 0.0)
    );

    let hover = build_scenario(&ScenarioSpec {
        kind: ScenarioKind::StaticHover,
        ..spec
    })
    .unwrap();
    for t in [0.0, 40.0, 125.0] {
        let s = hover.reference.sample(t);
        assert_eq!(s.position + s.velocity + s.acceleration, Vector2::zeros());
    }
}

#[test]
fn out_of_horizon_samples_hold_position() {
    let h2c = build_scenario(&ScenarioSpec::default()).unwrap();
    let after = h2c.reference.sample(200.0);
    assert_eq!(after.position, h2c.reference.sample(125.0).position);
    assert_eq!(after.velocity, Vector2::zeros());
}

fn context(kind: ScenarioKind) -> ProblemContext {
    let scenario = build_scenario(&ScenarioSpec {
        kind,
        ..ScenarioSpec::default()
    })
    .unwrap();
    ProblemContext::feedforward(params(), scenario.reference)
}

#[test]
fn hover_cost_is_weight() {
    let ctx = context(ScenarioKind::StaticHover);
    let u = DecisionVars::new(0.0, 0.0);
    assert_relative_eq!(ctx.cost(u, 10.0), params().weight(), max_relative = 1e-14);
    let th = ctx.recover_thrusts(u, 10.0);
    assert_relative_eq!(th.rotor, params().weight(), max_relative = 1e-14);
    assert!(th.pusher.abs() < 1e-14);
    let f = ctx.desired_force(0.0, 10.0);
    assert!(f.x.abs() < 1e-14);
    assert_relative_eq!(f.y, -params().weight(), max_relative = 1e-14);
}

#[test]
fn desired_force_identity() {
    let ctx = context(ScenarioKind::HoverToCruise);
    let p = params();
    for (theta, t) in [(0.0, 30.0), (0.1, 62.5), (-0.2, 100.0)] {
        let r = ctx.reference.sample(t);
        let f = ctx.desired_force(theta, t);
        let want = rotation(theta) * (r.acceleration - Vector2::new(0.0, p.gravity)) * p.mass;
        assert_relative_eq!(f.x, want.x, max_relative = 1e-13, epsilon = 1e-13);
        assert_relative_eq!(f.y, want.y, max_relative = 1e-13, epsilon = 1e-13);
    }
}

#[test]
fn constraint_box_rows() {
    let ctx = context(ScenarioKind::HoverToCruise);
    let p = params();
    let u = DecisionVars::new(0.1, -0.05);
    let h = ctx.constraints(u, 50.0);
    assert_eq!(h[2], p.theta_min - u.theta_ref);
    assert_eq!(h[3], u.theta_ref - p.theta_max);
    assert_eq!(h[4], p.delta_e_min - u.delta_e);
    assert_eq!(h[5], u.delta_e - p.delta_e_max);
}

/// Value, gradient, Hessian and mixed time derivative of `f` by central
/// differences.
fn stencil(
    f: &dyn Fn([f64; 2], f64) -> f64,
    u: [f64; 2],
    t: f64,
    h: f64,
) -> (f64, [f64; 2], [f64; 4], [f64; 2]) {
    let ht = 1e-3;
    let at = |i: usize, d: f64, k: usize, e: f64, dt: f64| {
        let mut v = u;
        v[i] += d;
        v[k] += e;
        f(v, t + dt)
    };
    let mut g = [0.0; 2];
    let mut hs = [0.0; 4];
    let mut gt = [0.0; 2];
    for i in 0..2 {
        g[i] = (at(i, h, i, 0.0, 0.0) - at(i, -h, i, 0.0, 0.0)) / (2.0 * h);
        gt[i] = (at(i, h, i, 0.0, ht) - at(i, -h, i, 0.0, ht) - at(i, h, i, 0.0, -ht)
            + at(i, -h, i, 0.0, -ht))
            / (4.0 * h * ht);
        for k in 0..2 {
            hs[2 * i + k] = (at(i, h, k, h, 0.0) - at(i, h, k, -h, 0.0) - at(i, -h, k, h, 0.0)
                + at(i, -h, k, -h, 0.0))
                / (4.0 * h * h);
        }
    }
    (f(u, t), g, hs, gt)
}

fn assert_close(what: &str, got: &[f64], want: &[f64]) {
    let scale = want.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    for (a, b) in got.iter().zip(want) {
        assert!((a - b).abs() <= 1e-5 * scale, "{what}: {got:?} vs {want:?}");
    }
}

#[test]
fn local_model_matches_finite_differences() {
    let mut rng = StdRng::seed_from_u64(13);
    for kind in [ScenarioKind::HoverToCruise, ScenarioKind::CruiseToHover] {
        let ctx = context(kind);
        for _ in 0..50 {
            let u = [rng.random_range(-0.5..0.5), rng.random_range(-0.25..0.25)];
            let t = rng.random_range(1.0..124.0);
            let m = ctx.local_model(&u, t).unwrap();
            let cost = |v: [f64; 2], t: f64| ctx.cost(DecisionVars::new(v[0], v[1]), t);
            let (v, g, hs, gt) = stencil(&cost, u, t, 1e-4);
            let c = m.cost();
            assert_relative_eq!(c.value, v, max_relative = 1e-12);
            assert_close("cost grad", c.grad, &g);
            assert_close("cost hess", c.hess, &hs);
            assert_close("cost mixed", c.grad_dt, &gt);
            for (i, h) in m.constraints().enumerate() {
                let f = |v: [f64; 2], t: f64| ctx.constraints(DecisionVars::new(v[0], v[1]), t)[i];
                let (v, g, hs, gt) = stencil(&f, u, t, 1e-4);
                assert_relative_eq!(h.value, v, max_relative = 1e-12, epsilon = 1e-12);
                assert_close("constraint grad", h.grad, &g);
                assert_close("constraint hess", h.hess, &hs);
                assert_close("constraint mixed", h.grad_dt, &gt);
            }
        }
    }
}

#[test]
fn barrier_derivatives_match_finite_differences() {
    let mut rng = StdRng::seed_from_u64(14);
    let config = TvOptConfig::new(2, 1.0);
    let mut checked = 0;
    for kind in [ScenarioKind::HoverToCruise, ScenarioKind::CruiseToHover] {
        // A soft barrier keeps the slacks large enough for the stencils.
        let problem = BarrierProblem::uniform(context(kind), 10.0, 1.0).unwrap();
        for _ in 0..40 {
            let u = [rng.random_range(-0.4..0.4), rng.random_range(-0.2..0.2)];
            let t = rng.random_range(1.0..124.0);
            if problem.slacks(&u, t).iter().any(|s| *s < 0.2) {
                continue;
            }
            let d = problem.derivatives(&u, t, &config).unwrap();
            assert!(d.analytic);
            let phi = |v: [f64; 2], t: f64| problem.barrier(&v, t).unwrap();
            let (v, g, hs, gt) = stencil(&phi, u, t, 1e-5);
            assert_relative_eq!(d.value, v, max_relative = 1e-12);
            assert_close("grad", d.grad.as_slice(), &g);
            assert_close(
                "hess",
                &[
                    d.hess[(0, 0)],
                    d.hess[(0, 1)],
                    d.hess[(1, 0)],
                    d.hess[(1, 1)],
                ],
                &hs,
            );
            assert_close("mixed", d.mixed_t.as_slice(), &gt);
            checked += 1;
        }
    }
    assert!(checked >= 10, "only {checked} points had enough slack");
}

#[test]
fn finite_difference_mode_agrees_with_analytic() {
    let problem = BarrierProblem::with_defaults(context(ScenarioKind::HoverToCruise));
    let mut config = TvOptConfig::new(2, 1.0);
    let u = [0.05, 0.02];
    let an = problem.derivatives(&u, 40.0, &config).unwrap();
    config.use_analytic = false;
    let fd = problem.derivatives(&u, 40.0, &config).unwrap();
    assert!(!fd.analytic);
    assert!((an.grad.clone() - fd.grad).amax() <= 1e-5 * an.grad.amax().max(1.0));
    assert!((an.hess.clone() - fd.hess).amax() <= 1e-4 * an.hess.amax().max(1.0));
}

#[test]
fn barrier_examples() {
    struct Line;
    impl Objective for Line {
        fn dim(&self) -> usize {
            1
        }
        fn num_constraints(&self) -> usize {
            1
        }
        fn cost(&self, u: &[f64], _t: f64) -> f64 {
            u[0]
        }
        fn constraints(&self, u: &[f64], _t: f64) -> Vec<f64> {
            vec![-u[0]]
        }
    }
    let p = BarrierProblem::uniform(Line, 2.0, 0.5).unwrap();
    // Φ = u − ½ ln(0.5 + u)
    let phi = p.barrier(&[1.5], 0.0).unwrap();
    assert_relative_eq!(phi, 1.5 - 0.5 * 2.0f64.ln(), max_relative = 1e-14);
    assert!(p.barrier(&[-0.5], 0.0).is_err());
    assert!(p.barrier(&[-0.6], 0.0).is_err());
    assert!(p.is_strictly_feasible(&[-0.49], 0.0));
}
