//! Randomized invariants of the model, the reduced problem and the
//! controllers.

use nalgebra::Vector2;
use proptest::prelude::*;

use vtolref::control::{
    commanded_accel, filtered_ref_accel, pitch_controller, position_controller,
};
use vtolref::ode::rk4_step;
use vtolref::trajectory::build_scenario;
use vtolref::tvopt::{BarrierProblem, TvOptConfig};
use vtolref::vehicle::{rotation, saturate};
use vtolref::{
    BezierCurve, ControlInput, ControllerGains, DecisionVars, PitchRefState, PitchReference,
    ProblemContext, ReferenceSample, ScenarioKind, ScenarioSpec, VehicleParams, VehicleState,
};

fn context(kind: ScenarioKind) -> ProblemContext {
    let spec = ScenarioSpec {
        kind,
        ..ScenarioSpec::default()
    };
    let scenario = build_scenario(&spec).unwrap();
    ProblemContext::feedforward(VehicleParams::default(), scenario.reference)
}

fn kind() -> impl Strategy<Value = ScenarioKind> {
    prop_oneof![
        Just(ScenarioKind::StaticHover),
        Just(ScenarioKind::HoverToCruise),
        Just(ScenarioKind::CruiseToHover),
    ]
}

fn vec2(r: f64) -> impl Strategy<Value = Vector2<f64>> {
    (-r..r, -r..r).prop_map(|(x, y)| Vector2::new(x, y))
}

fn state() -> impl Strategy<Value = VehicleState> {
    (vec2(100.0), -0.4f64..0.4, vec2(40.0), -1.0f64..1.0).prop_map(|(p, th, v, w)| VehicleState {
        position: p,
        theta: th,
        velocity: v,
        theta_dot: w,
    })
}

fn sample() -> impl Strategy<Value = ReferenceSample> {
    (vec2(100.0), vec2(40.0), vec2(3.0)).prop_map(|(p, v, a)| ReferenceSample {
        t: 0.0,
        position: p,
        velocity: v,
        acceleration: a,
    })
}

fn close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= 1e-9 * scale.max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 256,
        max_global_rejects: 8192,
        ..ProptestConfig::default()
    })]

    #[test]
    fn cost_is_total_thrust(k in kind(), de in -0.6f64..0.6, th in -0.3f64..0.3, t in 0.0f64..125.0) {
        let ctx = context(k);
        let u = DecisionVars::new(de, th);
        let thrusts = ctx.recover_thrusts(u, t);
        let cost = ctx.cost(u, t);
        prop_assert!(close(cost, thrusts.rotor + thrusts.pusher, cost.abs()));
    }

    #[test]
    fn thrust_constraints_are_negated_thrusts(k in kind(), de in -0.6f64..0.6, th in -0.3f64..0.3, t in 0.0f64..125.0) {
        let ctx = context(k);
        let u = DecisionVars::new(de, th);
        let thrusts = ctx.recover_thrusts(u, t);
        let h = ctx.constraints(u, t);
        prop_assert!(close(h[0], -thrusts.rotor, thrusts.rotor.abs()));
        prop_assert!(close(h[1], -thrusts.pusher, thrusts.pusher.abs()));
    }

    #[test]
    fn box_rows_agree_with_the_decision_box(de in -1.0f64..1.0, th in -0.5f64..0.5) {
        let ctx = context(ScenarioKind::StaticHover);
        let h = ctx.constraints(DecisionVars::new(de, th), 0.0);
        let [(de_lo, de_hi), (th_lo, th_hi)] = ctx.decision_box();
        let inside = (de_lo..=de_hi).contains(&de) && (th_lo..=th_hi).contains(&th);
        prop_assert_eq!(h[2..].iter().all(|v| *v <= 0.0), inside);
    }

    #[test]
    fn barrier_hessian_is_symmetric(k in kind(), de in -0.5f64..0.5, th in -0.25f64..0.25, t in 0.0f64..125.0) {
        let problem = BarrierProblem::with_defaults(context(k));
        let u = [de, th];
        prop_assume!(problem.is_strictly_feasible(&u, t));
        let d = problem.derivatives(&u, t, &TvOptConfig::new(2, 1.0)).unwrap();
        let scale = d.hess.abs().max();
        prop_assert!((d.hess[(0, 1)] - d.hess[(1, 0)]).abs() <= 1e-12 * scale);
    }

    #[test]
    fn barrier_is_cost_plus_weighted_logs(k in kind(), de in -0.5f64..0.5, th in -0.25f64..0.25, t in 0.0f64..125.0) {
        let ctx = context(k);
        let u = DecisionVars::new(de, th);
        let problem = BarrierProblem::with_defaults(ctx.clone());
        prop_assume!(problem.is_strictly_feasible(&u.to_array(), t));
        let h = ctx.constraints(u, t);
        let logs: f64 = (0..h.len())
            .map(|i| (problem.offsets()[i] - h[i]).ln() / problem.weights()[i])
            .sum();
        let phi = problem.barrier(&u.to_array(), t).unwrap();
        prop_assert!(close(phi, ctx.cost(u, t) - logs, phi.abs()));
    }

    #[test]
    fn commanded_acceleration_superposes(s in state(), r in sample(), dp in vec2(10.0), dv in vec2(10.0)) {
        let g = ControllerGains::default();
        let base = commanded_accel(&s, &r, &g);
        let mut moved = s;
        moved.position += dp;
        let from_p = commanded_accel(&moved, &r, &g) - base;
        moved = s;
        moved.velocity += dv;
        let from_v = commanded_accel(&moved, &r, &g) - base;
        moved.position += dp;
        let both = commanded_accel(&moved, &r, &g) - base;
        prop_assert!((both - from_p - from_v).norm() <= 1e-9 * (1.0 + base.norm()));
        prop_assert!((from_p + dp * g.k_p_pos).norm() <= 1e-9 * (1.0 + base.norm()));
    }

    #[test]
    fn position_controller_is_translation_invariant(s in state(), r in sample(), shift in vec2(1000.0), de in -0.5f64..0.5) {
        let g = ControllerGains::default();
        let p = VehicleParams::default();
        let a = position_controller(&s, &r, de, &g, &p);
        let mut s2 = s;
        s2.position += shift;
        let mut r2 = r;
        r2.position += shift;
        let b = position_controller(&s2, &r2, de, &g, &p);
        prop_assert!(close(a.rotor, b.rotor, 1e3) && close(a.pusher, b.pusher, 1e3));
    }

    #[test]
    fn pitch_controller_is_linear_in_the_reference(s in state(), a in -1.0f64..1.0, b in -1.0f64..1.0, c in -5.0f64..5.0, scale in -3.0f64..3.0) {
        let g = ControllerGains::default();
        let p = VehicleParams::default();
        let mut rest = s;
        rest.theta = 0.0;
        rest.theta_dot = 0.0;
        let r = PitchReference { theta: a, rate: b, accel: c };
        let scaled = PitchReference { theta: a * scale, rate: b * scale, accel: c * scale };
        let m = pitch_controller(&rest, &r, &g, &p);
        prop_assert!(close(pitch_controller(&rest, &scaled, &g, &p), scale * m, m.abs()));
    }

    #[test]
    fn saturated_input_is_admissible(tr in -50.0f64..50.0, tp in -50.0f64..50.0, m in -5.0f64..5.0, de in -2.0f64..2.0) {
        let p = VehicleParams::default();
        let out = saturate(&ControlInput { rotor_thrust: tr, pusher_thrust: tp, torque: m, delta_e: de }, &p);
        prop_assert!(out.rotor_thrust >= 0.0 && out.pusher_thrust >= 0.0);
        prop_assert!((p.delta_e_min..=p.delta_e_max).contains(&out.delta_e));
        prop_assert_eq!(out.torque, m);
    }

    #[test]
    fn rotations_compose(a in -10.0f64..10.0, b in -10.0f64..10.0) {
        let diff = rotation(a) * rotation(b) - rotation(a + b);
        prop_assert!(diff.abs().max() <= 1e-12);
    }

    #[test]
    fn bezier_stays_in_the_control_hull_box(
        pts in prop::collection::vec(vec2(50.0), 2..8),
        s in 0.0f64..1.0,
        shift in vec2(100.0),
    ) {
        let curve = BezierCurve::new(pts.clone(), 2.0, 7.0).unwrap();
        let t = 2.0 + 5.0 * s;
        let p = curve.eval(t).value;
        for axis in 0..2 {
            let lo = pts.iter().map(|q| q[axis]).fold(f64::INFINITY, f64::min);
            let hi = pts.iter().map(|q| q[axis]).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(p[axis] >= lo - 1e-9 && p[axis] <= hi + 1e-9);
        }
        let moved: Vec<_> = pts.iter().map(|q| q + shift).collect();
        let q = BezierCurve::new(moved, 2.0, 7.0).unwrap().eval(t).value;
        prop_assert!((q - p - shift).norm() <= 1e-9);
    }

    #[test]
    fn filter_at_rest_stays_at_rest(rate in -2.0f64..2.0, dt in 1e-4f64..0.05) {
        let prs = PitchRefState::new(0.0, rate, 0.01);
        let (estimate, next) = filtered_ref_accel(prs, rate, dt);
        prop_assert_eq!(estimate, 0.0);
        prop_assert_eq!(next.filter_state, rate);
        prop_assert!(close(next.theta_ref, rate * dt, 1.0));
    }

    #[test]
    fn rk4_is_exact_for_cubics(c in prop::array::uniform4(-3.0f64..3.0), t in -5.0f64..5.0, h in 0.0f64..1.0) {
        let poly = |t: f64| c[0] + c[1] * t + c[2] * t * t + c[3] * t * t * t;
        let next = rk4_step::<()>(t, &[poly(t)], h, |t, _| {
            Ok(vec![c[1] + 2.0 * c[2] * t + 3.0 * c[3] * t * t])
        })
        .unwrap();
        prop_assert!(close(next[0], poly(t + h), poly(t + h).abs() * 100.0));
    }
}
