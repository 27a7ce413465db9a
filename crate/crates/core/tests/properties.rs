use doblab::disturbance::DisturbanceSignal;
use doblab::metrics::{first_difference, second_difference};
use doblab::numkit::{eig2, expm2, phi_integral, EigPair2, Mat2};
use doblab::observer::{error_dynamics, hp_gains, ObserverGains, StabilityPolicy};
use doblab::plant::{build_continuous, discretize, lumped_disturbance, ServoParams, StateVec};
use proptest::prelude::*;

fn mat() -> impl Strategy<Value = Mat2> {
    prop::array::uniform4(-2.0f64..2.0).prop_map(|[a, b, c, d]| Mat2::new(a, b, c, d))
}

fn servo_mat() -> impl Strategy<Value = Mat2> {
    (0.1f64..3.0, -50.0f64..0.0).prop_map(|(q, r)| Mat2::new(0.0, q, 0.0, r))
}

fn params() -> impl Strategy<Value = ServoParams> {
    (1e-3f64..1.0, 0.0f64..0.5).prop_map(|(j, b)| ServoParams::new(j, b).unwrap())
}

proptest! {
    #[test]
    fn expm_semigroup(m in prop_oneof![mat(), servo_mat()], s in 0.0f64..0.7, t in 0.0f64..0.7) {
        let whole = expm2(&m.scale(s + t)).unwrap();
        let split = expm2(&m.scale(s)).unwrap() * expm2(&m.scale(t)).unwrap();
        let scale = 1.0 + whole.norm_inf();
        prop_assert!(whole.max_abs_diff(&split) <= 1e-10 * scale);
    }

    #[test]
    fn phi_commutes_and_closes_exponential(m in prop_oneof![mat(), servo_mat()], t in 1e-4f64..0.5) {
        let phi = phi_integral(&m, t).unwrap();
        prop_assert!((phi * m).max_abs_diff(&(m * phi)) < 1e-10);
        let e = expm2(&m.scale(t)).unwrap();
        prop_assert!(e.max_abs_diff(&(Mat2::IDENTITY + m * phi)) < 1e-10);
    }

    #[test]
    fn eig_residual(m in mat()) {
        let eigs = eig2(&m).unwrap();
        for lam in [eigs.0, eigs.1] {
            let residual = lam * lam - lam * m.trace() + m.det();
            prop_assert!(residual.norm() < 1e-9 * (1.0 + m.norm_inf()));
        }
        prop_assert!(eigs.is_self_conjugate(1e-12));
    }

    #[test]
    fn discretization_closes_exponential(p in params(), ts in prop::sample::select(vec![1e-4, 1e-3, 1e-2])) {
        let c = build_continuous(&p).unwrap();
        let d = discretize(&c, ts).unwrap();
        let phi = phi_integral(c.a(), ts).unwrap();
        prop_assert!(d.ad().max_abs_diff(&(Mat2::IDENTITY + *c.a() * phi)) < 1e-10);
        prop_assert_eq!(d.bd(), d.dd());
    }

    #[test]
    fn lumped_superposition(truth in params(), nominal in params(),
                            w in -10.0f64..10.0, u in -5.0f64..5.0, tau in -2.0f64..2.0) {
        let f = |w: f64, u: f64, tau: f64| lumped_disturbance(&truth, &nominal, StateVec::new(0.3, w), u, tau);
        let total = f(w, u, tau);
        let parts = f(w, 0.0, 0.0) + f(0.0, u, 0.0) + f(0.0, 0.0, tau);
        prop_assert!((total - parts).abs() < 1e-9 * (1.0 + total.abs()));
        prop_assert!((f(2.0 * w, 0.0, 0.0) - 2.0 * f(w, 0.0, 0.0)).abs() < 1e-9 * (1.0 + total.abs()));
    }

    #[test]
    fn lumped_identity_when_matched(p in params(), th in -3.0f64..3.0, w in -10.0f64..10.0,
                                    u in -5.0f64..5.0, tau in -2.0f64..2.0) {
        let v = lumped_disturbance(&p, &p, StateVec::new(th, w), u, tau);
        prop_assert!((v - tau).abs() <= 4.0 * f64::EPSILON * (1.0 + tau.abs()));
    }

    #[test]
    fn gain_round_trip(re in -0.95f64..0.95, im in 0.0f64..0.95, other in -0.95f64..0.95,
                       complex in any::<bool>(), p in params()) {
        let eigs = if complex && re * re + im * im < 0.98 {
            EigPair2::conjugate(re, im)
        } else {
            EigPair2::real(re, other)
        };
        let dm = discretize(&build_continuous(&p).unwrap(), 1e-3).unwrap();
        let (g1, g2) = hp_gains(&eigs, dm.dd(), StabilityPolicy::Enforce).unwrap();
        let ed = error_dynamics(&ObserverGains::Hp { gain1: g1, gain2: g2 }, dm.dd());
        prop_assert!(eig2(&ed.matrix).unwrap().distance(&eigs) < 1e-7,
            "eigs {:?} got {:?}", eigs, eig2(&ed.matrix).unwrap());
    }

    #[test]
    fn second_difference_composes(seq in prop::collection::vec(-100.0f64..100.0, 3..40)) {
        let direct = second_difference(&seq).unwrap();
        let composed = first_difference(&first_difference(&seq).unwrap()).unwrap();
        for (a, b) in direct.iter().zip(&composed) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn step_shift_consistency(t0 in 0.0f64..5.0, amp in -3.0f64..3.0, dt in 0.0f64..5.0) {
        let shifted = DisturbanceSignal::Step { t0, amp };
        let base = DisturbanceSignal::Step { t0: 0.0, amp };
        prop_assert_eq!(shifted.eval(t0 + dt), base.eval(dt));
    }
}

/// Exact-tolerance round trip away from repeated roots, where eigenvalues are well conditioned.
#[test]
fn gain_round_trip_listed_pairs() {
    let dm = discretize(&build_continuous(&ServoParams::default()).unwrap(), 1e-3).unwrap();
    let pairs = [
        EigPair2::real(0.0, 0.3),
        EigPair2::real(0.3, -0.3),
        EigPair2::real(-0.3, 0.5),
        EigPair2::conjugate(0.5, 0.5),
        EigPair2::conjugate(0.0, 0.3),
        EigPair2::real(0.3, 0.6),
    ];
    for eigs in pairs {
        let (g1, g2) = hp_gains(&eigs, dm.dd(), StabilityPolicy::Enforce).unwrap();
        let ed = error_dynamics(&ObserverGains::Hp { gain1: g1, gain2: g2 }, dm.dd());
        let got = eig2(&ed.matrix).unwrap();
        assert!(got.distance(&eigs) < 1e-10, "{eigs:?} -> {got:?}");
    }
}

#[test]
fn gain_round_trip_repeated_roots() {
    let dm = discretize(&build_continuous(&ServoParams::default()).unwrap(), 1e-3).unwrap();
    let values = [
        EigPair2::real(0.0, 0.0),
        EigPair2::real(0.3, 0.3),
        EigPair2::real(-0.3, -0.3),
        EigPair2::real(0.5, 0.5),
        EigPair2::real(0.0, -0.3),
        EigPair2::real(0.3, 0.0),
    ];
    for eigs in values {
        let (g1, g2) = hp_gains(&eigs, dm.dd(), StabilityPolicy::Enforce).unwrap();
        let ed = error_dynamics(&ObserverGains::Hp { gain1: g1, gain2: g2 }, dm.dd());
        let got = eig2(&ed.matrix).unwrap();
        assert!(
            got.distance(&eigs) < 1e-10,
            "{eigs:?} -> {got:?} (matrix {:?})",
            ed.matrix
        );
    }
}
