use duplex_sim::channel::{bessel_j0, ChannelStats, OfdmOperator, SubcarrierPlan};
use duplex_sim::frames::{build_schedule, validate_schedule, FrameParams, Scheme};
use duplex_sim::math::CMat;
use duplex_sim::phylink::{dl_rate_closed, ul_rate_closed, zf_effective_gains};
use duplex_sim::pilot::{build_pilot_book, ObservationModel};
use duplex_sim::prediction::{ddwp_weights, wp_weights, LsRecovery, SiProfile};
use duplex_sim::C64;
use proptest::prelude::*;

const SCHEMES: [&str; 12] = [
    "TDD-1",
    "TDD-1-NOP",
    "TDD-1-ES",
    "TDD-1-TG",
    "MDD-1",
    "MDD-1(1)",
    "MDD-1(4)",
    "MDD-1-PA",
    "TDD-2",
    "TDD-2-TG",
    "MDD-2",
    "IBFD-1",
];

fn stats(betas: Vec<f64>) -> ChannelStats {
    ChannelStats::new(betas, 4, 96).unwrap()
}

fn model(noise: f64) -> ObservationModel {
    ObservationModel {
        pilot_power: 1.0,
        ratio: 32.0 / 96.0,
        noise,
    }
}

fn min_eig(m: &CMat) -> f64 {
    m.clone().symmetric_eigenvalues().min()
}

fn unit_symbols(phases: &[f64], rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |r, c| {
        C64::from_polar(1.0, phases[(r * cols + c) % phases.len()])
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bessel_is_bounded(x in 0.0f64..200.0) {
        prop_assert!(bessel_j0(x).abs() <= 1.0 + 1e-15);
    }

    #[test]
    fn wp_splits_tap_power(
        beta in 0.1f64..10.0,
        alpha in 0.5f64..0.999,
        order in 1usize..8,
        noise in 1e-3f64..1.0,
    ) {
        let st = stats(vec![beta, 1.0]);
        let ages: Vec<usize> = (1..=order).collect();
        let w = wp_weights(&st, 0, alpha, &ages, &SiProfile::zeros(order), &model(noise)).unwrap();
        let op = OfdmOperator::new(96, 4).unwrap();
        for m in [0, 17, 95] {
            let sum = w.predicted_variance(&op, m) + w.error_variance(&op, m);
            prop_assert!((sum - st.rh(0)).abs() <= 1e-10 * st.rh(0));
        }
        prop_assert!(min_eig(&w.upsilon) >= -1e-12 * beta);
        prop_assert!(min_eig(&(&w.rg - &w.upsilon)) >= -1e-12 * beta);
        prop_assert!(w.upsilon.trace().re <= w.rg.trace().re * (1.0 + 1e-12));
    }

    #[test]
    fn more_pilots_never_hurt(alpha in 0.3f64..0.999, noise in 1e-3f64..1.0, order in 1usize..7) {
        let st = stats(vec![1.0]);
        let trace = |z: usize| {
            let ages: Vec<usize> = (1..=z).collect();
            wp_weights(&st, 0, alpha, &ages, &SiProfile::zeros(z), &model(noise)).unwrap().upsilon.trace().re
        };
        prop_assert!(trace(order + 1) >= trace(order) - 1e-12);
    }

    #[test]
    fn self_interference_never_helps(
        alpha in 0.5f64..0.999,
        noise in 1e-3f64..0.5,
        si in proptest::collection::vec(0.0f64..1.0, 5),
        extra in 1e-3f64..1.0,
        at in 0usize..5,
    ) {
        let st = stats(vec![2.0, 0.5]);
        let ages = [1, 2, 3, 4, 5];
        let base = wp_weights(&st, 1, alpha, &ages, &SiProfile(si.clone()), &model(noise)).unwrap();
        let mut raised = si;
        raised[at] += extra;
        let worse = wp_weights(&st, 1, alpha, &ages, &SiProfile(raised), &model(noise)).unwrap();
        prop_assert!(worse.error_trace() >= base.error_trace() - 1e-12);
    }

    #[test]
    fn dd_prediction_power_is_bounded(
        alpha in 0.0f64..0.999,
        noise in 1e-3f64..1.0,
        phases in proptest::collection::vec(0.0f64..6.3, 21),
    ) {
        let st = stats(vec![1.0, 0.3, 3.0]);
        let ages = [1, 2, 3, 4, 5, 6, 7];
        let sym = unit_symbols(&phases, 7, 3);
        let w = ddwp_weights(&st, alpha, &ages, &sym, &SiProfile::zeros(7), 1.0, noise).unwrap();
        for d in 0..3 {
            let t = w.theta[(d, d)].re;
            prop_assert!(t >= -1e-14 && t <= st.rh(d) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn zf_with_perfect_estimate_is_interference_free(
        re_im in proptest::collection::vec(-1.0f64..1.0, 2 * 4 * 16),
    ) {
        let h = CMat::from_fn(4, 16, |r, c| C64::new(re_im[2 * (r * 16 + c)], re_im[2 * (r * 16 + c) + 1]));
        let w = zf_effective_gains(&h, &h).unwrap();
        let scale = w.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for r in 0..4 {
            for c in 0..4 {
                if r != c {
                    prop_assert!(w[(r, c)].norm() <= 1e-10 * scale);
                }
            }
            prop_assert!(w[(r, r)].im.abs() <= 1e-10 * scale && w[(r, r)].re > 0.0);
        }
    }

    #[test]
    fn closed_form_rates_are_monotone(
        f1 in 0.0f64..1.0,
        f2 in 0.0f64..1.0,
        noise in 1e-3f64..1.0,
    ) {
        let (lo, hi) = if f1 < f2 { (f1, f2) } else { (f2, f1) };
        let rh = 2.0;
        prop_assert!(dl_rate_closed(lo * rh, rh, 32, 8, 1.0, 0.01, noise) <= dl_rate_closed(hi * rh, rh, 32, 8, 1.0, 0.01, noise));
        prop_assert!(ul_rate_closed(lo * rh, 7.0, 32, 1.0, 0.01, noise) <= ul_rate_closed(hi * rh, 7.0, 32, 1.0, 0.01, noise));
    }

    #[test]
    fn pilots_stay_orthogonal(
        (spacing, users) in (1usize..5).prop_flat_map(|s| (Just(s), 1usize..9)),
        taps in 1usize..5,
    ) {
        // Uplink comb of users * taps * spacing subcarriers, a quarter of the band.
        let m_ul = users * taps * spacing;
        let m_sum = 4 * m_ul;
        let op = OfdmOperator::new(m_sum, taps).unwrap();
        let plan = SubcarrierPlan::interleaved(m_sum, m_ul).unwrap();
        let book = build_pilot_book(users, &plan, &op).unwrap();
        prop_assert!(book.orthogonality_error() < 1e-12);
    }

    #[test]
    fn ls_recovery_is_a_left_inverse(taps in 1usize..9, extra in 0usize..3) {
        let m_ul = taps * (extra + 1) * 2;
        let m_sum = 3 * m_ul;
        let op = OfdmOperator::new(m_sum, taps).unwrap();
        let plan = SubcarrierPlan::interleaved(m_sum, m_ul).unwrap();
        let rec = LsRecovery::new(&op, plan.ul()).unwrap();
        let a = CMat::from_fn(m_ul, taps, |k, t| op.f_psi()[(plan.ul()[k], t)]);
        let ja = rec.matrix() * a;
        prop_assert!((ja - CMat::identity(taps, taps)).norm() < 1e-10);
    }

    #[test]
    fn plan_partitions_subcarriers(m_ul in 1usize..48) {
        let plan = SubcarrierPlan::interleaved(96, m_ul).unwrap();
        let mut all: Vec<usize> = plan.dl().iter().chain(plan.ul()).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..96).collect::<Vec<_>>());
        prop_assert_eq!(plan.ul().len(), m_ul);
    }

    #[test]
    fn every_built_schedule_is_valid(idx in 0usize..SCHEMES.len(), t in 16usize..120) {
        let scheme: Scheme = SCHEMES[idx].parse().unwrap();
        let s = build_schedule(scheme, t, &FrameParams::default()).unwrap();
        prop_assert!(validate_schedule(&s).is_empty(), "{:?}", validate_schedule(&s));
        prop_assert_eq!(s.symbols.len(), t);
        let again = build_schedule(scheme, t, &FrameParams::default()).unwrap();
        prop_assert_eq!(s, again);
    }
}

#[test]
fn useless_dd_predictor_predicts_nothing() {
    let st = stats(vec![1.0, 2.0]);
    let sym = unit_symbols(&[0.3, 1.1, 2.5], 3, 2);
    let w = ddwp_weights(&st, 0.0, &[1, 2, 3], &sym, &SiProfile::zeros(3), 1.0, 0.1).unwrap();
    assert_eq!(w.theta.norm(), 0.0);
}
