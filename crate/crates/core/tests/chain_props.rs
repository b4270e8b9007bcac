use krylov::closed_forms::finite_chain_modes;
use krylov::evolve::*;
use krylov::observables::{complexity, entropy};
use krylov::sequence::*;
use krylov::wnumber::*;
use proptest::prelude::*;

fn family() -> impl Strategy<Value = (LanczosSequence, f64)> {
    // (sequence, horizon in units of 1/α)
    prop_oneof![
        (0.5f64..2.0).prop_map(|a| (LanczosSequence::SqrtGrowth { alpha: a }, 20.0 / a)),
        (0.5f64..2.0, 0.3f64..0.8).prop_map(|(a, d)| (LanczosSequence::PowerLaw { alpha: a, delta: d }, 20.0 / a)),
        (0.5f64..2.0).prop_map(|a| (LanczosSequence::LogGrowth { alpha: a, gamma0: 0.5, offset: 1 }, 20.0 / a)),
        (0.5f64..2.0).prop_map(|b| (LanczosSequence::Constant { b }, 20.0 / b)),
        (0.5f64..2.0, 1u32..12).prop_map(|(a, j)| (LanczosSequence::Su2 { alpha: a, two_j: j }, 20.0 / a)),
        (0.5f64..2.0, 0.5f64..3.0).prop_map(|(a, e)| (LanczosSequence::SykLike { alpha: a, eta: e }, 4.0 / a)),
        (0.5f64..2.0).prop_map(|a| (LanczosSequence::Linear { alpha: a, gamma: 0.3 }, 4.0 / a)),
    ]
}

fn cfg(t_max: f64, count: usize) -> EvolveConfig {
    EvolveConfig { t_max, samples: SampleGrid::Uniform { count }, ..Default::default() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn norm_is_conserved((seq, t_max) in family()) {
        for st in evolve(&seq, &cfg(t_max, 21)).unwrap() {
            prop_assert!(st.norm_error <= 1e-9, "t = {}: {:e}", st.t, st.norm_error);
            prop_assert!(st.tail_mass <= 1e-26 || seq.is_finite());
        }
    }

    #[test]
    fn entropy_within_window_bound((seq, t_max) in family()) {
        for st in evolve(&seq, &cfg(t_max.min(10.0), 11)).unwrap() {
            let s = entropy(&st);
            prop_assert!(s >= 0.0);
            prop_assert!(s <= (st.active_size() as f64).ln() + 1e-12);
        }
    }

    #[test]
    fn time_reversal_returns_to_site_zero((seq, _) in family(), t in 0.5f64..3.0) {
        let c = cfg(t, 2);
        let mut prop = Propagator::new(&seq, &c).unwrap();
        let mut st = prop.initial_state();
        prop.advance(&mut st, t).unwrap();
        prop.advance(&mut st, 0.0).unwrap();
        prop_assert_eq!(st.t, 0.0);
        for (n, a) in st.amplitudes.iter().enumerate() {
            let want = if n == 0 { 1.0 } else { 0.0 };
            prop_assert!((a - want).abs() <= 1e-6, "site {}: {}", n, a);
        }
    }

    #[test]
    fn phi0_is_even_in_time((seq, _) in family(), t in 0.1f64..2.0) {
        let c = cfg(t, 2);
        let mut fwd = Propagator::new(&seq, &c).unwrap();
        let mut a = fwd.initial_state();
        fwd.advance(&mut a, t).unwrap();
        let mut bwd = Propagator::new(&seq, &c).unwrap();
        let mut b = bwd.initial_state();
        bwd.advance(&mut b, -t).unwrap();
        prop_assert!((a.amplitudes[0] - b.amplitudes[0]).abs() <= 1e-9);
        // odd sites flip sign under t → −t
        for n in 1..a.amplitudes.len().min(b.amplitudes.len()).min(20) {
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            prop_assert!((a.amplitudes[n] - sign * b.amplitudes[n]).abs() <= 1e-9);
        }
    }

    #[test]
    fn doubling_guard_band_leaves_complexity((seq, t_max) in family()) {
        let base = cfg(t_max.min(5.0), 11);
        let wide = EvolveConfig { guard_band: 2 * base.guard_band, ..base.clone() };
        let a = evolve(&seq, &base).unwrap();
        let b = evolve(&seq, &wide).unwrap();
        for (x, y) in a.iter().zip(&b).skip(1) {
            let (cx, cy) = (complexity(x), complexity(y));
            prop_assert!((cx - cy).abs() <= 1e-8 * cx, "{} vs {}", cx, cy);
        }
    }

    #[test]
    fn structural_w(b in prop::collection::vec(0.1f64..5.0, 1..=12)) {
        let k = b.len();
        let v = w_number(&LanczosSequence::Explicit { coefficients: b }, 64, 1e-10).unwrap().verdict;
        prop_assert_eq!(v, if k % 2 == 1 { WVerdict::Zero } else { WVerdict::Infinite });
    }

    #[test]
    fn running_integral_of_phi0_tracks_zero_mode(b in prop::collection::vec(0.5f64..2.0, 1..=6)) {
        let modes = finite_chain_modes(&b).unwrap();
        let bound: f64 = modes.modes.iter().map(|m| m.weight / m.omega).sum::<f64>() + 1e-3;
        let t_max = 100.0;
        let seq = LanczosSequence::Explicit { coefficients: b.clone() };
        let states = evolve(&seq, &cfg(t_max, 10_001)).unwrap();
        let h = t_max / 10_000.0;
        let integral: f64 = states.windows(2).map(|w| 0.5 * h * (w[0].amplitudes[0] + w[1].amplitudes[0])).sum();
        if b.len() % 2 == 0 {
            prop_assert!(modes.zero_mode_weight > 0.0);
            prop_assert!((integral - modes.zero_mode_weight * t_max).abs() <= bound);
        } else {
            prop_assert_eq!(modes.zero_mode_weight, 0.0);
            prop_assert!(integral.abs() <= bound);
        }
    }
}

#[test]
fn su2_support_ends_at_two_j() {
    for two_j in 1..=10u32 {
        let seq = LanczosSequence::Su2 { alpha: 1.0, two_j };
        let n = two_j as usize;
        assert!(seq.eval_bn(n).unwrap() > 0.0);
        assert_eq!(seq.eval_bn(n + 1), Err(LanczosError::SupportExceeded { n: n + 1, bound: n }));
    }
}

#[test]
fn k1_chain_quarter_period() {
    let seq = LanczosSequence::Explicit { coefficients: vec![1.0] };
    let st = evolve(&seq, &cfg(std::f64::consts::FRAC_PI_2, 2)).unwrap().pop().unwrap();
    assert!(st.amplitudes[0].abs() < 1e-9);
    assert!((st.amplitudes[1] - 1.0).abs() < 1e-9);
}
