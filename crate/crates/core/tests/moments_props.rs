use krylov::moments::*;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::prelude::*;

fn squares_strategy(max_len: usize) -> impl Strategy<Value = Vec<BigRational>> {
    prop::collection::vec((1i64..60, 1i64..16), 1..=max_len)
        .prop_map(|v| v.into_iter().map(|(p, q)| BigRational::new(BigInt::from(p), BigInt::from(q))).collect())
}

/// det of an exact square matrix by fraction-preserving elimination.
fn det(mut a: Vec<Vec<BigRational>>) -> BigRational {
    let n = a.len();
    let mut d = BigRational::one();
    for col in 0..n {
        let Some(p) = (col..n).find(|&r| !a[r][col].is_zero()) else {
            return BigRational::zero();
        };
        if p != col {
            a.swap(p, col);
            d = -d;
        }
        let piv = a[col][col].clone();
        d *= &piv;
        for r in col + 1..n {
            let f = &a[r][col] / &piv;
            if f.is_zero() {
                continue;
            }
            for c in col..n {
                let v = &f * &a[col][c];
                a[r][c] -= v;
            }
        }
    }
    d
}

/// D_n = det(m_{i+j}), 0 ≤ i, j ≤ n, with odd moments zero; D_{−1} = 1.
fn hankel(mu: &[BigRational], n: isize) -> BigRational {
    if n < 0 {
        return BigRational::one();
    }
    let n = n as usize;
    let m = |k: usize| if k % 2 == 1 { BigRational::zero() } else { mu[k / 2].clone() };
    det((0..=n).map(|i| (0..=n).map(|j| m(i + j)).collect()).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn exact_round_trip_from_moments(sq in squares_strategy(20)) {
        let count = sq.len();
        let m = lanczos_to_moments(&LanczosSquares::exact(sq).unwrap(), count).unwrap();
        prop_assert!(m.len() <= 21);
        let b = moments_to_lanczos(&m, count).unwrap();
        prop_assert_eq!(lanczos_to_moments(&b, count).unwrap(), m);
    }

    #[test]
    fn exact_round_trip_from_coefficients(sq in squares_strategy(10)) {
        let count = sq.len();
        let b = LanczosSquares::exact(sq).unwrap();
        let back = moments_to_lanczos(&lanczos_to_moments(&b, count).unwrap(), count).unwrap();
        prop_assert_eq!(back, b);
    }

    #[test]
    fn float_round_trip(b in prop::collection::vec(0.05f64..20.0, 1..=10)) {
        let count = b.len();
        let sq = LanczosSquares::from_coefficients(&b, 256).unwrap();
        let back = moments_to_lanczos(&lanczos_to_moments(&sq, count).unwrap(), count).unwrap();
        for (x, y) in b.iter().zip(back.coefficients_f64()) {
            prop_assert!(((x - y) / x).abs() <= 1e-12, "{} vs {}", x, y);
        }
    }

    #[test]
    fn recurrence_matches_hankel_oracle(sq in squares_strategy(10)) {
        let count = sq.len();
        let m = lanczos_to_moments(&LanczosSquares::exact(sq).unwrap(), count).unwrap();
        let b = moments_to_lanczos(&m, count).unwrap();
        let mu = m.values();
        for n in 1..=count as isize {
            let oracle = hankel(mu, n - 2) * hankel(mu, n) / (hankel(mu, n - 1).pow(2));
            prop_assert_eq!(&b.squares()[n as usize - 1], &oracle);
        }
    }

    #[test]
    fn invalid_sequences_fail_at_first_bad_hankel(sq in squares_strategy(6), cut in 0usize..6) {
        // lowering μ_{2k} below its valid value makes D_k negative first
        let count = sq.len();
        let k = 1 + cut % count;
        let m = lanczos_to_moments(&LanczosSquares::exact(sq).unwrap(), count).unwrap();
        let mut v = m.values().to_vec();
        let drop = hankel(&v, k as isize) / hankel(&v, k as isize - 1) + BigRational::one();
        v[k] -= drop;
        let bad = MomentSequence::exact(v.clone()).unwrap();
        prop_assert!(hankel(&v, k as isize) < BigRational::zero());
        match moments_to_lanczos(&bad, count) {
            Err(MomentError::InvalidMomentSequence { order }) => prop_assert_eq!(order, k),
            other => prop_assert!(false, "{:?}", other),
        }
    }
}
