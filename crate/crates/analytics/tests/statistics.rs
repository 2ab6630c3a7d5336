use proptest::prelude::*;
use triadtale_analytics::{cronbach_alpha, paired_t, score_chs, t_to_p};

/// Single-pass textbook formulas, deliberately a different route from the
/// library's two-pass implementation.
fn oracle_paired(pre: &[f64], post: &[f64]) -> (f64, f64) {
    let n = pre.len() as f64;
    let (mut s, mut ss) = (0.0, 0.0);
    for (a, b) in pre.iter().zip(post) {
        let d = b - a;
        s += d;
        ss += d * d;
    }
    let var = (ss - s * s / n) / (n - 1.0);
    let sd = var.sqrt();
    let mean = s / n;
    (mean / (sd / n.sqrt()), mean / sd)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

fn paired_samples() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..=50).prop_flat_map(|n| {
        (
            prop::collection::vec(1u8..=6, n),
            prop::collection::vec(-3i8..=3, n),
        )
            .prop_map(|(pre, delta)| {
                let pre: Vec<f64> = pre.into_iter().map(f64::from).collect();
                let post = pre.iter().zip(&delta).map(|(p, d)| p + f64::from(*d)).collect();
                (pre, post)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn paired_t_matches_single_pass_oracle((pre, post) in paired_samples()) {
        if let Ok(r) = paired_t(&pre, &post) {
            let (t, dz) = oracle_paired(&pre, &post);
            prop_assert!(close(r.t, t, 1e-9), "t {} vs {}", r.t, t);
            prop_assert!(close(r.d_z, dz, 1e-9));
            prop_assert_eq!(r.df as usize, pre.len() - 1);
            prop_assert!(r.p_two_tailed > 0.0 && r.p_two_tailed <= 1.0);
            prop_assert!(r.t == 0.0 || r.t.signum() == r.mean_diff.signum());
        }
    }

    #[test]
    fn t_is_shift_and_scale_invariant(
        (pre, post) in paired_samples(),
        shift in -100.0f64..100.0,
        scale in 0.01f64..100.0,
    ) {
        if let Ok(base) = paired_t(&pre, &post) {
            let shifted = paired_t(
                &pre.iter().map(|v| v + shift).collect::<Vec<_>>(),
                &post.iter().map(|v| v + shift).collect::<Vec<_>>(),
            ).unwrap();
            prop_assert!(close(shifted.t, base.t, 1e-9));
            let scaled = paired_t(
                &pre.iter().map(|v| v * scale).collect::<Vec<_>>(),
                &post.iter().map(|v| v * scale).collect::<Vec<_>>(),
            ).unwrap();
            prop_assert!(close(scaled.t, base.t, 1e-9));
            prop_assert!(close(scaled.d_z, base.d_z, 1e-9));
        }
    }

    #[test]
    fn p_is_symmetric_and_decreasing(t in 0.0f64..40.0, dt in 0.01f64..5.0, df in 1u32..200) {
        let p = t_to_p(t, df).unwrap();
        prop_assert_eq!(p, t_to_p(-t, df).unwrap());
        let further = t_to_p(t + dt, df).unwrap();
        prop_assert!(further < p, "p({}) = {} !< p({}) = {}", t + dt, further, t, p);
    }

    #[test]
    fn alpha_never_exceeds_one(rows in prop::collection::vec(prop::collection::vec(1u8..=7, 4), 2..30)) {
        let m: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|&v| f64::from(v)).collect()).collect();
        if let Ok(r) = cronbach_alpha(&m) {
            prop_assert!(r.alpha <= 1.0 + 1e-12);
        }
    }
}

#[test]
fn chs_total_is_sum_of_subscales_exhaustively() {
    let mut count = 0;
    for code in 0..6u32.pow(6) {
        let mut c = code;
        let items: Vec<i32> = (0..6)
            .map(|_| {
                let v = (c % 6) as i32 + 1;
                c /= 6;
                v
            })
            .collect();
        let s = score_chs(&items).unwrap();
        assert_eq!(s.total, s.agency + s.pathways);
        assert!((6..=36).contains(&s.total));
        assert!((3..=18).contains(&s.agency) && (3..=18).contains(&s.pathways));
        count += 1;
    }
    assert_eq!(count, 46_656);
}
