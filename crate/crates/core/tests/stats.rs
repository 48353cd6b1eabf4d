use fate::stats::{vargha_delaney_a12, wilcoxon_rank_sum, TestMethod};
use proptest::prelude::*;

/// Two-sided p of U by listing every way to place the first sample's
/// ranks among `1..=n`.
fn enumerated_p(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() + y.len();
    let mut pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    pooled.sort_by(f64::total_cmp);
    let rank_sum: usize = x.iter().map(|v| pooled.iter().position(|p| p == v).unwrap() + 1).sum();
    let offset = x.len() * (x.len() + 1) / 2;
    let observed = rank_sum - offset;
    let (mut le, mut ge, mut total) = (0u64, 0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != x.len() {
            continue;
        }
        let u: usize = (0..n).filter(|b| mask & (1 << b) != 0).map(|b| b + 1).sum::<usize>() - offset;
        total += 1;
        le += u64::from(u <= observed);
        ge += u64::from(u >= observed);
    }
    (2.0 * le.min(ge) as f64 / total as f64).min(1.0)
}

fn distinct_samples() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..=9)
        .prop_flat_map(|nx| (Just(nx), 1usize..=(10 - nx)))
        .prop_flat_map(|(nx, ny)| {
            proptest::sample::subsequence((0..40).map(f64::from).collect::<Vec<_>>(), nx + ny)
                .prop_shuffle()
                .prop_map(move |v| (v[..nx].to_vec(), v[nx..].to_vec()))
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn exact_mode_matches_enumeration((x, y) in distinct_samples()) {
        let r = wilcoxon_rank_sum(&x, &y).unwrap();
        prop_assert_eq!(r.method, TestMethod::Exact);
        prop_assert!((r.p_value - enumerated_p(&x, &y)).abs() < 1e-12);
    }

    #[test]
    fn swapping_samples_mirrors_a12(
        x in proptest::collection::vec(0u8..15, 1..25),
        y in proptest::collection::vec(0u8..15, 1..25),
    ) {
        let x: Vec<f64> = x.into_iter().map(f64::from).collect();
        let y: Vec<f64> = y.into_iter().map(f64::from).collect();
        let xy = wilcoxon_rank_sum(&x, &y).unwrap();
        let yx = wilcoxon_rank_sum(&y, &x).unwrap();
        prop_assert!((xy.a12 + yx.a12 - 1.0).abs() < 1e-12);
        prop_assert!((xy.p_value - yx.p_value).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&xy.p_value));
        if xy.method == TestMethod::Exact {
            prop_assert!(x.len() + y.len() <= 12);
        }
    }

    #[test]
    fn shifting_both_samples_changes_nothing(
        x in proptest::collection::vec(0u8..15, 1..20),
        y in proptest::collection::vec(0u8..15, 1..20),
        shift in -100i32..100,
    ) {
        let fx: Vec<f64> = x.iter().map(|&v| f64::from(v)).collect();
        let fy: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
        let sx: Vec<f64> = fx.iter().map(|v| v + f64::from(shift)).collect();
        let sy: Vec<f64> = fy.iter().map(|v| v + f64::from(shift)).collect();
        prop_assert_eq!(wilcoxon_rank_sum(&fx, &fy).unwrap(), wilcoxon_rank_sum(&sx, &sy).unwrap());
    }
}

#[test]
fn golden_cases() {
    let r = wilcoxon_rank_sum(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
    assert!((r.p_value - 1.0 / 3.0).abs() < 1e-9);
    assert_eq!(vargha_delaney_a12(&[3.0, 4.0], &[1.0, 2.0]).unwrap(), 1.0);
    assert_eq!(vargha_delaney_a12(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.5);
    assert_eq!(vargha_delaney_a12(&[1.0, 3.0], &[2.0, 4.0]).unwrap(), 0.25);
}

#[test]
fn separated_samples_are_significant() {
    use rand_distr::{Distribution, Normal};
    let mut rng = fate::seed::rng(17);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let x: Vec<f64> = (0..30).map(|_| noise.sample(&mut rng)).collect();
    let y: Vec<f64> = (0..30).map(|_| 10.0 + noise.sample(&mut rng)).collect();
    let r = wilcoxon_rank_sum(&x, &y).unwrap();
    assert_eq!(r.method, TestMethod::NormalApprox);
    assert_eq!(r.u_statistic, 0.0);
    // normal approximation: z = (450 - 0.5) / sqrt(30 * 30 * 61 / 12)
    let z: f64 = 449.5 / (30.0f64 * 30.0 * 61.0 / 12.0).sqrt();
    assert!(z > 6.0);
    assert!(r.p_value < 0.05);
    assert!(r.p_value < 1e-9);
}
