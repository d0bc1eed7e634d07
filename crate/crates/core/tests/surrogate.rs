use bridge_core::acquisition::expected_improvement;
use bridge_core::pool::SubsetVector;
use bridge_core::scalarization::tch;
use bridge_core::surrogate::{fit_gp, kernel, GPModel, KernelParams};
use proptest::prelude::*;

// Reference values from an independent closed-form evaluation in f64.
const MATERN: [(&str, &str, f64, f64, f64); 3] = [
    ("1000", "0000", 1.0, 1.0, 0.5239941088318203),
    ("1100", "0000", 1.5, 0.7, 0.3902168502870656),
    ("1111", "0000", 2.0, 2.0, 1.0479882176636406),
];

const EI: [(f64, f64, f64, f64); 3] = [
    (0.3, 0.5, 0.1, 0.3933039556972636),
    (-0.2, 2.0, 0.4, 0.31421848264721985),
    (1.0, 0.01, 0.0, 1.0),
];

#[test]
fn matern_matches_reference() {
    for (a, b, l, s, want) in MATERN {
        let p = KernelParams::new(l, s, 1e-6).unwrap();
        let a = SubsetVector::from_bit_str(a).unwrap();
        let b = SubsetVector::from_bit_str(b).unwrap();
        let got = kernel(&a, &b, &p).unwrap();
        assert!((got - want).abs() < 1e-14, "{got} vs {want}");
    }
}

#[test]
fn expected_improvement_matches_reference() {
    for (mean, var, inc, want) in EI {
        let got = expected_improvement(mean, var, inc).unwrap();
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }
}

#[test]
fn fixed_params_single_point_posterior() {
    // One observation, target standardization is the identity: mean k/(s+n) y.
    let x = SubsetVector::from_bit_str("101").unwrap();
    let p = KernelParams::new(1.0, 1.0, 0.01).unwrap();
    let model = GPModel::with_params(std::slice::from_ref(&x), &[0.0], p).unwrap();
    let (mu, var) = model.posterior(&x).unwrap();
    assert!(mu.abs() < 1e-12);
    let expected = 1.0 - 1.0 / (1.0 + 0.01 + model.jitter());
    assert!((var - expected).abs() < 1e-12, "{var} vs {expected}");
}

fn bits(m: usize) -> impl Strategy<Value = SubsetVector> {
    proptest::collection::vec(any::<bool>(), m).prop_map(|mut b| {
        if !b.iter().any(|&x| x) {
            b[0] = true;
        }
        SubsetVector::new(b)
    })
}

fn data() -> impl Strategy<Value = (Vec<SubsetVector>, Vec<f64>, SubsetVector)> {
    (1usize..10, 1usize..8).prop_flat_map(|(m, t)| {
        (
            proptest::collection::vec(bits(m), t),
            proptest::collection::vec(-3.0f64..3.0, t),
            bits(m),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn posterior_variance_is_between_zero_and_prior((x, y, q) in data()) {
        let model = fit_gp(&x, &y).unwrap();
        let (mu, var) = model.posterior(&q).unwrap();
        let prior = model.params().signal_var * model.target_std().powi(2);
        prop_assert!(mu.is_finite());
        prop_assert!(var >= 0.0);
        prop_assert!(var <= prior * (1.0 + 1e-9));
    }

    #[test]
    fn kernel_is_symmetric_and_peaks_on_the_diagonal(a in bits(6), b in bits(6), l in 0.2f64..5.0, s in 0.1f64..3.0) {
        let p = KernelParams::new(l, s, 1e-4).unwrap();
        let ab = kernel(&a, &b, &p).unwrap();
        prop_assert_eq!(ab, kernel(&b, &a, &p).unwrap());
        prop_assert!(ab <= kernel(&a, &a, &p).unwrap());
        prop_assert!(ab > 0.0);
    }

    #[test]
    fn expected_improvement_is_nonnegative_and_monotone(mean in -3.0f64..3.0, var in 0.0f64..4.0, inc in -3.0f64..3.0, d in 0.0f64..1.0) {
        let ei = expected_improvement(mean, var, inc).unwrap();
        prop_assert!(ei >= 0.0);
        prop_assert!(ei >= (mean - inc).max(0.0) - 1e-12);
        prop_assert!(expected_improvement(mean + d, var, inc).unwrap() >= ei - 1e-12);
    }

    #[test]
    fn tch_lies_between_its_two_terms(
        rows in proptest::collection::vec((0.0f64..1.0, 1usize..20), 1..12),
        beta in 0.0f64..=1.0,
    ) {
        let g: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let c: Vec<usize> = rows.iter().map(|r| r.1).collect();
        let h = tch(&g, &c, beta).unwrap();
        let g_max = g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for ((hi, gi), ci) in h.iter().zip(&g).zip(&c) {
            prop_assert!(*hi <= 0.0);
            prop_assert!(*hi >= -(1.0 - beta) * *ci as f64 - 1e-12);
            prop_assert!(*hi >= beta * (gi - g_max) - 1e-12);
        }
    }
}
