//! End-to-end paths: catalog specs through classification and operators.

use colombeau::catalog::{build_kernel, build_net, KernelSpec, NetSpec};
use colombeau::hermite::{
    coefficient_decay_check, hermite_values, verify_inclusion_bound, DecayDirection,
    HermiteExpansion,
};
use colombeau::net::{EpsilonGrid, SamplingBox};
use colombeau::operators::{
    kernel_growth_check, GeneralizedOperator, QuadratureSpec,
};
use colombeau::seminorms::{classify_power_growth, classify_tempered, MuSpec, Verdict};
use colombeau::weights::WeightSequence;

fn grid() -> EpsilonGrid {
    EpsilonGrid::geometric(8).unwrap()
}

#[test]
fn mollifier_is_moderate_of_order_one() {
    let spec = NetSpec::from_json_str(r#"{"family": "mollifier"}"#).unwrap();
    let net = build_net(&spec, &grid(), 1).unwrap();
    let bounds = SamplingBox::new(8.0, 121).unwrap();
    let report = classify_tempered(&net, 0, &bounds, 8).unwrap();
    assert_eq!(report.verdict, Verdict::Moderate(1), "{:?}", report.diagnostics);
    assert_eq!(report.chosen_q, Some(0));
    assert!(!report.boundary_flag);
    assert!((report.slope - 1.0).abs() < 0.05, "slope {}", report.slope);
}

#[test]
fn eps_exponential_with_negative_coefficient_is_negligible() {
    let spec = NetSpec::from_json_str(
        r#"{"family": "eps_exponential", "coefficient": -1.0}"#,
    )
    .unwrap();
    let net = build_net(&spec, &grid(), 1).unwrap();
    let bounds = SamplingBox::new(6.0, 81).unwrap();
    let report =
        classify_power_growth(&net, &MuSpec::new(0, 0).unwrap(), &bounds, 8).unwrap();
    assert_eq!(report.verdict, Verdict::Negligible);
}

#[test]
fn growing_gaussian_escapes_the_polynomial_scale() {
    let spec = NetSpec::from_json_str(r#"{"family": "gaussian", "rate": -1.0}"#).unwrap();
    let net = build_net(&spec, &grid(), 1).unwrap();
    let bounds = SamplingBox::new(8.0, 121).unwrap();
    let report = classify_tempered(&net, 0, &bounds, 8).unwrap();
    assert_eq!(report.verdict, Verdict::Neither);
    assert!(report.boundary_flag);
    assert_eq!(report.chosen_q, None);
}

#[test]
fn regularized_series_is_bounded_on_the_polynomial_scale() {
    let spec = NetSpec::from_json_str(
        r#"{
            "family": "hermite_series",
            "coefficients": [1, 1, 1, 1, 1, 1, 1, 1, 1],
            "regularize": {"weights": {"gevrey": {"s": 2.0}}, "h": 1.0}
        }"#,
    )
    .unwrap();
    let net = build_net(&spec, &grid(), 1).unwrap();
    let bounds = SamplingBox::new(8.0, 121).unwrap();
    let report =
        classify_power_growth(&net, &MuSpec::new(0, 0).unwrap(), &bounds, 8).unwrap();
    assert_eq!(report.verdict, Verdict::Moderate(0), "{:?}", report.diagnostics);
}

#[test]
fn inclusion_constant_for_regularized_series() {
    let weights = WeightSequence::gevrey(2.0, 256).unwrap();
    // coefficients at the admissible-decay border: b_n = e^{−M(√n)}
    let coeffs: Vec<f64> = (0..=64)
        .map(|n| {
            let rho = (n as f64).sqrt();
            (-weights.associated_function(rho).unwrap().value).exp()
        })
        .collect();
    let expansion = HermiteExpansion::new(coeffs).unwrap();
    let decay = coefficient_decay_check(&expansion, &weights, 1.0, DecayDirection::Decay)
        .unwrap();
    assert!(decay.pass, "violations: {}", decay.violations);
    let report = verify_inclusion_bound(&expansion, &weights, 1.0, &grid()).unwrap();
    assert!(report.finite);
    assert!(report.nondecreasing);
    assert!(report.sup <= 1.0 + 1e-12);
}

#[test]
fn gaussian_operator_keeps_the_mollifier_moderate() {
    let kernel = build_kernel(
        &KernelSpec::from_json_str(r#"{"family": "gaussian", "rate": 1.0}"#).unwrap(),
        &grid(),
        1,
    )
    .unwrap();
    let op = GeneralizedOperator::new(kernel, QuadratureSpec::new(32).unwrap());
    let input = build_net(&NetSpec::Mollifier, &grid(), 1).unwrap();
    let output = op.apply_as_net(&input).unwrap();
    let bounds = SamplingBox::new(6.0, 81).unwrap();
    let report = classify_tempered(&output, 0, &bounds, 8).unwrap();
    assert_eq!(report.verdict, Verdict::Moderate(0), "{:?}", report.diagnostics);
    assert_eq!(report.chosen_q, Some(0));
    // the mollifier acts like δ: A μ_ε → K(·, 0) = e^{−x²} as ε → 0
    let finest = *grid().values().last().unwrap();
    let got = output.field_at(finest).unwrap().value(&[0.4]);
    let want = (-0.16f64).exp();
    assert!((got - want).abs() < 1e-4 * want, "{got} vs {want}");
}

#[test]
fn squared_monomial_kernel_growth_exponents() {
    let kernel = build_kernel(
        &KernelSpec::from_json_str(r#"{"family": "monomial", "px": 2, "py": 2}"#).unwrap(),
        &grid(),
        1,
    )
    .unwrap();
    let op = GeneralizedOperator::new(kernel, QuadratureSpec::new(16).unwrap());
    let sq = op.power(2).unwrap();
    let bounds = SamplingBox::new(6.0, 21).unwrap();
    let report = kernel_growth_check(sq.kernel(), 2, 2, &bounds, false).unwrap();
    assert!((report.slope - 2.5).abs() < 0.01, "slope {}", report.slope);
    assert!(report.exceeds_stated);
    assert!(report.within_corrected);
}

#[test]
fn exponential_of_catalog_rank_one_kernel() {
    let kernel = build_kernel(
        &KernelSpec::from_json_str(r#"{"family": "rank_one", "i": 0, "j": 0}"#).unwrap(),
        &grid(),
        1,
    )
    .unwrap();
    let op = GeneralizedOperator::new(kernel, QuadratureSpec::new(24).unwrap());
    let phi = build_net(
        &NetSpec::from_json_str(r#"{"family": "hermite_series", "coefficients": [1]}"#)
            .unwrap(),
        &grid(),
        1,
    )
    .unwrap();
    let eps = 0.25;
    let out = op.exp_apply(&phi, eps, &[0.3], 40, 1e-13).unwrap();
    assert!(out.converged);
    let c = (1.0f64 + eps).powf(-0.5);
    let want = hermite_values(0, 0.3)[0] * c.exp();
    assert!((out.value - want).abs() < 1e-10, "{} vs {want}", out.value);
}
