use crate::error::{Error, Result};
use crate::field::{MultiIndex, ScalarField, MAX_DERIVATIVE_ORDER};
use crate::net::{EpsilonGrid, FunctionNet};
use crate::weights::WeightSequence;

/// Highest Hermite index accepted at the public entry points.
pub const MAX_HERMITE_INDEX: usize = 256;

/// Violation slack for coefficient-decay margins, in log units.
const MARGIN_TOL: f64 = 1e-9;

/// Orthonormal Hermite functions h_0 … h_{n_max} at `x`, by the stable
/// three-term recurrence
/// h_{k+1} = x √(2/(k+1)) h_k − √(k/(k+1)) h_{k−1},
/// seeded with h_0 = π^{−1/4} e^{−x²/2}.
pub fn hermite_values(n_max: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_max + 1);
    let h0 = std::f64::consts::PI.powf(-0.25) * (-x * x / 2.0).exp();
    out.push(h0);
    if n_max == 0 {
        return out;
    }
    out.push(x * 2.0f64.sqrt() * h0);
    for k in 1..n_max {
        let kf = k as f64;
        let next = x * (2.0 / (kf + 1.0)).sqrt() * out[k] - (kf / (kf + 1.0)).sqrt() * out[k - 1];
        out.push(next);
    }
    out
}

/// h_n(x) for n ≤ [`MAX_HERMITE_INDEX`].
pub fn hermite_function(n: usize, x: f64) -> Result<f64> {
    if n > MAX_HERMITE_INDEX {
        return Err(Error::HermiteIndex {
            requested: n,
            max: MAX_HERMITE_INDEX,
        });
    }
    Ok(hermite_values(n, x)[n])
}

/// Apply d/dx in coefficient space: h_n' = √(n/2) h_{n−1} − √((n+1)/2) h_{n+1}.
/// The output has one more coefficient than the input.
fn differentiate_coefficients(coeffs: &[f64]) -> Vec<f64> {
    let n = coeffs.len();
    let mut out = vec![0.0; n + 1];
    for (k, &c) in coeffs.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        if k > 0 {
            out[k - 1] += c * (k as f64 / 2.0).sqrt();
        }
        out[k + 1] -= c * ((k + 1) as f64 / 2.0).sqrt();
    }
    out
}

/// d^order/dx^order h_n(x), via the exact coefficient band rule.
pub fn hermite_derivative(n: usize, order: usize, x: f64) -> Result<f64> {
    if n > MAX_HERMITE_INDEX {
        return Err(Error::HermiteIndex {
            requested: n,
            max: MAX_HERMITE_INDEX,
        });
    }
    if order > MAX_DERIVATIVE_ORDER {
        return Err(Error::DerivativeOrder {
            requested: order,
            max: MAX_DERIVATIVE_ORDER,
        });
    }
    let mut coeffs = vec![0.0; n + 1];
    coeffs[n] = 1.0;
    for _ in 0..order {
        coeffs = differentiate_coefficients(&coeffs);
    }
    let values = hermite_values(coeffs.len() - 1, x);
    Ok(coeffs.iter().zip(&values).map(|(c, v)| c * v).sum())
}

/// A finite expansion f = Σ_n b_n h_n.
#[derive(Clone, Debug, PartialEq)]
pub struct HermiteExpansion {
    coefficients: Vec<f64>,
}

impl HermiteExpansion {
    pub fn new(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::invalid("coefficients", "need at least one entry"));
        }
        if coefficients.len() > MAX_HERMITE_INDEX + 1 {
            return Err(Error::HermiteIndex {
                requested: coefficients.len() - 1,
                max: MAX_HERMITE_INDEX,
            });
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("coefficients", "entries must be finite"));
        }
        Ok(HermiteExpansion { coefficients })
    }

    /// The single basis function h_n as an expansion.
    pub fn unit(n: usize) -> Result<Self> {
        let mut coefficients = vec![0.0; n + 1];
        coefficients[n] = 1.0;
        HermiteExpansion::new(coefficients)
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// Highest stored index N.
    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    /// Parse a JSON array of coefficients.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let coefficients: Vec<f64> = serde_json::from_str(text)?;
        HermiteExpansion::new(coefficients)
    }

    pub fn from_json_bytes(bytes: &[u8]) -> Result<Self> {
        let coefficients: Vec<f64> = serde_json::from_slice(bytes)?;
        HermiteExpansion::new(coefficients)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(&self.coefficients).expect("coefficients serialize")
    }

    /// Σ_n b_n h_n(x).
    pub fn synthesize(&self, x: f64) -> f64 {
        let values = hermite_values(self.degree(), x);
        self.coefficients.iter().zip(&values).map(|(c, v)| c * v).sum()
    }

    /// The expansion as a scalar field on ℝ with exact derivatives and a
    /// Gaussian rate hint of 1/2.
    pub fn field(&self) -> ScalarField {
        let base = self.coefficients.clone();
        let eval_coeffs = base.clone();
        let eval = move |x: &[f64]| {
            let values = hermite_values(eval_coeffs.len() - 1, x[0]);
            eval_coeffs.iter().zip(&values).map(|(c, v)| c * v).sum()
        };
        let deriv = move |alpha: &MultiIndex, x: &[f64]| {
            let mut coeffs = base.clone();
            for _ in 0..alpha.order() {
                coeffs = differentiate_coefficients(&coeffs);
            }
            let values = hermite_values(coeffs.len() - 1, x[0]);
            coeffs.iter().zip(&values).map(|(c, v)| c * v).sum::<f64>()
        };
        ScalarField::with_derivatives(1, eval, deriv).with_gaussian_rate(0.5)
    }
}

/// Diagnostics attached to an expansion computed by [`expand`].
#[derive(Clone, Copy, Debug)]
pub struct ExpandReport {
    /// Integration half-width actually used.
    pub half_width: f64,
    /// Largest node-doubling change over all coefficients.
    pub max_delta: f64,
    /// The integrand had not decayed at the box edge.
    pub decay_warning: bool,
}

/// Project a one-dimensional field onto h_0 … h_{n_max} by composite Simpson
/// on [−R, R], R = √(2 n_max + 3) + 10, evaluating the whole Hermite ladder
/// per node. Attaches a doubled-count refinement estimate.
pub fn expand(
    f: &ScalarField,
    n_max: usize,
    subdivisions: usize,
) -> Result<(HermiteExpansion, ExpandReport)> {
    if f.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: f.dim(),
        });
    }
    if n_max > MAX_HERMITE_INDEX {
        return Err(Error::HermiteIndex {
            requested: n_max,
            max: MAX_HERMITE_INDEX,
        });
    }
    if subdivisions < 2 || subdivisions > crate::quadrature::MAX_BOX_SUBDIVISIONS {
        return Err(Error::invalid(
            "subdivisions",
            format!(
                "need 2..={}, got {subdivisions}",
                crate::quadrature::MAX_BOX_SUBDIVISIONS
            ),
        ));
    }
    let half_width = (2.0 * n_max as f64 + 3.0).sqrt() + 10.0;
    let m = subdivisions + subdivisions % 2;
    let (coarse, peak, edge) = projection_pass(f, n_max, half_width, m)?;
    let (fine, _, _) = projection_pass(f, n_max, half_width, 2 * m)?;
    let max_delta = coarse
        .iter()
        .zip(&fine)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    let expansion = HermiteExpansion::new(fine)?;
    Ok((
        expansion,
        ExpandReport {
            half_width,
            max_delta,
            decay_warning: peak > 0.0 && edge > 1e-10 * peak,
        },
    ))
}

fn projection_pass(
    f: &ScalarField,
    n_max: usize,
    half_width: f64,
    m: usize,
) -> Result<(Vec<f64>, f64, f64)> {
    let h = 2.0 * half_width / m as f64;
    let mut sums = vec![0.0f64; n_max + 1];
    let mut peak = 0.0f64;
    let mut edge = 0.0f64;
    for i in 0..=m {
        let x = -half_width + i as f64 * h;
        let fx = f.value(&[x]);
        if !fx.is_finite() {
            return Err(Error::NonFiniteSample { coords: vec![x] });
        }
        peak = peak.max(fx.abs());
        if i == 0 || i == m {
            edge = edge.max(fx.abs());
        }
        let w = if i == 0 || i == m {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let basis = hermite_values(n_max, x);
        let wf = w * fx;
        for (s, b) in sums.iter_mut().zip(&basis) {
            *s += wf * b;
        }
    }
    for s in &mut sums {
        *s *= h / 3.0;
    }
    Ok((sums, peak, edge))
}

/// Which side of the coefficient bound is being tested.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayDirection {
    /// |b_n| ≤ e^{−M(√n h)} — the decay required for ultra membership.
    Decay,
    /// |b_n| ≤ e^{+M(√n h)} — the growth allowed after regularization.
    Growth,
}

/// How the damping exponent combines M with its argument.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DampingExponent {
    /// (M(√n h))² — the value of the associated function, squared.
    #[default]
    SquaredValue,
    /// M(n h²) — the associated function evaluated at the squared argument.
    SquaredArgument,
}

/// Per-coefficient margins against the bound, with C = 1.
#[derive(Clone, Debug)]
pub struct DecayReport {
    /// ln|b_n| − bound_n per index; −∞ where b_n = 0.
    pub margins: Vec<f64>,
    /// max margin = ln of the smallest admissible constant C.
    pub log_c: f64,
    /// Index attaining the max margin.
    pub argmax: usize,
    /// Count of indices with margin > 0 (violations of the C = 1 bound).
    pub violations: usize,
    /// True when no coefficient violates the C = 1 bound.
    pub pass: bool,
}

/// Check |b_n| against e^{±M(√n h)} for every stored coefficient.
pub fn coefficient_decay_check(
    expansion: &HermiteExpansion,
    weights: &WeightSequence,
    h: f64,
    direction: DecayDirection,
) -> Result<DecayReport> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::invalid("h", "must be positive and finite"));
    }
    let mut margins = Vec::with_capacity(expansion.coefficients().len());
    let mut log_c = f64::NEG_INFINITY;
    let mut argmax = 0usize;
    let mut violations = 0usize;
    for (n, &b) in expansion.coefficients().iter().enumerate() {
        let assoc = weights.associated_function((n as f64).sqrt() * h)?.value;
        let bound = match direction {
            DecayDirection::Decay => -assoc,
            DecayDirection::Growth => assoc,
        };
        let margin = if b == 0.0 {
            f64::NEG_INFINITY
        } else {
            b.abs().ln() - bound
        };
        if margin > log_c {
            log_c = margin;
            argmax = n;
        }
        if margin > MARGIN_TOL {
            violations += 1;
        }
        margins.push(margin);
    }
    Ok(DecayReport {
        margins,
        log_c,
        argmax,
        violations,
        pass: violations == 0,
    })
}

fn damping_exponent(
    weights: &WeightSequence,
    h: f64,
    n: usize,
    convention: DampingExponent,
) -> Result<f64> {
    let v = match convention {
        DampingExponent::SquaredValue => {
            let a = weights.associated_function((n as f64).sqrt() * h)?.value;
            a * a
        }
        DampingExponent::SquaredArgument => weights.associated_function(n as f64 * h * h)?.value,
    };
    Ok(v)
}

/// The regularized net f_ε = Σ_n b_n e^{−ε E_n} h_n with the default
/// exponent convention E_n = (M(√n h))².
pub fn regularize_ultra(
    expansion: &HermiteExpansion,
    weights: &WeightSequence,
    h: f64,
    grid: &EpsilonGrid,
) -> Result<FunctionNet> {
    regularize_ultra_with(expansion, weights, h, grid, DampingExponent::default())
}

/// [`regularize_ultra`] with an explicit exponent convention.
pub fn regularize_ultra_with(
    expansion: &HermiteExpansion,
    weights: &WeightSequence,
    h: f64,
    grid: &EpsilonGrid,
    convention: DampingExponent,
) -> Result<FunctionNet> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::invalid("h", "must be positive and finite"));
    }
    let exponents: Vec<f64> = (0..expansion.coefficients().len())
        .map(|n| damping_exponent(weights, h, n, convention))
        .collect::<Result<_>>()?;
    let fields = grid
        .values()
        .iter()
        .map(|&eps| {
            let coeffs: Vec<f64> = expansion
                .coefficients()
                .iter()
                .zip(&exponents)
                .map(|(&b, &e)| b * (-eps * e).exp())
                .collect();
            Ok(HermiteExpansion::new(coeffs)?.field())
        })
        .collect::<Result<Vec<_>>>()?;
    FunctionNet::from_fields(grid.clone(), fields)
}

/// The constants C_ε = max_n |b_n e^{−ε E_n}| e^{−M(√n h)} across the grid.
#[derive(Clone, Debug)]
pub struct InclusionReport {
    /// (ε, C_ε) pairs in grid order.
    pub c_eps: Vec<(f64, f64)>,
    /// All C_ε finite.
    pub finite: bool,
    /// C_ε does not decrease as ε decreases (approach to the limit from
    /// below).
    pub nondecreasing: bool,
    /// sup over the grid.
    pub sup: f64,
}

/// Track the smallest constant in |f^ε_n| ≤ C e^{M(√n h)} per grid level for
/// the default-convention regularization.
pub fn verify_inclusion_bound(
    expansion: &HermiteExpansion,
    weights: &WeightSequence,
    h: f64,
    grid: &EpsilonGrid,
) -> Result<InclusionReport> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::invalid("h", "must be positive and finite"));
    }
    let n_count = expansion.coefficients().len();
    let mut exponents = Vec::with_capacity(n_count);
    let mut assoc = Vec::with_capacity(n_count);
    for n in 0..n_count {
        exponents.push(damping_exponent(weights, h, n, DampingExponent::SquaredValue)?);
        assoc.push(weights.associated_function((n as f64).sqrt() * h)?.value);
    }
    let mut c_eps = Vec::with_capacity(grid.len());
    for &eps in grid.values() {
        let c = expansion
            .coefficients()
            .iter()
            .enumerate()
            .map(|(n, &b)| (b * (-eps * exponents[n]).exp()).abs() * (-assoc[n]).exp())
            .fold(0.0f64, f64::max);
        c_eps.push((eps, c));
    }
    let finite = c_eps.iter().all(|(_, c)| c.is_finite());
    let nondecreasing = c_eps.windows(2).all(|w| w[1].1 >= w[0].1 * (1.0 - 1e-12));
    let sup = c_eps.iter().map(|(_, c)| *c).fold(0.0f64, f64::max);
    Ok(InclusionReport {
        c_eps,
        finite,
        nondecreasing,
        sup,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::partial_derivative;

    fn simpson_inner_product(f: impl Fn(f64) -> f64, g: impl Fn(f64) -> f64) -> f64 {
        let half = 12.0;
        let m = 4096;
        let h = 2.0 * half / m as f64;
        let mut sum = 0.0;
        for i in 0..=m {
            let x = -half + i as f64 * h;
            let w = if i == 0 || i == m {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            sum += w * f(x) * g(x);
        }
        sum * h / 3.0
    }

    #[test]
    fn ground_state_and_first_level()
    {
        let quarter_pi = std::f64::consts::PI.powf(-0.25);
        assert!((hermite_function(0, 0.0).unwrap() - quarter_pi).abs() < 1e-15);
        let x = 1.0;
        let h1 = 2.0f64.sqrt() * x * quarter_pi * (-x * x / 2.0).exp();
        assert!((hermite_function(1, x).unwrap() - h1).abs() < 1e-15);
        let x = 1.3;
        let h2 = (2.0 * x * x - 1.0) / 2.0f64.sqrt() * quarter_pi * (-x * x / 2.0).exp();
        assert!((hermite_function(2, x).unwrap() - h2).abs() < 1e-14);
    }

    #[test]
    fn index_capability() {
        assert!(hermite_function(256, 0.5).is_ok());
        assert!(matches!(
            hermite_function(257, 0.5),
            Err(Error::HermiteIndex { .. })
        ));
    }

    #[test]
    fn orthonormal_up_to_eight() {
        for m in 0..=8usize {
            for n in m..=8usize {
                let v = simpson_inner_product(
                    |x| hermite_values(m, x)[m],
                    |x| hermite_values(n, x)[n],
                );
                let want = if m == n { 1.0 } else { 0.0 };
                assert!((v - want).abs() < 1e-12, "({m},{n}): {v}");
            }
        }
    }

    #[test]
    fn cramer_bound_holds() {
        let bound = 0.8161;
        for n in [0usize, 1, 5, 17, 64, 256] {
            for i in 0..400 {
                let x = -25.0 + i as f64 * 0.125;
                let v = hermite_values(n, x)[n];
                assert!(v.abs() <= bound, "h_{n}({x}) = {v}");
            }
        }
    }

    #[test]
    fn derivative_band_rule_matches_known_forms() {
        // h_0' = −x h_0
        for &x in &[0.0, 0.7, -1.9] {
            let d = hermite_derivative(0, 1, x).unwrap();
            assert!((d + x * hermite_values(0, x)[0]).abs() < 1e-14);
        }
        // h_n'' = (x² − 2n − 1) h_n
        for n in [1usize, 4, 9] {
            for &x in &[0.3, -1.1] {
                let d2 = hermite_derivative(n, 2, x).unwrap();
                let want = (x * x - 2.0 * n as f64 - 1.0) * hermite_values(n, x)[n];
                assert!((d2 - want).abs() < 1e-12, "n={n} x={x}");
            }
        }
    }

    #[test]
    fn expansion_field_derivatives_match_finite_differences() {
        let e = HermiteExpansion::new(vec![0.3, 0.0, -1.0, 0.25]).unwrap();
        let f = e.field();
        assert!(f.is_analytic());
        assert_eq!(f.gaussian_rate(), Some(0.5));
        let opaque = {
            let e = e.clone();
            ScalarField::new(1, move |x| e.synthesize(x[0]))
        };
        for &x in &[0.0, 0.9, -2.2] {
            for order in 0..=3usize {
                let a =
                    partial_derivative(&f, &MultiIndex::new(vec![order]), &[x], 1e-4).unwrap();
                let b = partial_derivative(&opaque, &MultiIndex::new(vec![order]), &[x], 1e-4)
                    .unwrap();
                assert!((a - b).abs() < 1e-5, "order {order} at {x}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn unit_expansion_synthesizes_basis_function() {
        let e = HermiteExpansion::unit(3).unwrap();
        for &x in &[0.0, 1.5, -0.4] {
            assert_eq!(e.synthesize(x), hermite_values(3, x)[3]);
        }
    }

    #[test]
    fn expansion_json_round_trip() {
        let e = HermiteExpansion::new(vec![1.0, -0.5, 0.0, 0.125]).unwrap();
        let back = HermiteExpansion::from_json_str(&e.to_json_string()).unwrap();
        assert_eq!(e, back);
        assert!(HermiteExpansion::from_json_str("[]").is_err());
        assert!(HermiteExpansion::from_json_str("[1.0, \"x\"]").is_err());
    }

    #[test]
    fn expand_recovers_basis_coefficients() {
        let target = HermiteExpansion::new(vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.5]).unwrap();
        let f = target.field();
        let (e, report) = expand(&f, 10, 2048).unwrap();
        assert!(!report.decay_warning);
        assert!(report.max_delta < 1e-10);
        for n in 0..=10 {
            let want = if n == 3 {
                1.0
            } else if n == 7 {
                0.5
            } else {
                0.0
            };
            assert!(
                (e.coefficients()[n] - want).abs() < 1e-10,
                "n = {n}: {}",
                e.coefficients()[n]
            );
        }
    }

    #[test]
    fn expand_flags_non_decaying_input() {
        let f = ScalarField::new(1, |x| 1.0 + 0.0 * x[0]);
        let (_, report) = expand(&f, 4, 512).unwrap();
        assert!(report.decay_warning);
    }

    #[test]
    fn decay_check_accepts_reciprocal_weights() {
        let w = WeightSequence::gevrey(2.0, 64).unwrap();
        let coeffs: Vec<f64> = (0..=32).map(|n| (-w.log_value(n)).exp()).collect();
        let e = HermiteExpansion::new(coeffs).unwrap();
        let report = coefficient_decay_check(&e, &w, 0.5, DecayDirection::Decay).unwrap();
        assert!(report.pass, "violations = {}", report.violations);
        assert_eq!(report.violations, 0);
    }

    #[test]
    fn decay_check_rejects_flat_coefficients() {
        let w = WeightSequence::gevrey(2.0, 64).unwrap();
        let e = HermiteExpansion::new(vec![1.0; 33]).unwrap();
        let report = coefficient_decay_check(&e, &w, 1.0, DecayDirection::Decay).unwrap();
        assert!(!report.pass);
        assert!(report.violations > 0);
        assert!(report.log_c > 0.0);
        // but every coefficient respects the growth direction
        let grow = coefficient_decay_check(&e, &w, 1.0, DecayDirection::Growth).unwrap();
        assert!(grow.pass);
    }

    #[test]
    fn regularize_damps_high_modes() {
        let w = WeightSequence::gevrey(2.0, 64).unwrap();
        let e = HermiteExpansion::new(vec![1.0; 17]).unwrap();
        let grid = EpsilonGrid::geometric(6).unwrap();
        let net = regularize_ultra(&e, &w, 1.0, &grid).unwrap();
        assert_eq!(net.dim(), 1);
        // compare the ε = 2^{-1} field to its closed form at a point
        let x = 0.4;
        let eps = 0.5;
        let want: f64 = (0..=16)
            .map(|n| {
                let a = w.associated_function((n as f64).sqrt()).unwrap().value;
                (-eps * a * a).exp() * hermite_values(n, x)[n]
            })
            .sum();
        assert!((net.evaluate(eps, &[x]).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn exponent_conventions_differ() {
        let w = WeightSequence::gevrey(2.0, 64).unwrap();
        let n = 16;
        let h = 1.0;
        let sq_value = damping_exponent(&w, h, n, DampingExponent::SquaredValue).unwrap();
        let sq_arg = damping_exponent(&w, h, n, DampingExponent::SquaredArgument).unwrap();
        assert!(sq_value > 0.0 && sq_arg > 0.0);
        assert!((sq_value - sq_arg).abs() > 0.1, "{sq_value} vs {sq_arg}");
    }

    #[test]
    fn inclusion_constants_monotone() {
        let w = WeightSequence::gevrey(2.0, 64).unwrap();
        let coeffs: Vec<f64> = (0..=32).map(|n| (-w.log_value(n)).exp()).collect();
        let e = HermiteExpansion::new(coeffs).unwrap();
        let grid = EpsilonGrid::default();
        let report = verify_inclusion_bound(&e, &w, 0.5, &grid).unwrap();
        assert!(report.finite);
        assert!(report.nondecreasing);
        assert!(report.sup > 0.0 && report.sup.is_finite());
    }
}
