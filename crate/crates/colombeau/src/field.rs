use std::sync::Arc;

use crate::error::{Error, Result};

/// Highest derivative order served by [`partial_derivative`].
pub const MAX_DERIVATIVE_ORDER: usize = 4;

/// A multi-index α ∈ ℕ^d used to address partial derivatives and monomials.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    entries: Vec<usize>,
}

impl MultiIndex {
    pub fn new(entries: Vec<usize>) -> Self {
        assert!(!entries.is_empty(), "multi-index needs at least one axis");
        MultiIndex { entries }
    }

    pub fn zero(dim: usize) -> Self {
        MultiIndex::new(vec![0; dim])
    }

    /// The unit index along `axis`.
    pub fn unit(dim: usize, axis: usize) -> Self {
        let mut entries = vec![0; dim];
        entries[axis] = 1;
        MultiIndex::new(entries)
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    /// Total order |α| = Σ α_i.
    pub fn order(&self) -> usize {
        self.entries.iter().sum()
    }

    pub fn entries(&self) -> &[usize] {
        &self.entries
    }

    /// All multi-indices of dimension `dim` with order ≤ `max_order`,
    /// in lexicographic order.
    pub fn all_up_to(dim: usize, max_order: usize) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        let mut current = vec![0usize; dim];
        loop {
            if current.iter().sum::<usize>() <= max_order {
                out.push(MultiIndex::new(current.clone()));
            }
            // odometer over [0, max_order]^dim
            let mut axis = dim;
            loop {
                if axis == 0 {
                    return out;
                }
                axis -= 1;
                if current[axis] < max_order {
                    current[axis] += 1;
                    break;
                }
                current[axis] = 0;
            }
        }
    }

    /// All β with β ≤ α componentwise (the Leibniz lattice below α).
    pub fn sub_indices(&self) -> Vec<MultiIndex> {
        let mut out = vec![MultiIndex::zero(self.dim())];
        for (axis, &cap) in self.entries.iter().enumerate() {
            let mut next = Vec::with_capacity(out.len() * (cap + 1));
            for base in &out {
                for k in 0..=cap {
                    let mut entries = base.entries.clone();
                    entries[axis] = k;
                    next.push(MultiIndex::new(entries));
                }
            }
            out = next;
        }
        out
    }

    /// Π_i C(α_i, β_i); requires β ≤ α componentwise.
    pub fn binomial(&self, beta: &MultiIndex) -> f64 {
        self.entries
            .iter()
            .zip(beta.entries.iter())
            .map(|(&a, &b)| binomial(a, b))
            .product()
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    assert!(k <= n);
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

type EvalFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type DerivFn = dyn Fn(&MultiIndex, &[f64]) -> f64 + Send + Sync;

/// A smooth scalar field on ℝ^d: an evaluator, an optional closed-form
/// derivative evaluator, and an optional Gaussian rate hint.
///
/// The rate hint `gaussian_rate = r` asserts that `f(x)·e^{r|x|²}` is slowly
/// varying (polynomial-type), which lets quadrature routines choose an exact
/// node scaling. It is metadata only; evaluation never consults it.
#[derive(Clone)]
pub struct ScalarField {
    dim: usize,
    eval: Arc<EvalFn>,
    deriv: Option<Arc<DerivFn>>,
    analytic: bool,
    gaussian_rate: Option<f64>,
}

impl std::fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScalarField")
            .field("dim", &self.dim)
            .field("analytic", &self.analytic)
            .field("gaussian_rate", &self.gaussian_rate)
            .finish()
    }
}

impl ScalarField {
    pub fn new(dim: usize, eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        ScalarField {
            dim,
            eval: Arc::new(eval),
            deriv: None,
            analytic: false,
            gaussian_rate: None,
        }
    }

    /// A field with closed-form partial derivatives. The derivative closure
    /// must agree with the evaluator at order zero.
    pub fn with_derivatives(
        dim: usize,
        eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        deriv: impl Fn(&MultiIndex, &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        ScalarField {
            dim,
            eval: Arc::new(eval),
            deriv: Some(Arc::new(deriv)),
            analytic: true,
            gaussian_rate: None,
        }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        ScalarField::with_derivatives(
            dim,
            move |_| c,
            move |alpha, _| if alpha.order() == 0 { c } else { 0.0 },
        )
        .with_gaussian_rate(0.0)
    }

    pub fn zero(dim: usize) -> Self {
        ScalarField::constant(dim, 0.0)
    }

    pub fn with_gaussian_rate(mut self, rate: f64) -> Self {
        self.gaussian_rate = Some(rate);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_analytic(&self) -> bool {
        self.analytic
    }

    pub fn gaussian_rate(&self) -> Option<f64> {
        self.gaussian_rate
    }

    /// Evaluate at `x`. Panics if `x.len() != dim`; the net-level entry
    /// points perform the checked variant.
    pub fn value(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim, "point dimension mismatch");
        (self.eval)(x)
    }

    pub fn value_checked(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok((self.eval)(x))
    }

    /// Pointwise product; the rate hint adds when both factors carry one.
    pub fn product(&self, other: &ScalarField) -> Result<ScalarField> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        let (a, b) = (self.clone(), other.clone());
        let rate = match (self.gaussian_rate, other.gaussian_rate) {
            (Some(r), Some(s)) => Some(r + s),
            _ => None,
        };
        let mut field = ScalarField::new(self.dim, move |x| a.value(x) * b.value(x));
        field.gaussian_rate = rate;
        Ok(field)
    }

    pub fn scale(&self, c: f64) -> ScalarField {
        let inner = self.clone();
        let mut field = match &self.deriv {
            Some(d) => {
                let d = Arc::clone(d);
                let e = Arc::clone(&self.eval);
                ScalarField::with_derivatives(
                    self.dim,
                    move |x| c * e(x),
                    move |alpha, x| c * d(alpha, x),
                )
            }
            None => ScalarField::new(self.dim, move |x| c * inner.value(x)),
        };
        field.gaussian_rate = self.gaussian_rate;
        field
    }

    pub(crate) fn closed_form_derivative(&self, alpha: &MultiIndex, x: &[f64]) -> Option<f64> {
        self.deriv.as_ref().map(|d| d(alpha, x))
    }
}

/// ∂^α f(x), preferring a closed-form evaluator and falling back to nested
/// central differences with step `base_step · (1 + ‖x‖)`.
pub fn partial_derivative(
    f: &ScalarField,
    alpha: &MultiIndex,
    x: &[f64],
    base_step: f64,
) -> Result<f64> {
    if alpha.dim() != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            got: alpha.dim(),
        });
    }
    if x.len() != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            got: x.len(),
        });
    }
    if alpha.order() > MAX_DERIVATIVE_ORDER {
        return Err(Error::DerivativeOrder {
            requested: alpha.order(),
            max: MAX_DERIVATIVE_ORDER,
        });
    }
    if !(base_step > 0.0) {
        return Err(Error::invalid("base_step", "must be positive"));
    }
    if let Some(v) = f.closed_form_derivative(alpha, x) {
        return Ok(v);
    }
    if alpha.order() == 0 {
        return Ok(f.value(x));
    }
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let h = base_step * (1.0 + norm);
    let mut remaining = alpha.entries().to_vec();
    let mut point = x.to_vec();
    Ok(central_difference(f, &mut remaining, &mut point, h))
}

fn central_difference(f: &ScalarField, remaining: &mut [usize], point: &mut [f64], h: f64) -> f64 {
    let axis = match remaining.iter().position(|&k| k > 0) {
        Some(a) => a,
        None => return f.value(point),
    };
    remaining[axis] -= 1;
    point[axis] += h;
    let plus = central_difference(f, remaining, point, h);
    point[axis] -= 2.0 * h;
    let minus = central_difference(f, remaining, point, h);
    point[axis] += h;
    remaining[axis] += 1;
    (plus - minus) / (2.0 * h)
}

/// d^k/dx^k e^{a x²}, exact for any sign of `a`.
///
/// The k-th derivative is P_k(x)·e^{a x²} with P_0 = 1 and
/// P_{k+1} = P_k' + 2 a x P_k; the polynomial recurrence is run on
/// coefficient vectors.
pub(crate) fn gauss_exp_derivative(a: f64, k: usize, x: f64) -> f64 {
    let mut poly = vec![1.0f64];
    for _ in 0..k {
        let mut next = vec![0.0; poly.len() + 1];
        for (i, &c) in poly.iter().enumerate() {
            if i >= 1 {
                next[i - 1] += c * i as f64;
            }
            next[i + 1] += 2.0 * a * c;
        }
        poly = next;
    }
    let mut p = 0.0;
    for &c in poly.iter().rev() {
        p = p * x + c;
    }
    p * (a * x * x).exp()
}

/// Multiply `f` by the Gaussian damper e^{−γ|x|²}.
///
/// The damped field keeps closed-form derivatives (via the Leibniz rule) when
/// `f` has them, and its rate hint increases by γ.
pub fn gaussian_damp(f: &ScalarField, gamma: f64) -> Result<ScalarField> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::invalid("gamma", format!("must be positive, got {gamma}")));
    }
    let dim = f.dim();
    let inner = f.clone();
    let eval = move |x: &[f64]| {
        let norm_sq: f64 = x.iter().map(|v| v * v).sum();
        inner.value(x) * (-gamma * norm_sq).exp()
    };
    let mut out = if f.is_analytic() {
        let inner = f.clone();
        let deriv = move |alpha: &MultiIndex, x: &[f64]| {
            let mut acc = 0.0;
            for beta in alpha.sub_indices() {
                let f_part = inner
                    .closed_form_derivative(&beta, x)
                    .expect("analytic field lost its derivative evaluator");
                let mut g_part = 1.0;
                for axis in 0..alpha.dim() {
                    let k = alpha.entries()[axis] - beta.entries()[axis];
                    g_part *= gauss_exp_derivative(-gamma, k, x[axis]);
                }
                acc += alpha.binomial(&beta) * f_part * g_part;
            }
            acc
        };
        ScalarField::with_derivatives(dim, eval, deriv)
    } else {
        ScalarField::new(dim, eval)
    };
    out.gaussian_rate = f.gaussian_rate.map(|r| r + gamma);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian_1d() -> ScalarField {
        // e^{−x²} with closed-form derivatives
        ScalarField::with_derivatives(
            1,
            |x| (-x[0] * x[0]).exp(),
            |alpha, x| gauss_exp_derivative(-1.0, alpha.entries()[0], x[0]),
        )
        .with_gaussian_rate(1.0)
    }

    fn gaussian_1d_opaque() -> ScalarField {
        ScalarField::new(1, |x| (-x[0] * x[0]).exp())
    }

    #[test]
    fn multi_index_enumeration() {
        let all = MultiIndex::all_up_to(2, 2);
        assert_eq!(all.len(), 6); // (0,0),(0,1),(0,2),(1,0),(1,1),(2,0)
        assert!(all.iter().all(|a| a.order() <= 2));
        let first = &all[0];
        assert_eq!(first.order(), 0);
    }

    #[test]
    fn sub_indices_and_binomials() {
        let alpha = MultiIndex::new(vec![2, 1]);
        let subs = alpha.sub_indices();
        assert_eq!(subs.len(), 6);
        let beta = MultiIndex::new(vec![1, 1]);
        assert_eq!(alpha.binomial(&beta), 2.0);
        assert_eq!(alpha.binomial(&MultiIndex::zero(2)), 1.0);
    }

    #[test]
    fn derivative_of_gaussian_at_origin() {
        let f = gaussian_1d_opaque();
        let d1 = partial_derivative(&f, &MultiIndex::new(vec![1]), &[0.0], 1e-4).unwrap();
        assert!(d1.abs() < 1e-8, "d1 = {d1}");
        let d2 = partial_derivative(&f, &MultiIndex::new(vec![2]), &[0.0], 1e-4).unwrap();
        assert!((d2 + 2.0).abs() < 1e-6, "d2 = {d2}");
    }

    #[test]
    fn derivative_closed_form_matches() {
        let f = gaussian_1d();
        let d2 = partial_derivative(&f, &MultiIndex::new(vec![2]), &[0.0], 1e-4).unwrap();
        assert_eq!(d2, -2.0);
        // cross-check closed form vs finite differences away from origin
        let opaque = gaussian_1d_opaque();
        for &x in &[0.3, -0.9, 1.7] {
            for order in 0..=3usize {
                let a = partial_derivative(&f, &MultiIndex::new(vec![order]), &[x], 1e-4).unwrap();
                let b =
                    partial_derivative(&opaque, &MultiIndex::new(vec![order]), &[x], 1e-4).unwrap();
                assert!((a - b).abs() < 1e-5, "order {order} at {x}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn derivative_of_square_is_exact() {
        let f = ScalarField::new(1, |x| x[0] * x[0]);
        let d = partial_derivative(&f, &MultiIndex::new(vec![1]), &[3.0], 1e-4).unwrap();
        assert!((d - 6.0).abs() < 1e-9);
    }

    #[test]
    fn derivative_order_capability() {
        let f = gaussian_1d_opaque();
        let err = partial_derivative(&f, &MultiIndex::new(vec![5]), &[0.0], 1e-4).unwrap_err();
        assert!(matches!(err, Error::DerivativeOrder { requested: 5, max: 4 }));
    }

    #[test]
    fn halving_the_step_shrinks_fd_error() {
        // second-order scheme: error ratio should approach 4; require ≥ 3
        let f = gaussian_1d_opaque();
        let exact = gauss_exp_derivative(-1.0, 2, 0.5);
        let alpha = MultiIndex::new(vec![2]);
        let err_h = (partial_derivative(&f, &alpha, &[0.5], 1e-2).unwrap() - exact).abs();
        let err_h2 = (partial_derivative(&f, &alpha, &[0.5], 5e-3).unwrap() - exact).abs();
        assert!(err_h / err_h2 >= 3.0, "ratio {}", err_h / err_h2);
    }

    #[test]
    fn gauss_exp_derivative_small_orders() {
        let a: f64 = -0.7;
        let x: f64 = 1.3;
        let e = (a * x * x).exp();
        assert_eq!(gauss_exp_derivative(a, 0, x), e);
        assert!((gauss_exp_derivative(a, 1, x) - 2.0 * a * x * e).abs() < 1e-14);
        let d2 = (2.0 * a + 4.0 * a * a * x * x) * e;
        assert!((gauss_exp_derivative(a, 2, x) - d2).abs() < 1e-14);
        // positive rate: e^{x²}
        let d1p = gauss_exp_derivative(1.0, 1, 0.5);
        assert!((d1p - (0.25f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn damp_constant_field() {
        let one = ScalarField::constant(2, 1.0);
        let damped = gaussian_damp(&one, 1.0).unwrap();
        assert_eq!(damped.value(&[0.0, 0.0]), 1.0);
        let v = damped.value(&[1.0, 1.0]);
        assert!((v - (-2.0f64).exp()).abs() < 1e-15);
        assert_eq!(damped.gaussian_rate(), Some(1.0));
    }

    #[test]
    fn damp_cancels_growing_gaussian() {
        let grow = ScalarField::new(1, |x| (x[0] * x[0]).exp());
        let damped = gaussian_damp(&grow, 1.0).unwrap();
        for &x in &[0.0, 0.5, -2.0, 3.0] {
            assert!((damped.value(&[x]) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn damp_rejects_nonpositive_gamma() {
        let one = ScalarField::constant(1, 1.0);
        assert!(gaussian_damp(&one, 0.0).is_err());
        assert!(gaussian_damp(&one, -1.0).is_err());
    }

    #[test]
    fn damp_keeps_closed_form_derivatives() {
        let f = gaussian_1d();
        let damped = gaussian_damp(&f, 0.5).unwrap();
        assert!(damped.is_analytic());
        // ∂² of e^{−1.5 x²} at 0 is −3
        let d2 = partial_derivative(&damped, &MultiIndex::new(vec![2]), &[0.0], 1e-4).unwrap();
        assert!((d2 + 3.0).abs() < 1e-12, "d2 = {d2}");
        // and matches finite differences at a generic point
        let opaque = ScalarField::new(1, |x| (-1.5 * x[0] * x[0]).exp());
        let a = partial_derivative(&damped, &MultiIndex::new(vec![3]), &[0.8], 1e-4).unwrap();
        let b = partial_derivative(&opaque, &MultiIndex::new(vec![3]), &[0.8], 1e-4).unwrap();
        assert!((a - b).abs() < 1e-5);
    }

    #[test]
    fn product_adds_rate_hints() {
        let a = gaussian_1d();
        let b = gaussian_1d();
        let p = a.product(&b).unwrap();
        assert_eq!(p.gaussian_rate(), Some(2.0));
        assert!((p.value(&[1.0]) - (-2.0f64).exp()).abs() < 1e-15);
    }
}
