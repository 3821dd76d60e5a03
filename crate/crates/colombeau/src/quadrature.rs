use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Largest supported Gauss–Hermite rule.
pub const MAX_GAUSS_HERMITE_NODES: usize = 512;

/// Largest supported Simpson subdivision count.
pub const MAX_BOX_SUBDIVISIONS: usize = 1 << 22;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RuleKind {
    GaussHermite,
    SimpsonBox,
}

/// Nodes and weights of a fixed quadrature rule.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    kind: RuleKind,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    log_weights: Vec<f64>,
}

impl QuadratureRule {
    /// The m-point Gauss–Hermite rule for ∫ f(t) e^{−t²} dt, built from the
    /// eigendecomposition of the Jacobi matrix (off-diagonal √(k/2)).
    ///
    /// Nodes are sorted and exactly symmetrized; weights are rescaled so they
    /// sum to √π. Weights that underflow to zero (m ≳ 380) are clamped to the
    /// smallest positive subnormal so positivity holds at every size.
    pub fn gauss_hermite(m: usize) -> Result<Self> {
        if m == 0 || m > MAX_GAUSS_HERMITE_NODES {
            return Err(Error::NodesOutOfRange {
                m,
                max: MAX_GAUSS_HERMITE_NODES,
            });
        }
        Ok(cached_gauss_hermite(m).as_ref().clone())
    }

    pub fn kind(&self) -> RuleKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub(crate) fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }
}

fn cached_gauss_hermite(m: usize) -> Arc<QuadratureRule> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<QuadratureRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().expect("quadrature cache poisoned");
    Arc::clone(
        map.entry(m)
            .or_insert_with(|| Arc::new(build_gauss_hermite(m))),
    )
}

fn build_gauss_hermite(m: usize) -> QuadratureRule {
    // Golub–Welsch eigenvalues locate the nodes well, but the first-row
    // eigenvector entries lose all relative accuracy at the extreme nodes,
    // where the weight is e^{−t²}-small. Those weights get multiplied by
    // integrands that legitimately grow like e^{t²}, so instead each node is
    // Newton-polished on p_m and its weight recomputed from the Christoffel
    // sum 1/Σ p_k², which the three-term recurrence delivers to full
    // relative accuracy.
    let mut jacobi = DMatrix::<f64>::zeros(m, m);
    for k in 1..m {
        let b = (k as f64 / 2.0).sqrt();
        jacobi[(k - 1, k)] = b;
        jacobi[(k, k - 1)] = b;
    }
    let eigen = SymmetricEigen::new(jacobi);
    let mut nodes: Vec<f64> = (0..m).map(|j| eigen.eigenvalues[j]).collect();
    nodes.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    let deriv_scale = (2.0 * m as f64).sqrt();
    for t in &mut nodes {
        for _ in 0..2 {
            let (p_prev, p_m, _, _) = hermite_poly_ladder(m, *t);
            // p'_m = √(2m) p_{m−1}; the shared ladder scale cancels
            *t -= p_m / (deriv_scale * p_prev);
        }
    }

    // enforce exact ± symmetry
    for i in 0..m / 2 {
        let j = m - 1 - i;
        let half = (nodes[j] - nodes[i]) / 2.0;
        nodes[i] = -half;
        nodes[j] = half;
    }
    if m % 2 == 1 {
        nodes[m / 2] = 0.0;
    }

    let mut weights = Vec::with_capacity(m);
    let mut log_weights = Vec::with_capacity(m);
    for &t in &nodes {
        let (_, _, sum, log_scale) = hermite_poly_ladder(m, t);
        let log_w = -(sum.ln() + 2.0 * log_scale);
        log_weights.push(log_w);
        let w = log_w.exp();
        weights.push(if w > 0.0 { w } else { f64::from_bits(1) });
    }
    QuadratureRule {
        kind: RuleKind::GaussHermite,
        nodes,
        weights,
        log_weights,
    }
}

/// Orthonormal-polynomial ladder for the weight e^{−t²}: returns
/// (p_{m−1}, p_m, Σ_{k<m} p_k², ln scale), the first three sharing the common
/// factor e^{ln scale} (e^{2·ln scale} for the sum). Rescaling keeps the
/// recurrence finite past the turning point, where p_k reaches e^{t²/2}.
fn hermite_poly_ladder(m: usize, t: f64) -> (f64, f64, f64, f64) {
    let ceiling = (2.0f64).powi(400);
    let rescale = (2.0f64).powi(-400);
    let log_step = 400.0 * std::f64::consts::LN_2;
    let mut log_scale = 0.0f64;
    let mut prev = 0.0f64;
    let mut cur = std::f64::consts::PI.powf(-0.25);
    let mut sum = cur * cur;
    for k in 0..m {
        let b_cur = (k as f64 / 2.0).sqrt();
        let b_next = ((k + 1) as f64 / 2.0).sqrt();
        let next = (t * cur - b_cur * prev) / b_next;
        prev = cur;
        cur = next;
        if k + 1 < m {
            sum += cur * cur;
        }
        if cur.abs() > ceiling {
            prev *= rescale;
            cur *= rescale;
            sum *= rescale;
            sum *= rescale;
            log_scale += log_step;
        }
    }
    (prev, cur, sum, log_scale)
}

/// Result of a damped integral with its node-doubling refinement.
#[derive(Clone, Copy, Debug)]
pub struct DampedIntegral {
    /// Value at the requested node count.
    pub value: f64,
    /// Value at twice the node count (capped at the maximum rule size).
    pub refined: f64,
    /// |refined − value|.
    pub delta: f64,
}

impl DampedIntegral {
    /// Convergence check: the doubling change is below `tol` relative to the
    /// value's magnitude (with an absolute floor of 1).
    pub fn converged(&self, tol: f64) -> bool {
        self.delta <= tol * self.value.abs().max(1.0)
    }
}

/// ∫_{ℝ^d} f(y) e^{−γ|y|²} dy by Gauss–Hermite after the substitution
/// y = t/√γ. Supports d ∈ {1, 2}; attaches a node-doubling estimate.
pub fn integrate_damped<F>(f: F, dim: usize, gamma: f64, m: usize) -> Result<DampedIntegral>
where
    F: Fn(&[f64]) -> f64,
{
    integrate_damped_scaled(f, dim, gamma, gamma, m)
}

/// Like [`integrate_damped`], but substitutes y = t/√s for a caller-chosen
/// rate s ≥ γ. When f·e^{(s−γ)|y|²} is polynomial the rule is exact; the
/// compensating exponential is folded into the weights in log space so very
/// damped tails cannot produce 0·∞.
pub fn integrate_damped_scaled<F>(
    f: F,
    dim: usize,
    gamma: f64,
    scale: f64,
    m: usize,
) -> Result<DampedIntegral>
where
    F: Fn(&[f64]) -> f64,
{
    if dim == 0 || dim > 2 {
        return Err(Error::invalid("dim", format!("supported dims are 1 and 2, got {dim}")));
    }
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::invalid("gamma", "must be positive and finite"));
    }
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::invalid("scale", "must be positive and finite"));
    }
    if m == 0 || m > MAX_GAUSS_HERMITE_NODES {
        return Err(Error::NodesOutOfRange {
            m,
            max: MAX_GAUSS_HERMITE_NODES,
        });
    }
    let value = damped_sum(&f, dim, gamma, scale, m)?;
    let m_fine = (2 * m).min(MAX_GAUSS_HERMITE_NODES);
    let refined = if m_fine > m {
        damped_sum(&f, dim, gamma, scale, m_fine)?
    } else {
        value
    };
    Ok(DampedIntegral {
        value,
        refined,
        delta: (refined - value).abs(),
    })
}

/// Single-pass scaled Gauss–Hermite sum without the doubling refinement;
/// used on interior hot paths where the caller manages convergence.
pub(crate) fn damped_value<F>(f: F, dim: usize, gamma: f64, scale: f64, m: usize) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    if dim == 0 || dim > 2 {
        return Err(Error::invalid("dim", format!("supported dims are 1 and 2, got {dim}")));
    }
    if !(gamma > 0.0) || !gamma.is_finite() || !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::invalid("gamma", "damping and scale must be positive"));
    }
    if m == 0 || m > MAX_GAUSS_HERMITE_NODES {
        return Err(Error::NodesOutOfRange {
            m,
            max: MAX_GAUSS_HERMITE_NODES,
        });
    }
    damped_sum(&f, dim, gamma, scale, m)
}

fn damped_sum<F>(f: &F, dim: usize, gamma: f64, scale: f64, m: usize) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let rule = cached_gauss_hermite(m);
    let inv_sqrt_s = scale.powf(-0.5);
    let excess = (scale - gamma) / scale; // coefficient of t² reinstated per axis
    let points: Vec<f64> = rule.nodes().iter().map(|t| t * inv_sqrt_s).collect();
    let log_w: Vec<f64> = rule
        .log_weights()
        .iter()
        .zip(rule.nodes())
        .map(|(lw, t)| lw + excess * t * t)
        .collect();
    let norm = inv_sqrt_s.powi(dim as i32);

    let mut sum = 0.0;
    match dim {
        1 => {
            let mut buf = [0.0f64];
            for (i, &y) in points.iter().enumerate() {
                buf[0] = y;
                let fv = f(&buf);
                if !fv.is_finite() {
                    return Err(Error::NonFiniteSample { coords: buf.to_vec() });
                }
                if fv != 0.0 {
                    sum += fv * log_w[i].exp();
                }
            }
        }
        2 => {
            let mut buf = [0.0f64; 2];
            for (i, &yi) in points.iter().enumerate() {
                for (j, &yj) in points.iter().enumerate() {
                    buf[0] = yi;
                    buf[1] = yj;
                    let fv = f(&buf);
                    if !fv.is_finite() {
                        return Err(Error::NonFiniteSample { coords: buf.to_vec() });
                    }
                    if fv != 0.0 {
                        sum += fv * (log_w[i] + log_w[j]).exp();
                    }
                }
            }
        }
        _ => unreachable!(),
    }
    let total = norm * sum;
    if !total.is_finite() {
        return Err(Error::NonFiniteSample { coords: vec![f64::NAN; dim] });
    }
    Ok(total)
}

/// Result of a box integral with refinement and an endpoint-decay check.
#[derive(Clone, Copy, Debug)]
pub struct BoxIntegral {
    pub value: f64,
    pub refined: f64,
    pub delta: f64,
    /// Set when |f| at the box boundary is not negligible relative to its
    /// peak, so the truncated domain likely lost mass.
    pub decay_warning: bool,
}

/// ∫_{−R}^{R} f(x) dx by composite Simpson with `subdivisions` intervals
/// (rounded up to even), plus the doubled-count refinement.
pub fn integrate_box<F>(f: F, half_width: f64, subdivisions: usize) -> Result<BoxIntegral>
where
    F: Fn(f64) -> f64,
{
    if !(half_width > 0.0) || !half_width.is_finite() {
        return Err(Error::invalid("half_width", "must be positive and finite"));
    }
    if subdivisions < 2 || subdivisions > MAX_BOX_SUBDIVISIONS {
        return Err(Error::invalid(
            "subdivisions",
            format!("need 2..={MAX_BOX_SUBDIVISIONS}, got {subdivisions}"),
        ));
    }
    let m = subdivisions + subdivisions % 2;
    let (value, peak, edge) = simpson_pass(&f, half_width, m)?;
    let m_fine = (2 * m).min(MAX_BOX_SUBDIVISIONS);
    let refined = if m_fine > m {
        simpson_pass(&f, half_width, m_fine)?.0
    } else {
        value
    };
    Ok(BoxIntegral {
        value,
        refined,
        delta: (refined - value).abs(),
        decay_warning: peak > 0.0 && edge > 1e-10 * peak,
    })
}

fn simpson_pass<F>(f: &F, half_width: f64, m: usize) -> Result<(f64, f64, f64)>
where
    F: Fn(f64) -> f64,
{
    let h = 2.0 * half_width / m as f64;
    let mut sum = 0.0;
    let mut peak = 0.0f64;
    let mut edge = 0.0f64;
    for i in 0..=m {
        let x = -half_width + i as f64 * h;
        let fx = f(x);
        if !fx.is_finite() {
            return Err(Error::NonFiniteSample { coords: vec![x] });
        }
        peak = peak.max(fx.abs());
        if i == 0 || i == m {
            edge = edge.max(fx.abs());
            sum += fx;
        } else if i % 2 == 1 {
            sum += 4.0 * fx;
        } else {
            sum += 2.0 * fx;
        }
    }
    Ok((sum * h / 3.0, peak, edge))
}
