use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::field::{partial_derivative, MultiIndex, ScalarField};
use crate::net::{EpsilonGrid, FunctionNet, SamplingBox};
use crate::quadrature::{
    damped_value, integrate_damped_scaled, MAX_GAUSS_HERMITE_NODES,
};
use crate::seminorms::{
    fit_finest_half, report_from_seminorms, GrowthReport, MuSpec, FD_BASE_STEP,
};

/// Relative node-doubling change below which an application counts as
/// converged.
pub const QUAD_CONV_REL: f64 = 1e-8;

/// Default Gauss–Hermite node count for operator quadrature.
pub const DEFAULT_NODES: usize = 64;

/// Default evaluation budget for composition chains (estimated kernel
/// evaluations per point).
pub const DEFAULT_BUDGET: u64 = 100_000_000;

/// Slack when comparing fitted kernel-growth slopes against target
/// exponents.
pub const SLOPE_MARGIN: f64 = 0.1;

/// A net of kernels K_ε on ℝ^n × ℝ^n, with optional Gaussian rate hints for
/// the two argument blocks: K·e^{x_rate|x|² + y_rate|y|²} is expected to be
/// slowly varying.
#[derive(Clone, Debug)]
pub struct KernelNet {
    grid: EpsilonGrid,
    fields: Vec<ScalarField>,
    n: usize,
    x_rate: Option<f64>,
    y_rate: Option<f64>,
}

impl KernelNet {
    pub fn from_fields(grid: EpsilonGrid, n: usize, fields: Vec<ScalarField>) -> Result<Self> {
        if n == 0 || n > 2 {
            return Err(Error::invalid("n", format!("supported ranks are 1 and 2, got {n}")));
        }
        if fields.len() != grid.len() {
            return Err(Error::invalid(
                "fields",
                format!("expected {} kernels, got {}", grid.len(), fields.len()),
            ));
        }
        if let Some(bad) = fields.iter().find(|f| f.dim() != 2 * n) {
            return Err(Error::DimensionMismatch {
                expected: 2 * n,
                got: bad.dim(),
            });
        }
        Ok(KernelNet {
            grid,
            fields,
            n,
            x_rate: None,
            y_rate: None,
        })
    }

    pub fn with_rates(mut self, x_rate: f64, y_rate: f64) -> Self {
        self.x_rate = Some(x_rate);
        self.y_rate = Some(y_rate);
        self
    }

    pub fn grid(&self) -> &EpsilonGrid {
        &self.grid
    }

    /// Argument-block dimension n (kernels live on ℝ^{2n}).
    pub fn rank(&self) -> usize {
        self.n
    }

    pub fn field(&self, index: usize) -> &ScalarField {
        &self.fields[index]
    }

    pub fn x_rate(&self) -> Option<f64> {
        self.x_rate
    }

    pub fn y_rate(&self) -> Option<f64> {
        self.y_rate
    }
}

/// Memoization policy for composed kernels: a Chebyshev–Lobatto tensor table
/// on [−R, R]² with barycentric interpolation, falling back to direct
/// evaluation outside the box. Applies to rank-1 kernels at composition
/// depth ≥ 3.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MemoSpec {
    pub nodes_per_axis: usize,
    pub half_width: f64,
}

impl MemoSpec {
    pub fn new(nodes_per_axis: usize, half_width: f64) -> Result<Self> {
        if nodes_per_axis < 8 {
            return Err(Error::invalid("nodes_per_axis", "need at least 8"));
        }
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::invalid("half_width", "must be positive and finite"));
        }
        Ok(MemoSpec {
            nodes_per_axis,
            half_width,
        })
    }
}

/// Quadrature policy attached to an operator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureSpec {
    pub nodes: usize,
    pub memo: Option<MemoSpec>,
    pub budget: u64,
}

impl QuadratureSpec {
    pub fn new(nodes: usize) -> Result<Self> {
        if nodes < 8 || nodes > MAX_GAUSS_HERMITE_NODES {
            return Err(Error::NodesOutOfRange {
                m: nodes,
                max: MAX_GAUSS_HERMITE_NODES,
            });
        }
        Ok(QuadratureSpec {
            nodes,
            memo: None,
            budget: DEFAULT_BUDGET,
        })
    }

    pub fn with_memo(mut self, memo: MemoSpec) -> Self {
        self.memo = Some(memo);
        self
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = budget;
        self
    }
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            nodes: DEFAULT_NODES,
            memo: None,
            budget: DEFAULT_BUDGET,
        }
    }
}

/// The operator (A_ε φ)(x) = ∫ K_ε(x, y) φ_ε(y) e^{−ε|y|²} dy.
#[derive(Clone, Debug)]
pub struct GeneralizedOperator {
    kernel: KernelNet,
    quad: QuadratureSpec,
    depth: usize,
}

/// One operator application with its convergence evidence.
#[derive(Clone, Copy, Debug)]
pub struct Applied {
    pub value: f64,
    /// Node-doubling change.
    pub delta: f64,
    pub converged: bool,
}

impl GeneralizedOperator {
    pub fn new(kernel: KernelNet, quad: QuadratureSpec) -> Self {
        GeneralizedOperator {
            kernel,
            quad,
            depth: 1,
        }
    }

    pub fn kernel(&self) -> &KernelNet {
        &self.kernel
    }

    pub fn quad(&self) -> &QuadratureSpec {
        &self.quad
    }

    /// Composition depth: 1 for a directly-constructed operator.
    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Total Gaussian rate of the y-integrand for input fields with hint
    /// `input_rate`; the quadrature substitutes at this rate.
    fn total_rate(&self, eps: f64, input_rate: Option<f64>) -> Result<f64> {
        let s = eps + self.kernel.y_rate.unwrap_or(0.0) + input_rate.unwrap_or(0.0);
        if !(s > 0.0) {
            return Err(Error::invalid(
                "rate",
                format!("total Gaussian rate {s} is not positive; the integrand may grow"),
            ));
        }
        Ok(s)
    }

    /// Apply the operator at one grid level and point.
    pub fn apply(&self, phi: &FunctionNet, eps: f64, x: &[f64]) -> Result<Applied> {
        let n = self.kernel.n;
        if phi.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: phi.dim(),
            });
        }
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: x.len(),
            });
        }
        let kf = self.kernel.field(self.kernel.grid.find(eps)?);
        let pf = phi.field_at(eps)?;
        let s = self.total_rate(eps, pf.gaussian_rate())?;
        let mut point = vec![0.0; 2 * n];
        point[..n].copy_from_slice(x);
        let integral = integrate_damped_scaled(
            |y: &[f64]| {
                let mut p = point.clone();
                p[n..].copy_from_slice(y);
                kf.value(&p) * pf.value(y)
            },
            n,
            eps,
            s,
            self.quad.nodes,
        )?;
        Ok(Applied {
            value: integral.value,
            delta: integral.delta,
            converged: integral.converged(QUAD_CONV_REL),
        })
    }

    /// The output net ε ↦ A_ε φ_ε as lazily-integrated fields. Requires both
    /// grids to coincide. Output fields inherit the kernel's x-rate hint.
    pub fn apply_as_net(&self, phi: &FunctionNet) -> Result<FunctionNet> {
        let n = self.kernel.n;
        if phi.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: phi.dim(),
            });
        }
        if phi.grid() != &self.kernel.grid {
            return Err(Error::Incompatible(
                "input net and kernel net use different ε-grids".into(),
            ));
        }
        let nodes = self.quad.nodes;
        let fields = self
            .kernel
            .grid
            .values()
            .iter()
            .enumerate()
            .map(|(idx, &eps)| {
                let kf = self.kernel.field(idx).clone();
                let pf = phi.field(idx).clone();
                let s = self.total_rate(eps, pf.gaussian_rate())?;
                let mut out = ScalarField::new(n, move |x: &[f64]| {
                    let mut point = vec![0.0; 2 * n];
                    point[..n].copy_from_slice(x);
                    damped_value(
                        |y: &[f64]| {
                            let mut p = point.clone();
                            p[n..].copy_from_slice(y);
                            kf.value(&p) * pf.value(y)
                        },
                        n,
                        eps,
                        s,
                        nodes,
                    )
                    .unwrap_or(f64::NAN)
                });
                if let Some(r) = self.kernel.x_rate {
                    out = out.with_gaussian_rate(r);
                }
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()?;
        FunctionNet::from_fields(self.kernel.grid.clone(), fields)
    }

    /// A ∘ B: kernels K(x, y) = ∫ K_A(x, z) K_B(z, y) e^{−ε|z|²} dz,
    /// evaluated lazily at the merged node count. Composition depth adds;
    /// beyond depth 2, rank-1 kernels are memoized on a Chebyshev table when
    /// the quadrature spec carries one.
    pub fn compose(outer: &GeneralizedOperator, inner: &GeneralizedOperator) -> Result<Self> {
        let n = outer.kernel.n;
        if inner.kernel.n != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: inner.kernel.n,
            });
        }
        if outer.kernel.grid != inner.kernel.grid {
            return Err(Error::Incompatible(
                "composition requires identical ε-grids".into(),
            ));
        }
        let nodes = outer.quad.nodes.max(inner.quad.nodes);
        let memo = outer.quad.memo.or(inner.quad.memo);
        let budget = outer.quad.budget.min(inner.quad.budget);
        let depth = outer.depth + inner.depth;
        check_budget(nodes, n, depth, memo, budget)?;

        let grid = outer.kernel.grid.clone();
        let mut fields = Vec::with_capacity(grid.len());
        for (idx, &eps) in grid.values().iter().enumerate() {
            let ka = outer.kernel.field(idx).clone();
            let kb = inner.kernel.field(idx).clone();
            let s_z = eps
                + outer.kernel.y_rate.unwrap_or(0.0)
                + inner.kernel.x_rate.unwrap_or(0.0);
            if !(s_z > 0.0) {
                return Err(Error::invalid(
                    "rate",
                    format!("composition integrand rate {s_z} is not positive"),
                ));
            }
            let direct = ScalarField::new(2 * n, move |xy: &[f64]| {
                let x = &xy[..n];
                let y = &xy[n..];
                let mut left = vec![0.0; 2 * n];
                let mut right = vec![0.0; 2 * n];
                left[..n].copy_from_slice(x);
                right[n..].copy_from_slice(y);
                damped_value(
                    |z: &[f64]| {
                        let mut l = left.clone();
                        let mut r = right.clone();
                        l[n..].copy_from_slice(z);
                        r[..n].copy_from_slice(z);
                        ka.value(&l) * kb.value(&r)
                    },
                    n,
                    eps,
                    s_z,
                    nodes,
                )
                .unwrap_or(f64::NAN)
            });
            let field = match memo {
                Some(spec) if depth > 2 && n == 1 => memoize_kernel(direct, spec),
                _ => direct,
            };
            fields.push(field);
        }
        let mut kernel = KernelNet::from_fields(grid, n, fields)?;
        kernel.x_rate = outer.kernel.x_rate;
        kernel.y_rate = inner.kernel.y_rate;
        let quad = QuadratureSpec {
            nodes,
            memo,
            budget,
        };
        Ok(GeneralizedOperator {
            kernel,
            quad,
            depth,
        })
    }

    /// A^k by left-folded composition; k ≥ 1.
    pub fn power(&self, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("k", "need k ≥ 1"));
        }
        let mut acc = self.clone();
        for _ in 1..k {
            acc = GeneralizedOperator::compose(self, &acc)?;
        }
        Ok(acc)
    }

    /// Truncated operator exponential applied to a net:
    /// (e^A φ)(x) ≈ φ_ε(x) + Σ_{k=1}^{K} (A^k φ)(x)/k!.
    ///
    /// Powers are evaluated by vector iteration on the quadrature nodes, so
    /// no composed kernels are materialized. Stops early once a term falls
    /// below `tol` in absolute value; a truncation that never converges is
    /// reported, not raised.
    pub fn exp_apply(
        &self,
        phi: &FunctionNet,
        eps: f64,
        x: &[f64],
        k_max: usize,
        tol: f64,
    ) -> Result<ExpOutcome> {
        let n = self.kernel.n;
        if phi.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: phi.dim(),
            });
        }
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: x.len(),
            });
        }
        if k_max == 0 {
            return Err(Error::invalid("k_max", "need at least one term"));
        }
        if !(tol >= 0.0) {
            return Err(Error::invalid("tol", "must be nonnegative"));
        }
        let kf = self.kernel.field(self.kernel.grid.find(eps)?);
        let pf = phi.field_at(eps)?;
        let m = self.quad.nodes;
        let node_count = m.pow(n as u32);
        let cost = (k_max as u64).saturating_mul((node_count as u64).pow(2));
        if cost > self.quad.budget {
            return Err(Error::Budget {
                cost,
                budget: self.quad.budget,
            });
        }

        let identity_term = pf.value_checked(x)?;
        let mut terms = Vec::new();

        // first-order term: one direct application
        let first = self.apply(phi, eps, x)?;
        terms.push(first.value);
        let mut converged = first.value.abs() <= tol;

        if !converged && k_max >= 2 {
            // nodes at the iterated rate: ε + y_rate + x_rate
            let s_iter = self.total_rate(eps, self.kernel.x_rate)?;
            let (points, log_w) = tensor_nodes(n, s_iter, eps, m)?;
            // v_j = (Aφ)(z_j), the seed vector
            let s_first = self.total_rate(eps, pf.gaussian_rate())?;
            let mut v = Vec::with_capacity(points.len());
            for z in &points {
                let mut point = vec![0.0; 2 * n];
                point[..n].copy_from_slice(z);
                let val = damped_value(
                    |y: &[f64]| {
                        let mut p = point.clone();
                        p[n..].copy_from_slice(y);
                        kf.value(&p) * pf.value(y)
                    },
                    n,
                    eps,
                    s_first,
                    m,
                )?;
                v.push(val);
            }
            // iteration matrix M[i][j] = w_j K(z_i, z_j)
            let len = points.len();
            let mut matrix = vec![0.0f64; len * len];
            let mut buf = vec![0.0; 2 * n];
            for i in 0..len {
                buf[..n].copy_from_slice(&points[i]);
                for j in 0..len {
                    buf[n..].copy_from_slice(&points[j]);
                    matrix[i * len + j] = log_w[j].exp() * kf.value(&buf);
                }
            }
            let norm = s_iter.powf(-(n as f64) / 2.0);
            let mut factorial = 1.0f64;
            let mut out_row = vec![0.0f64; len];
            for k in 2..=k_max {
                factorial *= k as f64;
                // term_k(x) = (1/k!) Σ_j w_j K(x, z_j) v_j
                buf[..n].copy_from_slice(x);
                let mut acc = 0.0;
                for j in 0..len {
                    buf[n..].copy_from_slice(&points[j]);
                    acc += log_w[j].exp() * kf.value(&buf) * v[j];
                }
                let term = norm * acc / factorial;
                if !term.is_finite() {
                    return Err(Error::NonFiniteSample { coords: x.to_vec() });
                }
                terms.push(term);
                if term.abs() <= tol {
                    converged = true;
                    break;
                }
                if k == k_max {
                    break;
                }
                // v ← M v (one more power), absorbing the substitution norm
                for i in 0..len {
                    let mut acc = 0.0;
                    for j in 0..len {
                        acc += matrix[i * len + j] * v[j];
                    }
                    out_row[i] = norm * acc;
                }
                std::mem::swap(&mut v, &mut out_row);
            }
        }

        let value = identity_term + terms.iter().sum::<f64>();
        let last_term = *terms.last().expect("at least one term");
        Ok(ExpOutcome {
            value,
            identity_term,
            terms,
            converged,
            last_term,
        })
    }
}

/// Estimated chain cost for a composed evaluation; memoized chains pay table
/// construction instead of full nesting.
fn check_budget(
    nodes: usize,
    n: usize,
    depth: usize,
    memo: Option<MemoSpec>,
    budget: u64,
) -> Result<()> {
    let cost = match memo {
        Some(spec) if n == 1 && depth > 2 => {
            let table = (spec.nodes_per_axis as u64).saturating_mul(spec.nodes_per_axis as u64);
            table
                .saturating_mul(nodes as u64)
                .saturating_mul(depth as u64)
        }
        _ => {
            let exponent = ((depth - 1) * n + 1) as u32;
            (nodes as u64)
                .checked_pow(exponent)
                .unwrap_or(u64::MAX)
        }
    };
    if cost > budget {
        return Err(Error::Budget { cost, budget });
    }
    Ok(())
}

/// Tensor Gauss–Hermite nodes mapped to rate `s`, with per-point combined
/// log-weights including the excess-exponent compensation.
fn tensor_nodes(n: usize, s: f64, gamma: f64, m: usize) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let rule = crate::quadrature::QuadratureRule::gauss_hermite(m)?;
    let inv_sqrt_s = s.powf(-0.5);
    let excess = (s - gamma) / s;
    let axis: Vec<(f64, f64)> = rule
        .nodes()
        .iter()
        .zip(rule.log_weights())
        .map(|(&t, &lw)| (t * inv_sqrt_s, lw + excess * t * t))
        .collect();
    match n {
        1 => Ok(axis.iter().map(|&(y, lw)| (vec![y], lw)).unzip()),
        2 => {
            let mut points = Vec::with_capacity(axis.len() * axis.len());
            let mut log_w = Vec::with_capacity(axis.len() * axis.len());
            for &(yi, li) in &axis {
                for &(yj, lj) in &axis {
                    points.push(vec![yi, yj]);
                    log_w.push(li + lj);
                }
            }
            Ok((points, log_w))
        }
        _ => Err(Error::invalid("n", "supported ranks are 1 and 2")),
    }
}

/// Truncated-exponential outcome.
#[derive(Clone, Debug)]
pub struct ExpOutcome {
    pub value: f64,
    /// φ_ε(x), the k = 0 term.
    pub identity_term: f64,
    /// Signed series terms (A^k φ)(x)/k! for k = 1, 2, ….
    pub terms: Vec<f64>,
    /// The last term fell below the tolerance before k_max ran out.
    pub converged: bool,
    pub last_term: f64,
}

struct MemoState {
    direct: ScalarField,
    nodes: Vec<f64>,
    lambda: Vec<f64>,
    half_width: f64,
    table: OnceLock<Vec<f64>>,
}

impl MemoState {
    fn table(&self) -> &Vec<f64> {
        self.table.get_or_init(|| {
            let n = self.nodes.len();
            let mut t = vec![0.0; n * n];
            for (i, &xi) in self.nodes.iter().enumerate() {
                for (j, &yj) in self.nodes.iter().enumerate() {
                    t[i * n + j] = self.direct.value(&[xi, yj]);
                }
            }
            t
        })
    }

    fn eval(&self, x: f64, y: f64) -> f64 {
        if x.abs() > self.half_width || y.abs() > self.half_width {
            return self.direct.value(&[x, y]);
        }
        let table = self.table();
        let n = self.nodes.len();
        let cx = barycentric_coefficients(x, &self.nodes, &self.lambda);
        let cy = barycentric_coefficients(y, &self.nodes, &self.lambda);
        let mut acc = 0.0;
        for (i, &wx) in cx.iter().enumerate() {
            if wx == 0.0 {
                continue;
            }
            let row = &table[i * n..(i + 1) * n];
            let mut inner = 0.0;
            for (j, &wy) in cy.iter().enumerate() {
                inner += wy * row[j];
            }
            acc += wx * inner;
        }
        acc
    }
}

/// Normalized barycentric weights for one coordinate; collapses to a
/// one-hot vector when the coordinate coincides with a node.
fn barycentric_coefficients(x: f64, nodes: &[f64], lambda: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; nodes.len()];
    for (j, &c) in nodes.iter().enumerate() {
        let d = x - c;
        if d.abs() < 1e-14 {
            out.iter_mut().for_each(|v| *v = 0.0);
            out[j] = 1.0;
            return out;
        }
        out[j] = lambda[j] / d;
    }
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= total);
    out
}

fn memoize_kernel(direct: ScalarField, spec: MemoSpec) -> ScalarField {
    let n = spec.nodes_per_axis;
    let nodes: Vec<f64> = (0..n)
        .map(|j| spec.half_width * (j as f64 * std::f64::consts::PI / (n - 1) as f64).cos())
        .collect();
    let lambda: Vec<f64> = (0..n)
        .map(|j| {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == n - 1 {
                0.5 * sign
            } else {
                sign
            }
        })
        .collect();
    let state = Arc::new(MemoState {
        direct,
        nodes,
        lambda,
        half_width: spec.half_width,
        table: OnceLock::new(),
    });
    ScalarField::new(2, move |xy: &[f64]| state.eval(xy[0], xy[1]))
}

/// Outcome of a composition identity check at sampled points.
#[derive(Clone, Debug)]
pub struct CompositionReport {
    /// (point, composed value, chained value, |difference|).
    pub per_point: Vec<(Vec<f64>, f64, f64, f64)>,
    pub max_discrepancy: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub warnings: Vec<String>,
}

/// Compare (A∘B)φ against A(Bφ) at the given points and grid level.
pub fn verify_composition(
    outer: &GeneralizedOperator,
    inner: &GeneralizedOperator,
    phi: &FunctionNet,
    eps: f64,
    points: &[Vec<f64>],
    tolerance: f64,
) -> Result<CompositionReport> {
    if points.is_empty() {
        return Err(Error::invalid("points", "need at least one sample point"));
    }
    let composed = GeneralizedOperator::compose(outer, inner)?;
    let chained_input = inner.apply_as_net(phi)?;
    let mut per_point = Vec::with_capacity(points.len());
    let mut max_discrepancy = 0.0f64;
    let mut warnings = Vec::new();
    for x in points {
        let lhs = composed.apply(phi, eps, x)?;
        let rhs = outer.apply(&chained_input, eps, x)?;
        if !lhs.converged || !rhs.converged {
            warnings.push(format!(
                "quadrature not converged at {x:?} (deltas {:.3e}, {:.3e})",
                lhs.delta, rhs.delta
            ));
        }
        let diff = (lhs.value - rhs.value).abs();
        max_discrepancy = max_discrepancy.max(diff);
        per_point.push((x.clone(), lhs.value, rhs.value, diff));
    }
    Ok(CompositionReport {
        per_point,
        max_discrepancy,
        tolerance,
        pass: max_discrepancy <= tolerance,
        warnings,
    })
}

/// Kernel growth against the polynomial scale: fits the ε-slope of
/// s(ε) = sup (1+|x|)^{−q1}(1+|y|)^{−q2}|K_ε(x,y)| and compares it to the
/// two candidate exponents (q1+q2)/2 and (q1+q2+n)/2.
#[derive(Clone, Debug)]
pub struct KernelGrowthReport {
    pub series: Vec<(f64, f64)>,
    pub slope: f64,
    pub r2: f64,
    pub stated_exponent: f64,
    pub corrected_exponent: f64,
    /// Fitted slope exceeds the stated exponent by more than the margin.
    pub exceeds_stated: bool,
    /// Fitted slope stays within the corrected exponent plus margin.
    pub within_corrected: bool,
    pub boundary_flag: bool,
}

pub fn kernel_growth_check(
    kernel: &KernelNet,
    q1: i32,
    q2: i32,
    bounds: &SamplingBox,
    with_derivatives: bool,
) -> Result<KernelGrowthReport> {
    let n = kernel.n;
    let dim = 2 * n;
    let alphas = if with_derivatives {
        MultiIndex::all_up_to(dim, 1)
    } else {
        vec![MultiIndex::zero(dim)]
    };
    let mut series = Vec::with_capacity(kernel.grid.len());
    let mut boundary_flag = false;
    for (idx, &eps) in kernel.grid.values().iter().enumerate() {
        let f = kernel.field(idx);
        let mut best = f64::NEG_INFINITY;
        let mut best_point = vec![0.0; dim];
        for alpha in &alphas {
            let mut failed: Option<Error> = None;
            bounds.for_each_point(dim, |p| {
                if failed.is_some() {
                    return;
                }
                let d = match partial_derivative(f, alpha, p, FD_BASE_STEP) {
                    Ok(d) => d,
                    Err(e) => {
                        failed = Some(e);
                        return;
                    }
                };
                let nx = p[..n].iter().map(|v| v * v).sum::<f64>().sqrt();
                let ny = p[n..].iter().map(|v| v * v).sum::<f64>().sqrt();
                let weighted = (1.0 + nx).powi(-q1) * (1.0 + ny).powi(-q2) * d.abs();
                if weighted > best {
                    best = weighted;
                    best_point = p.to_vec();
                }
            });
            if let Some(e) = failed {
                return Err(e);
            }
        }
        boundary_flag |= bounds.on_outer_shell(&best_point);
        series.push((eps, best));
    }
    let fit = fit_finest_half(&series);
    let (slope, r2) = match fit {
        Some(f) => (f.slope, f.r2),
        None => (f64::NAN, f64::NAN),
    };
    let stated_exponent = (q1 + q2) as f64 / 2.0;
    let corrected_exponent = (q1 + q2 + n as i32) as f64 / 2.0;
    let (exceeds_stated, within_corrected) = match fit {
        Some(f) => (
            f.slope > stated_exponent + SLOPE_MARGIN,
            f.slope <= corrected_exponent + SLOPE_MARGIN,
        ),
        None => (false, false),
    };
    Ok(KernelGrowthReport {
        series,
        slope,
        r2,
        stated_exponent,
        corrected_exponent,
        exceeds_stated,
        within_corrected,
        boundary_flag,
    })
}

/// Moderation evidence for one input net.
#[derive(Clone, Debug)]
pub struct InputModeration {
    /// Smallest output weight exponent with an interior, finite sup at
    /// every ε.
    pub p: Option<u32>,
    /// Same for the input net.
    pub q_prime: Option<u32>,
    /// (ε, μ_out/μ_in) with the accepted exponents.
    pub ratio_series: Vec<(f64, f64)>,
    pub ratio_slope: f64,
    pub ratio_r2: f64,
    pub output_report: GrowthReport,
}

/// Moderation evidence across a family of inputs.
#[derive(Clone, Debug)]
pub struct ModerationReport {
    pub entries: Vec<InputModeration>,
}

/// Verify that moderate inputs produce moderate outputs: for each input net,
/// find admissible polynomial weights for input and output, classify the
/// output's ε-growth, and fit the growth of the seminorm ratio.
pub fn operator_moderation_check(
    op: &GeneralizedOperator,
    inputs: &[FunctionNet],
    l: usize,
    bounds: &SamplingBox,
) -> Result<ModerationReport> {
    const Q_SCAN_MAX: u32 = 12;
    let mut entries = Vec::with_capacity(inputs.len());
    for phi in inputs {
        let out = op.apply_as_net(phi)?;
        let out_sups = seminorm_table(&out, l, Q_SCAN_MAX, bounds)?;
        let in_sups = seminorm_table(phi, l, Q_SCAN_MAX, bounds)?;
        let p = admissible_exponent(&out_sups);
        let q_prime = admissible_exponent(&in_sups);
        let p_used = p.unwrap_or(Q_SCAN_MAX);
        let q_used = q_prime.unwrap_or(Q_SCAN_MAX);
        let grid = out.grid().values();
        let ratio_series: Vec<(f64, f64)> = grid
            .iter()
            .enumerate()
            .map(|(i, &eps)| {
                let num = out_sups.values[p_used as usize][i].0;
                let den = in_sups.values[q_used as usize][i].0;
                let ratio = if num == 0.0 {
                    0.0
                } else {
                    num / den
                };
                (eps, ratio)
            })
            .collect();
        let fit = fit_finest_half(&ratio_series);
        let (ratio_slope, ratio_r2) = match fit {
            Some(f) => (f.slope, f.r2),
            None => (f64::NAN, f64::NAN),
        };
        let out_pairs: Vec<(f64, f64)> = grid
            .iter()
            .enumerate()
            .map(|(i, &eps)| (eps, out_sups.values[p_used as usize][i].0))
            .collect();
        let out_boundary = out_sups.values[p_used as usize].iter().any(|&(_, b)| b);
        let output_report =
            report_from_seminorms(out_pairs, out_boundary, crate::seminorms::DEFAULT_P_MAX);
        entries.push(InputModeration {
            p,
            q_prime,
            ratio_series,
            ratio_slope,
            ratio_r2,
            output_report,
        });
    }
    Ok(ModerationReport { entries })
}

/// Per-q, per-ε seminorm sups (value, boundary) with derivative magnitudes
/// computed once per point.
struct SeminormTable {
    /// values[q][ε-index] = (sup, boundary)
    values: Vec<Vec<(f64, bool)>>,
}

fn seminorm_table(
    net: &FunctionNet,
    l: usize,
    q_max: u32,
    bounds: &SamplingBox,
) -> Result<SeminormTable> {
    let _ = MuSpec::new(0, l)?; // validate the derivative order once
    let alphas = MultiIndex::all_up_to(net.dim(), l);
    let mut values = vec![Vec::with_capacity(net.grid().len()); (q_max + 1) as usize];
    for idx in 0..net.grid().len() {
        let f = net.field(idx);
        // gather |∂^α f| with the point norms, once
        let mut samples: Vec<(f64, bool, f64)> = Vec::new(); // (norm, shell, magnitude)
        for alpha in &alphas {
            let mut failed: Option<Error> = None;
            bounds.for_each_point(net.dim(), |x| {
                if failed.is_some() {
                    return;
                }
                match partial_derivative(f, alpha, x, FD_BASE_STEP) {
                    Ok(d) => {
                        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                        samples.push((norm, bounds.on_outer_shell(x), d.abs()));
                    }
                    Err(e) => failed = Some(e),
                }
            });
            if let Some(e) = failed {
                return Err(e);
            }
        }
        for q in 0..=q_max {
            let mut best = f64::NEG_INFINITY;
            let mut best_shell = false;
            for &(norm, shell, mag) in &samples {
                let weighted = (1.0 + norm).powi(-(q as i32)) * mag;
                if weighted > best {
                    best = weighted;
                    best_shell = shell;
                }
            }
            values[q as usize].push((best, best_shell));
        }
    }
    Ok(SeminormTable { values })
}

/// Smallest q whose sups are finite with interior argmax at every ε.
fn admissible_exponent(table: &SeminormTable) -> Option<u32> {
    table
        .values
        .iter()
        .position(|col| col.iter().all(|&(v, b)| v.is_finite() && !b))
        .map(|q| q as u32)
}
