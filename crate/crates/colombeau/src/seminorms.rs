use std::fmt;

use serde_json::Value;

use crate::error::{Error, Result};
use crate::field::{partial_derivative, MultiIndex, ScalarField, MAX_DERIVATIVE_ORDER};
use crate::net::{FunctionNet, SamplingBox};
use crate::weights::WeightSequence;

/// Finite-difference step used for seminorm derivatives of opaque fields.
pub const FD_BASE_STEP: f64 = 1e-4;

/// Slack added to a fitted slope before rounding to an integer order.
pub const SLOPE_TOLERANCE: f64 = 0.25;

/// Minimum fit quality for a slope-based verdict.
pub const R2_THRESHOLD: f64 = 0.98;

/// Default negligibility depth: ε-powers checked up to this exponent.
pub const DEFAULT_P_MAX: u32 = 8;

/// Largest polynomial weight exponent tried by the tempered classifier.
pub const DEFAULT_Q_MAX: u32 = 12;

/// Relative slack for monotone-ratio comparisons.
const RATIO_SLACK: f64 = 1e-9;

/// Multipliers applied to the base h (and the k-grid) in the ultra scans.
const H_FACTORS: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];
const K_VALUES: [f64; 4] = [0.5, 1.0, 2.0, 4.0];

/// Parameters of the polynomial seminorm
/// μ_{q,l}(f) = sup_{|α| ≤ l, x} (1 + |x|)^q |∂^α f(x)|.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MuSpec {
    q: i32,
    l: usize,
}

impl MuSpec {
    pub fn new(q: i32, l: usize) -> Result<Self> {
        if l > MAX_DERIVATIVE_ORDER {
            return Err(Error::DerivativeOrder {
                requested: l,
                max: MAX_DERIVATIVE_ORDER,
            });
        }
        Ok(MuSpec { q, l })
    }

    pub fn q(&self) -> i32 {
        self.q
    }

    pub fn l(&self) -> usize {
        self.l
    }
}

/// Parameters of the ultra seminorm
/// ν_h(f) = sup h^{|α|+|β|} |x^β ∂^α f(x)| / (M_{|α|} M̃_{|β|}).
#[derive(Clone, Debug)]
pub struct NuSpec {
    h: f64,
    deriv_weights: WeightSequence,
    monomial_weights: WeightSequence,
    cap: usize,
}

impl NuSpec {
    pub fn new(
        h: f64,
        deriv_weights: WeightSequence,
        monomial_weights: WeightSequence,
        cap: usize,
    ) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::invalid("h", "must be positive and finite"));
        }
        if cap > MAX_DERIVATIVE_ORDER {
            return Err(Error::DerivativeOrder {
                requested: cap,
                max: MAX_DERIVATIVE_ORDER,
            });
        }
        if deriv_weights.p_max() < cap || monomial_weights.p_max() < cap {
            return Err(Error::invalid(
                "cap",
                "weight sequences must cover indices up to the cap",
            ));
        }
        Ok(NuSpec {
            h,
            deriv_weights,
            monomial_weights,
            cap,
        })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn deriv_weights(&self) -> &WeightSequence {
        &self.deriv_weights
    }

    pub fn monomial_weights(&self) -> &WeightSequence {
        &self.monomial_weights
    }
}

/// A seminorm evaluation: the sup, where it was attained, and whether that
/// point sits on the sampling box's outer shell.
#[derive(Clone, Debug)]
pub struct SeminormValue {
    pub value: f64,
    pub argmax: Vec<f64>,
    /// Sup attained in the outer 10% shell — the box probably truncated it.
    pub boundary: bool,
}

/// Evaluate μ_{q,l} over the sampling box.
pub fn mu_seminorm(f: &ScalarField, spec: &MuSpec, bounds: &SamplingBox) -> Result<SeminormValue> {
    let alphas = MultiIndex::all_up_to(f.dim(), spec.l);
    let mut best = f64::NEG_INFINITY;
    let mut argmax = vec![0.0; f.dim()];
    let mut overflowed = false;
    for alpha in &alphas {
        let mut failed: Option<Error> = None;
        bounds.for_each_point(f.dim(), |x| {
            if failed.is_some() || overflowed {
                return;
            }
            let d = match partial_derivative(f, alpha, x, FD_BASE_STEP) {
                Ok(d) => d,
                Err(e) => {
                    failed = Some(e);
                    return;
                }
            };
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let weighted = (1.0 + norm).powi(spec.q) * d.abs();
            if !weighted.is_finite() {
                overflowed = true;
                argmax = x.to_vec();
                return;
            }
            if weighted > best {
                best = weighted;
                argmax = x.to_vec();
            }
        });
        if let Some(e) = failed {
            return Err(e);
        }
        if overflowed {
            break;
        }
    }
    let value = if overflowed { f64::INFINITY } else { best };
    let boundary = bounds.on_outer_shell(&argmax);
    Ok(SeminormValue {
        value,
        argmax,
        boundary,
    })
}

/// Level maxima feeding the ultra seminorm: entry k holds
/// max over |α|+|β| = k of |x^β ∂^α f| / (M_{|α|} M̃_{|β|}), so that
/// ν_h = max_k h^k · level_k for any h without re-scanning the box.
pub(crate) struct NuLevels {
    pub levels: Vec<f64>,
    pub argmax: Vec<f64>,
    pub boundary: bool,
    pub finite: bool,
}

pub(crate) fn nu_level_maxima(
    f: &ScalarField,
    spec: &NuSpec,
    bounds: &SamplingBox,
) -> Result<NuLevels> {
    let dim = f.dim();
    let alphas = MultiIndex::all_up_to(dim, spec.cap);
    let betas = alphas.clone();
    let mut levels = vec![0.0f64; 2 * spec.cap + 1];
    let mut argmax = vec![0.0; dim];
    let mut best_scaled = f64::NEG_INFINITY;
    let mut finite = true;
    for alpha in &alphas {
        let m_alpha = spec.deriv_weights.log_value(alpha.order()).exp();
        let mut failed: Option<Error> = None;
        bounds.for_each_point(dim, |x| {
            if failed.is_some() || !finite {
                return;
            }
            let d = match partial_derivative(f, alpha, x, FD_BASE_STEP) {
                Ok(d) => d,
                Err(e) => {
                    failed = Some(e);
                    return;
                }
            };
            if !d.is_finite() {
                finite = false;
                argmax = x.to_vec();
                return;
            }
            for beta in &betas {
                let m_beta = spec.monomial_weights.log_value(beta.order()).exp();
                let monomial: f64 = x
                    .iter()
                    .zip(beta.entries())
                    .map(|(&xi, &b)| xi.powi(b as i32))
                    .product();
                let term = (monomial * d).abs() / (m_alpha * m_beta);
                let k = alpha.order() + beta.order();
                if term > levels[k] {
                    levels[k] = term;
                }
                // track the argmax at the requested h for the boundary flag
                let scaled = term * spec.h.powi(k as i32);
                if scaled > best_scaled {
                    best_scaled = scaled;
                    argmax = x.to_vec();
                }
            }
        });
        if let Some(e) = failed {
            return Err(e);
        }
        if !finite {
            break;
        }
    }
    let boundary = bounds.on_outer_shell(&argmax);
    Ok(NuLevels {
        levels,
        argmax,
        boundary,
        finite,
    })
}

/// Evaluate ν_h over the sampling box.
pub fn nu_seminorm(f: &ScalarField, spec: &NuSpec, bounds: &SamplingBox) -> Result<SeminormValue> {
    let levels = nu_level_maxima(f, spec, bounds)?;
    let value = if levels.finite {
        combine_levels(&levels.levels, spec.h)
    } else {
        f64::INFINITY
    };
    Ok(SeminormValue {
        value,
        argmax: levels.argmax,
        boundary: levels.boundary,
    })
}

fn combine_levels(levels: &[f64], h: f64) -> f64 {
    levels
        .iter()
        .enumerate()
        .map(|(k, &g)| h.powi(k as i32) * g)
        .fold(0.0f64, f64::max)
}

/// Growth classification outcome for a net.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    /// Seminorms grow no faster than ε^{−n} (within the slope tolerance).
    Moderate(u32),
    /// Seminorms fall faster than every checked power of ε.
    Negligible,
    /// Definitely outside the tested scale (overflow, or no admissible
    /// weight).
    Neither,
    /// The data did not support a verdict (poor fit, too few points).
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Moderate(n) => write!(f, "moderate({n})"),
            Verdict::Negligible => write!(f, "negligible"),
            Verdict::Neither => write!(f, "neither"),
            Verdict::Inconclusive => write!(f, "inconclusive"),
        }
    }
}

/// A seminorm-vs-ε record with the fitted asymptotics and verdict.
#[derive(Clone, Debug)]
pub struct GrowthReport {
    /// (ε, seminorm) pairs in grid order.
    pub seminorm_values: Vec<(f64, f64)>,
    /// Fitted slope of ln(seminorm) against ln(1/ε) on the finest half;
    /// NaN when no fit was possible.
    pub slope: f64,
    /// Fit quality; NaN when no fit was possible.
    pub r2: f64,
    pub verdict: Verdict,
    /// Some argmax landed on the sampling box's outer shell.
    pub boundary_flag: bool,
    /// Accepted weight exponent (tempered classification only).
    pub chosen_q: Option<u32>,
    pub diagnostics: Vec<String>,
}

impl GrowthReport {
    /// The report as a JSON value; non-finite numbers become null.
    pub fn to_json(&self) -> Value {
        let seminorm: Vec<Value> = self
            .seminorm_values
            .iter()
            .map(|&(e, v)| Value::Array(vec![json_num(e), json_num(v)]))
            .collect();
        let mut map = serde_json::Map::new();
        map.insert("seminorm".into(), Value::Array(seminorm));
        map.insert("slope".into(), json_num(self.slope));
        map.insert("r2".into(), json_num(self.r2));
        map.insert("verdict".into(), Value::String(self.verdict.to_string()));
        map.insert(
            "q".into(),
            match self.chosen_q {
                Some(q) => Value::from(q),
                None => Value::Null,
            },
        );
        map.insert("boundary_flag".into(), Value::Bool(self.boundary_flag));
        map.insert(
            "diagnostics".into(),
            Value::Array(
                self.diagnostics
                    .iter()
                    .map(|d| Value::String(d.clone()))
                    .collect(),
            ),
        );
        Value::Object(map)
    }
}

fn json_num(x: f64) -> Value {
    serde_json::Number::from_f64(x)
        .map(Value::Number)
        .unwrap_or(Value::Null)
}

/// Least-squares line through (x, y) with its r².
#[derive(Clone, Copy, Debug)]
pub(crate) struct LinearFit {
    pub slope: f64,
    pub r2: f64,
}

pub(crate) fn linear_fit(pts: &[(f64, f64)]) -> Option<LinearFit> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = pts
        .iter()
        .map(|p| (p.1 - (intercept + slope * p.0)).powi(2))
        .sum();
    let ss_tot: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    // essentially-constant y (variation at rounding level) is a perfect fit
    let y_scale: f64 = pts.iter().map(|p| p.1 * p.1).sum();
    let r2 = if ss_tot <= 1e-24 * y_scale.max(1e-300) {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    Some(LinearFit { slope, r2 })
}

/// Fit ln(value) against ln(1/ε) on the finest (smallest-ε) half of the
/// pairs, ignoring zero values.
pub(crate) fn fit_finest_half(pairs: &[(f64, f64)]) -> Option<LinearFit> {
    let half = &pairs[pairs.len() / 2..];
    let pts: Vec<(f64, f64)> = half
        .iter()
        .filter(|&&(_, v)| v > 0.0 && v.is_finite())
        .map(|&(e, v)| ((1.0 / e).ln(), v.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    linear_fit(&pts)
}

fn negligible_on_finest_half(pairs: &[(f64, f64)], p_max: u32) -> bool {
    let half = &pairs[pairs.len() / 2..];
    for p in 0..=p_max {
        let ratios: Vec<f64> = half.iter().map(|&(e, v)| v / e.powi(p as i32)).collect();
        let nonincreasing = ratios
            .windows(2)
            .all(|w| w[1] <= w[0] * (1.0 + RATIO_SLACK));
        if !nonincreasing {
            return false;
        }
        let first = ratios[0];
        let last = ratios[ratios.len() - 1];
        let shrinks = first == 0.0 || last < first * (1.0 - RATIO_SLACK);
        if !shrinks {
            return false;
        }
    }
    true
}

/// Classify a net's μ-seminorm growth in ε.
///
/// The verdict is negligible when value/ε^p shrinks monotonically on the
/// finest half of the grid for every p ≤ p_max; otherwise a slope fit of
/// ln μ against ln(1/ε) determines the moderate order
/// n = ⌈slope − tolerance⌉ (clamped at 0) when r² clears the threshold.
pub fn classify_power_growth(
    net: &FunctionNet,
    spec: &MuSpec,
    bounds: &SamplingBox,
    p_max: u32,
) -> Result<GrowthReport> {
    let mut seminorm_values = Vec::with_capacity(net.grid().len());
    let mut boundary_flag = false;
    for (idx, &eps) in net.grid().values().iter().enumerate() {
        let s = mu_seminorm(net.field(idx), spec, bounds)?;
        boundary_flag |= s.boundary;
        seminorm_values.push((eps, s.value));
    }
    Ok(report_from_seminorms(seminorm_values, boundary_flag, p_max))
}

/// Log-range on the finest grid half below which a net counts as bounded
/// outright. The fit-quality gate below is meaningless at this scale:
/// curvature of a few percent dominates ss_tot and tanks r² even though the
/// values clearly neither grow nor vanish.
const BOUNDED_LOG_SPAN: f64 = 0.1;

fn bounded_log_span(pairs: &[(f64, f64)]) -> bool {
    let half = &pairs[pairs.len() / 2..];
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &(_, v) in half {
        if !(v > 0.0) || !v.is_finite() {
            return false;
        }
        lo = lo.min(v.ln());
        hi = hi.max(v.ln());
    }
    hi - lo <= BOUNDED_LOG_SPAN
}

/// Build the growth verdict from already-computed (ε, seminorm) pairs.
pub(crate) fn report_from_seminorms(
    seminorm_values: Vec<(f64, f64)>,
    boundary_flag: bool,
    p_max: u32,
) -> GrowthReport {
    let overflow = seminorm_values.iter().any(|&(_, v)| !v.is_finite());
    let fit = fit_finest_half(&seminorm_values);
    let (slope, r2) = match fit {
        Some(f) => (f.slope, f.r2),
        None => (f64::NAN, f64::NAN),
    };
    let mut diagnostics = Vec::new();
    let verdict = if overflow {
        diagnostics.push("seminorm overflow on the sampling box".into());
        Verdict::Neither
    } else if negligible_on_finest_half(&seminorm_values, p_max) {
        Verdict::Negligible
    } else if bounded_log_span(&seminorm_values) {
        diagnostics.push("seminorm values bounded across the grid".into());
        Verdict::Moderate(0)
    } else {
        match fit {
            None => {
                diagnostics.push("not enough positive seminorm values for a fit".into());
                Verdict::Inconclusive
            }
            Some(f) if f.r2 < R2_THRESHOLD => {
                diagnostics.push(format!(
                    "log-log fit below quality threshold (r² = {:.4})",
                    f.r2
                ));
                Verdict::Inconclusive
            }
            Some(f) => {
                let n = (f.slope - SLOPE_TOLERANCE).ceil().max(0.0) as u32;
                Verdict::Moderate(n)
            }
        }
    };
    GrowthReport {
        seminorm_values,
        slope,
        r2,
        verdict,
        boundary_flag,
        chosen_q: None,
        diagnostics,
    }
}

/// Search for the smallest polynomial weight exponent q ≤ 12 under which the
/// net's μ_{−q,l} growth is moderate or negligible with an interior argmax.
pub fn classify_tempered(
    net: &FunctionNet,
    l: usize,
    bounds: &SamplingBox,
    p_max: u32,
) -> Result<GrowthReport> {
    let mut last: Option<GrowthReport> = None;
    for q in 0..=DEFAULT_Q_MAX {
        let spec = MuSpec::new(-(q as i32), l)?;
        let mut report = classify_power_growth(net, &spec, bounds, p_max)?;
        let admissible = !report.boundary_flag
            && matches!(report.verdict, Verdict::Moderate(_) | Verdict::Negligible);
        if admissible {
            report.chosen_q = Some(q);
            report
                .diagnostics
                .push(format!("accepted with weight exponent q = {q}"));
            return Ok(report);
        }
        last = Some(report);
    }
    let mut report = last.expect("at least one q was tried");
    report.verdict = Verdict::Neither;
    report.chosen_q = None;
    report.diagnostics.push(format!(
        "no weight exponent q ≤ {DEFAULT_Q_MAX} gives interior moderate growth"
    ));
    Ok(report)
}

/// Which ultra scale the h-quantifier ranges over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UltraType {
    /// Algebra: some h. Ideal: some h, every k.
    Roumieu,
    /// Algebra: every h. Ideal: every h and every k.
    Beurling,
}

/// Classify a net against the ultra scale built from ν-seminorms and the
/// growth function of `n_seq`.
///
/// For each h (base h scaled by 1/4 … 4) and each k ∈ {1/2, 1, 2, 4} the
/// differences ln ν_h(f_ε) ∓ N*(k/ε) are fitted against ln(1/ε) on the
/// finest half; a bounded difference (slope ≤ tolerance) passes. Membership
/// in the ideal (negligible) requires the +N* side, membership in the
/// algebra (moderate) the −N* side, with quantifiers per [`UltraType`].
pub fn classify_ultra(
    net: &FunctionNet,
    spec: &NuSpec,
    n_seq: &WeightSequence,
    ty: UltraType,
    bounds: &SamplingBox,
) -> Result<GrowthReport> {
    let grid = net.grid().values();
    let mut level_sets = Vec::with_capacity(grid.len());
    let mut boundary_flag = false;
    let mut overflow = false;
    for idx in 0..grid.len() {
        let levels = nu_level_maxima(net.field(idx), spec, bounds)?;
        boundary_flag |= levels.boundary;
        overflow |= !levels.finite;
        level_sets.push(levels);
    }
    let seminorm_values: Vec<(f64, f64)> = grid
        .iter()
        .zip(&level_sets)
        .map(|(&e, l)| {
            let v = if l.finite {
                combine_levels(&l.levels, spec.h)
            } else {
                f64::INFINITY
            };
            (e, v)
        })
        .collect();
    let fit = fit_finest_half(&seminorm_values);
    let (slope, r2) = match fit {
        Some(f) => (f.slope, f.r2),
        None => (f64::NAN, f64::NAN),
    };

    let mut diagnostics = Vec::new();
    if overflow {
        diagnostics.push("ultra seminorm overflow on the sampling box".into());
        return Ok(GrowthReport {
            seminorm_values,
            slope,
            r2,
            verdict: Verdict::Neither,
            boundary_flag,
            chosen_q: None,
            diagnostics,
        });
    }

    // N*(k/ε) per (k, ε), shared across h
    let mut n_star = vec![vec![0.0f64; grid.len()]; K_VALUES.len()];
    let mut truncated = false;
    for (ki, &k) in K_VALUES.iter().enumerate() {
        for (ei, &eps) in grid.iter().enumerate() {
            let a = n_seq.growth_function(k / eps)?;
            truncated |= a.truncated;
            n_star[ki][ei] = a.value;
        }
    }
    if truncated {
        diagnostics.push(
            "growth function truncated at the stored index range for some k/ε".into(),
        );
    }

    let finest = grid.len() / 2;
    let bounded_difference = |h: f64, ki: usize, sign: f64| -> bool {
        // points (ln 1/ε, ln ν_h + sign·N*) over the finest half
        let mut pts = Vec::with_capacity(grid.len() - finest);
        let mut all_zero = true;
        for ei in finest..grid.len() {
            let nu = combine_levels(&level_sets[ei].levels, h);
            if nu > 0.0 {
                all_zero = false;
                pts.push(((1.0 / grid[ei]).ln(), nu.ln() + sign * n_star[ki][ei]));
            }
        }
        if all_zero {
            return true;
        }
        match linear_fit(&pts) {
            Some(f) => f.slope <= SLOPE_TOLERANCE,
            None => false,
        }
    };

    let hs: Vec<f64> = H_FACTORS.iter().map(|f| f * spec.h).collect();
    let algebra_pass_at = |h: f64| (0..K_VALUES.len()).any(|ki| bounded_difference(h, ki, -1.0));
    let ideal_pass_at = |h: f64| (0..K_VALUES.len()).all(|ki| bounded_difference(h, ki, 1.0));

    let (in_ideal, in_algebra) = match ty {
        UltraType::Roumieu => (
            hs.iter().any(|&h| ideal_pass_at(h)),
            hs.iter().any(|&h| algebra_pass_at(h)),
        ),
        UltraType::Beurling => (
            hs.iter().all(|&h| ideal_pass_at(h)),
            hs.iter().all(|&h| algebra_pass_at(h)),
        ),
    };

    let verdict = if in_ideal {
        diagnostics.push("bounded against e^{−N*(k/ε)} (ideal scale)".into());
        Verdict::Negligible
    } else if in_algebra {
        diagnostics.push("bounded against e^{+N*(k/ε)} (algebra scale)".into());
        Verdict::Moderate(0)
    } else {
        diagnostics.push("unbounded against the ultra scale on every (h, k)".into());
        Verdict::Neither
    };
    Ok(GrowthReport {
        seminorm_values,
        slope,
        r2,
        verdict,
        boundary_flag,
        chosen_q: None,
        diagnostics,
    })
}
