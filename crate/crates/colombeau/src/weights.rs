use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack used when comparing log-domain inequalities.
const LOG_TOL: f64 = 1e-9;

/// Smallest index range on which the structural conditions are checked.
const MIN_CONDITION_LEN: usize = 17;

/// Caps for the (c, H) search in the stability condition.
const MAX_H_EXPONENT: u32 = 10;
const MAX_C_EXPONENT: u32 = 20;

/// Decay exponents above this are treated as summable in the ratio-sum check.
const SUMMABILITY_EXPONENT: f64 = 1.1;

/// A weight sequence (M_p) with M_0 = 1, stored as ln M_p to keep factorial
/// growth representable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, try_from = "RawWeightSequence")]
pub struct WeightSequence {
    name: String,
    log_values: Vec<f64>,
}

#[derive(Deserialize)]
struct RawWeightSequence {
    name: String,
    log_values: Vec<f64>,
}

impl TryFrom<RawWeightSequence> for WeightSequence {
    type Error = Error;

    fn try_from(raw: RawWeightSequence) -> Result<Self> {
        WeightSequence::new(raw.name, raw.log_values)
    }
}

impl WeightSequence {
    pub fn new(name: impl Into<String>, mut log_values: Vec<f64>) -> Result<Self> {
        if log_values.len() < 2 {
            return Err(Error::invalid("log_values", "need at least M_0 and M_1"));
        }
        if log_values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("log_values", "entries must be finite"));
        }
        if log_values[0].abs() > 1e-12 {
            return Err(Error::invalid(
                "log_values",
                format!("M_0 must be 1 (ln M_0 = {}, want 0)", log_values[0]),
            ));
        }
        log_values[0] = 0.0;
        Ok(WeightSequence {
            name: name.into(),
            log_values,
        })
    }

    /// The Gevrey sequence M_p = (p!)^s for s ≥ 1, up to index `p_max`.
    pub fn gevrey(s: f64, p_max: usize) -> Result<Self> {
        if !(s >= 1.0) || !s.is_finite() {
            return Err(Error::invalid("s", format!("need s ≥ 1, got {s}")));
        }
        if p_max < 1 {
            return Err(Error::invalid("p_max", "need at least 1"));
        }
        let mut log_values = Vec::with_capacity(p_max + 1);
        let mut log_factorial = 0.0;
        log_values.push(0.0);
        for p in 1..=p_max {
            log_factorial += (p as f64).ln();
            log_values.push(s * log_factorial);
        }
        WeightSequence::new(format!("gevrey_{s}"), log_values)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_json_bytes(bytes: &[u8]) -> Result<Self> {
        Ok(serde_json::from_slice(bytes)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(self).expect("weight sequence serializes")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Largest stored index P.
    pub fn p_max(&self) -> usize {
        self.log_values.len() - 1
    }

    /// ln M_p.
    pub fn log_value(&self, p: usize) -> f64 {
        self.log_values[p]
    }

    pub fn log_values(&self) -> &[f64] {
        &self.log_values
    }

    /// Check the structural conditions on the stored range.
    ///
    /// Requires at least 17 stored values so the asymptotic reads mean
    /// something.
    pub fn check_conditions(&self) -> Result<ConditionReport> {
        if self.log_values.len() < MIN_CONDITION_LEN {
            return Err(Error::invalid(
                "p_max",
                format!("condition checks need p_max ≥ {}", MIN_CONDITION_LEN - 1),
            ));
        }
        Ok(ConditionReport {
            log_convex: self.check_log_convexity(),
            log_convex_printed: self.check_printed_variant(),
            stability: self.check_stability(),
            ratio_sum: self.check_ratio_sum(),
        })
    }

    /// Standard log-convexity M_p² ≤ M_{p−1} M_{p+1}.
    fn check_log_convexity(&self) -> bool {
        let l = &self.log_values;
        (1..l.len() - 1).all(|p| 2.0 * l[p] <= l[p - 1] + l[p + 1] + LOG_TOL)
    }

    /// The variant with both right-hand factors at index p−1, i.e.
    /// M_p² ≤ M_{p−1}², reported alongside the standard reading.
    fn check_printed_variant(&self) -> bool {
        let l = &self.log_values;
        (1..l.len()).all(|p| 2.0 * l[p] <= 2.0 * l[p - 1] + LOG_TOL)
    }

    /// Search the smallest H = 2^j, then the smallest c = 2^i, with
    /// M_p ≤ c H^p min_q M_q M_{p−q} over the stored range.
    fn check_stability(&self) -> StabilityReport {
        let l = &self.log_values;
        let n = l.len();
        // excess[p] = max_q (ln M_p − ln M_q − ln M_{p−q})
        let mut excess = vec![0.0f64; n];
        for p in 0..n {
            let mut worst = f64::NEG_INFINITY;
            for q in 0..=p {
                worst = worst.max(l[p] - l[q] - l[p - q]);
            }
            excess[p] = worst;
        }
        let ln2 = std::f64::consts::LN_2;
        for j in 0..=MAX_H_EXPONENT {
            let ln_h = j as f64 * ln2;
            let needed = excess
                .iter()
                .enumerate()
                .map(|(p, &e)| e - p as f64 * ln_h)
                .fold(f64::NEG_INFINITY, f64::max);
            if needed <= MAX_C_EXPONENT as f64 * ln2 + LOG_TOL {
                let i = if needed <= LOG_TOL {
                    0
                } else {
                    (needed / ln2).ceil() as u32
                };
                return StabilityReport {
                    holds: true,
                    c: 1u64 << i,
                    h: 1u64 << j,
                };
            }
        }
        StabilityReport {
            holds: false,
            c: 0,
            h: 0,
        }
    }

    /// Partial sum of Σ M_{p−1}/M_p with a power-law tail extrapolation.
    fn check_ratio_sum(&self) -> RatioSumReport {
        let l = &self.log_values;
        let p_max = l.len() - 1;
        let ratios: Vec<f64> = (1..=p_max).map(|p| (l[p - 1] - l[p]).exp()).collect();
        let partial_sum: f64 = ratios.iter().sum();
        // fit ln r_p ≈ −κ ln p on the upper half of the index range
        let lo = p_max / 2;
        let pts: Vec<(f64, f64)> = (lo..=p_max)
            .filter(|&p| ratios[p - 1] > 0.0)
            .map(|p| ((p as f64).ln(), ratios[p - 1].ln()))
            .collect();
        let kappa = match ols_slope(&pts) {
            Some(slope) => -slope,
            None => 0.0,
        };
        let summable = kappa > SUMMABILITY_EXPONENT;
        let (tail_estimate, extrapolated) = if summable {
            let tail = ratios[p_max - 1] * p_max as f64 / (kappa - 1.0);
            (tail, partial_sum + tail)
        } else {
            (f64::INFINITY, f64::INFINITY)
        };
        RatioSumReport {
            partial_sum,
            decay_exponent: kappa,
            summable,
            tail_estimate,
            extrapolated,
        }
    }

    /// The associated function M(ρ) = sup_p ln(ρ^p / M_p), with M(0) = 0 by
    /// continuity. `truncated` flags a supremum attained at the last stored
    /// index, where the true value may exceed the reported one.
    pub fn associated_function(&self, rho: f64) -> Result<AssociatedValue> {
        if !(rho >= 0.0) || !rho.is_finite() {
            return Err(Error::invalid("rho", "must be nonnegative and finite"));
        }
        if rho == 0.0 {
            return Ok(AssociatedValue {
                value: 0.0,
                argmax: 0,
                truncated: false,
            });
        }
        Ok(self.sup_over_terms(rho, |p| self.log_values[p]))
    }

    /// The growth variant, the associated function of p ↦ M_p / p!.
    pub fn growth_function(&self, rho: f64) -> Result<AssociatedValue> {
        if !(rho >= 0.0) || !rho.is_finite() {
            return Err(Error::invalid("rho", "must be nonnegative and finite"));
        }
        if rho == 0.0 {
            return Ok(AssociatedValue {
                value: 0.0,
                argmax: 0,
                truncated: false,
            });
        }
        let mut log_factorial = 0.0;
        let adjusted: Vec<f64> = self
            .log_values
            .iter()
            .enumerate()
            .map(|(p, &l)| {
                if p > 0 {
                    log_factorial += (p as f64).ln();
                }
                l - log_factorial
            })
            .collect();
        Ok(self.sup_over_terms(rho, |p| adjusted[p]))
    }

    fn sup_over_terms(&self, rho: f64, log_weight: impl Fn(usize) -> f64) -> AssociatedValue {
        let ln_rho = rho.ln();
        let mut best = 0.0f64; // p = 0 term
        let mut argmax = 0usize;
        for p in 1..self.log_values.len() {
            let term = p as f64 * ln_rho - log_weight(p);
            if term > best {
                best = term;
                argmax = p;
            }
        }
        AssociatedValue {
            value: best,
            argmax,
            truncated: argmax == self.p_max(),
        }
    }
}

/// Ordinary least-squares slope through (x, y) pairs; `None` below 2 points
/// or with degenerate x spread.
pub(crate) fn ols_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mean_x = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    Some(sxy / sxx)
}

/// Outcome of the structural condition checks.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionReport {
    /// Standard log-convexity M_p² ≤ M_{p−1} M_{p+1}.
    pub log_convex: bool,
    /// The literal same-index variant M_p² ≤ M_{p−1}², kept for comparison.
    pub log_convex_printed: bool,
    pub stability: StabilityReport,
    pub ratio_sum: RatioSumReport,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StabilityReport {
    pub holds: bool,
    pub c: u64,
    pub h: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RatioSumReport {
    pub partial_sum: f64,
    /// Fitted κ with M_{p−1}/M_p ~ p^{−κ}.
    pub decay_exponent: f64,
    pub summable: bool,
    pub tail_estimate: f64,
    pub extrapolated: f64,
}

/// A value of an associated function together with where the sup was
/// attained.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AssociatedValue {
    pub value: f64,
    pub argmax: usize,
    /// The sup landed on the last stored index; the reported value is a
    /// lower bound for the untruncated supremum.
    pub truncated: bool,
}
