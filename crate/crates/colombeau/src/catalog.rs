//! A small catalog of net and kernel families, addressable from JSON.
//!
//! Scenario files pick a family by name and supply its parameters; the
//! builders here turn a spec plus an ε-grid into the [`FunctionNet`] or
//! [`KernelNet`] the rest of the crate works with. Every family carries
//! closed-form derivatives and, where it decays, a Gaussian rate hint, so
//! classification and operator quadrature stay on the analytic fast paths.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{gauss_exp_derivative, MultiIndex, ScalarField};
use crate::hermite::{
    hermite_derivative, regularize_ultra_with, DampingExponent, HermiteExpansion,
};
use crate::net::{EpsilonGrid, FunctionNet};
use crate::operators::KernelNet;
use crate::weights::WeightSequence;

fn one() -> f64 {
    1.0
}

/// Weight-sequence source: either a Gevrey family by exponent or an explicit
/// log-value table.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightsSpec {
    Gevrey {
        s: f64,
        #[serde(default = "default_gevrey_p_max")]
        p_max: usize,
    },
    Table(WeightSequence),
}

fn default_gevrey_p_max() -> usize {
    128
}

impl WeightsSpec {
    pub fn build(&self) -> Result<WeightSequence> {
        match self {
            WeightsSpec::Gevrey { s, p_max } => WeightSequence::gevrey(*s, *p_max),
            WeightsSpec::Table(w) => Ok(w.clone()),
        }
    }
}

/// Regularization attached to a Hermite-series net: coefficients are damped
/// per grid level using the associated function of the given weights.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegularizeSpec {
    pub weights: WeightsSpec,
    #[serde(default = "one")]
    pub h: f64,
    #[serde(default)]
    pub convention: DampingExponent,
}

/// Net families.
///
/// JSON shape: `{"family": "<name>", ...parameters}`. Families without
/// parameters are bare: `{"family": "zero"}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum NetSpec {
    /// amplitude · ε^{−eps_power} · e^{−rate|x|²}. A negative rate grows at
    /// infinity, which is the standard counterexample to temperedness.
    Gaussian {
        rate: f64,
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default)]
        eps_power: f64,
    },
    /// (ε√π)^{−n} e^{−|x|²/ε²}: the model delta net, moderate of order n.
    Mollifier,
    /// Σ c_k x^k in one variable; ε-independent.
    Polynomial { coefficients: Vec<f64> },
    /// e^{coefficient·(1/ε)^exponent} · e^{−rate|x|²}. Negative coefficients
    /// give negligible nets, positive ones escape every polynomial scale.
    EpsExponential {
        coefficient: f64,
        #[serde(default = "one")]
        exponent: f64,
        #[serde(default = "one")]
        rate: f64,
    },
    /// Σ b_n h_n in one variable, optionally damped per grid level.
    HermiteSeries {
        coefficients: Vec<f64>,
        #[serde(default)]
        regularize: Option<RegularizeSpec>,
    },
    Zero,
}

/// Kernel families for the integral operators, in the same JSON shape.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelSpec {
    /// amplitude · ε^{−eps_power} · e^{−rate(|x|²+|y|²)}.
    Gaussian {
        rate: f64,
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default)]
        eps_power: f64,
    },
    /// ε^{−eps_power} h_i(x) h_j(y); rank one, one-dimensional arguments.
    RankOne {
        i: usize,
        j: usize,
        #[serde(default)]
        eps_power: f64,
    },
    /// ε^{−eps_power} x^{px} y^{py}; no decay, one-dimensional arguments.
    Monomial {
        px: u32,
        py: u32,
        #[serde(default)]
        eps_power: f64,
    },
    Zero,
}

impl NetSpec {
    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

impl KernelSpec {
    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn require_finite(name: &'static str, v: f64) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::invalid(name, format!("must be finite, got {v}")));
    }
    Ok(())
}

/// A separable Gaussian envelope a·e^{c|x|²} with derivatives by coordinate
/// factorization.
fn gaussian_field(dim: usize, amplitude: f64, coefficient: f64) -> ScalarField {
    ScalarField::with_derivatives(
        dim,
        move |x: &[f64]| {
            amplitude * (coefficient * x.iter().map(|v| v * v).sum::<f64>()).exp()
        },
        move |alpha: &MultiIndex, x: &[f64]| {
            let mut prod = amplitude;
            for (k, &xi) in alpha.entries().iter().zip(x) {
                prod *= gauss_exp_derivative(coefficient, *k, xi);
            }
            prod
        },
    )
    .with_gaussian_rate(-coefficient)
}

fn poly_eval(coefficients: &[f64], x: f64) -> f64 {
    coefficients.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// d^k/dx^k Σ c_m x^m evaluated at x.
fn poly_derivative_eval(coefficients: &[f64], k: usize, x: f64) -> f64 {
    let mut acc = 0.0;
    for (m, &c) in coefficients.iter().enumerate().skip(k) {
        let mut fall = 1.0;
        for i in 0..k {
            fall *= (m - i) as f64;
        }
        acc += c * fall * x.powi((m - k) as i32);
    }
    acc
}

/// x^p and its derivatives, with the falling-factorial rule.
fn monomial_1d(p: u32, k: usize, x: f64) -> f64 {
    if k as u32 > p {
        return 0.0;
    }
    let mut fall = 1.0;
    for i in 0..k as u32 {
        fall *= (p - i) as f64;
    }
    fall * x.powi((p - k as u32) as i32)
}

/// Build the net a scenario asked for, on the given grid and dimension.
pub fn build_net(spec: &NetSpec, grid: &EpsilonGrid, dim: usize) -> Result<FunctionNet> {
    if dim == 0 || dim > 2 {
        return Err(Error::invalid("dim", format!("supported dimensions are 1 and 2, got {dim}")));
    }
    match spec {
        NetSpec::Gaussian {
            rate,
            amplitude,
            eps_power,
        } => {
            require_finite("rate", *rate)?;
            require_finite("amplitude", *amplitude)?;
            require_finite("eps_power", *eps_power)?;
            let (rate, amplitude, eps_power) = (*rate, *amplitude, *eps_power);
            FunctionNet::from_fn(grid.clone(), |eps| {
                gaussian_field(dim, amplitude * eps.powf(-eps_power), -rate)
            })
        }
        NetSpec::Mollifier => FunctionNet::from_fn(grid.clone(), |eps| {
            let norm = (eps * std::f64::consts::PI.sqrt()).powi(-(dim as i32));
            gaussian_field(dim, norm, -1.0 / (eps * eps))
        }),
        NetSpec::Polynomial { coefficients } => {
            if dim != 1 {
                return Err(Error::invalid("dim", "polynomial nets are one-dimensional"));
            }
            if coefficients.is_empty() {
                return Err(Error::invalid("coefficients", "need at least one entry"));
            }
            if let Some(bad) = coefficients.iter().find(|c| !c.is_finite()) {
                return Err(Error::invalid(
                    "coefficients",
                    format!("must be finite, got {bad}"),
                ));
            }
            let eval_coeffs = coefficients.clone();
            let deriv_coeffs = coefficients.clone();
            let field = ScalarField::with_derivatives(
                1,
                move |x: &[f64]| poly_eval(&eval_coeffs, x[0]),
                move |alpha: &MultiIndex, x: &[f64]| {
                    poly_derivative_eval(&deriv_coeffs, alpha.entries()[0], x[0])
                },
            )
            .with_gaussian_rate(0.0);
            FunctionNet::from_fn(grid.clone(), |_| field.clone())
        }
        NetSpec::EpsExponential {
            coefficient,
            exponent,
            rate,
        } => {
            require_finite("coefficient", *coefficient)?;
            if !(*exponent > 0.0) || !exponent.is_finite() {
                return Err(Error::invalid("exponent", "must be positive and finite"));
            }
            if !(*rate > 0.0) || !rate.is_finite() {
                return Err(Error::invalid("rate", "must be positive and finite"));
            }
            let (coefficient, exponent, rate) = (*coefficient, *exponent, *rate);
            FunctionNet::from_fn(grid.clone(), |eps| {
                let prefactor = (coefficient * eps.powf(-exponent)).exp();
                gaussian_field(dim, prefactor, -rate)
            })
        }
        NetSpec::HermiteSeries {
            coefficients,
            regularize,
        } => {
            if dim != 1 {
                return Err(Error::invalid(
                    "dim",
                    "hermite series nets are one-dimensional",
                ));
            }
            let expansion = HermiteExpansion::new(coefficients.clone())?;
            match regularize {
                Some(reg) => {
                    let weights = reg.weights.build()?;
                    regularize_ultra_with(&expansion, &weights, reg.h, grid, reg.convention)
                }
                None => {
                    let field = expansion.field();
                    FunctionNet::from_fn(grid.clone(), |_| field.clone())
                }
            }
        }
        NetSpec::Zero => FunctionNet::from_fn(grid.clone(), |_| ScalarField::zero(dim)),
    }
}

/// Build the kernel net a scenario asked for; `n` is the argument-block
/// dimension, so kernels live on ℝ^{2n}.
pub fn build_kernel(spec: &KernelSpec, grid: &EpsilonGrid, n: usize) -> Result<KernelNet> {
    if n == 0 || n > 2 {
        return Err(Error::invalid("n", format!("supported ranks are 1 and 2, got {n}")));
    }
    match spec {
        KernelSpec::Gaussian {
            rate,
            amplitude,
            eps_power,
        } => {
            require_finite("rate", *rate)?;
            require_finite("amplitude", *amplitude)?;
            require_finite("eps_power", *eps_power)?;
            let fields = grid
                .values()
                .iter()
                .map(|&eps| gaussian_field(2 * n, amplitude * eps.powf(-eps_power), -rate))
                .collect();
            Ok(KernelNet::from_fields(grid.clone(), n, fields)?.with_rates(*rate, *rate))
        }
        KernelSpec::RankOne { i, j, eps_power } => {
            if n != 1 {
                return Err(Error::invalid("n", "rank-one kernels are one-dimensional"));
            }
            require_finite("eps_power", *eps_power)?;
            // validate the indices once up front
            hermite_derivative(*i, 0, 0.0)?;
            hermite_derivative(*j, 0, 0.0)?;
            let (i, j) = (*i, *j);
            let fields = grid
                .values()
                .iter()
                .map(|&eps| {
                    let scale = eps.powf(-eps_power);
                    ScalarField::with_derivatives(
                        2,
                        move |p: &[f64]| {
                            scale
                                * hermite_derivative(i, 0, p[0]).unwrap_or(f64::NAN)
                                * hermite_derivative(j, 0, p[1]).unwrap_or(f64::NAN)
                        },
                        move |alpha: &MultiIndex, p: &[f64]| {
                            let orders = alpha.entries();
                            scale
                                * hermite_derivative(i, orders[0], p[0]).unwrap_or(f64::NAN)
                                * hermite_derivative(j, orders[1], p[1]).unwrap_or(f64::NAN)
                        },
                    )
                })
                .collect();
            Ok(KernelNet::from_fields(grid.clone(), 1, fields)?.with_rates(0.5, 0.5))
        }
        KernelSpec::Monomial { px, py, eps_power } => {
            if n != 1 {
                return Err(Error::invalid("n", "monomial kernels are one-dimensional"));
            }
            require_finite("eps_power", *eps_power)?;
            let (px, py) = (*px, *py);
            let fields = grid
                .values()
                .iter()
                .map(|&eps| {
                    let scale = eps.powf(-eps_power);
                    ScalarField::with_derivatives(
                        2,
                        move |p: &[f64]| scale * p[0].powi(px as i32) * p[1].powi(py as i32),
                        move |alpha: &MultiIndex, p: &[f64]| {
                            let orders = alpha.entries();
                            scale
                                * monomial_1d(px, orders[0], p[0])
                                * monomial_1d(py, orders[1], p[1])
                        },
                    )
                })
                .collect();
            Ok(KernelNet::from_fields(grid.clone(), 1, fields)?.with_rates(0.0, 0.0))
        }
        KernelSpec::Zero => {
            let fields = grid.values().iter().map(|_| ScalarField::zero(2 * n)).collect();
            Ok(KernelNet::from_fields(grid.clone(), n, fields)?.with_rates(0.0, 0.0))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::partial_derivative;
    use crate::hermite::hermite_values;

    fn grid() -> EpsilonGrid {
        EpsilonGrid::geometric(6).unwrap()
    }

    #[test]
    fn gaussian_net_values_and_derivatives() {
        let spec = NetSpec::from_json_str(
            r#"{"family": "gaussian", "rate": 2.0, "amplitude": 3.0, "eps_power": 1.0}"#,
        )
        .unwrap();
        let net = build_net(&spec, &grid(), 1).unwrap();
        let eps = 0.25;
        let f = net.field_at(eps).unwrap();
        let x: f64 = 0.7;
        let want = 3.0 / eps * (-2.0 * x * x).exp();
        assert!((f.value(&[x]) - want).abs() < 1e-12 * want);
        // first derivative: −4x·f
        let alpha = MultiIndex::unit(1, 0);
        let d = partial_derivative(f, &alpha, &[x], 1e-4).unwrap();
        assert!((d - (-4.0 * x) * want).abs() < 1e-10);
        assert_eq!(f.gaussian_rate(), Some(2.0));
        assert!(f.is_analytic());
    }

    #[test]
    fn negative_rate_gaussian_grows() {
        let spec = NetSpec::from_json_str(r#"{"family": "gaussian", "rate": -1.0}"#).unwrap();
        let net = build_net(&spec, &grid(), 1).unwrap();
        let f = net.field_at(0.5).unwrap();
        assert!((f.value(&[3.0]) - (9.0f64).exp()).abs() < 1e-9 * (9.0f64).exp());
        assert_eq!(f.gaussian_rate(), Some(-1.0));
    }

    #[test]
    fn mollifier_peak_scales_inversely() {
        let spec = NetSpec::from_json_str(r#"{"family": "mollifier"}"#).unwrap();
        let net = build_net(&spec, &grid(), 1).unwrap();
        for &eps in &[0.5, 0.25, 0.03125] {
            let f = net.field_at(eps).unwrap();
            let want = 1.0 / (eps * std::f64::consts::PI.sqrt());
            assert!((f.value(&[0.0]) - want).abs() < 1e-12 * want);
            // unit mass: closed form ∫(ε√π)^{−1}e^{−x²/ε²}dx = 1; check the
            // half-width point instead of integrating
            let at_eps = f.value(&[eps]);
            assert!((at_eps - want * (-1.0f64).exp()).abs() < 1e-12 * want);
        }
    }

    #[test]
    fn mollifier_in_two_dimensions() {
        let spec = NetSpec::Mollifier;
        let net = build_net(&spec, &grid(), 2).unwrap();
        let eps = 0.5;
        let f = net.field_at(eps).unwrap();
        let want = 1.0 / (eps * eps * std::f64::consts::PI);
        assert!((f.value(&[0.0, 0.0]) - want).abs() < 1e-12 * want);
    }

    #[test]
    fn polynomial_net_derivatives_are_exact() {
        let spec =
            NetSpec::from_json_str(r#"{"family": "polynomial", "coefficients": [1, 0, 0, 2]}"#)
                .unwrap();
        let net = build_net(&spec, &grid(), 1).unwrap();
        let f = net.field_at(0.5).unwrap();
        assert_eq!(f.value(&[2.0]), 17.0); // 1 + 2·8
        let d2 = MultiIndex::new(vec![2]);
        // d²/dx²(1 + 2x³) = 12x
        let got = partial_derivative(f, &d2, &[1.5], 1e-4).unwrap();
        assert!((got - 18.0).abs() < 1e-12);
        assert!(matches!(
            build_net(&spec, &grid(), 2),
            Err(Error::InvalidParameter { name: "dim", .. })
        ));
    }

    #[test]
    fn eps_exponential_signs() {
        let negligible =
            NetSpec::from_json_str(r#"{"family": "eps_exponential", "coefficient": -1.0}"#)
                .unwrap();
        let net = build_net(&negligible, &grid(), 1).unwrap();
        let coarse = net.field_at(0.5).unwrap().value(&[0.0]);
        let fine = net.field_at(0.03125).unwrap().value(&[0.0]);
        assert!((coarse - (-2.0f64).exp()).abs() < 1e-15);
        assert!((fine - (-32.0f64).exp()).abs() < 1e-12 * (-32.0f64).exp());

        let exploding = NetSpec::EpsExponential {
            coefficient: 0.1,
            exponent: 1.0,
            rate: 1.0,
        };
        let net = build_net(&exploding, &grid(), 1).unwrap();
        let fine = net.field_at(0.03125).unwrap().value(&[0.0]);
        assert!((fine - (3.2f64).exp()).abs() < 1e-12 * (3.2f64).exp());
    }

    #[test]
    fn hermite_series_plain_and_regularized() {
        let spec = NetSpec::from_json_str(
            r#"{"family": "hermite_series", "coefficients": [0, 1]}"#,
        )
        .unwrap();
        let net = build_net(&spec, &grid(), 1).unwrap();
        let x = 0.9;
        let want = hermite_values(1, x)[1];
        for &eps in &[0.5, 0.03125] {
            let got = net.field_at(eps).unwrap().value(&[x]);
            assert!((got - want).abs() < 1e-14);
        }

        // M(√1·h) = 0 at h = 1, so damping only bites at higher indices
        let reg = NetSpec::from_json_str(
            r#"{
                "family": "hermite_series",
                "coefficients": [0, 0, 0, 0, 1],
                "regularize": {"weights": {"gevrey": {"s": 2.0}}, "h": 1.0}
            }"#,
        )
        .unwrap();
        let net = build_net(&reg, &grid(), 1).unwrap();
        let want = hermite_values(4, x)[4];
        let coarse = net.field_at(0.5).unwrap().value(&[x]);
        let fine = net.field_at(0.03125).unwrap().value(&[x]);
        // damping weakens as ε shrinks
        assert!(coarse.abs() < fine.abs());
        assert!(fine.abs() <= want.abs() + 1e-12);
    }

    #[test]
    fn zero_net_is_zero() {
        let net = build_net(&NetSpec::Zero, &grid(), 2).unwrap();
        assert_eq!(net.field_at(0.5).unwrap().value(&[1.0, -2.0]), 0.0);
    }

    #[test]
    fn gaussian_kernel_build() {
        let spec = KernelSpec::from_json_str(r#"{"family": "gaussian", "rate": 1.0}"#).unwrap();
        let kernel = build_kernel(&spec, &grid(), 1).unwrap();
        assert_eq!(kernel.rank(), 1);
        assert_eq!(kernel.x_rate(), Some(1.0));
        let f = kernel.field(0);
        let want = (-1.0f64 - 4.0).exp();
        assert!((f.value(&[1.0, 2.0]) - want).abs() < 1e-15);
    }

    #[test]
    fn rank_one_kernel_matches_hermite_product() {
        let spec =
            KernelSpec::from_json_str(r#"{"family": "rank_one", "i": 2, "j": 1}"#).unwrap();
        let kernel = build_kernel(&spec, &grid(), 1).unwrap();
        let f = kernel.field(3);
        let (x, y) = (0.4, -1.2);
        let want = hermite_values(2, x)[2] * hermite_values(1, y)[1];
        assert!((f.value(&[x, y]) - want).abs() < 1e-14);
        assert!(matches!(
            build_kernel(&spec, &grid(), 2),
            Err(Error::InvalidParameter { name: "n", .. })
        ));
        let bad = KernelSpec::RankOne {
            i: 400,
            j: 0,
            eps_power: 0.0,
        };
        assert!(matches!(
            build_kernel(&bad, &grid(), 1),
            Err(Error::HermiteIndex { .. })
        ));
    }

    #[test]
    fn monomial_kernel_derivatives() {
        let spec = KernelSpec::Monomial {
            px: 3,
            py: 2,
            eps_power: 0.5,
        };
        let kernel = build_kernel(&spec, &grid(), 1).unwrap();
        let idx = 1; // ε = 0.25 → scale = 0.25^{−1/2} = 2
        let f = kernel.field(idx);
        let (x, y) = (1.5, -2.0);
        assert!((f.value(&[x, y]) - 2.0 * x.powi(3) * y * y).abs() < 1e-12);
        let alpha = MultiIndex::new(vec![2, 1]);
        // ∂x²∂y: 6x·2y·scale
        let got = partial_derivative(f, &alpha, &[x, y], 1e-4).unwrap();
        assert!((got - 2.0 * 6.0 * x * 2.0 * y).abs() < 1e-10);
    }

    #[test]
    fn unknown_family_is_rejected() {
        let err = NetSpec::from_json_str(r#"{"family": "cauchy"}"#).unwrap_err();
        assert!(matches!(err, Error::Json(_)));
        let err = KernelSpec::from_json_str(r#"{"family": "hilbert"}"#).unwrap_err();
        assert!(matches!(err, Error::Json(_)));
    }

    #[test]
    fn missing_required_field_is_rejected() {
        assert!(NetSpec::from_json_str(r#"{"family": "gaussian"}"#).is_err());
        assert!(KernelSpec::from_json_str(r#"{"family": "monomial", "px": 1}"#).is_err());
    }

    #[test]
    fn spec_round_trips_through_json() {
        let spec = NetSpec::EpsExponential {
            coefficient: -2.0,
            exponent: 1.5,
            rate: 1.0,
        };
        let text = serde_json::to_string(&spec).unwrap();
        let back = NetSpec::from_json_str(&text).unwrap();
        assert!(matches!(
            back,
            NetSpec::EpsExponential { coefficient, .. } if coefficient == -2.0
        ));
    }

    #[test]
    fn nonfinite_parameters_are_rejected() {
        let spec = NetSpec::Gaussian {
            rate: f64::NAN,
            amplitude: 1.0,
            eps_power: 0.0,
        };
        assert!(build_net(&spec, &grid(), 1).is_err());
        let spec = NetSpec::EpsExponential {
            coefficient: 1.0,
            exponent: -1.0,
            rate: 1.0,
        };
        assert!(build_net(&spec, &grid(), 1).is_err());
    }
}
