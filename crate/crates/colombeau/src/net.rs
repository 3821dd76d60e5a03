use crate::error::{Error, Result};
use crate::field::{gaussian_damp, ScalarField};

/// Minimum number of levels in an ε-grid; growth fits need at least this many.
pub const MIN_GRID_LEVELS: usize = 4;

/// Relative tolerance when matching a requested ε against a grid point.
const EPS_MATCH_REL: f64 = 1e-12;

/// A strictly decreasing sequence of regularization parameters in (0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct EpsilonGrid {
    values: Vec<f64>,
}

impl EpsilonGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < MIN_GRID_LEVELS {
            return Err(Error::invalid(
                "epsilon_grid",
                format!("need at least {MIN_GRID_LEVELS} levels, got {}", values.len()),
            ));
        }
        for &v in &values {
            if !(v > 0.0 && v <= 1.0) || !v.is_finite() {
                return Err(Error::invalid(
                    "epsilon_grid",
                    format!("value {v} outside (0, 1]"),
                ));
            }
        }
        if !values.windows(2).all(|w| w[0] > w[1]) {
            return Err(Error::invalid("epsilon_grid", "values must strictly decrease"));
        }
        Ok(EpsilonGrid { values })
    }

    /// The grid 2^{−1}, …, 2^{−levels}.
    pub fn geometric(levels: usize) -> Result<Self> {
        if levels < MIN_GRID_LEVELS {
            return Err(Error::invalid(
                "levels",
                format!("need at least {MIN_GRID_LEVELS}, got {levels}"),
            ));
        }
        EpsilonGrid::new((1..=levels).map(|k| 0.5f64.powi(k as i32)).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index of the grid point matching `eps` up to relative rounding slack.
    pub fn find(&self, eps: f64) -> Result<usize> {
        self.values
            .iter()
            .position(|&v| (v - eps).abs() <= EPS_MATCH_REL * v.max(eps))
            .ok_or(Error::EpsilonNotOnGrid { eps })
    }

    /// The finest-half suffix used for asymptotic fits (smallest ε values).
    pub fn finest_half(&self) -> &[f64] {
        &self.values[self.values.len() / 2..]
    }
}

/// The default grid 2^{−1}, …, 2^{−12}.
impl Default for EpsilonGrid {
    fn default() -> Self {
        EpsilonGrid::geometric(12).expect("default grid is valid")
    }
}

/// A net (f_ε)_ε of smooth fields over a shared ε-grid, all on ℝ^d.
#[derive(Clone, Debug)]
pub struct FunctionNet {
    grid: EpsilonGrid,
    fields: Vec<ScalarField>,
    dim: usize,
}

impl FunctionNet {
    pub fn from_fields(grid: EpsilonGrid, fields: Vec<ScalarField>) -> Result<Self> {
        if fields.len() != grid.len() {
            return Err(Error::invalid(
                "fields",
                format!("expected {} fields, got {}", grid.len(), fields.len()),
            ));
        }
        let dim = fields[0].dim();
        if let Some(bad) = fields.iter().find(|f| f.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: bad.dim(),
            });
        }
        Ok(FunctionNet { grid, fields, dim })
    }

    /// Build a net by instantiating one field per grid level.
    pub fn from_fn(grid: EpsilonGrid, make: impl Fn(f64) -> ScalarField) -> Result<Self> {
        let fields = grid.values().iter().map(|&e| make(e)).collect();
        FunctionNet::from_fields(grid, fields)
    }

    pub fn grid(&self) -> &EpsilonGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn field(&self, index: usize) -> &ScalarField {
        &self.fields[index]
    }

    pub fn field_at(&self, eps: f64) -> Result<&ScalarField> {
        Ok(&self.fields[self.grid.find(eps)?])
    }

    /// f_ε(x); errors when ε is off-grid or x has the wrong dimension.
    pub fn evaluate(&self, eps: f64, x: &[f64]) -> Result<f64> {
        self.field_at(eps)?.value_checked(x)
    }

    /// The damped net ε ↦ f_ε · e^{−ε|x|²}.
    pub fn double_regularize(&self) -> FunctionNet {
        let fields = self
            .grid
            .values()
            .iter()
            .zip(&self.fields)
            .map(|(&e, f)| gaussian_damp(f, e).expect("grid ε is positive"))
            .collect();
        FunctionNet {
            grid: self.grid.clone(),
            fields,
            dim: self.dim,
        }
    }
}

/// A net of generalized constants (c_ε)_ε.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneralizedConstantNet {
    grid: EpsilonGrid,
    values: Vec<f64>,
}

impl GeneralizedConstantNet {
    pub fn new(grid: EpsilonGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid(
                "values",
                format!("expected {} values, got {}", grid.len(), values.len()),
            ));
        }
        Ok(GeneralizedConstantNet { grid, values })
    }

    pub fn grid(&self) -> &EpsilonGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn pairs(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.grid.values().iter().copied().zip(self.values.iter().copied())
    }
}

/// A centered hypercube [−R, R]^d sampled on a uniform tensor grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SamplingBox {
    half_width: f64,
    points_per_axis: usize,
}

impl SamplingBox {
    pub fn new(half_width: f64, points_per_axis: usize) -> Result<Self> {
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::invalid("half_width", "must be positive and finite"));
        }
        if points_per_axis < 3 {
            return Err(Error::invalid("points_per_axis", "need at least 3"));
        }
        Ok(SamplingBox {
            half_width,
            points_per_axis,
        })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    /// Uniform axis samples including both endpoints.
    pub fn axis_points(&self) -> Vec<f64> {
        let n = self.points_per_axis;
        let step = 2.0 * self.half_width / (n - 1) as f64;
        (0..n).map(|i| -self.half_width + i as f64 * step).collect()
    }

    /// Visit every tensor-grid point of the box in ℝ^dim.
    pub fn for_each_point(&self, dim: usize, mut visit: impl FnMut(&[f64])) {
        let axis = self.axis_points();
        let mut idx = vec![0usize; dim];
        let mut point = vec![axis[0]; dim];
        loop {
            visit(&point);
            let mut k = dim;
            loop {
                if k == 0 {
                    return;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < axis.len() {
                    point[k] = axis[idx[k]];
                    break;
                }
                idx[k] = 0;
                point[k] = axis[0];
            }
        }
    }

    /// True when the point lies in the outer 10% shell (sup-norm ≥ 0.9 R),
    /// where a seminorm argmax suggests the box truncated the sup.
    pub fn on_outer_shell(&self, x: &[f64]) -> bool {
        let sup = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        sup >= 0.9 * self.half_width
    }
}

impl Default for SamplingBox {
    fn default() -> Self {
        SamplingBox {
            half_width: 8.0,
            points_per_axis: 161,
        }
    }
}
