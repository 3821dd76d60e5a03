//! Scenario file schemas, one per subcommand.
//!
//! All four formats are JSON objects with `deny_unknown_fields`, so typos
//! fail loudly instead of silently running defaults.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use colombeau::catalog::{KernelSpec, NetSpec, WeightsSpec};
use colombeau::error::{Error, Result};
use colombeau::hermite::{DampingExponent, DecayDirection};
use colombeau::net::{EpsilonGrid, SamplingBox};
use colombeau::seminorms::UltraType;

/// ε-grid selection: a number of geometric levels 2^{−1} … 2^{−levels}, or
/// explicit values.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    Levels { levels: usize },
    Values { values: Vec<f64> },
}

impl GridSpec {
    pub fn build(&self) -> Result<EpsilonGrid> {
        match self {
            GridSpec::Levels { levels } => EpsilonGrid::geometric(*levels),
            GridSpec::Values { values } => EpsilonGrid::new(values.clone()),
        }
    }
}

fn default_grid() -> Result<EpsilonGrid> {
    EpsilonGrid::geometric(8)
}

/// Resolve the grid, honoring a `--eps-levels` override.
pub fn resolve_grid(spec: &Option<GridSpec>, levels_override: Option<usize>) -> Result<EpsilonGrid> {
    match levels_override {
        Some(levels) => EpsilonGrid::geometric(levels),
        None => match spec {
            Some(g) => g.build(),
            None => default_grid(),
        },
    }
}

/// Sampling box for seminorm sups.
#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub half_width: f64,
    pub points_per_axis: usize,
}

impl BoxSpec {
    pub fn build(&self) -> Result<SamplingBox> {
        SamplingBox::new(self.half_width, self.points_per_axis)
    }
}

pub fn resolve_box(spec: &Option<BoxSpec>) -> Result<SamplingBox> {
    match spec {
        Some(b) => b.build(),
        None => Ok(SamplingBox::default()),
    }
}

/// Evaluation points: an explicit list, or seeded uniform draws from
/// [−span, span]^dim.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum PointsSpec {
    Explicit(Vec<Vec<f64>>),
    Random { count: usize, span: f64, seed: u64 },
}

impl PointsSpec {
    pub fn resolve(&self, dim: usize) -> Result<Vec<Vec<f64>>> {
        match self {
            PointsSpec::Explicit(points) => {
                if points.is_empty() {
                    return Err(Error::invalid("points", "need at least one point"));
                }
                for p in points {
                    if p.len() != dim {
                        return Err(Error::DimensionMismatch {
                            expected: dim,
                            got: p.len(),
                        });
                    }
                    if p.iter().any(|v| !v.is_finite()) {
                        return Err(Error::invalid("points", "coordinates must be finite"));
                    }
                }
                Ok(points.clone())
            }
            PointsSpec::Random { count, span, seed } => {
                if *count == 0 {
                    return Err(Error::invalid("points.count", "need at least one point"));
                }
                if !(*span > 0.0) || !span.is_finite() {
                    return Err(Error::invalid("points.span", "must be positive and finite"));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                Ok((0..*count)
                    .map(|_| (0..dim).map(|_| rng.gen_range(-span..=*span)).collect())
                    .collect())
            }
        }
    }
}

fn one_dim() -> usize {
    1
}

fn default_p_max() -> u32 {
    8
}

fn default_h() -> f64 {
    1.0
}

fn default_cap() -> usize {
    2
}

fn default_ultra_type() -> UltraType {
    UltraType::Roumieu
}

/// Classification request attached to a `classify` scenario.
#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ClassifySpec {
    /// μ_{q,l} growth at a fixed weight exponent.
    Power {
        #[serde(default)]
        q: i32,
        #[serde(default)]
        l: usize,
        #[serde(default = "default_p_max")]
        p_max: u32,
    },
    /// Scan weight exponents for an admissible polynomial scale.
    Tempered {
        #[serde(default)]
        l: usize,
        #[serde(default = "default_p_max")]
        p_max: u32,
    },
    /// ν-seminorms against the N* envelope of `envelope_weights`.
    Ultra {
        weights: WeightsSpec,
        /// Defaults to `weights`.
        #[serde(default)]
        monomial_weights: Option<WeightsSpec>,
        /// Defaults to `weights`.
        #[serde(default)]
        envelope_weights: Option<WeightsSpec>,
        #[serde(default = "default_h")]
        h: f64,
        #[serde(default = "default_cap")]
        cap: usize,
        #[serde(default = "default_ultra_type")]
        ultra_type: UltraType,
    },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyScenario {
    #[serde(default)]
    pub title: Option<String>,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default = "one_dim")]
    pub dim: usize,
    #[serde(rename = "box", default)]
    pub sampling: Option<BoxSpec>,
    pub net: NetSpec,
    pub classify: ClassifySpec,
}

/// Kernel-growth comparison attached to a `compose` scenario.
#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrowthCheckSpec {
    pub q1: i32,
    pub q2: i32,
    #[serde(default)]
    pub with_derivatives: bool,
}

fn default_compose_tolerance() -> f64 {
    1e-8
}

fn default_nodes() -> usize {
    32
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComposeScenario {
    #[serde(default)]
    pub title: Option<String>,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    /// Argument-block dimension of the kernels.
    #[serde(default = "one_dim")]
    pub dim: usize,
    pub outer: KernelSpec,
    pub inner: KernelSpec,
    pub input: NetSpec,
    /// Grid level at which the composition identity is verified.
    pub epsilon: f64,
    pub points: PointsSpec,
    #[serde(default = "default_compose_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    /// When present, the growth check runs on outer^power instead of
    /// outer∘inner.
    #[serde(default)]
    pub power: Option<usize>,
    #[serde(default)]
    pub growth_check: Option<GrowthCheckSpec>,
    #[serde(rename = "box", default)]
    pub sampling: Option<BoxSpec>,
}

fn default_k_max() -> usize {
    24
}

fn default_exp_tolerance() -> f64 {
    1e-12
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpmapScenario {
    #[serde(default)]
    pub title: Option<String>,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default = "one_dim")]
    pub dim: usize,
    pub kernel: KernelSpec,
    pub input: NetSpec,
    pub epsilon: f64,
    pub points: PointsSpec,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    /// Series terms below this magnitude stop the expansion.
    #[serde(default = "default_exp_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    #[serde(default)]
    pub budget: Option<u64>,
}

fn default_true() -> bool {
    true
}

fn default_direction() -> DecayDirection {
    DecayDirection::Decay
}

/// Round-trip projection check: synthesize the expansion, project it back,
/// and report the largest coefficient discrepancy.
#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoundtripSpec {
    pub n_max: usize,
    #[serde(default = "default_subdivisions")]
    pub subdivisions: usize,
}

fn default_subdivisions() -> usize {
    2000
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HermiteScenario {
    #[serde(default)]
    pub title: Option<String>,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    pub coefficients: Vec<f64>,
    pub weights: WeightsSpec,
    #[serde(default = "default_h")]
    pub h: f64,
    #[serde(default = "default_direction")]
    pub direction: DecayDirection,
    #[serde(default)]
    pub convention: DampingExponent,
    /// Track the inclusion constant of the regularized net over the grid.
    #[serde(default = "default_true")]
    pub inclusion: bool,
    /// Run the structural condition checks on the weight sequence.
    #[serde(default = "default_true")]
    pub conditions: bool,
    #[serde(default)]
    pub roundtrip: Option<RoundtripSpec>,
}
