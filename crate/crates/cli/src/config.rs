//! Config files, one per run. Every table rejects unknown keys.

use cp1_brownian::experiments::{ExperimentConfig, GroupParams};
use cp1_brownian::hbm::StopRule;
use cp1_brownian::moebius::{MoebiusMap, C64};
use cp1_brownian::walk::StepMeasure;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// Keys every config file carries at top level: `seed` and `workers`.
pub trait RunFile: Serialize + DeserializeOwned {
    fn seed(&self) -> Option<u64>;
    fn set_seed(&mut self, seed: u64);
    fn workers(&self) -> Option<usize>;
}

macro_rules! run_file {
    ($t:ty) => {
        impl RunFile for $t {
            fn seed(&self) -> Option<u64> {
                self.seed
            }
            fn set_seed(&mut self, seed: u64) {
                self.seed = Some(seed);
            }
            fn workers(&self) -> Option<usize> {
                self.workers
            }
        }
    };
}

run_file!(WalkFile);
run_file!(BmFile);
run_file!(FlsFile);
run_file!(SelftestFile);

impl RunFile for ExperimentFile {
    fn seed(&self) -> Option<u64> {
        self.seed
    }
    // the experiment carries its own seed; keep both in step
    fn set_seed(&mut self, seed: u64) {
        self.seed = Some(seed);
        self.experiment.seed = seed;
    }
    fn workers(&self) -> Option<usize> {
        self.workers
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureSpec {
    /// Uniform law on `T^{±1}, S^{±1}` with `T = (1,2;0,1)`, `S = (1,0;2,1)`.
    Gamma2,
    Custom { generators: Vec<GeneratorSpec>, probabilities: Vec<f64> },
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub label: String,
    /// `a, b, c, d` as `[re, im]` pairs.
    pub entries: [[f64; 2]; 4],
}

impl MeasureSpec {
    pub fn build(&self) -> cp1_brownian::Result<StepMeasure> {
        match self {
            MeasureSpec::Gamma2 => Ok(StepMeasure::gamma2_half_plane()),
            MeasureSpec::Custom { generators, probabilities } => {
                let gens = generators
                    .iter()
                    .map(|g| {
                        let e = |i: usize| C64::new(g.entries[i][0], g.entries[i][1]);
                        Ok((g.label.clone(), MoebiusMap::new(e(0), e(1), e(2), e(3))?))
                    })
                    .collect::<cp1_brownian::Result<Vec<_>>>()?;
                StepMeasure::new(gens, probabilities.clone())
            }
        }
    }
}

fn gamma2() -> MeasureSpec {
    MeasureSpec::Gamma2
}
fn walk_n() -> usize {
    2000
}
fn walk_trials() -> usize {
    200
}
fn walk_grid() -> usize {
    64
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct WalkSection {
    #[serde(default = "gamma2")]
    pub measure: MeasureSpec,
    #[serde(default = "walk_n")]
    pub n: usize,
    #[serde(default = "walk_trials")]
    pub trials: usize,
    /// `(λ′, λ″)`; `(0.5λ̂, 1.5λ̂)` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_window: Option<[f64; 2]>,
    /// Points per circle for the grid route of the containment check.
    #[serde(default = "walk_grid")]
    pub grid: usize,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct WalkFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Size of the worker pool; defaults to the available parallelism.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default)]
    pub walk: WalkSection,
}

impl Default for WalkSection {
    fn default() -> Self {
        WalkSection { measure: gamma2(), n: walk_n(), trials: walk_trials(), lambda_window: None, grid: walk_grid() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BmMode {
    /// Sample paths from `start` under a stopping rule.
    Path { dtau: f64, stop: StopRule, samples: usize },
    /// Hitting `|z| = inner` before `|z| = 1` for planar BM from `c2`.
    Annulus { c2: f64, inner: f64, paths: usize, step: f64 },
    /// Occupation of `D_hyp(center, rho)` against the Green function.
    Green { center: [f64; 2], rho: f64, samples: usize },
    /// Exit law from `D(0, radius)`: hyperbolic against planar BM.
    ConformalExit { radius: f64, samples: usize },
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BmSection {
    #[serde(default)]
    pub start: [f64; 2],
    pub mode: BmMode,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BmFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Size of the worker pool; defaults to the available parallelism.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    pub bm: BmSection,
}

fn default_time_cap() -> f64 {
    cp1_brownian::fls::DEFAULT_TIME_CAP
}

/// Discretization radii; both are required.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FlsSection {
    pub delta: f64,
    pub delta_prime: f64,
    #[serde(default = "default_time_cap")]
    pub time_cap: f64,
}

fn fls_records() -> usize {
    500
}
fn fls_accepted() -> usize {
    12
}
fn fls_dtau() -> f64 {
    2e-3
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FlsRunSection {
    #[serde(default = "fls_records")]
    pub records: usize,
    /// Accepted steps per record.
    #[serde(default = "fls_accepted")]
    pub accepted: usize,
    #[serde(default = "fls_dtau")]
    pub dtau: f64,
}

impl Default for FlsRunSection {
    fn default() -> Self {
        FlsRunSection { records: fls_records(), accepted: fls_accepted(), dtau: fls_dtau() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FlsFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Size of the worker pool; defaults to the available parallelism.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default)]
    pub group: GroupParams,
    pub fls: FlsSection,
    #[serde(default)]
    pub run: FlsRunSection,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Size of the worker pool; defaults to the available parallelism.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default)]
    pub experiment: ExperimentConfig,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SelftestFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Size of the worker pool; defaults to the available parallelism.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

/// Parses TOML, or JSON when the path ends in `.json`.
pub fn parse<T: DeserializeOwned>(text: &str, json: bool) -> Result<T, String> {
    if json {
        serde_json::from_str(text).map_err(|e| e.to_string())
    } else {
        toml::from_str(text).map_err(|e| e.to_string())
    }
}
