//! Experiment configuration: a JSON document fully determining a run.

use std::path::PathBuf;

use decoh_core::error::{Error, Result};
use decoh_core::models::{Axis, SpinBath};
use decoh_core::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    MeasurementRun,
    RegimeSweep,
    Sieve,
    PointerCheck,
}

/// List of per-spin values, either explicit or drawn from a seeded
/// distribution (ChaCha20 keyed by the seed, so runs reproduce anywhere).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ValueSpec {
    Explicit(Vec<f64>),
    Random {
        distribution: Distribution,
        range: [f64; 2],
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distribution {
    Uniform,
}

impl ValueSpec {
    /// Concrete values for `n` spins; `seed_override` replaces the
    /// configured seed when given.
    pub fn materialize(&self, n: usize, seed_override: Option<u64>) -> Result<Vec<f64>> {
        match self {
            ValueSpec::Explicit(v) => {
                if v.len() != n {
                    return Err(Error::InvalidInput(format!(
                        "expected {n} values, got {}",
                        v.len()
                    )));
                }
                Ok(v.clone())
            }
            ValueSpec::Random {
                distribution: Distribution::Uniform,
                range: [lo, hi],
                seed,
            } => {
                if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                    return Err(Error::InvalidInput(format!("bad range [{lo}, {hi}]")));
                }
                let mut rng = ChaCha20Rng::seed_from_u64(seed_override.unwrap_or(*seed));
                Ok((0..n).map(|_| lo + (hi - lo) * rng.random::<f64>()).collect())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisConfig {
    Z,
    X,
}

impl From<AxisConfig> for Axis {
    fn from(a: AxisConfig) -> Axis {
        match a {
            AxisConfig::Z => Axis::Z,
            AxisConfig::X => Axis::X,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub n_env: usize,
    pub couplings: ValueSpec,
    /// Environment self-energies ω_k; zero when omitted.
    #[serde(default)]
    pub env_energies: Option<ValueSpec>,
    /// Pointer self-energy Δ.
    #[serde(default)]
    pub delta: f64,
    #[serde(default = "default_axis")]
    pub pointer_axis: AxisConfig,
    /// Branch coefficients as (re, im) pairs; (1/√2, 1/√2) when omitted.
    #[serde(default)]
    pub coefficients: Option<Vec<[f64; 2]>>,
}

fn default_axis() -> AxisConfig {
    AxisConfig::Z
}

impl ModelConfig {
    pub fn bath(&self, seed_override: Option<u64>) -> Result<SpinBath> {
        let g = self.couplings.materialize(self.n_env, seed_override)?;
        let w = match &self.env_energies {
            Some(spec) => spec.materialize(self.n_env, seed_override)?,
            None => vec![0.0; self.n_env],
        };
        SpinBath::new(g, w, self.delta, self.pointer_axis.into())
    }

    pub fn branch_coefficients(&self) -> Result<Vec<C64>> {
        match &self.coefficients {
            Some(list) => {
                if list.is_empty() {
                    return Err(Error::InvalidInput("empty coefficient list".into()));
                }
                Ok(list.iter().map(|&[re, im]| C64::new(re, im)).collect())
            }
            None => {
                let a = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
                Ok(vec![a, a])
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default)]
    pub t_start: f64,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_n_steps")]
    pub n_steps: usize,
}

fn default_t_end() -> f64 {
    10.0
}

fn default_n_steps() -> usize {
    200
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            t_start: 0.0,
            t_end: default_t_end(),
            n_steps: default_n_steps(),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    /// max|r_ij| level defining the decoherence time.
    #[serde(default = "default_decoherence")]
    pub decoherence: f64,
    #[serde(default = "default_regime_low")]
    pub regime_low: f64,
    #[serde(default = "default_regime_high")]
    pub regime_high: f64,
    /// Relative tolerance for preferred-context membership tests.
    #[serde(default = "default_context")]
    pub context: f64,
}

fn default_decoherence() -> f64 {
    (-1.0f64).exp()
}

fn default_regime_low() -> f64 {
    0.1
}

fn default_regime_high() -> f64 {
    10.0
}

fn default_context() -> f64 {
    1e-9
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            decoherence: default_decoherence(),
            regime_low: default_regime_low(),
            regime_high: default_regime_high(),
            context: default_context(),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SieveConfig {
    #[serde(default = "default_grid_size")]
    pub grid_size: usize,
    /// Explicit probe time; measured from the dephasing reference run
    /// when omitted.
    #[serde(default)]
    pub t_probe: Option<f64>,
    /// Probe time as a multiple of the reference decoherence time.
    #[serde(default = "default_t_probe_scale")]
    pub t_probe_scale: f64,
}

fn default_grid_size() -> usize {
    200
}

fn default_t_probe_scale() -> f64 {
    0.5
}

impl Default for SieveConfig {
    fn default() -> Self {
        SieveConfig {
            grid_size: default_grid_size(),
            t_probe: None,
            t_probe_scale: default_t_probe_scale(),
        }
    }
}

/// Pointer observable for `check-pointer`: n̂·σ for the given Bloch axis.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct PointerCheckConfig {
    #[serde(default)]
    pub theta: f64,
    #[serde(default)]
    pub phi: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub model: ModelConfig,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub sieve: SieveConfig,
    #[serde(default)]
    pub pointer: PointerCheckConfig,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn default_lambda() -> f64 {
    1.0
}

impl ExperimentConfig {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| Error::InvalidInput(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.thresholds;
        if !(t.decoherence > 0.0 && t.decoherence <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "decoherence threshold must lie in (0, 1], got {}",
                t.decoherence
            )));
        }
        if !(0.0 < t.regime_low && t.regime_low < t.regime_high) {
            return Err(Error::InvalidInput(
                "regime thresholds must satisfy 0 < low < high".into(),
            ));
        }
        if !(t.context > 0.0) {
            return Err(Error::InvalidInput("context tolerance must be positive".into()));
        }
        if !(self.lambda.is_finite()) {
            return Err(Error::InvalidInput("lambda must be finite".into()));
        }
        if self.grid.n_steps == 0 || !(self.grid.t_end > self.grid.t_start) {
            return Err(Error::InvalidInput("empty or inverted time grid".into()));
        }
        if self.sieve.grid_size == 0 {
            return Err(Error::InvalidInput("sieve grid must be nonempty".into()));
        }
        if let Some(tp) = self.sieve.t_probe {
            if !(tp > 0.0) {
                return Err(Error::InvalidInput("t_probe must be positive".into()));
            }
        }
        if !(self.sieve.t_probe_scale > 0.0) {
            return Err(Error::InvalidInput("t_probe_scale must be positive".into()));
        }
        // Fail fast on bad model parameters (count mismatches, ranges).
        self.model.bath(None)?;
        self.model.branch_coefficients()?;
        Ok(())
    }
}
