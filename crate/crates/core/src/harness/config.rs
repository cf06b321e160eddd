//! Experiment configuration, read from TOML.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::Grid1D;
use crate::potential::{make_fourier_potential, make_pn_potential, PotentialSpec, StressField};

/// Version of every JSON report and of the CSV column layout.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialConfig {
    /// `W(t) = (1 - cos 2 pi t) / (4 pi^2 a)`.
    Pn { a: f64 },
    /// `W''(t) = sum_k c_k cos(2 pi k t)`.
    Fourier { coefficients: Vec<f64> },
}

impl Default for PotentialConfig {
    fn default() -> Self {
        Self::Pn { a: 1.0 }
    }
}

impl PotentialConfig {
    pub fn build(&self) -> Result<PotentialSpec<f64>> {
        match self {
            Self::Pn { a } => make_pn_potential(*a),
            Self::Fourier { coefficients } => make_fourier_potential(coefficients),
        }
    }

    /// Closed-form mobility when one is known.
    pub fn exact_gamma(&self) -> Option<f64> {
        match self {
            Self::Pn { a } => Some(2.0 * std::f64::consts::PI * a),
            Self::Fourier { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StressConfig {
    #[default]
    Zero,
    Constant {
        value: f64,
    },
    /// `base + slope * clamp(x, -half_width, half_width)`.
    Affine {
        base: f64,
        slope: f64,
        half_width: f64,
    },
    /// Piecewise linear through `(xs, values)`, constant outside.
    Table {
        xs: Vec<f64>,
        values: Vec<f64>,
    },
}

impl StressConfig {
    pub fn build(&self) -> Result<StressField<f64>> {
        match self {
            Self::Zero => Ok(StressField::zero()),
            Self::Constant { value } => Ok(StressField::constant(*value)),
            Self::Affine {
                base,
                slope,
                half_width,
            } => StressField::affine(*base, *slope, *half_width),
            Self::Table { xs, values } => StressField::table(xs.clone(), values.clone()),
        }
    }
}

/// Grid on which the layer and corrector are computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LayerGridConfig {
    pub half_width: f64,
    pub n: usize,
    pub tol: f64,
    /// Use the closed-form layer instead of relaxing (PN potentials only).
    pub exact: bool,
}

impl Default for LayerGridConfig {
    fn default() -> Self {
        Self {
            half_width: 40.0,
            n: 2048,
            tol: 1e-10,
            exact: false,
        }
    }
}

/// Grid and step for the field evolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PdeGridConfig {
    pub half_width: f64,
    pub n: usize,
    /// Multiplies the default step `0.1 eps^2 / sup|W''|`.
    pub dt_factor: f64,
}

impl Default for PdeGridConfig {
    fn default() -> Self {
        Self {
            half_width: 3.0,
            n: 1024,
            dt_factor: 0.05,
        }
    }
}

/// One experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: String,
    pub potential: PotentialConfig,
    pub stress: StressConfig,
    pub positions: Vec<f64>,
    /// Strictly decreasing.
    pub eps: Vec<f64>,
    pub t_end: f64,
    /// Number of equal tracking intervals on `[0, t_end]`.
    pub samples: usize,
    pub layer: LayerGridConfig,
    pub pde: PdeGridConfig,
    /// Shift of the supersolution ansatz.
    pub delta: f64,
    /// Largest admissible tracking error at the smallest `eps`.
    pub threshold: Option<f64>,
    /// Particle mobility; `None` takes it from the computed layer.
    pub gamma: Option<f64>,
    /// Reserved for stochastic stress fields; not read by any experiment.
    pub seeds: Vec<u64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: "pn-two-body".into(),
            potential: PotentialConfig::default(),
            stress: StressConfig::default(),
            positions: vec![-0.5, 0.5],
            eps: vec![0.2, 0.1, 0.05],
            t_end: 0.5,
            samples: 10,
            layer: LayerGridConfig::default(),
            pde: PdeGridConfig::default(),
            delta: 0.1,
            threshold: Some(0.1),
            gamma: None,
            seeds: Vec::new(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn layer_grid(&self) -> Result<Grid1D<f64>> {
        Grid1D::new(-self.layer.half_width, self.layer.half_width, self.layer.n)
    }

    pub fn pde_grid(&self) -> Result<Grid1D<f64>> {
        Grid1D::new(-self.pde.half_width, self.pde.half_width, self.pde.n)
    }

    /// Equally spaced tracking times `0, t_end/samples, ..., t_end`.
    pub fn sample_times(&self) -> Vec<f64> {
        (0..=self.samples)
            .map(|k| self.t_end * k as f64 / self.samples as f64)
            .collect()
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).unwrap_or_default();
        Sha256::digest(&canonical).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(format!("{}: {msg}", self.scenario)));
        self.potential.build().map_err(|e| Error::Config(e.to_string()))?;
        self.stress.build().map_err(|e| Error::Config(e.to_string()))?;
        if let (PotentialConfig::Fourier { .. }, true) = (&self.potential, self.layer.exact) {
            return fail("the closed-form layer exists only for the pn potential".into());
        }
        if self.positions.is_empty() {
            return fail("at least one particle position is required".into());
        }
        if self.positions.windows(2).any(|w| !(w[1] > w[0])) {
            return fail("positions must be strictly increasing".into());
        }
        if self.eps.iter().any(|e| !(*e > 0.0)) {
            return fail("every eps must be positive".into());
        }
        if self.eps.windows(2).any(|w| !(w[1] < w[0])) {
            return fail(format!("eps list {:?} must be strictly decreasing", self.eps));
        }
        if !(self.t_end > 0.0) || self.samples == 0 {
            return fail("t_end must be positive and samples at least 1".into());
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0) {
                return fail(format!("gamma must be positive, got {g}"));
            }
        }
        if !(self.pde.dt_factor > 0.0) || !(self.layer.tol > 0.0) {
            return fail("dt_factor and layer tolerance must be positive".into());
        }
        self.layer_grid().map_err(|e| Error::Config(e.to_string()))?;
        let pde = self.pde_grid().map_err(|e| Error::Config(e.to_string()))?;
        for eps in &self.eps {
            if pde.spacing() > eps / 8.0 * (1.0 + 1e-9) {
                return fail(format!(
                    "pde grid spacing {} does not resolve eps = {eps} (need h <= eps/8)",
                    pde.spacing()
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid_and_round_trips() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let text = cfg.to_toml().unwrap();
        let back = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
        assert_eq!(cfg.hash().len(), 64);
    }

    #[test]
    fn partial_config_takes_defaults() {
        let cfg = ExperimentConfig::from_toml(
            r#"
            scenario = "single"
            positions = [0.0]
            eps = [0.1]
            [potential]
            kind = "fourier"
            coefficients = [0.8, 0.2]
            [stress]
            kind = "constant"
            value = 0.05
            "#,
        )
        .unwrap();
        assert_eq!(cfg.layer, LayerGridConfig::default());
        assert_eq!(cfg.stress, StressConfig::Constant { value: 0.05 });
        assert!(cfg.potential.exact_gamma().is_none());
    }

    #[test]
    fn increasing_eps_is_rejected() {
        let err = ExperimentConfig::from_toml("eps = [0.05, 0.1]").unwrap_err();
        assert!(
            matches!(err, Error::Config(ref m) if m.contains("strictly decreasing")),
            "{err}"
        );
    }

    #[test]
    fn unresolved_eps_and_bad_fields_are_rejected() {
        assert!(ExperimentConfig::from_toml("eps = [0.01]").is_err());
        assert!(ExperimentConfig::from_toml("positions = [0.5, 0.5]").is_err());
        assert!(ExperimentConfig::from_toml("unknown_key = 1").is_err());
        assert!(ExperimentConfig::from_toml("[potential]\nkind = \"pn\"\na = -1.0").is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.t_end = 0.25;
        assert_ne!(a.hash(), b.hash());
    }
}
