//! Experiment configuration, stored as TOML with one table per module.
//!
//! ```toml
//! [bdris]
//! n_elements = 4
//! group_size = 2
//! reference_impedance_ohm = 50.0
//!
//! [scene]
//! bs_position_m = [50.0, -200.0, 20.0]
//! ris_position_m = [-2.0, -1.0, 0.0]
//! user_area_m = [[0.0, 0.0, 0.0], [10.0, 10.0, 0.0]]
//! upa_dims = [2, 2]
//! element_spacing_wavelengths = 0.5
//!
//! [channel]
//! ris_fading = "line_of_sight"     # or "rayleigh"
//! tx_power_dbm = 30.0
//! noise_power_dbm = -100.0         # -inf for noiseless measurements
//!
//! [selection]
//! scheme = "greedy"                # or "random"
//! trp_count = 500
//! pool_size = 10000                # omit for 20 x trp_count
//!
//! [train]
//! train_fraction = 0.8
//! max_iterations = 5000
//! lr_max = 0.1
//! lr_min = 0.0001
//! cosine_period = 1000
//! batch_size = 32
//! init_scale = 0.1
//! normalization = "mean_power"     # or "none"
//! validate_every = 1
//! seed = 0                         # replaced per trial by the harness
//!
//! [experiment]
//! monte_carlo_trials = 20
//! master_seed = 1
//! workers = 0                      # 0 = one per core
//! truth = "reciprocal"             # or "full"
//! ```
//!
//! Every key is optional; missing keys take the desk-scale defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bdris::{BdRisConfig, DEFAULT_REFERENCE_IMPEDANCE_OHM};
use crate::channel::{dbm_to_watts, ChannelModel, FadingModel, SceneGeometry};
use crate::error::{Error, Result};
use crate::estimator::TrainConfig;
use crate::trp::DEFAULT_POOL_FACTOR;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionScheme {
    Greedy,
    Random,
}

impl SelectionScheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            SelectionScheme::Greedy => "greedy",
            SelectionScheme::Random => "random",
        }
    }
}

impl std::str::FromStr for SelectionScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy" => Ok(SelectionScheme::Greedy),
            "random" => Ok(SelectionScheme::Random),
            other => Err(Error::parse("selection scheme", format!("unknown scheme {other:?}"))),
        }
    }
}

/// Which autocorrelation matrix the NMSE is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthTarget {
    /// `G` of the cascaded channel with symmetrized blocks, i.e. the part of
    /// `G` that reciprocal reflection patterns can observe.
    #[default]
    Reciprocal,
    /// `G` of the raw cascaded channel `vec(M_k*)`. Includes the
    /// antisymmetric block components no measurement can see when `N0 > 1`.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BdRisSection {
    pub n_elements: usize,
    pub group_size: usize,
    pub reference_impedance_ohm: f64,
}

impl Default for BdRisSection {
    fn default() -> Self {
        Self {
            n_elements: 4,
            group_size: 2,
            reference_impedance_ohm: DEFAULT_REFERENCE_IMPEDANCE_OHM,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSection {
    pub bs_position_m: [f64; 3],
    pub ris_position_m: [f64; 3],
    pub user_area_m: [[f64; 3]; 2],
    pub upa_dims: [usize; 2],
    pub element_spacing_wavelengths: f64,
}

impl Default for SceneSection {
    fn default() -> Self {
        let g = SceneGeometry::reference((2, 2));
        Self {
            bs_position_m: g.bs_position,
            ris_position_m: g.ris_position,
            user_area_m: g.user_area,
            upa_dims: [g.upa_dims.0, g.upa_dims.1],
            element_spacing_wavelengths: g.element_spacing,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSection {
    pub ris_fading: FadingModel,
    pub tx_power_dbm: f64,
    /// `-inf` disables measurement noise.
    pub noise_power_dbm: f64,
}

impl Default for ChannelSection {
    fn default() -> Self {
        Self {
            ris_fading: FadingModel::LineOfSight,
            tx_power_dbm: 30.0,
            noise_power_dbm: -100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionSection {
    pub scheme: SelectionScheme,
    pub trp_count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pool_size: Option<usize>,
}

impl Default for SelectionSection {
    fn default() -> Self {
        Self {
            scheme: SelectionScheme::Greedy,
            trp_count: 500,
            pool_size: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub monte_carlo_trials: usize,
    pub master_seed: u64,
    pub workers: usize,
    pub truth: TruthTarget,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            monte_carlo_trials: 20,
            master_seed: 1,
            workers: 0,
            truth: TruthTarget::Reciprocal,
        }
    }
}

/// Everything a trial or sweep needs.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub bdris: BdRisSection,
    pub scene: SceneSection,
    pub channel: ChannelSection,
    pub selection: SelectionSection,
    pub train: TrainConfig,
    pub experiment: ExperimentSection,
}

impl RunConfig {
    /// 2x2 array, groups of two, 500 patterns, 20 trials.
    pub fn desk() -> Self {
        Self::default()
    }

    /// 4x4 array, groups of four, 8000 patterns, 100 trials at -90 dBm.
    pub fn reference() -> Self {
        let mut cfg = Self::default();
        cfg.bdris.n_elements = 16;
        cfg.bdris.group_size = 4;
        cfg.scene.upa_dims = [4, 4];
        cfg.channel.noise_power_dbm = -90.0;
        cfg.selection.trp_count = 8000;
        cfg.experiment.monte_carlo_trials = 100;
        cfg
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::parse("configuration", e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bdris = self.bdris_config()?;
        self.scene_geometry().validate(&bdris)?;
        if !self.channel.tx_power_dbm.is_finite() {
            return Err(Error::invalid("transmit power must be finite"));
        }
        if self.channel.noise_power_dbm.is_nan() || self.channel.noise_power_dbm == f64::INFINITY {
            return Err(Error::invalid("noise power must be finite or -inf"));
        }
        let d = self.selection.trp_count;
        if d < 2 {
            return Err(Error::invalid(format!("need at least 2 training patterns, got {d}")));
        }
        if self.pool_size() < d {
            return Err(Error::invalid(format!("pool of {} cannot supply {d} patterns", self.pool_size())));
        }
        self.train.validate()?;
        if self.experiment.monte_carlo_trials == 0 {
            return Err(Error::invalid("at least one Monte Carlo trial is required"));
        }
        Ok(())
    }

    pub fn bdris_config(&self) -> Result<BdRisConfig> {
        BdRisConfig::with_reference_impedance(
            self.bdris.n_elements,
            self.bdris.group_size,
            self.bdris.reference_impedance_ohm,
        )
    }

    pub fn scene_geometry(&self) -> SceneGeometry {
        SceneGeometry {
            bs_position: self.scene.bs_position_m,
            ris_position: self.scene.ris_position_m,
            user_area: self.scene.user_area_m,
            upa_dims: (self.scene.upa_dims[0], self.scene.upa_dims[1]),
            element_spacing: self.scene.element_spacing_wavelengths,
        }
    }

    pub fn channel_model(&self) -> ChannelModel {
        ChannelModel {
            ris_fading: self.channel.ris_fading,
            tx_power_w: dbm_to_watts(self.channel.tx_power_dbm),
        }
    }

    pub fn noise_power_w(&self) -> f64 {
        dbm_to_watts(self.channel.noise_power_dbm)
    }

    pub fn pool_size(&self) -> usize {
        self.selection
            .pool_size
            .unwrap_or(DEFAULT_POOL_FACTOR * self.selection.trp_count)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        RunConfig::desk().validate().unwrap();
        RunConfig::reference().validate().unwrap();
        assert_eq!(RunConfig::desk().pool_size(), 10_000);
    }

    #[test]
    fn toml_round_trip() {
        let mut cfg = RunConfig::reference();
        cfg.channel.noise_power_dbm = f64::NEG_INFINITY;
        cfg.selection.pool_size = Some(12_345);
        let text = cfg.to_toml_string();
        assert_eq!(RunConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_documents_fill_defaults() {
        let cfg = RunConfig::from_toml_str(
            "[bdris]\ngroup_size = 1\n[channel]\nnoise_power_dbm = -inf\n[selection]\nscheme = \"random\"\n",
        )
        .unwrap();
        assert_eq!(cfg.bdris.group_size, 1);
        assert_eq!(cfg.bdris.n_elements, 4);
        assert_eq!(cfg.noise_power_w(), 0.0);
        assert_eq!(cfg.selection.scheme, SelectionScheme::Random);
    }

    #[test]
    fn invalid_documents_are_rejected() {
        assert!(RunConfig::from_toml_str("[bdris]\ngroup_size = 3\n").is_err());
        assert!(RunConfig::from_toml_str("[selection]\ntrp_count = 1\n").is_err());
        assert!(RunConfig::from_toml_str("[selection]\ntrp_count = 10\npool_size = 5\n").is_err());
        assert!(RunConfig::from_toml_str("[bdris]\nbogus = 1\n").is_err());
        assert!(RunConfig::from_toml_str("[scene]\nupa_dims = [4, 4]\n").is_err());
        assert!(RunConfig::from_toml_str("[experiment]\nmonte_carlo_trials = 0\n").is_err());
    }
}
