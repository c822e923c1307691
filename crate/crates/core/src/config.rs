//! Run configuration file (JSON). Parsing is strict: unknown keys are
//! rejected so a typo cannot silently fall back to a default.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::chain::{IrradianceMode, RmSearchSpace};
use crate::error::{ChordError, Result};
use crate::math::Vec3;
use crate::optim::OptimConfig;
use crate::types::DirectionalLight;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LightConfig {
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    #[serde(default = "default_radiance")]
    pub radiance: [f64; 3],
}

fn default_radiance() -> [f64; 3] {
    [PI; 3]
}

impl LightConfig {
    pub fn to_light(&self) -> Result<DirectionalLight> {
        if !(self.elevation_deg > 0.0 && self.elevation_deg <= 90.0) {
            return Err(ChordError::Config(format!(
                "light elevation must be in (0, 90], got {}",
                self.elevation_deg
            )));
        }
        DirectionalLight::from_angles(self.azimuth_deg, self.elevation_deg, self.radiance)
            .map_err(|e| ChordError::Config(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RmSearchConfig {
    pub roughness_levels: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IrradianceChannels {
    #[default]
    Mean,
    PerChannel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Light used to render, and assumed by the optimizing predictors before
    /// a light estimate exists. Overhead with radiance π when absent.
    pub light: Option<LightConfig>,
    pub rm_search: Option<RmSearchConfig>,
    pub optimizer: OptimConfig,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub irradiance_channels: IrradianceChannels,
    pub height_scale: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            light: None,
            rm_search: None,
            optimizer: OptimConfig::default(),
            seed: None,
            output_dir: None,
            irradiance_channels: IrradianceChannels::Mean,
            height_scale: 1.0,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| ChordError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| ChordError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text).map_err(|e| match e {
            ChordError::Config(msg) => ChordError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.optimizer.validate()?;
        if let Some(l) = &self.light {
            l.to_light()?;
        }
        self.search_space()?;
        if !(self.height_scale > 0.0 && self.height_scale.is_finite()) {
            return Err(ChordError::Config(format!("height_scale must be > 0, got {}", self.height_scale)));
        }
        Ok(())
    }

    pub fn light(&self) -> Result<DirectionalLight> {
        match &self.light {
            Some(l) => l.to_light(),
            None => DirectionalLight::new(Vec3::Z, default_radiance()),
        }
    }

    pub fn search_space(&self) -> Result<RmSearchSpace> {
        match &self.rm_search {
            Some(s) => RmSearchSpace::with_levels(&s.roughness_levels),
            None => Ok(RmSearchSpace::standard()),
        }
    }

    pub fn irradiance_mode(&self) -> IrradianceMode {
        match self.irradiance_channels {
            IrradianceChannels::Mean => IrradianceMode::Mean,
            IrradianceChannels::PerChannel => IrradianceMode::PerChannel,
        }
    }
}
