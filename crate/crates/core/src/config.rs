//! Pipeline tunables and the TOML settings file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::merge::MergeParams;
use crate::plane_test::PlaneTestParams;
use crate::ransac::RansacParams;

/// Environment variable consulted for a settings file when none is given.
pub const CONFIG_ENV: &str = "VOXPLANE_CONFIG";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractionConfig {
    /// Edge of a root voxel, meters.
    pub root_size: f64,
    /// Nodes with an edge at or below this are never split, meters.
    pub min_voxel_size: f64,
    pub min_points: usize,
    pub plane_params: PlaneTestParams,
    pub merge_params: MergeParams,
    pub merging_enabled: bool,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        Self {
            root_size: 1.0,
            min_voxel_size: 0.25,
            min_points: 20,
            plane_params: PlaneTestParams::default(),
            merge_params: MergeParams::default(),
            merging_enabled: true,
        }
    }
}

impl ExtractionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_voxel_size > 0.0
            && self.root_size > self.min_voxel_size
            && self.root_size.is_finite())
        {
            return Err(Error::InvalidConfig(format!(
                "need root_size > min_voxel_size > 0, got {} and {}",
                self.root_size, self.min_voxel_size
            )));
        }
        self.plane_params().validate()?;
        self.merge_params.validate()
    }

    /// Plane-test parameters with the pipeline's `min_points`.
    pub fn plane_params(&self) -> PlaneTestParams {
        PlaneTestParams {
            min_points: self.min_points,
            ..self.plane_params
        }
    }

    /// Whether a node with edge `edge` may be split into octants.
    pub fn can_split(&self, edge: f64) -> bool {
        edge > self.min_voxel_size * (1.0 + 1e-9)
    }

    /// `ceil(log2(root_size / min_voxel_size))`.
    pub fn max_depth(&self) -> u32 {
        let mut depth = 0;
        let mut edge = self.root_size;
        while self.can_split(edge) {
            edge *= 0.5;
            depth += 1;
        }
        depth
    }
}

/// Everything a settings file may override. Unspecified fields keep their
/// defaults.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub extraction: ExtractionConfig,
    pub ransac: RansacParams,
}

impl Settings {
    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Settings = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        s.extraction.validate()?;
        s.ransac.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => {
                Error::InvalidConfig(format!("{}: no such config file", path.display()))
            }
            _ => Error::io(path, e),
        })?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::InvalidConfig(msg) => Error::InvalidConfig(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Loads `path`, or the file named by `VOXPLANE_CONFIG`, or defaults.
    pub fn resolve(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => Self::load(p),
            None => match std::env::var_os(CONFIG_ENV) {
                Some(p) if !p.is_empty() => Self::load(Path::new(&p)),
                _ => Ok(Self::default()),
            },
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("settings serialize")
    }
}
