//! Run descriptors: one TOML file per run, every field optional.
//!
//! ```toml
//! out_dir = "runs/rect"
//!
//! [sim]
//! n = 5
//! box = [5.0, 4.0, 3.0]
//! kind = "charged"
//! delta_frames = 50
//! counts = [50, 100, 100]
//! seed = 7
//!
//! [model]
//! feature_mode = "degnn"
//! pooling = "attn"
//! group = "D2h"
//!
//! [train]
//! lr = 0.001
//! ```

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use degnn::model::ModelConfig;
use degnn::pointgroup::Axis;
use degnn::sim::{BoxSpec, SimConfig, SystemKind, DEFAULT_DT, DEFAULT_SOFTENING};
use degnn::train::TrainConfig;
use serde::{Deserialize, Serialize};

pub const OUT_DIR_ENV: &str = "DEGNN_OUT_DIR";

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub n: usize,
    #[serde(rename = "box")]
    pub box_sides: Vec<f64>,
    pub kind: SystemKind,
    pub dt: f64,
    pub softening: f64,
    pub heading: Option<Axis>,
    pub delta_frames: usize,
    pub counts: [usize; 3],
    pub seed: u64,
}

impl Default for SimSection {
    fn default() -> Self {
        SimSection {
            n: 5,
            box_sides: vec![5.0, 4.0, 3.0],
            kind: SystemKind::Charged,
            dt: DEFAULT_DT,
            softening: DEFAULT_SOFTENING,
            heading: None,
            delta_frames: 50,
            counts: [50, 100, 100],
            seed: 7,
        }
    }
}

impl SimSection {
    pub fn sim_config(&self) -> Result<SimConfig> {
        let mut cfg = SimConfig::new(self.n, BoxSpec::new(self.box_sides.clone())?, self.kind);
        cfg.dt = self.dt;
        cfg.softening = self.softening;
        cfg.heading = self.heading;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Descriptor {
    pub out_dir: Option<PathBuf>,
    pub sim: SimSection,
    pub model: ModelConfig,
    pub train: TrainConfig,
    /// Seed for parameter initialization.
    pub init_seed: u64,
}

impl Descriptor {
    pub fn load(path: Option<&Path>) -> Result<Descriptor> {
        let Some(path) = path else {
            return Ok(Descriptor::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Flag, then environment, then descriptor, then `runs`.
    pub fn out_dir(&self, flag: Option<&Path>) -> PathBuf {
        if let Some(p) = flag {
            return p.to_path_buf();
        }
        if let Some(p) = std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()) {
            return PathBuf::from(p);
        }
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("runs"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_descriptor_keeps_defaults() {
        let d: Descriptor = toml::from_str("[sim]\nn = 3\n[model]\nhidden = 8\n[train]\nlr = 0.01\n").unwrap();
        assert_eq!(d.sim.n, 3);
        assert_eq!(d.sim.counts, [50, 100, 100]);
        assert_eq!(d.model.hidden, 8);
        assert_eq!(d.model.num_layers, 4);
        assert_eq!(d.train.lr, 0.01);
        assert_eq!(d.train.batch_size, 100);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<Descriptor>("[sim]\nbodies = 3\n").is_err());
    }
}
