//! The persisted model bundle: a directory holding everything prediction
//! needs — config snapshot, language resources, fitted feature space,
//! selected-feature mask, and the stacking model.
//!
//! Layout (`format_version` 1):
//!
//! ```text
//! bundle/
//!   manifest.json        version, seed, dimensions, selected count
//!   config_snapshot.cfg  flat key-value config that produced the bundle
//!   resources/           the six language resource files actually used
//!   feature_space/       per-block vocabulary TSVs plus meta.json
//!   mask.txt             dimension header plus 0/1 bit line
//!   models/stacking.bin  the serialized ensemble
//!   train_report.txt     stage log of the producing run
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::features::FeatureSpace;
use crate::hho::FeatureMask;
use crate::learners::StackingModel;
use crate::preprocess::{ResourcePaths, Resources};

use super::config::PipelineConfig;
use super::PipelineError;

pub const BUNDLE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    seed: u64,
    total_dim: usize,
    selected_count: usize,
    fitted: bool,
}

/// A trained pipeline artifact.
#[derive(Debug)]
pub struct ModelBundle {
    pub config: PipelineConfig,
    pub resources: Resources,
    pub space: FeatureSpace,
    pub mask: FeatureMask,
    pub model: Option<StackingModel>,
}

impl ModelBundle {
    pub fn fitted(
        config: PipelineConfig,
        resources: Resources,
        space: FeatureSpace,
        mask: FeatureMask,
        model: StackingModel,
    ) -> ModelBundle {
        ModelBundle {
            config,
            resources,
            space,
            mask,
            model: Some(model),
        }
    }

    /// Partial bundle for stage-prefix commands (featurize, select).
    pub fn unfitted(config: PipelineConfig, resources: Resources, space: FeatureSpace) -> ModelBundle {
        let dim = space.total_dim;
        ModelBundle {
            config,
            resources,
            space,
            mask: FeatureMask::all_selected(dim),
            model: None,
        }
    }

    pub fn with_mask(mut self, mask: FeatureMask) -> ModelBundle {
        self.mask = mask;
        self
    }

    pub fn is_fitted(&self) -> bool {
        self.model.is_some()
    }

    /// Canonical serialization of every fitted statistic. Two runs that
    /// fitted identical state produce identical bytes.
    pub fn fitted_state_bytes(&self) -> Vec<u8> {
        let mut bytes = bincode::serialize(&self.space).expect("serializable space");
        bytes.extend(bincode::serialize(&self.mask).expect("serializable mask"));
        if let Some(model) = &self.model {
            bytes.extend(bincode::serialize(model).expect("serializable model"));
        }
        bytes
    }

    pub fn save(&self, dir: &Path, train_report: &str) -> Result<(), PipelineError> {
        let io = |path: &Path| {
            let path = path.display().to_string();
            move |source: std::io::Error| PipelineError::Io { path, source }
        };
        std::fs::create_dir_all(dir).map_err(io(dir))?;

        let manifest = Manifest {
            format_version: BUNDLE_FORMAT_VERSION,
            seed: self.config.seed,
            total_dim: self.space.total_dim,
            selected_count: self.mask.selected_count(),
            fitted: self.model.is_some(),
        };
        let manifest_path = dir.join("manifest.json");
        std::fs::write(
            &manifest_path,
            serde_json::to_string_pretty(&manifest).expect("serializable manifest"),
        )
        .map_err(io(&manifest_path))?;

        let snapshot_path = dir.join("config_snapshot.cfg");
        std::fs::write(&snapshot_path, self.config.to_snapshot()).map_err(io(&snapshot_path))?;

        let res_dir = dir.join("resources");
        std::fs::create_dir_all(&res_dir).map_err(io(&res_dir))?;
        for (name, content) in self.resources.to_file_contents() {
            let path = res_dir.join(name);
            std::fs::write(&path, content).map_err(io(&path))?;
        }

        self.space.save_dir(&dir.join("feature_space"))?;
        self.mask.save(&dir.join("mask.txt"))?;

        if let Some(model) = &self.model {
            let models_dir = dir.join("models");
            std::fs::create_dir_all(&models_dir).map_err(io(&models_dir))?;
            let model_path = models_dir.join("stacking.bin");
            let bytes = bincode::serialize(model)
                .map_err(|e| PipelineError::Bundle(format!("model serialization: {e}")))?;
            std::fs::write(&model_path, bytes).map_err(io(&model_path))?;
        }

        let report_path = dir.join("train_report.txt");
        std::fs::write(&report_path, train_report).map_err(io(&report_path))?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<ModelBundle, PipelineError> {
        let read = |path: &Path| -> Result<String, PipelineError> {
            std::fs::read_to_string(path).map_err(|source| PipelineError::Io {
                path: path.display().to_string(),
                source,
            })
        };
        let manifest_raw = read(&dir.join("manifest.json"))?;
        let manifest: Manifest = serde_json::from_str(&manifest_raw)
            .map_err(|e| PipelineError::Bundle(format!("manifest: {e}")))?;
        if manifest.format_version != BUNDLE_FORMAT_VERSION {
            return Err(PipelineError::Bundle(format!(
                "unsupported bundle format version {} (expected {})",
                manifest.format_version, BUNDLE_FORMAT_VERSION
            )));
        }

        let config = PipelineConfig::parse_document(
            &read(&dir.join("config_snapshot.cfg"))?,
            PipelineConfig::desk(0),
        )?;
        let resources = Resources::from_paths(&ResourcePaths::from_dir(&dir.join("resources")))?;
        let space = FeatureSpace::load_dir(&dir.join("feature_space"))?;
        let mask = FeatureMask::load(&dir.join("mask.txt"))?;
        if mask.dim() != space.total_dim {
            return Err(PipelineError::Bundle(format!(
                "mask dimension {} does not match feature space dimension {}",
                mask.dim(),
                space.total_dim
            )));
        }

        let model_path = dir.join("models").join("stacking.bin");
        let model = if manifest.fitted {
            let bytes = std::fs::read(&model_path).map_err(|source| PipelineError::Io {
                path: model_path.display().to_string(),
                source,
            })?;
            Some(
                bincode::deserialize(&bytes)
                    .map_err(|e| PipelineError::Bundle(format!("model deserialization: {e}")))?,
            )
        } else {
            None
        };

        Ok(ModelBundle {
            config,
            resources,
            space,
            mask,
            model,
        })
    }
}
