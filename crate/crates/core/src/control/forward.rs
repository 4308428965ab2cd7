//! Learned forward model: chamber pressures to fingertip displacement.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::TrainConfig;
use crate::mlp::{train_regressor, Regressor, TrainReport};
use crate::sim::{Dataset, PressureLimits};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelMetadata {
    pub seed: u64,
    pub dataset_hash: String,
    pub dataset_samples: usize,
    pub train: TrainReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

/// `d = μ_d + σ_d ⊙ net((p − μ_p) / σ_p)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForwardModel {
    pub model: Regressor,
    pub limits: PressureLimits,
    pub metadata: ModelMetadata,
}

fn to3(v: Vec<f64>) -> [f64; 3] {
    [v[0], v[1], v[2]]
}

impl ForwardModel {
    pub fn predict(&self, p: &[f64; 3]) -> [f64; 3] {
        to3(self.model.predict(p))
    }

    /// Prediction and `∂d/∂p` (rows are displacement components).
    pub fn jacobian(&self, p: &[f64; 3]) -> ([f64; 3], [[f64; 3]; 3]) {
        let (y, j) = self.model.jacobian(p);
        (to3(y), [to3(j[0].clone()), to3(j[1].clone()), to3(j[2].clone())])
    }

    /// `(∂d/∂p)ᵀ g`.
    pub fn vjp(&self, p: &[f64; 3], g: &[f64; 3]) -> [f64; 3] {
        to3(self.model.vjp(p, g))
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.limits.validate()?;
        if self.model.net.input_dim() != 3 || self.model.net.output_dim() != 3 {
            return Err(Error::invalid("forward model must map 3 pressures to 3 displacement components"));
        }
        Ok(())
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string(self).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let m: Self = serde_path_to_error::deserialize(de).map_err(|e| Error::parse("model JSON", e))?;
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json_string()).map_err(|e| Error::io(path, e))
    }
}

/// Trains the forward model on `dataset`; deterministic per `seed`.
pub fn train_forward(dataset: &Dataset, limits: PressureLimits, cfg: &TrainConfig, seed: u64) -> Result<ForwardModel> {
    limits.validate()?;
    let xs: Vec<Vec<f64>> = dataset.samples.iter().map(|s| s.pressure.to_vec()).collect();
    let ys: Vec<Vec<f64>> = dataset.samples.iter().map(|s| s.displacement.as_slice().to_vec()).collect();
    let (model, report) = train_regressor(&xs, &ys, cfg, seed)?;
    log::info!(
        "forward model: train loss {:.3e}, validation RMSE {:?}",
        report.train_loss,
        report.validation_rmse
    );
    Ok(ForwardModel {
        model,
        limits,
        metadata: ModelMetadata {
            seed,
            dataset_hash: dataset.hash(),
            dataset_samples: dataset.len(),
            train: report,
            config_hash: None,
        },
    })
}
