use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{GnnModel, LayerParams, OptimizerState};
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "linksched-model/1";

/// On-disk model: JSON with matrices stored as row-major nested arrays.
/// Floats are written in shortest round-trip form, so reloading is exact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelCheckpoint {
    pub format: String,
    pub config_digest: String,
    pub dims: Vec<usize>,
    pub leaky_slope: f64,
    /// Per layer: `[theta_self, theta_dst, theta_src]`.
    pub layers: Vec<[Vec<Vec<f64>>; 3]>,
    pub head_w: Vec<f64>,
    pub head_b: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epoch: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<OptimizerState>,
}

fn rows(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn matrix(rows: &[Vec<f64>], shape: (usize, usize)) -> Result<Array2<f64>> {
    if rows.len() != shape.0 || rows.iter().any(|r| r.len() != shape.1) {
        return Err(Error::Data(format!("checkpoint matrix is not {shape:?}")));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Array2::from_shape_vec(shape, flat).map_err(|e| Error::Data(e.to_string()))
}

impl ModelCheckpoint {
    pub fn from_model(model: &GnnModel, config_digest: &str) -> Self {
        ModelCheckpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            config_digest: config_digest.to_string(),
            dims: model.dims.clone(),
            leaky_slope: model.leaky_slope,
            layers: model
                .layers
                .iter()
                .map(|l| [rows(&l.theta_self), rows(&l.theta_dst), rows(&l.theta_src)])
                .collect(),
            head_w: model.head_w.to_vec(),
            head_b: model.head_b,
            epoch: None,
            optimizer: None,
        }
    }

    pub fn to_model(&self) -> Result<GnnModel> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::Data(format!("unsupported checkpoint format {:?}", self.format)));
        }
        if self.dims.len() < 2 || self.layers.len() != self.dims.len() - 1 {
            return Err(Error::Data("checkpoint layer count does not match dims".into()));
        }
        let layers = self
            .layers
            .iter()
            .zip(self.dims.windows(2))
            .map(|([a, b, c], w)| {
                let shape = (w[0], w[1]);
                Ok(LayerParams {
                    theta_self: matrix(a, shape)?,
                    theta_dst: matrix(b, shape)?,
                    theta_src: matrix(c, shape)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let model = GnnModel {
            dims: self.dims.clone(),
            layers,
            head_w: Array1::from(self.head_w.clone()),
            head_b: self.head_b,
            leaky_slope: self.leaky_slope,
        };
        model.validate().map_err(|e| Error::Data(format!("invalid checkpoint: {e}")))?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Data(e.to_string()))?;
        crate::dataset::write_atomic(path, text.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Data(format!("{}: {e}", path.display())))
    }
}
