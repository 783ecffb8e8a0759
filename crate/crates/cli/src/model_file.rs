//! Saved models.
//!
//! ```text
//! "TTCLSMDL"                 8 bytes
//! version                    u32 LE (currently 1)
//! kind                       u8: 1 = kernel, 2 = tensor trains
//! metadata length            u64 LE
//! metadata                   UTF-8 JSON (basis, image shape, class names, configuration)
//! payload
//! ```
//!
//! Kernel payload: the coefficient matrix `Z`, then `p` as u64 followed by the
//! `p` training feature matrices. Each matrix is `rows`, `cols` (u64 LE) and
//! `rows·cols` f64 LE entries in row-major order.
//!
//! Tensor-train payload: the label count as u64, then one `TTC1` train per
//! label.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};
use ttclass_core::{
    ArrConfig, Classifier, FeatureBasis, FeatureMatrixSet, KernelModel, MandyConfig, TTModel, TensorTrain,
};

use crate::error::{CliError, Result};

const MAGIC: &[u8; 8] = b"TTCLSMDL";
pub const VERSION: u32 = 1;
const KIND_KERNEL: u8 = 1;
const KIND_TT: u8 = 2;

/// Files above this size trigger a warning when written.
pub const LARGE_MODEL_BYTES: u64 = 1 << 30;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub basis: FeatureBasis,
    pub image_shape: (usize, usize),
    /// Whether inputs are 2×2-pooled before classification; `image_shape` is
    /// the pooled shape.
    pub reduced: bool,
    pub class_names: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mandy: Option<MandyConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arr: Option<ArrConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residuals: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug)]
pub enum Model {
    Kernel(KernelModel<f64>),
    Tensor(TTModel<f64>),
}

impl Classifier<f64> for Model {
    fn num_labels(&self) -> usize {
        match self {
            Model::Kernel(m) => m.num_labels(),
            Model::Tensor(m) => m.num_labels(),
        }
    }

    fn input_dim(&self) -> usize {
        match self {
            Model::Kernel(m) => m.input_dim(),
            Model::Tensor(m) => m.input_dim(),
        }
    }

    fn decision_values_batch(&self, x: ArrayView2<f64>) -> ttclass_core::Result<Array2<f64>> {
        match self {
            Model::Kernel(m) => m.decision_values_batch(x),
            Model::Tensor(m) => m.decision_values_batch(x),
        }
    }

    fn decision_values(&self, x: ArrayView1<f64>) -> ttclass_core::Result<ndarray::Array1<f64>> {
        match self {
            Model::Kernel(m) => m.decision_values(x),
            Model::Tensor(m) => m.decision_values(x),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SavedModel {
    pub meta: ModelMeta,
    pub model: Model,
}

fn write_matrix<W: Write>(w: &mut W, a: ArrayView2<f64>) -> std::io::Result<()> {
    w.write_all(&(a.nrows() as u64).to_le_bytes())?;
    w.write_all(&(a.ncols() as u64).to_le_bytes())?;
    for &v in a.iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_matrix<R: Read>(r: &mut R) -> Result<Array2<f64>> {
    let rows = read_u64(r).map_err(malformed)? as usize;
    let cols = read_u64(r).map_err(malformed)? as usize;
    let len = rows
        .checked_mul(cols)
        .filter(|&n| n <= 1 << 32)
        .ok_or_else(|| CliError::Malformed(format!("implausible matrix size {rows}×{cols}")))?;
    let mut buf = vec![0u8; len * 8];
    r.read_exact(&mut buf).map_err(malformed)?;
    let data = buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Array2::from_shape_vec((rows, cols), data).map_err(|e| CliError::Malformed(e.to_string()))
}

fn malformed(e: std::io::Error) -> CliError {
    CliError::Malformed(format!("model file: {e}"))
}

impl SavedModel {
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        let meta = serde_json::to_vec(&self.meta)?;
        let io = |e| CliError::Malformed(format!("writing model: {e}"));
        let kind = match self.model {
            Model::Kernel(_) => KIND_KERNEL,
            Model::Tensor(_) => KIND_TT,
        };
        w.write_all(MAGIC).map_err(io)?;
        w.write_all(&VERSION.to_le_bytes()).map_err(io)?;
        w.write_all(&[kind]).map_err(io)?;
        w.write_all(&(meta.len() as u64).to_le_bytes()).map_err(io)?;
        w.write_all(&meta).map_err(io)?;
        match &self.model {
            Model::Kernel(m) => {
                write_matrix(w, m.z.view()).map_err(io)?;
                let fs = m.training_features.matrices();
                w.write_all(&(fs.len() as u64).to_le_bytes()).map_err(io)?;
                for f in fs {
                    write_matrix(w, f.view()).map_err(io)?;
                }
            }
            Model::Tensor(m) => {
                w.write_all(&(m.parts.len() as u64).to_le_bytes()).map_err(io)?;
                for part in &m.parts {
                    part.write_to(w)?;
                }
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(malformed)?;
        if &magic != MAGIC {
            return Err(CliError::Malformed("not a model file (bad magic)".into()));
        }
        let mut v = [0u8; 4];
        r.read_exact(&mut v).map_err(malformed)?;
        let version = u32::from_le_bytes(v);
        if version != VERSION {
            return Err(CliError::Malformed(format!("unsupported model file version {version}")));
        }
        let mut kind = [0u8; 1];
        r.read_exact(&mut kind).map_err(malformed)?;
        let meta_len = read_u64(r).map_err(malformed)? as usize;
        if meta_len > 1 << 26 {
            return Err(CliError::Malformed("implausible metadata length".into()));
        }
        let mut meta = vec![0u8; meta_len];
        r.read_exact(&mut meta).map_err(malformed)?;
        let meta: ModelMeta = serde_json::from_slice(&meta)?;
        let model = match kind[0] {
            KIND_KERNEL => {
                let z = read_matrix(r)?;
                let p = read_u64(r).map_err(malformed)? as usize;
                if p != meta.basis.order() {
                    return Err(CliError::Malformed(format!(
                        "{p} feature matrices for a basis with {} maps",
                        meta.basis.order()
                    )));
                }
                let fs = (0..p).map(|_| read_matrix(r)).collect::<Result<Vec<_>>>()?;
                let features = FeatureMatrixSet::new(fs)?;
                if z.ncols() != features.samples() {
                    return Err(CliError::Malformed("coefficient and feature sample counts differ".into()));
                }
                let config = meta.mandy.clone().unwrap_or_default();
                Model::Kernel(KernelModel {
                    z,
                    training_features: features,
                    basis: meta.basis.clone(),
                    ridge_used: config.ridge,
                    block_size: config.block_size,
                })
            }
            KIND_TT => {
                let labels = read_u64(r).map_err(malformed)? as usize;
                if labels == 0 || labels > 1 << 16 {
                    return Err(CliError::Malformed(format!("implausible label count {labels}")));
                }
                let parts = (0..labels)
                    .map(|_| TensorTrain::read_from(r))
                    .collect::<ttclass_core::Result<Vec<_>>>()?;
                Model::Tensor(TTModel {
                    parts,
                    basis: meta.basis.clone(),
                    config: meta.arr.clone().unwrap_or_default(),
                    residuals: meta.residuals.clone().unwrap_or_default(),
                })
            }
            k => return Err(CliError::Malformed(format!("unknown model kind {k}"))),
        };
        if model.num_labels() != meta.class_names.len() {
            return Err(CliError::Malformed(format!(
                "model has {} labels but {} class names",
                model.num_labels(),
                meta.class_names.len()
            )));
        }
        Ok(SavedModel { meta, model })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| CliError::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w)?;
        w.flush().map_err(|e| CliError::io(path, e))?;
        let size = std::fs::metadata(path).map_err(|e| CliError::io(path, e))?.len();
        if size > LARGE_MODEL_BYTES {
            log::warn!("model file {} is {:.1} GB", path.display(), size as f64 / 1e9);
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| CliError::io(path, e))?;
        Self::read_from(&mut BufReader::new(file))
    }
}
