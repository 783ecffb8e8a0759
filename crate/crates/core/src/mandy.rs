//! Kernel-based MANDy: coefficients `Z` with `Z G = Y` for the product
//! kernel `k(x, x′) = Π_μ ⟨ψ_μ(x), ψ_μ(x′)⟩`, and prediction `f(x) = Z k(x)`.

use ndarray::{s, Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{check_one_hot, Classifier};
use crate::error::{Error, Result};
use crate::features::{build_feature_matrices, FeatureBasis, FeatureMatrixSet};
use crate::linalg;
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MandyConfig {
    /// Tikhonov term added to the Gram matrix; 0 means a pseudoinverse solve.
    pub ridge: f64,
    /// Largest training set accepted, bounding the `m × m` Gram matrix.
    pub max_samples: usize,
    /// Test samples per kernel block at prediction time.
    pub block_size: usize,
}

impl Default for MandyConfig {
    fn default() -> Self {
        MandyConfig { ridge: 0.0, max_samples: 20_000, block_size: 256 }
    }
}

impl MandyConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.ridge.is_finite() || self.ridge < 0.0 {
            return Err(Error::InvalidConfig(format!("ridge must be finite and non-negative, got {}", self.ridge)));
        }
        if self.block_size == 0 || self.max_samples == 0 {
            return Err(Error::InvalidConfig("block size and sample cap must be positive".into()));
        }
        Ok(())
    }
}

/// Multiplies `acc[r, :]` by `Σ_i a[i, r]·b[i, :]` for every row `r`.
fn hadamard_update<T: Real>(acc: &mut Array2<T>, a: ArrayView2<T>, b: ArrayView2<T>, scratch: &mut Vec<T>) {
    let cols = b.ncols();
    scratch.resize(cols, T::zero());
    let b_rows: Vec<_> = b.rows().into_iter().map(|r| r.to_owned()).collect();
    for (r, mut out) in acc.rows_mut().into_iter().enumerate() {
        scratch.iter_mut().for_each(|v| *v = T::zero());
        for (i, brow) in b_rows.iter().enumerate() {
            let w = a[[i, r]];
            let brow = brow.as_slice().unwrap();
            for (s, &bv) in scratch.iter_mut().zip(brow) {
                *s += w * bv;
            }
        }
        let out = out.as_slice_mut().unwrap();
        for (o, &s) in out.iter_mut().zip(scratch.iter()) {
            *o *= s;
        }
    }
}

fn check_compatible<T: Real>(a: &FeatureMatrixSet<T>, b: &FeatureMatrixSet<T>) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::DimensionMismatch(format!(
            "feature sets have different mode sizes: {:?} vs {:?}",
            a.dims(),
            b.dims()
        )));
    }
    Ok(())
}

/// `K[i, j] = Π_μ ⟨A_μ[:, i], B_μ[:, j]⟩`, assembled by a running Hadamard
/// product over coordinates in parallel row blocks.
pub fn kernel_matrix<T: Real>(a: &FeatureMatrixSet<T>, b: &FeatureMatrixSet<T>, block: usize) -> Result<Array2<T>> {
    check_compatible(a, b)?;
    let (ma, mb) = (a.samples(), b.samples());
    let block = block.max(1);
    let mut out = Array2::<T>::ones((ma, mb));
    out.axis_chunks_iter_mut(Axis(0), block)
        .into_par_iter()
        .enumerate()
        .for_each(|(bi, mut chunk)| {
            let start = bi * block;
            let rows = chunk.nrows();
            let mut acc = Array2::<T>::ones((rows, mb));
            let mut scratch = Vec::new();
            for mu in 0..a.order() {
                let fa = a.get(mu).slice(s![.., start..start + rows]);
                hadamard_update(&mut acc, fa, b.get(mu).view(), &mut scratch);
            }
            chunk.assign(&acc);
        });
    Ok(out)
}

/// `G = Θ_1 ⊙ ... ⊙ Θ_p` for one feature set. Only the upper triangle is
/// computed; the result is mirrored so it is exactly symmetric.
pub fn build_gram<T: Real>(features: &FeatureMatrixSet<T>, block: usize) -> Result<Array2<T>> {
    let m = features.samples();
    let block = block.max(1);
    let starts: Vec<usize> = (0..m).step_by(block).collect();
    let pieces: Vec<(usize, Array2<T>)> = starts
        .par_iter()
        .map(|&start| {
            let rows = block.min(m - start);
            let mut acc = Array2::<T>::ones((rows, m - start));
            let mut scratch = Vec::new();
            for f in features.matrices() {
                hadamard_update(
                    &mut acc,
                    f.slice(s![.., start..start + rows]),
                    f.slice(s![.., start..]),
                    &mut scratch,
                );
            }
            (start, acc)
        })
        .collect();
    let mut g = Array2::<T>::zeros((m, m));
    for (start, acc) in pieces {
        for r in 0..acc.nrows() {
            let i = start + r;
            for c in r..acc.ncols() {
                let j = start + c;
                g[[i, j]] = acc[[r, c]];
                g[[j, i]] = acc[[r, c]];
            }
        }
    }
    Ok(g)
}

#[derive(Clone, Debug)]
pub struct KernelModel<T> {
    /// `d′ × m` coefficients.
    pub z: Array2<T>,
    pub training_features: FeatureMatrixSet<T>,
    pub basis: FeatureBasis,
    pub ridge_used: f64,
    pub block_size: usize,
}

impl<T: Real> KernelModel<T> {
    /// Fits on `x` (`d × m`) with one-hot labels `y` (`d′ × m`).
    pub fn fit(x: ArrayView2<T>, y: ArrayView2<T>, basis: &FeatureBasis, config: &MandyConfig) -> Result<Self> {
        config.validate()?;
        let m = x.ncols();
        check_one_hot(y, m)?;
        if m > config.max_samples {
            return Err(Error::SizeLimit(format!(
                "{m} training samples exceed the cap of {} (the Gram matrix alone would need {:.3} GB); \
                 subsample the training set or raise the cap",
                config.max_samples,
                (m as f64).powi(2) * std::mem::size_of::<T>() as f64 / 1e9
            )));
        }
        let features = build_feature_matrices(basis, x)?;
        log::info!("assembling {m}x{m} Gram matrix");
        let g = build_gram(&features, config.block_size)?;
        log::info!("solving for coefficients");
        let z = linalg::solve_gram(g.view(), y, config.ridge)?;
        Ok(KernelModel {
            z,
            training_features: features,
            basis: basis.clone(),
            ridge_used: config.ridge,
            block_size: config.block_size,
        })
    }

    pub fn training_samples(&self) -> usize {
        self.training_features.samples()
    }
}

impl<T: Real> Classifier<T> for KernelModel<T> {
    fn num_labels(&self) -> usize {
        self.z.nrows()
    }

    fn input_dim(&self) -> usize {
        self.basis.input_dim()
    }

    /// Kernel vectors are built `block_size` test samples at a time.
    fn decision_values_batch(&self, x: ArrayView2<T>) -> Result<Array2<T>> {
        let test = build_feature_matrices(&self.basis, x)?;
        let n = test.samples();
        let block = self.block_size.max(1);
        let starts: Vec<usize> = (0..n).step_by(block).collect();
        let blocks: Vec<Array2<T>> = starts
            .par_iter()
            .map(|&start| {
                let cols: Vec<usize> = (start..(start + block).min(n)).collect();
                let sub = test.select(&cols);
                // k is (block × m_train)
                let k = kernel_matrix(&sub, &self.training_features, block)?;
                Ok(self.z.dot(&k.t()))
            })
            .collect::<Result<_>>()?;
        let mut out = Array2::zeros((self.num_labels(), n));
        for (start, b) in starts.into_iter().zip(blocks) {
            out.slice_mut(s![.., start..start + b.ncols()]).assign(&b);
        }
        Ok(out)
    }
}
