//! Alternating ridge regression: one tensor train per label, fitted core by
//! core against the whole training set.
//!
//! Stacks are kept with the sample index last: `left[μ]` is `r_μ × m` and
//! holds the contraction of cores `0..μ` with the features of every sample,
//! `right[μ]` is `r_{μ+1} × m` and holds cores `μ+1..p`. The micro-matrix for
//! core `μ` has one column per sample, `left[:, j] ⊗ F_μ[:, j] ⊗ right[:, j]`,
//! with rows ordered like the flat entries of a core, so a solution vector
//! reshapes directly into `(r_μ, n_μ, r_{μ+1})`.

use ndarray::{Array1, Array2, Array3, ArrayView1, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{check_one_hot, Classifier};
use crate::error::{Error, Result};
use crate::features::{build_feature_matrices, FeatureBasis, FeatureMatrixSet};
use crate::linalg;
use crate::scalar::Real;
use crate::tt::{contract_left_step, contract_right_step, direct_sum_labels, TensorTrain};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArrConfig {
    pub rank: usize,
    pub sweeps: usize,
    /// Relative singular-value cutoff for each core solve.
    pub svd_threshold: f64,
    pub seed: u64,
    /// Stop early once a full sweep changes the residual by at most
    /// `tol · residual`.
    pub tol: Option<f64>,
    /// When positive, core solves use `(M Mᵀ + ridge·I) vᵀ = M w` instead of
    /// the truncated pseudoinverse.
    pub ridge: f64,
}

impl Default for ArrConfig {
    fn default() -> Self {
        ArrConfig { rank: 10, sweeps: 5, svd_threshold: 1e-2, seed: 42, tol: None, ridge: 0.0 }
    }
}

impl ArrConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(Error::InvalidConfig("rank must be at least 1".into()));
        }
        if self.sweeps == 0 {
            return Err(Error::InvalidConfig("sweeps must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.svd_threshold) {
            return Err(Error::InvalidConfig(format!(
                "svd threshold must lie in [0, 1), got {}",
                self.svd_threshold
            )));
        }
        if !self.ridge.is_finite() || self.ridge < 0.0 {
            return Err(Error::InvalidConfig(format!("ridge must be finite and non-negative, got {}", self.ridge)));
        }
        if let Some(t) = self.tol {
            if !t.is_finite() || t < 0.0 {
                return Err(Error::InvalidConfig(format!("tolerance must be finite and non-negative, got {t}")));
            }
        }
        Ok(())
    }
}

/// Bond ranks `r_0..r_p` capped at `rank` and at what the mode sizes on
/// either side of each bond can support.
pub fn feasible_ranks(dims: &[usize], rank: usize) -> Vec<usize> {
    let p = dims.len();
    (0..=p)
        .map(|mu| {
            if mu == 0 || mu == p {
                return 1;
            }
            let left = dims[..mu].iter().fold(1usize, |a, &n| a.saturating_mul(n));
            let right = dims[mu..].iter().fold(1usize, |a, &n| a.saturating_mul(n));
            rank.min(left).min(right)
        })
        .collect()
}

/// Gaussian cores with feasible ranks, right-orthonormalized, first core
/// scaled to unit norm. Deterministic in `seed`.
pub fn init_guess<T: Real>(dims: &[usize], rank: usize, seed: u64) -> Result<TensorTrain<T>> {
    if rank == 0 || dims.is_empty() {
        return Err(Error::InvalidConfig("need rank ≥ 1 and at least one mode".into()));
    }
    let ranks = feasible_ranks(dims, rank);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cores = dims
        .iter()
        .enumerate()
        .map(|(mu, &n)| {
            Array3::from_shape_simple_fn((ranks[mu], n, ranks[mu + 1]), || {
                let v: f64 = StandardNormal.sample(&mut rng);
                T::of(v)
            })
        })
        .collect();
    let tt = TensorTrain::from_arrays(cores)?.orthonormalize_right(1)?;
    let mut cores: Vec<Array3<T>> = tt.into_cores().into_iter().map(|c| c.into_data()).collect();
    let norm = num_traits::Float::sqrt(cores[0].iter().map(|&v| v * v).sum::<T>());
    if norm > T::zero() {
        cores[0].mapv_inplace(|v| v / norm);
    }
    TensorTrain::from_arrays(cores)
}

fn reshape3<T: Real>(a: Array2<T>, shape: (usize, usize, usize)) -> Result<Array3<T>> {
    Ok(a.as_standard_layout().into_owned().into_shape_with_order(shape)?)
}

/// Working state of one label fit.
pub struct SweepState<'a, T: Real> {
    features: &'a FeatureMatrixSet<T>,
    w: Array1<T>,
    cores: Vec<Array3<T>>,
    left: Vec<Array2<T>>,
    right: Vec<Array2<T>>,
    // left[0..=left_fresh] and right[right_fresh..p] match the current cores
    left_fresh: usize,
    right_fresh: usize,
    threshold: f64,
    ridge: f64,
    residual: Option<f64>,
}

impl<'a, T: Real> SweepState<'a, T> {
    /// Takes `initial` as is; the right stack is computed immediately.
    pub fn new(
        features: &'a FeatureMatrixSet<T>,
        w: ArrayView1<T>,
        initial: TensorTrain<T>,
        config: &ArrConfig,
    ) -> Result<Self> {
        config.validate()?;
        if w.len() != features.samples() {
            return Err(Error::DimensionMismatch(format!(
                "label row has {} entries for {} samples",
                w.len(),
                features.samples()
            )));
        }
        if initial.mode_dims() != features.dims() {
            return Err(Error::DimensionMismatch(format!(
                "initial train has modes {:?}, features have {:?}",
                initial.mode_dims(),
                features.dims()
            )));
        }
        let p = initial.order();
        let m = features.samples();
        let cores: Vec<Array3<T>> = initial.into_cores().into_iter().map(|c| c.into_data()).collect();
        let mut state = SweepState {
            features,
            w: w.to_owned(),
            left: vec![Array2::ones((1, m)); p],
            right: vec![Array2::ones((1, m)); p],
            cores,
            left_fresh: 0,
            right_fresh: p - 1,
            threshold: config.svd_threshold,
            ridge: config.ridge,
            residual: None,
        };
        for mu in (1..p).rev() {
            state.update_right(mu);
        }
        Ok(state)
    }

    pub fn order(&self) -> usize {
        self.cores.len()
    }

    pub fn train(&self) -> Result<TensorTrain<T>> {
        TensorTrain::from_arrays(self.cores.clone())
    }

    pub fn into_train(self) -> Result<TensorTrain<T>> {
        TensorTrain::from_arrays(self.cores)
    }

    pub fn left_stack(&self, mu: usize) -> &Array2<T> {
        &self.left[mu]
    }

    pub fn right_stack(&self, mu: usize) -> &Array2<T> {
        &self.right[mu]
    }

    pub fn stacks_fresh_for(&self, mu: usize) -> bool {
        self.left_fresh >= mu && self.right_fresh <= mu
    }

    /// Residual `‖w − Ξᵀ Ψ_X‖` after the most recent core solve.
    pub fn last_residual(&self) -> Option<f64> {
        self.residual
    }

    fn update_left(&mut self, mu: usize) {
        // left[mu + 1] from left[mu] and core mu
        self.left[mu + 1] = contract_left_step(self.left[mu].view(), self.features.get(mu).view(), &self.cores[mu]);
        self.left_fresh = mu + 1;
    }

    fn update_right(&mut self, mu: usize) {
        // right[mu - 1] from right[mu] and core mu
        self.right[mu - 1] =
            contract_right_step(self.right[mu].view(), self.features.get(mu).view(), &self.cores[mu]);
        self.right_fresh = mu - 1;
    }

    /// `(r_μ·n_μ·r_{μ+1}) × m` micro-matrix of core `μ`.
    pub fn build_micro_matrix(&self, mu: usize) -> Array2<T> {
        assert!(self.stacks_fresh_for(mu), "stale stacks at core {mu}");
        let left = &self.left[mu];
        let right = &self.right[mu];
        let f = self.features.get(mu);
        let (a, n, b) = (left.nrows(), f.nrows(), right.nrows());
        let m = f.ncols();
        let mut out = Array2::zeros((a * n * b, m));
        let mut lf = Array1::zeros(m);
        for k in 0..a {
            for i in 0..n {
                ndarray::Zip::from(&mut lf)
                    .and(&left.row(k))
                    .and(&f.row(i))
                    .for_each(|o, &l, &fv| *o = l * fv);
                for l in 0..b {
                    let mut row = out.row_mut((k * n + i) * b + l);
                    ndarray::Zip::from(&mut row)
                        .and(&lf)
                        .and(&right.row(l))
                        .for_each(|o, &x, &r| *o = x * r);
                }
            }
        }
        out
    }

    /// Solves the subproblem of core `μ` and returns `v` (flat core entries).
    fn solve_core(&mut self, mu: usize) -> Result<Array1<T>> {
        let micro = self.build_micro_matrix(mu);
        let v = if linalg::max_abs(micro.view()) == T::zero() {
            Array1::zeros(micro.nrows())
        } else if self.ridge > 0.0 {
            let gram = linalg::row_gram(micro.view());
            let rhs = micro.dot(&self.w).insert_axis(Axis(0));
            linalg::solve_gram(gram.view(), rhs.view(), self.ridge)?.row(0).to_owned()
        } else {
            linalg::tsvd_least_squares(micro.view(), self.w.view(), self.threshold)?
        };
        let fitted = micro.t().dot(&v);
        let res = (&self.w - &fitted).iter().map(|&e| e.as_f64().powi(2)).sum::<f64>().sqrt();
        self.residual = Some(res);
        Ok(v)
    }

    fn core_shape(&self, mu: usize) -> (usize, usize, usize) {
        (self.left[mu].nrows(), self.features.get(mu).nrows(), self.right[mu].nrows())
    }

    /// Solve core `μ < p − 1`, keep the orthonormal factor of its left
    /// unfolding and push the triangular factor into core `μ + 1`.
    pub fn update_core_lr(&mut self, mu: usize) -> Result<()> {
        let p = self.order();
        assert!(mu + 1 < p);
        let (a, n, b) = self.core_shape(mu);
        let v = self.solve_core(mu)?;
        let unfolded = v.into_shape_with_order((a * n, b))?;
        let (q, r) = linalg::thin_qr(unfolded.view())?;
        let k = q.ncols();
        self.cores[mu] = reshape3(q, (a, n, k))?;
        let (_, n2, c) = self.cores[mu + 1].dim();
        let next = self.cores[mu + 1].view().into_shape_with_order((b, n2 * c))?.to_owned();
        self.cores[mu + 1] = reshape3(r.dot(&next), (k, n2, c))?;
        self.right_fresh = self.right_fresh.max(mu + 1);
        self.update_left(mu);
        Ok(())
    }

    /// Solve core `μ ≥ 1`, keep the orthonormal factor of its right
    /// unfolding and push the triangular factor into core `μ − 1`. At `μ = 0`
    /// the solution becomes the core directly.
    pub fn update_core_rl(&mut self, mu: usize) -> Result<()> {
        let (a, n, b) = self.core_shape(mu);
        let v = self.solve_core(mu)?;
        if mu == 0 {
            self.cores[0] = v.into_shape_with_order((a, n, b))?;
            self.left_fresh = 0;
            return Ok(());
        }
        let unfolded = v.into_shape_with_order((a, n * b))?;
        let (q, r) = linalg::thin_qr(unfolded.t())?;
        let k = q.ncols();
        self.cores[mu] = reshape3(q.t().to_owned(), (k, n, b))?;
        let (c, n0, _) = self.cores[mu - 1].dim();
        let prev = self.cores[mu - 1].view().into_shape_with_order((c * n0, a))?.to_owned();
        self.cores[mu - 1] = reshape3(prev.dot(&r.t()), (c, n0, k))?;
        self.left_fresh = self.left_fresh.min(mu - 1);
        self.update_right(mu);
        Ok(())
    }

    pub fn half_sweep_lr(&mut self) -> Result<()> {
        for mu in 0..self.order().saturating_sub(1) {
            self.update_core_lr(mu)?;
        }
        Ok(())
    }

    pub fn half_sweep_rl(&mut self) -> Result<()> {
        for mu in (0..self.order()).rev() {
            self.update_core_rl(mu)?;
        }
        Ok(())
    }

    /// `Ξᵀ Ψ_X` for the current cores, contracted from scratch.
    pub fn predictions(&self) -> Array1<T> {
        let mut state = Array2::<T>::ones((1, self.features.samples()));
        for (mu, core) in self.cores.iter().enumerate() {
            state = contract_left_step(state.view(), self.features.get(mu).view(), core);
        }
        state.row(0).to_owned()
    }

    pub fn residual(&self) -> f64 {
        (&self.w - &self.predictions()).iter().map(|&e| e.as_f64().powi(2)).sum::<f64>().sqrt()
    }

    /// Both stacks recomputed from the current cores, for checking the
    /// incrementally maintained ones.
    pub fn recompute_stacks(&self) -> (Vec<Array2<T>>, Vec<Array2<T>>) {
        let p = self.order();
        let m = self.features.samples();
        let mut left = vec![Array2::ones((1, m)); p];
        let mut right = vec![Array2::ones((1, m)); p];
        for mu in 0..p - 1 {
            left[mu + 1] = contract_left_step(left[mu].view(), self.features.get(mu).view(), &self.cores[mu]);
        }
        for mu in (1..p).rev() {
            right[mu - 1] = contract_right_step(right[mu].view(), self.features.get(mu).view(), &self.cores[mu]);
        }
        (left, right)
    }
}

#[derive(Clone, Debug)]
pub struct LabelFit<T> {
    pub train: TensorTrain<T>,
    pub initial_residual: f64,
    /// Residual after every half sweep, in order.
    pub residuals: Vec<f64>,
}

pub fn fit_label<T: Real>(features: &FeatureMatrixSet<T>, w: ArrayView1<T>, config: &ArrConfig) -> Result<LabelFit<T>> {
    config.validate()?;
    let initial = init_guess(&features.dims(), config.rank, config.seed)?;
    let mut state = SweepState::new(features, w, initial, config)?;
    let initial_residual = state.residual();
    let mut residuals = Vec::with_capacity(2 * config.sweeps);
    let mut previous = initial_residual;
    for sweep in 0..config.sweeps {
        state.half_sweep_lr()?;
        residuals.push(state.last_residual().unwrap_or(previous));
        state.half_sweep_rl()?;
        let current = state.last_residual().unwrap_or(previous);
        residuals.push(current);
        log::debug!("sweep {}: residual {current:.6e}", sweep + 1);
        if let Some(tol) = config.tol {
            if (previous - current).abs() <= tol * current.max(f64::MIN_POSITIVE) {
                break;
            }
        }
        previous = current;
    }
    Ok(LabelFit { train: state.into_train()?, initial_residual, residuals })
}

/// One fitted train per label.
#[derive(Clone, Debug)]
pub struct TTModel<T> {
    pub parts: Vec<TensorTrain<T>>,
    pub basis: FeatureBasis,
    pub config: ArrConfig,
    /// Per label: residual before fitting, then after every half sweep.
    pub residuals: Vec<Vec<f64>>,
}

impl<T: Real> TTModel<T> {
    pub fn fit(x: ArrayView2<T>, y: ArrayView2<T>, basis: &FeatureBasis, config: &ArrConfig) -> Result<Self> {
        config.validate()?;
        check_one_hot(y, x.ncols())?;
        let features = build_feature_matrices(basis, x)?;
        Self::fit_features(&features, y, basis, config)
    }

    /// Like [`fit`](Self::fit) with prebuilt feature matrices; `y` need not be one-hot.
    pub fn fit_features(
        features: &FeatureMatrixSet<T>,
        y: ArrayView2<T>,
        basis: &FeatureBasis,
        config: &ArrConfig,
    ) -> Result<Self> {
        if y.ncols() != features.samples() {
            return Err(Error::DimensionMismatch(format!(
                "{} label columns for {} samples",
                y.ncols(),
                features.samples()
            )));
        }
        let fits: Vec<LabelFit<T>> = (0..y.nrows())
            .into_par_iter()
            .map(|l| {
                let fit = fit_label(features, y.row(l), config);
                log::info!("label {l} fitted");
                fit
            })
            .collect::<Result<_>>()?;
        let mut parts = Vec::with_capacity(fits.len());
        let mut residuals = Vec::with_capacity(fits.len());
        for f in fits {
            let mut r = vec![f.initial_residual];
            r.extend(f.residuals);
            residuals.push(r);
            parts.push(f.train);
        }
        Ok(TTModel { parts, basis: basis.clone(), config: config.clone(), residuals })
    }

    /// The stacked coefficient train with a trailing label mode.
    pub fn coefficient_tensor(&self) -> Result<TensorTrain<T>> {
        direct_sum_labels(&self.parts)
    }
}

impl<T: Real> Classifier<T> for TTModel<T> {
    fn num_labels(&self) -> usize {
        self.parts.len()
    }

    fn input_dim(&self) -> usize {
        self.basis.input_dim()
    }

    fn decision_values_batch(&self, x: ArrayView2<T>) -> Result<Array2<T>> {
        let features = build_feature_matrices(&self.basis, x)?;
        let views = features.views();
        let rows: Vec<Array2<T>> = self
            .parts
            .par_iter()
            .map(|part| part.evaluate_batch(&views))
            .collect::<Result<_>>()?;
        let mut out = Array2::zeros((self.parts.len(), features.samples()));
        for (l, r) in rows.iter().enumerate() {
            out.row_mut(l).assign(&r.row(0));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, s};
    use rand::Rng;

    fn random_data(d: usize, m: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((d, m), |_| rng.random_range(0.0..1.0))
    }

    fn unit(x: &Array2<f64>) -> Array2<f64> {
        x.t().dot(x)
    }

    fn close_to_identity(a: &Array2<f64>, tol: f64) -> bool {
        (a - &Array2::<f64>::eye(a.nrows())).iter().all(|d| d.abs() <= tol)
    }

    #[test]
    fn feasible_rank_formula() {
        assert_eq!(feasible_ranks(&[2, 2, 2, 2], 10), vec![1, 2, 4, 2, 1]);
        assert_eq!(feasible_ranks(&[2; 10], 10), vec![1, 2, 4, 8, 10, 10, 10, 8, 4, 2, 1]);
        assert_eq!(feasible_ranks(&[2; 200], 10)[100], 10);
    }

    #[test]
    fn init_rank_one_unit_columns() {
        let tt = init_guess::<f64>(&[3, 3], 1, 7).unwrap();
        for core in tt.cores() {
            let v = core.data().iter().map(|x| x * x).sum::<f64>();
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn init_deterministic_and_orthonormal() {
        let a = init_guess::<f64>(&[2, 2, 2, 2], 10, 42).unwrap();
        let b = init_guess::<f64>(&[2, 2, 2, 2], 10, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, init_guess::<f64>(&[2, 2, 2, 2], 10, 43).unwrap());
        assert_eq!(a.ranks(), vec![1, 2, 4, 2, 1]);
        for mu in 1..4 {
            let r = a.core(mu).right_unfold().matrix;
            assert!(close_to_identity(&r.dot(&r.t()), 1e-12));
        }
        assert!((a.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_core_micro_matrix_is_features() {
        let basis = FeatureBasis::trig(0.59, 1).unwrap();
        let f = build_feature_matrices(&basis, random_data(1, 5, 1).view()).unwrap();
        let w = Array1::zeros(5);
        let state = SweepState::new(&f, w.view(), init_guess(&[2], 3, 1).unwrap(), &ArrConfig::default()).unwrap();
        assert_eq!(state.build_micro_matrix(0), *f.get(0));
    }

    #[test]
    fn micro_matrix_ones_cores() {
        let f = FeatureMatrixSet::new(vec![array![[2.0, 3.0]], array![[5.0, 7.0]]]).unwrap();
        let ones = TensorTrain::from_arrays(vec![Array3::ones((1, 1, 1)), Array3::ones((1, 1, 1))]).unwrap();
        let w = array![0.0, 0.0];
        let state = SweepState::new(&f, w.view(), ones, &ArrConfig::default()).unwrap();
        // right stack scalar times features of core 0
        assert_eq!(state.build_micro_matrix(0), array![[10.0, 21.0]]);
    }

    #[test]
    fn micro_matrix_matches_dense_oracle() {
        let basis = FeatureBasis::trig(0.59, 3).unwrap();
        let x = random_data(3, 4, 2);
        let f = build_feature_matrices(&basis, x.view()).unwrap();
        let init = init_guess::<f64>(&[2, 2, 2], 2, 3).unwrap();
        let w = Array1::zeros(4);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut state = SweepState::new(&f, w.view(), init.clone(), &ArrConfig::default()).unwrap();
        for mu in 0..3 {
            assert!(state.stacks_fresh_for(mu));
            let micro = state.build_micro_matrix(mu);
            let v = Array1::from_shape_fn(micro.nrows(), |_| rng.random_range(-1.0..1.0));
            let mut cores: Vec<Array3<f64>> = state.cores.clone();
            let shape = cores[mu].dim();
            cores[mu] = v.clone().into_shape_with_order(shape).unwrap();
            let tt = TensorTrain::from_arrays(cores).unwrap();
            let dense = tt.contract_full().unwrap();
            let got = v.dot(&micro);
            for j in 0..4 {
                let mut expect = 0.0;
                for (idx, &val) in dense.indexed_iter() {
                    expect += val * f.get(0)[[idx[0], j]] * f.get(1)[[idx[1], j]] * f.get(2)[[idx[2], j]];
                }
                assert!((got[j] - expect).abs() < 1e-12);
            }
            if mu < 2 {
                state.update_core_lr(mu).unwrap();
            }
        }
    }

    #[test]
    fn zero_labels_give_zero_model() {
        let basis = FeatureBasis::trig(0.59, 4).unwrap();
        let f = build_feature_matrices(&basis, random_data(4, 10, 5).view()).unwrap();
        let fit = fit_label(&f, Array1::zeros(10).view(), &ArrConfig::default()).unwrap();
        assert!(fit.train.core(0).data().iter().all(|&v| v == 0.0));
        let views = f.views();
        assert!(fit.train.evaluate_batch(&views).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_core_is_one_least_squares_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let f = FeatureMatrixSet::new(vec![Array2::from_shape_fn((3, 8), |_| rng.random_range(-1.0..1.0))]).unwrap();
        let w = Array1::from_shape_fn(8, |_| rng.random_range(-1.0..1.0));
        let config = ArrConfig { sweeps: 1, ..ArrConfig::default() };
        let fit = fit_label(&f, w.view(), &config).unwrap();
        let direct = linalg::tsvd_least_squares(f.get(0).view(), w.view(), config.svd_threshold).unwrap();
        let got = fit.train.core(0).data().iter().copied().collect::<Array1<f64>>();
        assert!((&got - &direct).iter().all(|d| d.abs() < 1e-12));
    }

    #[test]
    fn single_sample_fitted_exactly() {
        let basis = FeatureBasis::trig(0.59, 5).unwrap();
        let f = build_feature_matrices(&basis, random_data(5, 1, 7).view()).unwrap();
        let config = ArrConfig { sweeps: 1, svd_threshold: 0.0, ..ArrConfig::default() };
        let fit = fit_label(&f, array![1.0].view(), &config).unwrap();
        assert!(*fit.residuals.last().unwrap() <= 1e-10);
    }

    #[test]
    fn planted_rank_two_model_recovered() {
        let d = 5;
        let m = 200;
        let planted = init_guess::<f64>(&[2; 5], 2, 99).unwrap();
        let basis = FeatureBasis::trig(1.2, d).unwrap();
        let f = build_feature_matrices(&basis, random_data(d, m, 8).view()).unwrap();
        let w = planted.evaluate_batch(&f.views()).unwrap().row(0).to_owned();
        let config = ArrConfig { rank: 2, svd_threshold: 0.0, ..ArrConfig::default() };
        let fit = fit_label(&f, w.view(), &config).unwrap();
        assert!(*fit.residuals.last().unwrap() <= 1e-6, "{:?}", fit.residuals);
    }

    #[test]
    fn stacks_and_orthonormality_after_half_sweeps() {
        let basis = FeatureBasis::trig(0.59, 6).unwrap();
        let f = build_feature_matrices(&basis, random_data(6, 30, 9).view()).unwrap();
        let w = Array1::from_shape_fn(30, |j| (j % 2) as f64);
        let config = ArrConfig { rank: 3, ..ArrConfig::default() };
        let mut state = SweepState::new(&f, w.view(), init_guess(&f.dims(), 3, 1).unwrap(), &config).unwrap();
        let check_stacks = |state: &SweepState<f64>| {
            let (left, right) = state.recompute_stacks();
            for mu in 0..=state.left_fresh {
                assert!((&left[mu] - &state.left[mu]).iter().all(|d| d.abs() < 1e-10));
            }
            for mu in state.right_fresh..state.order() {
                assert!((&right[mu] - &state.right[mu]).iter().all(|d| d.abs() < 1e-10));
            }
        };
        check_stacks(&state);
        state.half_sweep_lr().unwrap();
        check_stacks(&state);
        assert_eq!(state.left_fresh, 5);
        for mu in 0..5 {
            let l = state.train().unwrap().core(mu).left_unfold().matrix;
            assert!(close_to_identity(&unit(&l), 1e-12));
        }
        state.half_sweep_rl().unwrap();
        check_stacks(&state);
        assert_eq!(state.right_fresh, 0);
        for mu in 1..6 {
            let r = state.train().unwrap().core(mu).right_unfold().matrix;
            assert!(close_to_identity(&r.dot(&r.t()), 1e-12));
        }
    }

    #[test]
    fn qr_absorption_keeps_predictions() {
        let basis = FeatureBasis::trig(0.59, 4).unwrap();
        let f = build_feature_matrices(&basis, random_data(4, 20, 10).view()).unwrap();
        let w = Array1::from_shape_fn(20, |j| ((j * 3) % 2) as f64);
        let config = ArrConfig { rank: 3, ..ArrConfig::default() };
        let mut state = SweepState::new(&f, w.view(), init_guess(&f.dims(), 3, 2).unwrap(), &config).unwrap();
        for mu in 0..3 {
            let micro = state.build_micro_matrix(mu);
            state.update_core_lr(mu).unwrap();
            // after absorption the train evaluates to the solved fit
            let v = linalg::tsvd_least_squares(micro.view(), w.view(), config.svd_threshold).unwrap();
            let solved = micro.t().dot(&v);
            assert!((&state.predictions() - &solved).iter().all(|d| d.abs() < 1e-10));
        }
        for mu in (1..4).rev() {
            let micro = state.build_micro_matrix(mu);
            let v = linalg::tsvd_least_squares(micro.view(), w.view(), config.svd_threshold).unwrap();
            state.update_core_rl(mu).unwrap();
            assert!((&state.predictions() - &micro.t().dot(&v)).iter().all(|d| d.abs() < 1e-10));
        }
    }

    #[test]
    fn residual_non_increasing_without_truncation() {
        let basis = FeatureBasis::trig(0.59, 8).unwrap();
        let x = random_data(8, 60, 11);
        let w = Array1::from_shape_fn(60, |j| if x[[0, j]] + x[[3, j]] > 1.0 { 1.0 } else { 0.0 });
        let f = build_feature_matrices(&basis, x.view()).unwrap();
        let config = ArrConfig { rank: 3, svd_threshold: 0.0, sweeps: 4, ..ArrConfig::default() };
        let fit = fit_label(&f, w.view(), &config).unwrap();
        let mut prev = fit.initial_residual;
        for &r in &fit.residuals {
            assert!(r <= prev + 1e-9, "{:?}", fit.residuals);
            prev = r;
        }
    }

    #[test]
    fn ridge_full_rank_matches_kernel_ridge() {
        use crate::mandy::{KernelModel, MandyConfig};
        let d = 4;
        let m = 25;
        let basis = FeatureBasis::trig(1.1, d).unwrap();
        let x = random_data(d, m, 12);
        let labels: Vec<usize> = (0..m).map(|j| usize::from(x[[1, j]] > 0.5)).collect();
        let mut y = Array2::zeros((2, m));
        for (j, &l) in labels.iter().enumerate() {
            y[[l, j]] = 1.0;
        }
        let ridge = 1e-2;
        let config = ArrConfig { rank: 4, svd_threshold: 0.0, ridge, sweeps: 3, ..ArrConfig::default() };
        let arr = TTModel::fit(x.view(), y.view(), &basis, &config).unwrap();
        let mandy =
            KernelModel::fit(x.view(), y.view(), &basis, &MandyConfig { ridge, ..MandyConfig::default() }).unwrap();
        let probes = random_data(d, 10, 13);
        let a = arr.decision_values_batch(probes.view()).unwrap();
        let b = mandy.decision_values_batch(probes.view()).unwrap();
        assert!((&a - &b).iter().all(|v| v.abs() < 1e-6), "{a:?} vs {b:?}");
    }

    #[test]
    fn label_permutation_equivariance() {
        let basis = FeatureBasis::trig(0.59, 4).unwrap();
        let x = random_data(4, 18, 14);
        let labels: Vec<usize> = (0..18).map(|j| j % 3).collect();
        let mut y = Array2::zeros((3, 18));
        for (j, &l) in labels.iter().enumerate() {
            y[[l, j]] = 1.0;
        }
        let config = ArrConfig { rank: 2, sweeps: 2, ..ArrConfig::default() };
        let model = TTModel::fit(x.view(), y.view(), &basis, &config).unwrap();
        let perm = [2, 0, 1];
        let yp = y.select(Axis(0), &perm);
        let permuted = TTModel::fit(x.view(), yp.view(), &basis, &config).unwrap();
        let probes = random_data(4, 6, 15);
        let a = model.decision_values_batch(probes.view()).unwrap();
        let b = permuted.decision_values_batch(probes.view()).unwrap();
        for (new, &old) in perm.iter().enumerate() {
            assert_eq!(a.row(old), b.row(new));
        }
    }

    #[test]
    fn single_label_model_matches_fit_label() {
        let basis = FeatureBasis::trig(0.59, 3).unwrap();
        let x = random_data(3, 9, 16);
        let y = Array2::from_elem((1, 9), 1.0);
        let config = ArrConfig { rank: 2, ..ArrConfig::default() };
        let model = TTModel::fit(x.view(), y.view(), &basis, &config).unwrap();
        let f = build_feature_matrices(&basis, x.view()).unwrap();
        let single = fit_label(&f, y.row(0), &config).unwrap();
        assert_eq!(model.parts[0], single.train);
    }

    #[test]
    fn coefficient_tensor_matches_parts() {
        let basis = FeatureBasis::trig(0.59, 3).unwrap();
        let x = random_data(3, 12, 17);
        let mut y = Array2::zeros((2, 12));
        for j in 0..12 {
            y[[j % 2, j]] = 1.0;
        }
        let model = TTModel::fit(x.view(), y.view(), &basis, &ArrConfig { rank: 2, ..ArrConfig::default() }).unwrap();
        let stacked = model.coefficient_tensor().unwrap();
        let probe = random_data(3, 1, 18);
        let f = build_feature_matrices(&basis, probe.view()).unwrap();
        let vecs: Vec<Array1<f64>> = f.matrices().iter().map(|m| m.column(0).to_owned()).collect();
        let views: Vec<_> = vecs.iter().map(|v| v.view()).collect();
        let scores = stacked.evaluate(&views).unwrap();
        let direct = model.decision_values(probe.column(0)).unwrap();
        assert!((&scores - &direct).iter().all(|d| d.abs() < 1e-12));
        assert_eq!(scores.slice(s![..]).len(), 2);
    }

    #[test]
    fn early_exit_on_tolerance() {
        let basis = FeatureBasis::trig(0.59, 3).unwrap();
        let f = build_feature_matrices(&basis, random_data(3, 40, 19).view()).unwrap();
        let w = Array1::from_shape_fn(40, |j| (j % 2) as f64);
        let config = ArrConfig { rank: 4, sweeps: 20, tol: Some(1e-6), svd_threshold: 0.0, ..ArrConfig::default() };
        let fit = fit_label(&f, w.view(), &config).unwrap();
        assert!(fit.residuals.len() < 40);
    }

    #[test]
    fn invalid_configs() {
        for c in [
            ArrConfig { rank: 0, ..ArrConfig::default() },
            ArrConfig { sweeps: 0, ..ArrConfig::default() },
            ArrConfig { svd_threshold: 1.0, ..ArrConfig::default() },
            ArrConfig { ridge: -1.0, ..ArrConfig::default() },
            ArrConfig { tol: Some(f64::NAN), ..ArrConfig::default() },
        ] {
            assert!(c.validate().is_err());
        }
    }
}
