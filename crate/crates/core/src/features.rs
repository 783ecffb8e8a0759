//! Coordinate feature maps and the per-coordinate matrices built from them.

use ndarray::{Array1, Array2, ArrayD, ArrayView1, ArrayView2, IxDyn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub const DEFAULT_ALPHA: f64 = 0.59;

/// Entry cap for [`materialize_psi_hat`].
pub const PSI_HAT_ENTRY_CAP: usize = 1 << 22;

/// A scalar function of one input coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "fn", content = "param", rename_all = "snake_case")]
pub enum ScalarFn {
    One,
    Identity,
    Power(i32),
    /// `cos(a·x)`
    Cos(f64),
    /// `sin(a·x)`
    Sin(f64),
}

impl ScalarFn {
    pub fn eval<T: Real>(&self, x: T) -> T {
        match *self {
            ScalarFn::One => T::one(),
            ScalarFn::Identity => x,
            ScalarFn::Power(k) => num_traits::Float::powi(x, k),
            ScalarFn::Cos(a) => num_traits::Float::cos(T::of(a) * x),
            ScalarFn::Sin(a) => num_traits::Float::sin(T::of(a) * x),
        }
    }
}

/// The functions making up `ψ_μ`, all applied to input coordinate `coordinate`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoordinateMap {
    pub coordinate: usize,
    pub functions: Vec<ScalarFn>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureBasis {
    /// `ψ_μ(x) = [cos(α x_μ), sin(α x_μ)]` for every input coordinate.
    TrigAlpha { alpha: f64, input_dim: usize },
    Custom { input_dim: usize, maps: Vec<CoordinateMap> },
}

impl FeatureBasis {
    pub fn trig(alpha: f64, input_dim: usize) -> Result<Self> {
        if !alpha.is_finite() || alpha <= 0.0 {
            return Err(Error::InvalidConfig(format!("alpha must be positive and finite, got {alpha}")));
        }
        if input_dim == 0 {
            return Err(Error::InvalidConfig("input dimension must be at least 1".into()));
        }
        Ok(FeatureBasis::TrigAlpha { alpha, input_dim })
    }

    pub fn custom(input_dim: usize, maps: Vec<CoordinateMap>) -> Result<Self> {
        if maps.is_empty() {
            return Err(Error::InvalidConfig("a custom basis needs at least one coordinate map".into()));
        }
        for (mu, map) in maps.iter().enumerate() {
            if map.coordinate >= input_dim {
                return Err(Error::InvalidConfig(format!(
                    "map {mu} reads coordinate {} of a {input_dim}-dimensional input",
                    map.coordinate
                )));
            }
            if map.functions.is_empty() {
                return Err(Error::InvalidConfig(format!("map {mu} has no functions")));
            }
        }
        Ok(FeatureBasis::Custom { input_dim, maps })
    }

    pub fn input_dim(&self) -> usize {
        match self {
            FeatureBasis::TrigAlpha { input_dim, .. } | FeatureBasis::Custom { input_dim, .. } => *input_dim,
        }
    }

    /// Number of coordinate maps `p`.
    pub fn order(&self) -> usize {
        match self {
            FeatureBasis::TrigAlpha { input_dim, .. } => *input_dim,
            FeatureBasis::Custom { maps, .. } => maps.len(),
        }
    }

    pub fn dims(&self) -> Vec<usize> {
        match self {
            FeatureBasis::TrigAlpha { input_dim, .. } => vec![2; *input_dim],
            FeatureBasis::Custom { maps, .. } => maps.iter().map(|m| m.functions.len()).collect(),
        }
    }

    pub fn alpha(&self) -> Option<f64> {
        match self {
            FeatureBasis::TrigAlpha { alpha, .. } => Some(*alpha),
            FeatureBasis::Custom { .. } => None,
        }
    }

    fn check_input(&self, d: usize) -> Result<()> {
        if d != self.input_dim() {
            return Err(Error::DimensionMismatch(format!(
                "basis expects {}-dimensional inputs, got {d}",
                self.input_dim()
            )));
        }
        Ok(())
    }

    fn warn_range<'a, T: Real>(&self, values: impl Iterator<Item = &'a T>) {
        if matches!(self, FeatureBasis::TrigAlpha { .. }) {
            let (zero, one) = (T::zero(), T::one());
            if values.into_iter().any(|&v| v < zero || v > one) {
                log::warn!("input values outside [0, 1] passed to a trigonometric basis");
            }
        }
    }

    fn coordinate_row<T: Real>(&self, mu: usize, i: usize, x: T) -> T {
        match self {
            FeatureBasis::TrigAlpha { alpha, .. } => {
                let t = T::of(*alpha) * x;
                if i == 0 {
                    num_traits::Float::cos(t)
                } else {
                    num_traits::Float::sin(t)
                }
            }
            FeatureBasis::Custom { maps, .. } => maps[mu].functions[i].eval(x),
        }
    }

    fn coordinate_of(&self, mu: usize) -> usize {
        match self {
            FeatureBasis::TrigAlpha { .. } => mu,
            FeatureBasis::Custom { maps, .. } => maps[mu].coordinate,
        }
    }
}

/// `ψ_1(x), ..., ψ_p(x)`.
pub fn apply_basis<T: Real>(basis: &FeatureBasis, x: ArrayView1<T>) -> Result<Vec<Array1<T>>> {
    basis.check_input(x.len())?;
    basis.warn_range(x.iter());
    Ok(basis
        .dims()
        .iter()
        .enumerate()
        .map(|(mu, &n)| {
            let v = x[basis.coordinate_of(mu)];
            Array1::from_shape_fn(n, |i| basis.coordinate_row(mu, i, v))
        })
        .collect())
}

/// Feature matrices `F_μ` (`n_μ × m`), column `j` holding `ψ_μ(x⁽ʲ⁾)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrixSet<T> {
    matrices: Vec<Array2<T>>,
    samples: usize,
}

impl<T: Real> FeatureMatrixSet<T> {
    pub fn new(matrices: Vec<Array2<T>>) -> Result<Self> {
        let samples = matrices
            .first()
            .map(|f| f.ncols())
            .ok_or_else(|| Error::InvalidConfig("need at least one feature matrix".into()))?;
        for (mu, f) in matrices.iter().enumerate() {
            if f.ncols() != samples {
                return Err(Error::DimensionMismatch(format!(
                    "feature matrix {mu} has {} samples, expected {samples}",
                    f.ncols()
                )));
            }
            if f.nrows() == 0 {
                return Err(Error::DimensionMismatch(format!("feature matrix {mu} has no rows")));
            }
        }
        Ok(FeatureMatrixSet { matrices, samples })
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn order(&self) -> usize {
        self.matrices.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.matrices.iter().map(|f| f.nrows()).collect()
    }

    pub fn matrices(&self) -> &[Array2<T>] {
        &self.matrices
    }

    pub fn get(&self, mu: usize) -> &Array2<T> {
        &self.matrices[mu]
    }

    pub fn views(&self) -> Vec<ArrayView2<'_, T>> {
        self.matrices.iter().map(|f| f.view()).collect()
    }

    /// Keeps only the listed sample columns, in the given order.
    pub fn select(&self, columns: &[usize]) -> Self {
        FeatureMatrixSet {
            matrices: self
                .matrices
                .iter()
                .map(|f| f.select(ndarray::Axis(1), columns))
                .collect(),
            samples: columns.len(),
        }
    }
}

/// Applies the basis to every column of `x` (`d × m`).
pub fn build_feature_matrices<T: Real>(basis: &FeatureBasis, x: ArrayView2<T>) -> Result<FeatureMatrixSet<T>> {
    basis.check_input(x.nrows())?;
    if x.ncols() == 0 {
        return Err(Error::DimensionMismatch("no samples".into()));
    }
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::Numerical("data contains NaN or infinite entries".into()));
    }
    basis.warn_range(x.iter());
    let dims = basis.dims();
    let matrices = dims
        .par_iter()
        .enumerate()
        .map(|(mu, &n)| {
            let row = x.row(basis.coordinate_of(mu));
            let mut f = Array2::zeros((n, x.ncols()));
            for i in 0..n {
                f.row_mut(i).zip_mut_with(&row, |o, &v| *o = basis.coordinate_row(mu, i, v));
            }
            f
        })
        .collect();
    FeatureMatrixSet::new(matrices)
}

/// `Θ_μ = F_μᵀ F_μ`.
pub fn local_gram<T: Real>(f: ArrayView2<T>) -> Array2<T> {
    f.t().dot(&f)
}

/// Dense `n_1 × ... × n_p × m` tensor obtained by contracting the
/// shifted-mode train whose `shift`-th core (0-based) carries the sample
/// mode.
///
/// Core `ν ≠ shift` has entries `ψ_ν,i(x⁽ˢ⁾)` on the diagonal `k = l = s` of
/// its rank indices (boundary ranks being 1); the shifted core is 4-way,
/// `(r_prev, n, m, r_next)`, nonzero only where both rank indices and the
/// sample index coincide. Every entry of the result should be
/// `Π_ν ψ_ν,i_ν(x⁽ʲ⁾)` whatever the shift; only meant for tiny inputs.
pub fn materialize_psi_hat<T: Real>(basis: &FeatureBasis, x: ArrayView2<T>, shift: usize) -> Result<ArrayD<T>> {
    let f = build_feature_matrices(basis, x)?;
    let p = f.order();
    let m = f.samples();
    if shift >= p {
        return Err(Error::InvalidConfig(format!("shift position {shift} out of range for {p} cores")));
    }
    let dims = f.dims();
    let total: usize = dims.iter().product::<usize>() * m;
    let core_entries = m * m * m * dims.iter().max().copied().unwrap_or(1);
    if total > PSI_HAT_ENTRY_CAP || core_entries > PSI_HAT_ENTRY_CAP {
        return Err(Error::SizeLimit(format!(
            "materializing {total} entries (4-way core {core_entries}) exceeds the cap of {PSI_HAT_ENTRY_CAP}"
        )));
    }
    let rank = |bond: usize| if bond == 0 || bond == p { 1 } else { m };

    // acc[(row, col, k)] flattened; row = multi-index so far, col = sample
    // mode (size 1 before the shifted core), k = current bond index
    let mut rows = 1usize;
    let mut cols = 1usize;
    let mut acc = vec![T::one()];
    for nu in 0..p {
        let (ra, n, rb) = (rank(nu), dims[nu], rank(nu + 1));
        let cm = if nu == shift { m } else { 1 };
        let entry = |k: usize, i: usize, c: usize, l: usize| -> T {
            let s = if nu == shift {
                c
            } else if ra > 1 {
                k
            } else {
                l
            };
            let ok = (ra == 1 || k == s) && (rb == 1 || l == s);
            if ok {
                f.get(nu)[[i, s]]
            } else {
                T::zero()
            }
        };
        let new_rows = rows * n;
        let new_cols = cols * cm;
        let mut next = vec![T::zero(); new_rows * new_cols * rb];
        for r in 0..rows {
            for c in 0..cols {
                for k in 0..ra {
                    let a = acc[(r * cols + c) * ra + k];
                    if a == T::zero() {
                        continue;
                    }
                    for i in 0..n {
                        for c2 in 0..cm {
                            for l in 0..rb {
                                let e = entry(k, i, c2, l);
                                if e != T::zero() {
                                    let idx = ((r * n + i) * new_cols + c * cm + c2) * rb + l;
                                    next[idx] += a * e;
                                }
                            }
                        }
                    }
                }
            }
        }
        acc = next;
        rows = new_rows;
        cols = new_cols;
    }
    let mut shape = dims;
    shape.push(m);
    Ok(ArrayD::from_shape_vec(IxDyn(&shape), acc)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_data(d: usize, m: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((d, m), |_| rng.random_range(0.0..1.0))
    }

    #[test]
    fn trig_at_zero() {
        for alpha in [0.59, 1.0, std::f64::consts::FRAC_PI_2] {
            let basis = FeatureBasis::trig(alpha, 1).unwrap();
            let v = apply_basis(&basis, array![0.0].view()).unwrap();
            assert_eq!(v[0], array![1.0, 0.0]);
        }
    }

    #[test]
    fn trig_quarter_turn() {
        let basis = FeatureBasis::trig(std::f64::consts::FRAC_PI_2, 1).unwrap();
        let v = apply_basis(&basis, array![1.0f64].view()).unwrap();
        assert!(v[0][0].abs() < 1e-16);
        assert_eq!(v[0][1], 1.0);
    }

    #[test]
    fn trig_default_alpha_value() {
        let basis = FeatureBasis::trig(DEFAULT_ALPHA, 2).unwrap();
        let v = apply_basis(&basis, array![0.0, 0.5].view()).unwrap();
        assert_eq!(v[1][0], 0.295f64.cos());
        assert_eq!(v[1][1], 0.295f64.sin());
    }

    #[test]
    fn apply_basis_dimension_mismatch() {
        let basis = FeatureBasis::trig(0.59, 3).unwrap();
        assert!(matches!(apply_basis(&basis, array![0.1, 0.2].view()), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn out_of_range_input_still_evaluates() {
        let basis = FeatureBasis::trig(1.0, 1).unwrap();
        let v = apply_basis(&basis, array![2.0].view()).unwrap();
        assert_eq!(v[0], array![2.0f64.cos(), 2.0f64.sin()]);
    }

    #[test]
    fn invalid_bases_rejected() {
        assert!(FeatureBasis::trig(-1.0, 3).is_err());
        assert!(FeatureBasis::trig(f64::NAN, 3).is_err());
        assert!(FeatureBasis::trig(0.5, 0).is_err());
        let bad = CoordinateMap { coordinate: 3, functions: vec![ScalarFn::One] };
        assert!(FeatureBasis::custom(3, vec![bad]).is_err());
        let empty = CoordinateMap { coordinate: 0, functions: vec![] };
        assert!(FeatureBasis::custom(3, vec![empty]).is_err());
    }

    #[test]
    fn custom_basis() {
        let maps = vec![
            CoordinateMap { coordinate: 1, functions: vec![ScalarFn::One, ScalarFn::Identity, ScalarFn::Power(2)] },
            CoordinateMap { coordinate: 0, functions: vec![ScalarFn::Cos(2.0), ScalarFn::Sin(2.0)] },
        ];
        let basis = FeatureBasis::custom(2, maps).unwrap();
        assert_eq!(basis.dims(), vec![3, 2]);
        let v = apply_basis(&basis, array![0.25, 0.5].view()).unwrap();
        assert_eq!(v[0], array![1.0, 0.5, 0.25]);
        assert_eq!(v[1], array![0.5f64.cos(), 0.5f64.sin()]);
    }

    #[test]
    fn basis_serde_round_trip() {
        let maps = vec![CoordinateMap { coordinate: 0, functions: vec![ScalarFn::Power(3), ScalarFn::Sin(0.5)] }];
        for basis in [FeatureBasis::trig(0.59, 4).unwrap(), FeatureBasis::custom(1, maps).unwrap()] {
            let s = serde_json::to_string(&basis).unwrap();
            assert_eq!(serde_json::from_str::<FeatureBasis>(&s).unwrap(), basis);
        }
    }

    #[test]
    fn single_sample_matches_apply_basis() {
        let basis = FeatureBasis::trig(0.59, 3).unwrap();
        let x = random_data(3, 1, 1);
        let f = build_feature_matrices(&basis, x.view()).unwrap();
        let v = apply_basis(&basis, x.column(0)).unwrap();
        for mu in 0..3 {
            assert_eq!(f.get(mu).column(0), v[mu]);
        }
    }

    #[test]
    fn duplicated_columns() {
        let basis = FeatureBasis::trig(0.59, 3).unwrap();
        let mut x = random_data(3, 3, 2);
        let c0 = x.column(0).to_owned();
        x.column_mut(2).assign(&c0);
        let f = build_feature_matrices(&basis, x.view()).unwrap();
        for m in f.matrices() {
            assert_eq!(m.column(0), m.column(2));
        }
    }

    #[test]
    fn feature_matrices_match_loop() {
        let basis = FeatureBasis::trig(0.59, 3).unwrap();
        let x = random_data(3, 4, 3);
        let f = build_feature_matrices(&basis, x.view()).unwrap();
        for j in 0..4 {
            let v = apply_basis(&basis, x.column(j)).unwrap();
            for mu in 0..3 {
                assert_eq!(f.get(mu).column(j), v[mu]);
            }
        }
    }

    #[test]
    fn build_rejects_nan() {
        let basis = FeatureBasis::trig(0.59, 2).unwrap();
        let x = array![[0.1, f64::NAN], [0.2, 0.3]];
        assert!(build_feature_matrices(&basis, x.view()).is_err());
    }

    #[test]
    fn local_gram_cosine_form() {
        let alpha = 0.59;
        let basis = FeatureBasis::trig(alpha, 2).unwrap();
        let x = random_data(2, 6, 4);
        let f = build_feature_matrices(&basis, x.view()).unwrap();
        for mu in 0..2 {
            let theta = local_gram(f.get(mu).view());
            for i in 0..6 {
                assert!((theta[[i, i]] - 1.0).abs() < 1e-15);
                for j in 0..6 {
                    let expect = (alpha * (x[[mu, i]] - x[[mu, j]])).cos();
                    assert!((theta[[i, j]] - expect).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn local_gram_matches_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = Array2::from_shape_fn((3, 5), |_| rng.random_range(-1.0..1.0));
        let theta = local_gram(f.view());
        for i in 0..5 {
            for j in 0..5 {
                let expect: f64 = (0..3).map(|k| f[[k, i]] * f[[k, j]]).sum();
                assert!((theta[[i, j]] - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn psi_hat_single_core_is_features() {
        let basis = FeatureBasis::trig(0.59, 1).unwrap();
        let x = random_data(1, 3, 6);
        let t = materialize_psi_hat(&basis, x.view(), 0).unwrap();
        let f = build_feature_matrices(&basis, x.view()).unwrap();
        assert_eq!(t.shape(), &[2, 3]);
        for i in 0..2 {
            for j in 0..3 {
                assert_eq!(t[[i, j]], f.get(0)[[i, j]]);
            }
        }
    }

    #[test]
    fn psi_hat_single_sample_is_rank_one() {
        let basis = FeatureBasis::trig(0.59, 3).unwrap();
        let x = random_data(3, 1, 7);
        let v = apply_basis(&basis, x.column(0)).unwrap();
        for shift in 0..3 {
            let t = materialize_psi_hat(&basis, x.view(), shift).unwrap();
            for ((i, j, k), _) in ndarray::Array3::<f64>::zeros((2, 2, 2)).indexed_iter() {
                let expect = v[0][i] * v[1][j] * v[2][k];
                assert!((t[[i, j, k, 0]] - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn psi_hat_all_shifts_agree_with_product_formula() {
        let basis = FeatureBasis::trig(0.59, 3).unwrap();
        let x = random_data(3, 2, 8);
        let f = build_feature_matrices(&basis, x.view()).unwrap();
        for shift in 0..3 {
            let t = materialize_psi_hat(&basis, x.view(), shift).unwrap();
            for (idx, &val) in t.indexed_iter() {
                let j = idx[3];
                let expect = (0..3).map(|mu| f.get(mu)[[idx[mu], j]]).product::<f64>();
                assert!((val - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn psi_hat_cap_and_shift_checked() {
        let basis = FeatureBasis::trig(0.59, 2).unwrap();
        let x = random_data(2, 2, 9);
        assert!(materialize_psi_hat(&basis, x.view(), 2).is_err());
        let big = FeatureBasis::trig(0.59, 20).unwrap();
        let xb = random_data(20, 5, 10);
        assert!(matches!(materialize_psi_hat(&big, xb.view(), 0), Err(Error::SizeLimit(_))));
    }

    #[test]
    fn select_columns() {
        let basis = FeatureBasis::trig(0.59, 2).unwrap();
        let x = random_data(2, 4, 11);
        let f = build_feature_matrices(&basis, x.view()).unwrap();
        let s = f.select(&[3, 1]);
        assert_eq!(s.samples(), 2);
        assert_eq!(s.get(1).column(0), f.get(1).column(3));
    }
}
