//! Dense kernels: economy SVD, truncated SVD, thin QR and the two
//! least-squares solvers used by the classifiers.
//!
//! Sign convention: every left singular vector and every `Q` column is
//! flipped so that its largest-magnitude entry is positive (first one wins on
//! ties). The matching row of `Vᵀ` / `R` is flipped with it, so products are
//! unchanged.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use ndarray_linalg::cholesky::{FactorizeC, SolveC};
use ndarray_linalg::{Eigh, JobSvd, SVDDC, QR, UPLO};
use num_traits::Float;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Relative eigenvalue cutoff for the pseudoinverse of a Gram matrix.
pub const GRAM_EIGEN_CUTOFF: f64 = 1e-12;

/// Relative asymmetry tolerated by [`solve_gram`].
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

/// Thresholds at or above this value may be served by the normal-equation
/// route of [`tsvd_least_squares`]; below it the squared singular values would
/// lose too many digits.
pub const NORMAL_EQUATIONS_MIN_THRESHOLD: f64 = 1e-6;

/// Singular triplets kept after relative truncation.
#[derive(Clone, Debug)]
pub struct TruncatedSvd<T> {
    /// `m × k`, orthonormal columns.
    pub u: Array2<T>,
    /// `k` values, descending, all `> threshold · σ₁`.
    pub singular_values: Array1<T>,
    /// `k × n`, orthonormal rows.
    pub vt: Array2<T>,
    /// Singular values that were dropped, descending.
    pub discarded: Array1<T>,
    pub threshold: f64,
}

impl<T: Real> TruncatedSvd<T> {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    /// `U Σ Vᵀ`.
    pub fn reconstruct(&self) -> Array2<T> {
        let mut us = self.u.clone();
        for (mut col, &s) in us.axis_iter_mut(Axis(1)).zip(self.singular_values.iter()) {
            col *= s;
        }
        us.dot(&self.vt)
    }
}

pub(crate) fn ensure_finite<T: Real>(a: ArrayView2<T>, what: &str) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numerical(format!("{what} contains NaN or infinite entries")))
    }
}

pub(crate) fn max_abs<T: Real>(a: ArrayView2<T>) -> T {
    a.iter().fold(T::zero(), |acc, &v| acc.max(Float::abs(v)))
}

/// `A·Aᵀ`, through a symmetric rank-k update when `T` is `f32` or `f64`.
pub fn row_gram<T: Real>(a: ArrayView2<T>) -> Array2<T> {
    use std::any::TypeId;
    let a = a.as_standard_layout();
    let (q, m) = a.dim();
    if q == 0 || m == 0 || q > i32::MAX as usize || m > i32::MAX as usize {
        return a.dot(&a.t());
    }
    let mut c = Array2::<T>::zeros((q, q));
    let src = a.as_slice().expect("standard layout");
    let dst = c.as_slice_mut().expect("standard layout");
    let (n, k) = (q as i32, m as i32);
    // SAFETY: `src` is q×m and `dst` is q×q, both contiguous row-major, and
    // the pointer casts only happen when `T` is exactly the BLAS element type.
    unsafe {
        use cblas_sys::{CblasNoTrans, CblasRowMajor, CblasUpper};
        if TypeId::of::<T>() == TypeId::of::<f64>() {
            cblas_sys::cblas_dsyrk(
                CblasRowMajor,
                CblasUpper,
                CblasNoTrans,
                n,
                k,
                1.0,
                src.as_ptr() as *const f64,
                k,
                0.0,
                dst.as_mut_ptr() as *mut f64,
                n,
            );
        } else if TypeId::of::<T>() == TypeId::of::<f32>() {
            cblas_sys::cblas_ssyrk(
                CblasRowMajor,
                CblasUpper,
                CblasNoTrans,
                n,
                k,
                1.0,
                src.as_ptr() as *const f32,
                k,
                0.0,
                dst.as_mut_ptr() as *mut f32,
                n,
            );
        } else {
            return a.dot(&a.t());
        }
    }
    for i in 0..q {
        for j in 0..i {
            c[[i, j]] = c[[j, i]];
        }
    }
    c
}

macro_rules! syevd {
    ($name:ident, $lapack:ident, $t:ty) => {
        /// Column-major `n × n` symmetric matrix in `a`; on success `a` holds
        /// the eigenvectors and `w` the ascending eigenvalues.
        fn $name(n: usize, a: &mut [$t], w: &mut [$t]) -> std::result::Result<(), i32> {
            let n = n as i32;
            let (jobz, uplo) = (b'V' as std::os::raw::c_char, b'L' as std::os::raw::c_char);
            let mut info = 0;
            let mut work_size: $t = 0.0;
            let mut iwork_size = 0i32;
            // SAFETY: buffers have the sizes LAPACK expects for an n×n problem;
            // the first call only queries workspace sizes.
            unsafe {
                lapack_sys::$lapack(
                    &jobz, &uplo, &n, a.as_mut_ptr(), &n, w.as_mut_ptr(),
                    &mut work_size, &-1, &mut iwork_size, &-1, &mut info,
                );
                if info != 0 {
                    return Err(info);
                }
                let lwork = work_size as i32;
                let mut work = vec![0.0 as $t; lwork.max(1) as usize];
                let mut iwork = vec![0i32; iwork_size.max(1) as usize];
                lapack_sys::$lapack(
                    &jobz, &uplo, &n, a.as_mut_ptr(), &n, w.as_mut_ptr(),
                    work.as_mut_ptr(), &lwork, iwork.as_mut_ptr(), &iwork_size, &mut info,
                );
            }
            if info == 0 { Ok(()) } else { Err(info) }
        }
    };
}

syevd!(syevd_f64, dsyevd_, f64);
syevd!(syevd_f32, ssyevd_, f32);

/// Eigenvalues (ascending) and eigenvectors (columns) of a symmetric matrix,
/// read from its lower triangle. Uses divide and conquer for `f32`/`f64`.
pub fn symmetric_eigen<T: Real>(a: ArrayView2<T>) -> Result<(Array1<T>, Array2<T>)> {
    use std::any::{Any, TypeId};
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::DimensionMismatch(format!("eigenproblem of a {n}×{} matrix", a.ncols())));
    }
    if n == 0 || (TypeId::of::<T>() != TypeId::of::<f64>() && TypeId::of::<T>() != TypeId::of::<f32>()) {
        return Ok(a.to_owned().eigh(UPLO::Lower)?);
    }
    // row-major lower triangle = column-major upper triangle of the transpose,
    // i.e. column-major "L" of the same symmetric matrix
    let mut buf: Vec<T> = a.t().iter().copied().collect();
    let mut w = vec![T::zero(); n];
    let info = {
        let (b, w) = (&mut buf as &mut dyn Any, &mut w as &mut dyn Any);
        match (b.downcast_mut::<Vec<f64>>(), w.downcast_mut::<Vec<f64>>()) {
            (Some(b), Some(w)) => syevd_f64(n, b, w),
            _ => syevd_f32(
                n,
                b.downcast_mut::<Vec<f32>>().expect("f32 buffer"),
                w.downcast_mut::<Vec<f32>>().expect("f32 buffer"),
            ),
        }
    };
    info.map_err(|i| Error::Numerical(format!("symmetric eigensolver failed (info {i})")))?;
    // column-major eigenvectors read row-major give their transpose
    let vt = Array2::from_shape_vec((n, n), buf).expect("n×n buffer");
    Ok((Array1::from(w), vt.t().as_standard_layout().into_owned()))
}

fn largest_magnitude_is_negative<T: Real>(v: ArrayView1<T>) -> bool {
    let mut best = T::zero();
    let mut negative = false;
    for &x in v.iter() {
        if Float::abs(x) > best {
            best = Float::abs(x);
            negative = x < T::zero();
        }
    }
    negative
}

/// Economy SVD `A = U diag(s) Vᵀ` with `k = min(m, n)` triplets.
pub fn svd<T: Real>(a: ArrayView2<T>) -> Result<(Array2<T>, Array1<T>, Array2<T>)> {
    if a.is_empty() {
        return Err(Error::DimensionMismatch("SVD of an empty matrix".into()));
    }
    ensure_finite(a, "SVD input")?;
    let (u, s, vt) = a.to_owned().svddc(JobSvd::Some)?;
    let (mut u, mut vt) = match (u, vt) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return Err(Error::Numerical("SVD did not return singular vectors".into())),
    };
    for k in 0..s.len() {
        if largest_magnitude_is_negative(u.column(k)) {
            u.column_mut(k).mapv_inplace(|x| -x);
            vt.row_mut(k).mapv_inplace(|x| -x);
        }
    }
    Ok((u, s, vt))
}

/// Keeps the singular triplets with `σᵢ > rel_threshold · σ₁`.
pub fn truncated_svd<T: Real>(a: ArrayView2<T>, rel_threshold: f64) -> Result<TruncatedSvd<T>> {
    if !(0.0..1.0).contains(&rel_threshold) {
        return Err(Error::InvalidConfig(format!(
            "relative threshold must lie in [0, 1), got {rel_threshold}"
        )));
    }
    let (u, s, vt) = svd(a)?;
    let sigma_max = s[0];
    if sigma_max <= T::zero() {
        return Err(Error::Degenerate("truncated SVD of an all-zero matrix".into()));
    }
    let cut = T::of(rel_threshold) * sigma_max;
    let k = s.iter().take_while(|&&v| v > cut).count();
    Ok(TruncatedSvd {
        u: u.slice(ndarray::s![.., ..k]).to_owned(),
        singular_values: s.slice(ndarray::s![..k]).to_owned(),
        vt: vt.slice(ndarray::s![..k, ..]).to_owned(),
        discarded: s.slice(ndarray::s![k..]).to_owned(),
        threshold: rel_threshold,
    })
}

/// How [`tsvd_least_squares_via`] obtains the singular subspace of `M`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LeastSquaresRoute {
    /// Normal equations when the threshold allows it, SVD otherwise.
    Auto,
    /// SVD of `M` itself.
    Svd,
    /// Eigendecomposition of `M Mᵀ` (`λᵢ = σᵢ²`, same left singular vectors).
    NormalEquations,
}

/// Minimizes `‖w − v M‖₂` over row vectors `v` using only the singular
/// triplets of `M` above `rel_threshold · σ₁`.
///
/// `M` is `q × m`, `w` has length `m`, the result has length `q`. A floor of
/// `ε · max(q, m)` is always applied to the relative threshold so that
/// round-off singular values never enter the pseudoinverse.
pub fn tsvd_least_squares<T: Real>(
    m: ArrayView2<T>,
    w: ArrayView1<T>,
    rel_threshold: f64,
) -> Result<Array1<T>> {
    tsvd_least_squares_via(m, w, rel_threshold, LeastSquaresRoute::Auto)
}

pub fn tsvd_least_squares_via<T: Real>(
    m: ArrayView2<T>,
    w: ArrayView1<T>,
    rel_threshold: f64,
    route: LeastSquaresRoute,
) -> Result<Array1<T>> {
    let (q, cols) = m.dim();
    if w.len() != cols {
        return Err(Error::DimensionMismatch(format!(
            "right-hand side has length {} but the matrix has {cols} columns",
            w.len()
        )));
    }
    if !(0.0..1.0).contains(&rel_threshold) {
        return Err(Error::InvalidConfig(format!(
            "relative threshold must lie in [0, 1), got {rel_threshold}"
        )));
    }
    if !w.iter().all(|v| v.is_finite()) {
        return Err(Error::Numerical("right-hand side contains NaN or infinite entries".into()));
    }
    let floor = T::epsilon().as_f64() * q.max(cols) as f64;
    let effective = rel_threshold.max(floor);
    let use_normal = match route {
        LeastSquaresRoute::Auto => rel_threshold >= NORMAL_EQUATIONS_MIN_THRESHOLD && q <= cols,
        LeastSquaresRoute::Svd => false,
        LeastSquaresRoute::NormalEquations => true,
    };
    if use_normal {
        ensure_finite(m, "least-squares matrix")?;
        let gram = row_gram(m);
        let (lambda, vecs) = symmetric_eigen(gram.view())?;
        let lambda_max = lambda.iter().fold(T::zero(), |a, &b| a.max(b));
        if lambda_max <= T::zero() {
            return Err(Error::Degenerate("least-squares matrix is all zero".into()));
        }
        let cut = T::of(effective * effective) * lambda_max;
        let b = m.dot(&w);
        let mut v = Array1::zeros(q);
        for (k, &l) in lambda.iter().enumerate() {
            if l > cut {
                let col = vecs.column(k);
                let c = col.dot(&b) / l;
                v.scaled_add(c, &col);
            }
        }
        Ok(v)
    } else {
        let ts = truncated_svd(m, effective)?;
        let mut c = ts.vt.dot(&w);
        Zip::from(&mut c).and(&ts.singular_values).for_each(|c, &s| *c /= s);
        Ok(ts.u.dot(&c))
    }
}

/// Solves `Z G = Y` for symmetric positive semidefinite `G` (`m × m`) and
/// `Y` (`d′ × m`).
///
/// With `ridge > 0` this is `Z = Y (G + ridge·I)⁻¹` through a Cholesky
/// factorization. With `ridge = 0` it is the minimum-norm least-squares
/// solution `Y G⁺`, where eigenvalues below `1e-12 · λ_max` count as zero.
pub fn solve_gram<T: Real>(g: ArrayView2<T>, y: ArrayView2<T>, ridge: f64) -> Result<Array2<T>> {
    let (rows, cols) = g.dim();
    if rows != cols {
        return Err(Error::DimensionMismatch(format!("Gram matrix is {rows}×{cols}")));
    }
    if y.ncols() != rows {
        return Err(Error::DimensionMismatch(format!(
            "label matrix has {} columns, Gram matrix has order {rows}",
            y.ncols()
        )));
    }
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::InvalidConfig(format!("ridge must be finite and ≥ 0, got {ridge}")));
    }
    ensure_finite(g, "Gram matrix")?;
    ensure_finite(y, "label matrix")?;

    let scale = max_abs(g).as_f64();
    let mut deviation = 0.0f64;
    for i in 0..rows {
        for j in (i + 1)..rows {
            deviation = deviation.max((g[[i, j]] - g[[j, i]]).as_f64().abs());
        }
    }
    let tolerance = SYMMETRY_TOLERANCE * scale.max(f64::MIN_POSITIVE);
    if deviation > tolerance {
        return Err(Error::Asymmetric { deviation, tolerance });
    }

    if ridge > 0.0 {
        let mut a = g.to_owned();
        let r = T::of(ridge);
        a.diag_mut().mapv_inplace(|d| d + r);
        let factor = a.factorizec(UPLO::Lower).map_err(|e| {
            Error::Numerical(format!("G + ridge·I is not positive definite ({e}); increase the ridge"))
        })?;
        let mut z = Array2::zeros(y.raw_dim());
        for (yi, mut zi) in y.axis_iter(Axis(0)).zip(z.axis_iter_mut(Axis(0))) {
            zi.assign(&factor.solvec(&yi)?);
        }
        Ok(z)
    } else {
        let (lambda, vecs) = symmetric_eigen(g)?;
        let lambda_max = lambda.iter().fold(T::zero(), |a, &b| a.max(b));
        if lambda_max <= T::zero() {
            return Err(Error::Degenerate("Gram matrix has no positive eigenvalue".into()));
        }
        let cut = T::of(GRAM_EIGEN_CUTOFF) * lambda_max;
        let kept: Vec<usize> = (0..rows).filter(|&k| lambda[k] > cut).collect();
        let vk = vecs.select(Axis(1), &kept);
        let mut coeff = y.dot(&vk);
        for (mut col, &k) in coeff.axis_iter_mut(Axis(1)).zip(kept.iter()) {
            col /= lambda[k];
        }
        Ok(coeff.dot(&vk.t()))
    }
}

/// Thin QR: `A = Q R` with `Q` of shape `m × k`, `R` of shape `k × n`,
/// `k = min(m, n)`.
pub fn thin_qr<T: Real>(a: ArrayView2<T>) -> Result<(Array2<T>, Array2<T>)> {
    if a.is_empty() {
        return Err(Error::DimensionMismatch("QR of an empty matrix".into()));
    }
    ensure_finite(a, "QR input")?;
    let (m, n) = a.dim();
    let k = m.min(n);
    let (q, r) = a.to_owned().qr()?;
    let mut q = q.slice(ndarray::s![.., ..k]).to_owned();
    let mut r = r.slice(ndarray::s![..k, ..]).to_owned();
    for j in 0..k {
        if largest_magnitude_is_negative(q.column(j)) {
            q.column_mut(j).mapv_inplace(|x| -x);
            r.row_mut(j).mapv_inplace(|x| -x);
        }
    }
    Ok((q, r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
    }

    fn max_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
        (a - b).iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn eye_err(a: &Array2<f64>) -> f64 {
        max_diff(a, &Array2::eye(a.nrows()))
    }

    #[test]
    fn identity_keeps_every_triplet() {
        let ts = truncated_svd(Array2::<f64>::eye(3).view(), 1e-2).unwrap();
        assert_eq!(ts.rank(), 3);
        assert!(ts.singular_values.iter().all(|&s| (s - 1.0).abs() < 1e-15));
    }

    #[test]
    fn small_singular_value_is_dropped() {
        let a = array![[1.0, 0.0], [0.0, 0.005]];
        let ts = truncated_svd(a.view(), 1e-2).unwrap();
        assert_eq!(ts.rank(), 1);
        assert_eq!(ts.discarded.len(), 1);
    }

    #[test]
    fn zero_matrix_is_degenerate() {
        let a = Array2::<f64>::zeros((3, 2));
        assert!(matches!(truncated_svd(a.view(), 0.0), Err(Error::Degenerate(_))));
    }

    #[test]
    fn threshold_out_of_range_rejected() {
        let a = Array2::<f64>::eye(2);
        assert!(truncated_svd(a.view(), 1.0).is_err());
        assert!(truncated_svd(a.view(), -0.1).is_err());
    }

    #[test]
    fn svd_factors_are_orthonormal_and_signed() {
        let a = random(9, 5, 3);
        let (u, s, vt) = svd(a.view()).unwrap();
        assert!(eye_err(&u.t().dot(&u)) < 1e-12);
        assert!(eye_err(&vt.dot(&vt.t())) < 1e-12);
        for k in 0..s.len() {
            assert!(!largest_magnitude_is_negative(u.column(k)));
        }
        let mut us = u.clone();
        for (mut c, &x) in us.axis_iter_mut(Axis(1)).zip(s.iter()) {
            c *= x;
        }
        assert!(max_diff(&us.dot(&vt), &a) < 1e-12);
    }

    #[test]
    fn least_squares_identity() {
        let w = array![0.3, -1.2, 4.0];
        let v = tsvd_least_squares(Array2::<f64>::eye(3).view(), w.view(), 1e-2).unwrap();
        assert!((&v - &w).iter().all(|d| d.abs() < 1e-14));
    }

    #[test]
    fn least_squares_orthonormal_rows_exact() {
        // rows of Q (2 × 4) orthonormal; w in their span
        let (q, _) = thin_qr(random(4, 2, 5).view()).unwrap();
        let m = q.t().to_owned();
        let coeff = array![0.7, -0.2];
        let w = coeff.dot(&m);
        for route in [LeastSquaresRoute::Svd, LeastSquaresRoute::NormalEquations] {
            let v = tsvd_least_squares_via(m.view(), w.view(), 1e-2, route).unwrap();
            let resid = &w - &v.dot(&m);
            assert!(resid.iter().all(|r| r.abs() < 1e-13), "{route:?}");
        }
    }

    #[test]
    fn least_squares_shape_mismatch() {
        let m = Array2::<f64>::eye(3);
        let w = array![1.0, 2.0];
        assert!(matches!(
            tsvd_least_squares(m.view(), w.view(), 0.0),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn least_squares_routes_agree_at_moderate_threshold() {
        let m = random(15, 40, 8);
        let w = Array1::from_iter(random(1, 40, 9).iter().copied());
        for thr in [1e-2, 0.3] {
            let a = tsvd_least_squares_via(m.view(), w.view(), thr, LeastSquaresRoute::Svd).unwrap();
            let b = tsvd_least_squares_via(m.view(), w.view(), thr, LeastSquaresRoute::NormalEquations)
                .unwrap();
            assert!((&a - &b).iter().all(|d| d.abs() < 1e-10));
        }
    }

    #[test]
    fn gram_identity() {
        let y = array![[1.0, 0.0, 0.0], [0.0, 1.0, 1.0]];
        let z = solve_gram(Array2::<f64>::eye(3).view(), y.view(), 0.0).unwrap();
        assert!(max_diff(&z, &y) < 1e-14);
    }

    #[test]
    fn gram_rank_one_consistent() {
        let a = array![[1.0, 2.0, -1.0]];
        let g = a.t().dot(&a);
        let y = array![[0.5, 1.0, -0.5]];
        let z = solve_gram(g.view(), y.view(), 0.0).unwrap();
        assert!(max_diff(&z.dot(&g), &y) < 1e-10);
    }

    #[test]
    fn gram_asymmetric_rejected() {
        let g = array![[1.0, 0.5], [0.4, 1.0]];
        let y = array![[1.0, 0.0]];
        assert!(matches!(solve_gram(g.view(), y.view(), 0.0), Err(Error::Asymmetric { .. })));
    }

    #[test]
    fn gram_negative_ridge_rejected() {
        let g = Array2::<f64>::eye(2);
        let y = array![[1.0, 0.0]];
        assert!(matches!(solve_gram(g.view(), y.view(), -1.0), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn qr_of_orthonormal_input() {
        let (q0, _) = thin_qr(random(6, 3, 1).view()).unwrap();
        let (q, r) = thin_qr(q0.view()).unwrap();
        assert!(max_diff(&q, &q0) < 1e-12);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((r[[i, j]].abs() - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn qr_single_column() {
        let a = array![[3.0], [4.0]];
        let (q, r) = thin_qr(a.view()).unwrap();
        assert!((q[[0, 0]] - 0.6).abs() < 1e-15 && (q[[1, 0]] - 0.8).abs() < 1e-15);
        assert!((r[[0, 0]] - 5.0).abs() < 1e-14);
    }

    #[test]
    fn qr_wide_matrix() {
        let a = random(3, 7, 4);
        let (q, r) = thin_qr(a.view()).unwrap();
        assert_eq!(q.dim(), (3, 3));
        assert_eq!(r.dim(), (3, 7));
        assert!(max_diff(&q.dot(&r), &a) < 1e-12);
    }

    #[test]
    fn single_precision_svd() {
        let a = random(6, 4, 2).mapv(|v| v as f32);
        let ts = truncated_svd(a.view(), 0.0).unwrap();
        let err = (&ts.reconstruct() - &a).iter().fold(0.0f32, |m, v| m.max(v.abs()));
        assert!(err < 1e-5);
    }

    #[test]
    fn row_gram_matches_product() {
        let a = random(7, 13, 21);
        assert!(max_diff(&row_gram(a.view()), &a.dot(&a.t())) < 1e-13);
        let t = a.t().to_owned();
        assert!(max_diff(&row_gram(t.t()), &a.dot(&a.t())) < 1e-13);
        let a32 = a.mapv(|v| v as f32);
        let g32 = row_gram(a32.view()).mapv(|v| v as f64);
        assert!(max_diff(&g32, &a.dot(&a.t())) < 1e-4);
    }

    #[test]
    fn symmetric_eigen_reconstructs() {
        let b = random(8, 8, 22);
        let a = &b + &b.t();
        let (w, v) = symmetric_eigen(a.view()).unwrap();
        assert!(w.windows(2).into_iter().all(|p| p[0] <= p[1]));
        assert!(eye_err(&v.t().dot(&v)) < 1e-12);
        let rebuilt = (&v * &w.view().insert_axis(Axis(0))).dot(&v.t());
        assert!(max_diff(&rebuilt, &a) < 1e-12);
        let (w_ref, _) = a.eigh(UPLO::Lower).unwrap();
        assert!(w.iter().zip(&w_ref).all(|(x, y)| (x - y).abs() < 1e-12));
    }

    #[test]
    fn symmetric_eigen_f32_and_shape_check() {
        let a = array![[2.0f32, 1.0], [1.0, 2.0]];
        let (w, _) = symmetric_eigen(a.view()).unwrap();
        assert!((w[0] - 1.0).abs() < 1e-6 && (w[1] - 3.0).abs() < 1e-6);
        assert!(symmetric_eigen(Array2::<f64>::zeros((2, 3)).view()).is_err());
    }
}
