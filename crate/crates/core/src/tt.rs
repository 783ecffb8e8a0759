//! Tensor trains: order-3 cores linked by ranks.
//!
//! A core has shape `(r_prev, n, r_next)` and is stored row-major, so the
//! flat index of entry `(k_prev, i, k_next)` is `(k_prev·n + i)·r_next + k_next`.
//! Both unfoldings are plain reshapes of that buffer:
//!
//! * left unfolding, `(r_prev·n) × r_next`: row `k_prev·n + i` (rank index
//!   slowest), column `k_next`;
//! * right unfolding, `r_prev × (n·r_next)`: row `k_prev`, column `i·r_next + k_next`.
//!
//! The binary layout written by [`TensorTrain::write_to`] is
//!
//! ```text
//! "TTC1"                                  4 bytes
//! p                                       u64 LE
//! p × (r_prev, n, r_next)                 u64 LE each
//! entries of core 0, core 1, ...          f64 LE, row-major as above
//! ```

use std::io::{Read, Write};

use ndarray::{s, Array1, Array2, Array3, ArrayD, ArrayView1, ArrayView2, Axis, IxDyn};
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Real;

/// Default limit on the number of entries `contract_full` may materialize.
pub const DENSE_ENTRY_CAP: usize = 10_000_000;

/// Singular values below this fraction of the largest are dropped during
/// orthonormalization.
pub const ORTHO_RANK_CUTOFF: f64 = 1e-14;

const MAGIC: &[u8; 4] = b"TTC1";

#[derive(Clone, Debug, PartialEq)]
pub struct TTCore<T> {
    data: Array3<T>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnfoldKind {
    Left,
    Right,
}

/// Matricization of a core together with what is needed to fold it back.
#[derive(Clone, Debug, PartialEq)]
pub struct Unfolding<T> {
    pub matrix: Array2<T>,
    pub kind: UnfoldKind,
    core_shape: (usize, usize, usize),
}

impl<T: Real> Unfolding<T> {
    pub fn fold(&self) -> Result<TTCore<T>> {
        let data = self
            .matrix
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order(self.core_shape)?;
        TTCore::new(data)
    }
}

impl<T: Real> TTCore<T> {
    pub fn new(data: Array3<T>) -> Result<Self> {
        let (a, b, c) = data.dim();
        if a == 0 || b == 0 || c == 0 {
            return Err(Error::InvalidTensorTrain(format!("core has a zero dimension: ({a}, {b}, {c})")));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidTensorTrain("core contains NaN or infinite entries".into()));
        }
        Ok(TTCore { data: data.as_standard_layout().into_owned() })
    }

    pub fn zeros(shape: (usize, usize, usize)) -> Result<Self> {
        Self::new(Array3::zeros(shape))
    }

    /// `(r_prev, n, r_next)`.
    pub fn shape(&self) -> (usize, usize, usize) {
        self.data.dim()
    }

    pub fn data(&self) -> &Array3<T> {
        &self.data
    }

    pub fn into_data(self) -> Array3<T> {
        self.data
    }

    pub fn left_unfold(&self) -> Unfolding<T> {
        let (a, n, b) = self.shape();
        Unfolding {
            matrix: self.data.view().into_shape_with_order((a * n, b)).unwrap().to_owned(),
            kind: UnfoldKind::Left,
            core_shape: (a, n, b),
        }
    }

    pub fn right_unfold(&self) -> Unfolding<T> {
        let (a, n, b) = self.shape();
        Unfolding {
            matrix: self.data.view().into_shape_with_order((a, n * b)).unwrap().to_owned(),
            kind: UnfoldKind::Right,
            core_shape: (a, n, b),
        }
    }

    /// `Σᵢ fᵢ · core[:, i, :]`.
    fn contract_mode(&self, f: ArrayView1<T>) -> Array2<T> {
        let (a, _, b) = self.shape();
        let mut out = Array2::zeros((a, b));
        for (i, &fi) in f.iter().enumerate() {
            out.scaled_add(fi, &self.data.slice(s![.., i, ..]));
        }
        out
    }
}

/// One left-to-right step of a batched contraction.
///
/// `state` is `r_prev × m` (one column per sample), `features` is `n × m`;
/// returns `state'[l, j] = Σ_{k,i} state[k, j]·features[i, j]·core[k, i, l]`.
pub(crate) fn contract_left_step<T: Real>(
    state: ArrayView2<T>,
    features: ArrayView2<T>,
    core: &Array3<T>,
) -> Array2<T> {
    let (_, n, b) = core.dim();
    let m = state.ncols();
    let mut out = Array2::zeros((b, m));
    for i in 0..n {
        let weighted = &state * &features.row(i);
        ndarray::linalg::general_mat_mul(
            T::one(),
            &core.slice(s![.., i, ..]).t(),
            &weighted,
            T::one(),
            &mut out,
        );
    }
    out
}

/// Mirror of [`contract_left_step`]: `state` is `r_next × m`, the result is
/// `r_prev × m` with `state'[k, j] = Σ_{i,l} core[k, i, l]·features[i, j]·state[l, j]`.
pub(crate) fn contract_right_step<T: Real>(
    state: ArrayView2<T>,
    features: ArrayView2<T>,
    core: &Array3<T>,
) -> Array2<T> {
    let (a, n, _) = core.dim();
    let m = state.ncols();
    let mut out = Array2::zeros((a, m));
    for i in 0..n {
        let weighted = &state * &features.row(i);
        ndarray::linalg::general_mat_mul(
            T::one(),
            &core.slice(s![.., i, ..]),
            &weighted,
            T::one(),
            &mut out,
        );
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct TensorTrain<T> {
    cores: Vec<TTCore<T>>,
}

impl<T: Real> TensorTrain<T> {
    pub fn new(cores: Vec<TTCore<T>>) -> Result<Self> {
        if cores.is_empty() {
            return Err(Error::InvalidTensorTrain("a tensor train needs at least one core".into()));
        }
        if cores[0].shape().0 != 1 {
            return Err(Error::InvalidTensorTrain(format!(
                "first rank must be 1, got {}",
                cores[0].shape().0
            )));
        }
        let last = cores[cores.len() - 1].shape().2;
        if last != 1 {
            return Err(Error::InvalidTensorTrain(format!("last rank must be 1, got {last}")));
        }
        for (mu, pair) in cores.windows(2).enumerate() {
            if pair[0].shape().2 != pair[1].shape().0 {
                return Err(Error::InvalidTensorTrain(format!(
                    "rank mismatch between cores {mu} and {}: {} vs {}",
                    mu + 1,
                    pair[0].shape().2,
                    pair[1].shape().0
                )));
            }
        }
        Ok(TensorTrain { cores })
    }

    /// Builds a train from raw arrays, validating each core.
    pub fn from_arrays(cores: Vec<Array3<T>>) -> Result<Self> {
        Self::new(cores.into_iter().map(TTCore::new).collect::<Result<_>>()?)
    }

    /// Rank-one train `v₁ ⊗ v₂ ⊗ ... ⊗ v_p`.
    pub fn rank_one(vectors: &[ArrayView1<T>]) -> Result<Self> {
        Self::from_arrays(
            vectors
                .iter()
                .map(|v| v.to_owned().into_shape_with_order((1, v.len(), 1)).unwrap())
                .collect(),
        )
    }

    pub fn order(&self) -> usize {
        self.cores.len()
    }

    pub fn cores(&self) -> &[TTCore<T>] {
        &self.cores
    }

    pub fn core(&self, mu: usize) -> &TTCore<T> {
        &self.cores[mu]
    }

    pub fn into_cores(self) -> Vec<TTCore<T>> {
        self.cores
    }

    pub fn mode_dims(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.shape().1).collect()
    }

    /// `r_0, r_1, ..., r_p` (boundary ranks included).
    pub fn ranks(&self) -> Vec<usize> {
        let mut r = vec![1];
        r.extend(self.cores.iter().map(|c| c.shape().2));
        r
    }

    /// Makes cores `0..upto` left-orthonormal by sequential SVDs, pushing
    /// `Σ Vᵀ` into the following core. Requires `upto < p`.
    pub fn orthonormalize_left(&self, upto: usize) -> Result<Self> {
        if upto >= self.order() {
            return Err(Error::InvalidConfig(format!(
                "can left-orthonormalize at most {} cores, asked for {upto}",
                self.order() - 1
            )));
        }
        let mut cores: Vec<Array3<T>> = self.cores.iter().map(|c| c.data.clone()).collect();
        for mu in 0..upto {
            let (a, n, b) = cores[mu].dim();
            let unfolded = cores[mu].view().into_shape_with_order((a * n, b)).unwrap();
            let (u, sv, vt) = linalg::svd(unfolded)?;
            let k = retained_rank(&sv);
            cores[mu] = u.slice(s![.., ..k]).as_standard_layout().into_owned().into_shape_with_order((a, n, k))?;
            let mut svt = vt.slice(s![..k, ..]).to_owned();
            for (mut row, &x) in svt.axis_iter_mut(Axis(0)).zip(sv.iter()) {
                row *= x;
            }
            let (_, n2, c) = cores[mu + 1].dim();
            let next = cores[mu + 1].view().into_shape_with_order((b, n2 * c)).unwrap();
            cores[mu + 1] = svt.dot(&next).into_shape_with_order((k, n2, c))?;
        }
        Self::from_arrays(cores)
    }

    /// Makes cores `from..p` right-orthonormal by sequential SVDs from the
    /// right, pushing `U Σ` into the preceding core. Requires `from ≥ 1`.
    pub fn orthonormalize_right(&self, from: usize) -> Result<Self> {
        if from == 0 || from > self.order() {
            return Err(Error::InvalidConfig(format!(
                "right-orthonormalization must start at a core in 1..={}, got {from}",
                self.order()
            )));
        }
        let mut cores: Vec<Array3<T>> = self.cores.iter().map(|c| c.data.clone()).collect();
        for mu in (from..self.order()).rev() {
            let (a, n, b) = cores[mu].dim();
            let unfolded = cores[mu].view().into_shape_with_order((a, n * b)).unwrap();
            let (u, sv, vt) = linalg::svd(unfolded)?;
            let k = retained_rank(&sv);
            cores[mu] = vt.slice(s![..k, ..]).as_standard_layout().into_owned().into_shape_with_order((k, n, b))?;
            let mut us = u.slice(s![.., ..k]).to_owned();
            for (mut col, &x) in us.axis_iter_mut(Axis(1)).zip(sv.iter()) {
                col *= x;
            }
            let (c, n0, _) = cores[mu - 1].dim();
            let prev = cores[mu - 1].view().into_shape_with_order((c * n0, a)).unwrap();
            cores[mu - 1] = prev.dot(&us).into_shape_with_order((c, n0, k))?;
        }
        Self::from_arrays(cores)
    }

    pub fn contract_full(&self) -> Result<ArrayD<T>> {
        self.contract_full_capped(DENSE_ENTRY_CAP)
    }

    /// Dense tensor of shape `(n_1, ..., n_p)`; fails when it would hold more
    /// than `cap` entries.
    pub fn contract_full_capped(&self, cap: usize) -> Result<ArrayD<T>> {
        let dims = self.mode_dims();
        let total = dims.iter().try_fold(1usize, |acc, &n| acc.checked_mul(n));
        match total {
            Some(t) if t <= cap => {}
            _ => {
                return Err(Error::SizeLimit(format!(
                    "dense tensor with modes {dims:?} exceeds the cap of {cap} entries"
                )))
            }
        }
        let mut acc = Array2::<T>::ones((1, 1));
        for core in &self.cores {
            let (a, n, b) = core.shape();
            let rows = acc.nrows();
            let right = core.data.view().into_shape_with_order((a, n * b)).unwrap();
            acc = acc.dot(&right).into_shape_with_order((rows * n, b))?;
        }
        Ok(acc.into_shape_with_order(IxDyn(&dims))?)
    }

    fn check_features(&self, lens: impl Iterator<Item = usize>, count: usize) -> Result<()> {
        let p = self.order();
        if count != p && count + 1 != p {
            return Err(Error::DimensionMismatch(format!(
                "expected {p} (or {}) feature vectors, got {count}",
                p.saturating_sub(1)
            )));
        }
        for (mu, len) in lens.enumerate() {
            let n = self.cores[mu].shape().1;
            if len != n {
                return Err(Error::DimensionMismatch(format!(
                    "feature vector {mu} has length {len}, core expects {n}"
                )));
            }
        }
        Ok(())
    }

    /// Contracts the train with one feature vector per core.
    ///
    /// With `p` vectors the result has a single entry `⟨T, v₁ ⊗ ... ⊗ v_p⟩`.
    /// With `p − 1` vectors the last mode stays open and the result has
    /// `n_p` entries; this is how a train carrying a trailing label mode yields
    /// one score per label.
    pub fn evaluate(&self, features: &[ArrayView1<T>]) -> Result<Array1<T>> {
        self.check_features(features.iter().map(|f| f.len()), features.len())?;
        let mut v = Array2::<T>::ones((1, 1));
        for (core, f) in self.cores.iter().zip(features) {
            v = v.dot(&core.contract_mode(f.view()));
        }
        if features.len() == self.order() {
            Ok(Array1::from_elem(1, v[[0, 0]]))
        } else {
            let last = &self.cores[self.order() - 1].data;
            Ok(v.row(0).dot(&last.slice(s![.., .., 0])))
        }
    }

    pub fn evaluate_scalar(&self, features: &[ArrayView1<T>]) -> Result<T> {
        if features.len() != self.order() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} feature vectors, got {}",
                self.order(),
                features.len()
            )));
        }
        Ok(self.evaluate(features)?[0])
    }

    /// Batched [`evaluate`](Self::evaluate): `features[μ]` is `n_μ × m` with one
    /// column per sample; the result is `out × m` where `out` is 1 or `n_p`.
    pub fn evaluate_batch(&self, features: &[ArrayView2<T>]) -> Result<Array2<T>> {
        self.check_features(features.iter().map(|f| f.nrows()), features.len())?;
        let m = features.first().map(|f| f.ncols()).unwrap_or(1);
        if features.iter().any(|f| f.ncols() != m) {
            return Err(Error::DimensionMismatch("feature matrices disagree on sample count".into()));
        }
        let mut state = Array2::<T>::ones((1, m));
        for (core, f) in self.cores.iter().zip(features) {
            state = contract_left_step(state.view(), f.view(), &core.data);
        }
        if features.len() == self.order() {
            Ok(state)
        } else {
            let last = &self.cores[self.order() - 1].data;
            let last2: ArrayView2<T> = last.slice(s![.., .., 0]);
            Ok(last2.t().dot(&state))
        }
    }

    /// Frobenius norm of the represented tensor, computed without
    /// materializing it.
    pub fn norm(&self) -> T {
        let mut env = Array2::<T>::ones((1, 1));
        for core in &self.cores {
            let (a, n, b) = core.shape();
            let mut next = Array2::zeros((b, b));
            for i in 0..n {
                let slice = core.data.slice(s![.., i, ..]);
                next = next + slice.t().dot(&env).dot(&slice);
            }
            debug_assert_eq!(env.nrows(), a);
            env = next;
        }
        Float::sqrt(env[[0, 0]].max(T::zero()))
    }

    /// Serializes in the `TTC1` layout documented at module level.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.order() as u64).to_le_bytes())?;
        for core in &self.cores {
            let (a, n, b) = core.shape();
            for d in [a, n, b] {
                w.write_all(&(d as u64).to_le_bytes())?;
            }
        }
        for core in &self.cores {
            for &x in core.data.iter() {
                w.write_all(&x.as_f64().to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format(format!("bad tensor-train magic {magic:?}")));
        }
        let p = read_u64(r)? as usize;
        if p == 0 || p > 1 << 20 {
            return Err(Error::Format(format!("implausible core count {p}")));
        }
        let mut shapes = Vec::with_capacity(p);
        for _ in 0..p {
            let a = read_u64(r)? as usize;
            let n = read_u64(r)? as usize;
            let b = read_u64(r)? as usize;
            let len = a
                .checked_mul(n)
                .and_then(|x| x.checked_mul(b))
                .filter(|&x| x <= 1 << 32)
                .ok_or_else(|| Error::Format(format!("implausible core shape ({a}, {n}, {b})")))?;
            shapes.push(((a, n, b), len));
        }
        let mut cores = Vec::with_capacity(p);
        for (shape, len) in shapes {
            let mut buf = vec![0u8; len * 8];
            r.read_exact(&mut buf)?;
            let data: Vec<T> = buf
                .chunks_exact(8)
                .map(|c| T::of(f64::from_le_bytes(c.try_into().unwrap())))
                .collect();
            cores.push(TTCore::new(Array3::from_shape_vec(shape, data)?)?);
        }
        Self::new(cores)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn from_bytes(mut bytes: &[u8]) -> Result<Self> {
        Self::read_from(&mut bytes)
    }
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn retained_rank<T: Real>(sv: &Array1<T>) -> usize {
    let cut = T::of(ORTHO_RANK_CUTOFF) * sv[0];
    sv.iter().filter(|&&x| x > cut).count().max(1)
}

/// Stacks `d′` trains with identical mode dimensions into one train whose
/// evaluation against `p` feature vectors returns the `d′` individual scores.
///
/// Ranks are stacked block-diagonally (the first core concatenates along its
/// right rank) and the last feature core routes part `ℓ` into bond index `ℓ`;
/// a final `(d′, d′, 1)` identity core carries the label mode.
pub fn direct_sum_labels<T: Real>(parts: &[TensorTrain<T>]) -> Result<TensorTrain<T>> {
    let first = parts
        .first()
        .ok_or_else(|| Error::InvalidConfig("need at least one label part".into()))?;
    let dims = first.mode_dims();
    for (l, part) in parts.iter().enumerate() {
        if part.mode_dims() != dims {
            return Err(Error::DimensionMismatch(format!(
                "label part {l} has modes {:?}, expected {dims:?}",
                part.mode_dims()
            )));
        }
    }
    let p = dims.len();
    let labels = parts.len();
    // offsets[l][mu] = position of part l inside combined bond mu (0..=p)
    let mut bond = vec![0usize; p + 1];
    let mut offsets = vec![vec![0usize; p + 1]; labels];
    for mu in 0..=p {
        if mu == 0 {
            bond[0] = 1;
            continue;
        }
        if mu == p {
            for (l, off) in offsets.iter_mut().enumerate() {
                off[p] = l;
            }
            bond[p] = labels;
            continue;
        }
        let mut acc = 0;
        for (l, part) in parts.iter().enumerate() {
            offsets[l][mu] = acc;
            acc += part.ranks()[mu];
        }
        bond[mu] = acc;
    }
    let mut cores = Vec::with_capacity(p + 1);
    for mu in 0..p {
        let mut data = Array3::zeros((bond[mu], dims[mu], bond[mu + 1]));
        for (l, part) in parts.iter().enumerate() {
            let c = &part.cores[mu].data;
            let (a, _, b) = c.dim();
            let (oa, ob) = (offsets[l][mu], offsets[l][mu + 1]);
            data.slice_mut(s![oa..oa + a, .., ob..ob + b]).assign(c);
        }
        cores.push(data);
    }
    let eye = Array2::<T>::eye(labels).into_shape_with_order((labels, labels, 1)).unwrap();
    cores.push(eye);
    TensorTrain::from_arrays(cores)
}
