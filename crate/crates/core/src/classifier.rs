use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Index of the largest entry; the lowest index wins ties. NaN entries never win.
pub fn argmax<T: Real>(values: ArrayView1<T>) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] || values[best].is_nan() && !v.is_nan() {
            best = i;
        }
    }
    best
}

/// Every column of `y` must hold exactly one 1 and zeros elsewhere.
pub fn check_one_hot<T: Real>(y: ArrayView2<T>, m: usize) -> Result<()> {
    if y.ncols() != m {
        return Err(Error::DimensionMismatch(format!("{} label columns for {m} samples", y.ncols())));
    }
    if y.nrows() == 0 {
        return Err(Error::DimensionMismatch("label matrix has no rows".into()));
    }
    for (j, col) in y.columns().into_iter().enumerate() {
        let ones = col.iter().filter(|&&v| v == T::one()).count();
        let zeros = col.iter().filter(|&&v| v == T::zero()).count();
        if ones != 1 || ones + zeros != col.len() {
            return Err(Error::InvalidConfig(format!("label column {j} is not one-hot")));
        }
    }
    Ok(())
}

/// Something that maps inputs (columns of a `d × m` matrix) to one score per label.
pub trait Classifier<T: Real>: Sync {
    fn num_labels(&self) -> usize;

    fn input_dim(&self) -> usize;

    /// Scores for every column of `x`, as a `d′ × m` matrix.
    fn decision_values_batch(&self, x: ArrayView2<T>) -> Result<Array2<T>>;

    fn decision_values(&self, x: ArrayView1<T>) -> Result<Array1<T>> {
        let col = x.insert_axis(Axis(1));
        Ok(self.decision_values_batch(col)?.column(0).to_owned())
    }

    fn classify(&self, x: ArrayView1<T>) -> Result<usize> {
        Ok(argmax(self.decision_values(x)?.view()))
    }

    fn classify_batch(&self, x: ArrayView2<T>) -> Result<Vec<usize>> {
        let scores = self.decision_values_batch(x)?;
        Ok(scores.columns().into_iter().map(argmax).collect())
    }
}
