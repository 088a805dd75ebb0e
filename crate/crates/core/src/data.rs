//! Design matrices and column standardization.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Response plus measured covariates, with optional column names.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub w: Array2<f64>,
    pub y: Array1<f64>,
    pub column_names: Vec<String>,
}

impl Dataset {
    pub fn new(w: Array2<f64>, y: Array1<f64>) -> Result<Self> {
        if w.nrows() != y.len() {
            return Err(Error::DimensionMismatch(format!(
                "design has {} rows but response has {} entries",
                w.nrows(),
                y.len()
            )));
        }
        let column_names = (1..=w.ncols()).map(|j| format!("x{j}")).collect();
        Ok(Self { w, y, column_names })
    }

    pub fn n(&self) -> usize {
        self.w.nrows()
    }

    pub fn p(&self) -> usize {
        self.w.ncols()
    }
}

/// Column centers and scales from [`standardize`].
#[derive(Debug, Clone, PartialEq)]
pub struct Standardization {
    pub centers: Array1<f64>,
    pub scales: Array1<f64>,
}

impl Standardization {
    /// Applies the stored transform to new rows.
    pub fn apply(&self, w: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = w.to_owned();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            let (c, s) = (self.centers[j], self.scales[j]);
            col.mapv_inplace(|v| (v - c) / s);
        }
        out
    }
}

/// Centers every column and scales it so that `(1/n) sum w_ij^2 = 1`.
///
/// The scale uses divisor `n` (population variance).
pub fn standardize(w: ArrayView2<'_, f64>) -> Result<(Array2<f64>, Standardization)> {
    let n = w.nrows();
    if n == 0 {
        return Err(Error::InvalidArgument("cannot standardize an empty matrix".into()));
    }
    let nf = n as f64;
    let mut out = Array2::zeros(w.raw_dim());
    let mut centers = Array1::zeros(w.ncols());
    let mut scales = Array1::zeros(w.ncols());
    for (j, col) in w.axis_iter(Axis(1)).enumerate() {
        let mean = col.sum() / nf;
        let mut centered: Array1<f64> = col.mapv(|v| v - mean);
        // second pass removes residual rounding in the mean
        let drift = centered.sum() / nf;
        centered.mapv_inplace(|v| v - drift);
        let var = centered.dot(&centered) / nf;
        if !(var > 0.0) || !var.is_finite() {
            return Err(Error::DegenerateColumn { column: j });
        }
        let sd = var.sqrt();
        // a column with spread below the rounding level of its magnitude is constant
        if sd <= 1e-12 * (1.0 + mean.abs()) {
            return Err(Error::DegenerateColumn { column: j });
        }
        centered.mapv_inplace(|v| v / sd);
        out.column_mut(j).assign(&centered);
        centers[j] = mean + drift;
        scales[j] = sd;
    }
    Ok((out, Standardization { centers, scales }))
}

/// Prepends a column of ones (an unpenalized intercept).
pub fn with_intercept_column(w: ArrayView2<'_, f64>) -> Array2<f64> {
    let (n, p) = w.dim();
    let mut out = Array2::ones((n, p + 1));
    out.slice_mut(ndarray::s![.., 1..]).assign(&w);
    out
}

pub(crate) fn check_dims(w: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>) -> Result<()> {
    if w.nrows() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "design has {} rows but response has {} entries",
            w.nrows(),
            y.len()
        )));
    }
    if w.nrows() == 0 || w.ncols() == 0 {
        return Err(Error::InvalidArgument("design matrix is empty".into()));
    }
    Ok(())
}
