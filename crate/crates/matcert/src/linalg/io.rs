use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use crate::error::{invalid, Error, Result};
use crate::real::Real;

/// On-disk matrix: `{"dims": [d1, …], "entries": [[[re, im], …], …]}`, row-major.
/// A plain square matrix uses `"dims": [n]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixFile {
    pub dims: Vec<usize>,
    pub entries: Vec<Vec<[f64; 2]>>,
}

impl MatrixFile {
    pub fn from_matrix<T: Real>(dims: &[usize], m: &Matrix<T>) -> Self {
        let entries = (0..m.rows())
            .map(|i| (0..m.cols()).map(|j| [m[(i, j)].re.to_f64_lossy(), m[(i, j)].im.to_f64_lossy()]).collect())
            .collect();
        MatrixFile { dims: dims.to_vec(), entries }
    }

    pub fn to_matrix<T: Real>(&self) -> Result<Matrix<T>> {
        let n: usize = self.dims.iter().product();
        if self.dims.is_empty() || n == 0 {
            return invalid("dims must be a non-empty list of positive sizes");
        }
        if self.entries.len() != n || self.entries.iter().any(|r| r.len() != n) {
            return invalid(format!("entries must form a {n}x{n} array for dims {:?}", self.dims));
        }
        let data = self
            .entries
            .iter()
            .flatten()
            .map(|&[re, im]| {
                if re.is_finite() && im.is_finite() {
                    Ok(Complex::new(T::lit(re), T::lit(im)))
                } else {
                    invalid("non-finite matrix entry")
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Matrix::from_vec(n, n, data)
    }

    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("malformed matrix file: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("matrix file serialises")
    }
}
