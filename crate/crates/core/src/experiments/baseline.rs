//! Gaussian (linear) optimal transport baseline.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ridge added to both covariance matrices.
pub const COVARIANCE_RIDGE: f64 = 1e-6;

/// Affine map `T(x) = m_Y + A (x − m_X)` between the Gaussian fits of two samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearOtMap {
    pub mean_x: Array1<f64>,
    pub mean_y: Array1<f64>,
    pub a: Array2<f64>,
}

impl LinearOtMap {
    pub fn dim(&self) -> usize {
        self.mean_x.len()
    }

    pub fn transport(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim();
        (0..d)
            .map(|i| {
                self.mean_y[i]
                    + (0..d)
                        .map(|j| self.a[[i, j]] * (x[j] - self.mean_x[j]))
                        .sum::<f64>()
            })
            .collect()
    }
}

fn moments(m: ArrayView2<'_, f64>) -> (DVector<f64>, DMatrix<f64>) {
    let (n, d) = m.dim();
    let mean = DVector::from_fn(d, |j, _| m.column(j).sum() / n as f64);
    let mut cov = DMatrix::zeros(d, d);
    for r in m.rows() {
        let c = DVector::from_fn(d, |j, _| r[j] - mean[j]);
        cov += &c * c.transpose();
    }
    cov /= n as f64;
    for i in 0..d {
        cov[(i, i)] += COVARIANCE_RIDGE;
    }
    (mean, cov)
}

/// `f(S)` for symmetric `S` through its eigendecomposition.
fn spectral(s: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let sym = (s + s.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let vals = eig.eigenvalues.map(|v| f(v.max(0.0)));
    &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose()
}

/// Fits `A = Σ_X^{-1/2} (Σ_X^{1/2} Σ_Y Σ_X^{1/2})^{1/2} Σ_X^{-1/2}` and the means.
pub fn linear_ot_baseline(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> Result<LinearOtMap> {
    if x.nrows() == 0 || y.nrows() == 0 {
        return Err(Error::Empty("sample"));
    }
    if x.ncols() != y.ncols() {
        return Err(Error::DimensionMismatch {
            expected: x.ncols(),
            got: y.ncols(),
        });
    }
    let d = x.ncols();
    let (mx, sx) = moments(x);
    let (my, sy) = moments(y);
    let sx_half = spectral(&sx, f64::sqrt);
    let sx_inv_half = spectral(&sx, |v| 1.0 / v.sqrt());
    let middle = spectral(&(&sx_half * &sy * &sx_half), f64::sqrt);
    let a = &sx_inv_half * middle * &sx_inv_half;
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("linear OT map is not finite".into()));
    }
    Ok(LinearOtMap {
        mean_x: Array1::from_iter(mx.iter().copied()),
        mean_y: Array1::from_iter(my.iter().copied()),
        a: Array2::from_shape_fn((d, d), |(i, j)| a[(i, j)]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::hockey::uniform_sample;
    use ndarray::array;

    /// Cyclic Jacobi eigendecomposition of a symmetric matrix (test oracle).
    fn jacobi_eig(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
        let n = a.len();
        let mut v: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        for _ in 0..100 {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[i][j] * a[i][j])
                .sum();
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if a[p][q].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let (akp, akq) = (a[k][p], a[k][q]);
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let (apk, aqk) = (a[p][k], a[q][k]);
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                    for row in v.iter_mut() {
                        let (vp, vq) = (row[p], row[q]);
                        row[p] = c * vp - s * vq;
                        row[q] = s * vp + c * vq;
                    }
                }
            }
        }
        ((0..n).map(|i| a[i][i]).collect(), v)
    }

    fn oracle_fn(a: &[Vec<f64>], f: impl Fn(f64) -> f64) -> Vec<Vec<f64>> {
        let (vals, vecs) = jacobi_eig(a.to_vec());
        let n = a.len();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| (0..n).map(|k| vecs[i][k] * f(vals[k]) * vecs[j][k]).sum())
                    .collect()
            })
            .collect()
    }

    fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = a.len();
        (0..n)
            .map(|i| (0..n).map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum()).collect())
            .collect()
    }

    fn oracle_cov(m: &Array2<f64>) -> Vec<Vec<f64>> {
        let (n, d) = m.dim();
        let mean: Vec<f64> = (0..d).map(|j| m.column(j).sum() / n as f64).collect();
        (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| {
                        let c: f64 = m
                            .rows()
                            .into_iter()
                            .map(|r| (r[i] - mean[i]) * (r[j] - mean[j]))
                            .sum::<f64>()
                            / n as f64;
                        c + if i == j { COVARIANCE_RIDGE } else { 0.0 }
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn identical_samples_give_identity() {
        let x = uniform_sample(300, 3, 1, 0);
        let t = linear_ot_baseline(x.view(), x.view()).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((t.a[[i, j]] - e).abs() < 1e-6);
            }
        }
        let p = [0.2, 0.5, 0.9];
        for (a, b) in t.transport(&p).iter().zip(&p) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn scalar_case() {
        let x = array![[0.1], [0.3], [0.8]];
        let y = array![[0.2], [0.9], [0.4], [0.5]];
        let t = linear_ot_baseline(x.view(), y.view()).unwrap();
        let var = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            (m, v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / v.len() as f64 + COVARIANCE_RIDGE)
        };
        let (mx, vx) = var(&[0.1, 0.3, 0.8]);
        let (my, vy) = var(&[0.2, 0.9, 0.4, 0.5]);
        let expect = my + (vy / vx).sqrt() * (0.6 - mx);
        assert!((t.transport(&[0.6])[0] - expect).abs() < 1e-12);
    }

    #[test]
    fn two_dimensional_gaussian_fit_matches_jacobi_oracle() {
        let x = uniform_sample(400, 2, 2, 0);
        let mut y = uniform_sample(400, 2, 3, 0);
        for mut r in y.rows_mut() {
            let (a, b) = (r[0], r[1]);
            r[0] = 0.6 * a + 0.3 * b;
            r[1] = 0.2 * a + 0.5 * b * b;
        }
        let t = linear_ot_baseline(x.view(), y.view()).unwrap();
        let sx = oracle_cov(&x);
        let sy = oracle_cov(&y);
        let h = oracle_fn(&sx, f64::sqrt);
        let hi = oracle_fn(&sx, |v| 1.0 / v.sqrt());
        let mid = oracle_fn(&matmul(&matmul(&h, &sy), &h), f64::sqrt);
        let a = matmul(&matmul(&hi, &mid), &hi);
        for i in 0..2 {
            for j in 0..2 {
                assert!((t.a[[i, j]] - a[i][j]).abs() < 1e-10);
            }
        }
    }
}
