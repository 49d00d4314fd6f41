//! Numerical Legendre–Fenchel conjugates over the unit box.
//!
//! `φ*(y) = sup_{x ∈ [0,1]^d} ⟨x, y⟩ − φ(x)` is computed by projected gradient
//! ascent with backtracking from several starting points. The returned value
//! is attained at the returned argmax, so it is always a lower bound on the
//! true supremum.

use ndarray::ArrayView2;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::{dot, Potential};
use crate::rng::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConjugateConfig {
    /// Stop when the projected gradient mapping norm falls below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Total number of generated starts: `clip(y)` plus `starts - 1` uniform draws.
    pub starts: usize,
    pub seed: u64,
}

impl Default for ConjugateConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 500,
            starts: 9,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConjugateResult {
    pub value: f64,
    pub argmax: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// `φ*(y)` for a Brenier potential `phi`.
pub fn conjugate<P: Potential + ?Sized>(
    phi: &P,
    y: &[f64],
    cfg: &ConjugateConfig,
) -> Result<ConjugateResult> {
    conjugate_indexed(phi, y, cfg, 0, &[])
}

/// Like [`conjugate`], with an explicit random-stream index and extra starting points.
pub fn conjugate_indexed<P: Potential + ?Sized>(
    phi: &P,
    y: &[f64],
    cfg: &ConjugateConfig,
    index: u64,
    extra_starts: &[&[f64]],
) -> Result<ConjugateResult> {
    let d = phi.dim();
    if y.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: y.len(),
        });
    }
    let mut ascent = Ascent::new(phi, y, cfg);
    let mut best: Option<ConjugateResult> = None;
    let mut consider = |r: ConjugateResult| {
        if best.as_ref().is_none_or(|b| r.value > b.value) {
            best = Some(r);
        }
    };

    let clipped: Vec<f64> = y.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    consider(ascent.run(&clipped)?);
    for s in extra_starts {
        if s.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: s.len(),
            });
        }
        let start: Vec<f64> = s.iter().map(|v| v.clamp(0.0, 1.0)).collect();
        consider(ascent.run(&start)?);
    }
    if cfg.starts > 1 {
        let mut rng = stream_rng(cfg.seed, index);
        let mut start = vec![0.0; d];
        for _ in 1..cfg.starts {
            for v in start.iter_mut() {
                *v = rng.random::<f64>();
            }
            consider(ascent.run(&start)?);
        }
    }
    Ok(best.expect("at least one start"))
}

/// Conjugates of every row of `ys`; `warm_starts[i]` (if given) joins the start set of row `i`.
///
/// Results depend only on `(cfg.seed, i)`, never on the number of worker threads.
pub fn conjugate_batch<P: Potential + ?Sized>(
    phi: &P,
    ys: ArrayView2<'_, f64>,
    cfg: &ConjugateConfig,
    warm_starts: Option<&[Vec<f64>]>,
) -> Result<Vec<ConjugateResult>> {
    if let Some(w) = warm_starts {
        if w.len() != ys.nrows() {
            return Err(Error::DimensionMismatch {
                expected: ys.nrows(),
                got: w.len(),
            });
        }
    }
    (0..ys.nrows())
        .into_par_iter()
        .map(|i| {
            let y = ys.row(i).to_vec();
            match warm_starts {
                Some(w) => conjugate_indexed(phi, &y, cfg, i as u64, &[&w[i]]),
                None => conjugate_indexed(phi, &y, cfg, i as u64, &[]),
            }
        })
        .collect()
}

struct Ascent<'a, P: ?Sized> {
    phi: &'a P,
    y: &'a [f64],
    cfg: &'a ConjugateConfig,
    grad: Vec<f64>,
    x_new: Vec<f64>,
    grad_new: Vec<f64>,
}

impl<'a, P: Potential + ?Sized> Ascent<'a, P> {
    fn new(phi: &'a P, y: &'a [f64], cfg: &'a ConjugateConfig) -> Self {
        let d = y.len();
        Self {
            phi,
            y,
            cfg,
            grad: vec![0.0; d],
            x_new: vec![0.0; d],
            grad_new: vec![0.0; d],
        }
    }

    /// `g(x) = ⟨x, y⟩ − φ(x)`; writes `∇g` into `grad`.
    fn objective(phi: &P, y: &[f64], x: &[f64], grad: &mut [f64]) -> Result<f64> {
        let v = phi.value_and_grad(x, grad);
        if !v.is_finite() {
            return Err(Error::Numerical(format!(
                "potential value {v} at {x:?} during conjugate"
            )));
        }
        for (g, yi) in grad.iter_mut().zip(y) {
            *g = yi - *g;
        }
        Ok(dot(x, y) - v)
    }

    fn run(&mut self, start: &[f64]) -> Result<ConjugateResult> {
        let mut x = start.to_vec();
        let mut val = Self::objective(self.phi, self.y, &x, &mut self.grad)?;
        let mut step = 1.0f64;
        let mut iterations = 0;
        let mut converged = false;
        while iterations < self.cfg.max_iter {
            let mapping: f64 = x
                .iter()
                .zip(&self.grad)
                .map(|(xi, gi)| {
                    let p = (xi + gi).clamp(0.0, 1.0) - xi;
                    p * p
                })
                .sum::<f64>()
                .sqrt();
            if mapping < self.cfg.tol {
                converged = true;
                break;
            }
            iterations += 1;
            let mut accepted = false;
            while step > 1e-16 {
                for ((xn, xi), gi) in self.x_new.iter_mut().zip(&x).zip(&self.grad) {
                    *xn = (xi + step * gi).clamp(0.0, 1.0);
                }
                let val_new = Self::objective(self.phi, self.y, &self.x_new, &mut self.grad_new)?;
                let mut lin = 0.0;
                let mut sq = 0.0;
                for ((xn, xi), gi) in self.x_new.iter().zip(&x).zip(&self.grad) {
                    let dx = xn - xi;
                    lin += gi * dx;
                    sq += dx * dx;
                }
                if val_new >= val + lin - sq / (2.0 * step) {
                    accepted = val_new >= val;
                    if accepted {
                        std::mem::swap(&mut x, &mut self.x_new);
                        std::mem::swap(&mut self.grad, &mut self.grad_new);
                        val = val_new;
                    }
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                // No ascent possible at machine precision.
                break;
            }
            step = (step * 2.0).min(1e6);
        }
        Ok(ConjugateResult {
            value: val,
            argmax: x,
            iterations,
            converged,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{Brenier, FnPotential, ZeroPotential};
    use ndarray::array;

    #[test]
    fn quadratic_conjugate_interior() {
        let phi = Brenier::new(ZeroPotential(3));
        let y = [0.2, 0.5, 0.9];
        let r = conjugate(&phi, &y, &ConjugateConfig::default()).unwrap();
        assert!((r.value - 0.5 * (0.04 + 0.25 + 0.81)).abs() < 1e-14);
        for (a, b) in r.argmax.iter().zip(&y) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(r.converged);
    }

    #[test]
    fn linear_program_on_box() {
        let phi = ZeroPotential(2);
        let r = conjugate(&phi, &[0.5, -0.3], &ConjugateConfig::default()).unwrap();
        assert!((r.value - 0.5).abs() < 1e-14);
        assert_eq!(r.argmax, vec![1.0, 0.0]);
    }

    #[test]
    fn non_finite_potential_is_an_error() {
        let phi = FnPotential::new(1, |_x: &[f64]| f64::NAN, |_x: &[f64], g: &mut [f64]| g[0] = 0.0);
        assert!(matches!(
            conjugate(&phi, &[0.5], &ConjugateConfig::default()),
            Err(Error::Numerical(_))
        ));
    }

    #[test]
    fn batch_matches_pointwise_and_is_deterministic() {
        // Double well: non-concave objective exercises the multi-start logic.
        let phi = FnPotential::new(
            1,
            |x: &[f64]| 0.5 * x[0] * x[0] - 0.2 * (6.0 * x[0]).cos(),
            |x: &[f64], g: &mut [f64]| g[0] = x[0] + 1.2 * (6.0 * x[0]).sin(),
        );
        let ys = array![[0.1], [0.7], [0.7], [0.4]];
        let cfg = ConjugateConfig::default();
        let batch = conjugate_batch(&phi, ys.view(), &cfg, None).unwrap();
        for (i, r) in batch.iter().enumerate() {
            let single =
                conjugate_indexed(&phi, &[ys[[i, 0]]], &cfg, i as u64, &[]).unwrap();
            assert!((single.value - r.value).abs() < 1e-12);
        }
        assert!((batch[1].value - batch[2].value).abs() < 1e-12);
        let again = conjugate_batch(&phi, ys.view(), &cfg, None).unwrap();
        assert_eq!(batch, again);
        assert!(conjugate_batch(&phi, ys.slice(ndarray::s![0..0, ..]), &cfg, None)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn warm_starts_are_used() {
        let phi = Brenier::new(ZeroPotential(2));
        let ys = array![[0.3, 0.6]];
        let warm = vec![vec![0.3, 0.6]];
        let cfg = ConjugateConfig {
            starts: 1,
            ..Default::default()
        };
        let r = conjugate_batch(&phi, ys.view(), &cfg, Some(&warm)).unwrap();
        assert!((r[0].value - 0.225).abs() < 1e-14);
        assert!(conjugate_batch(&phi, ys.view(), &cfg, Some(&[])).is_err());
    }
}
