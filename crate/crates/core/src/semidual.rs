//! The Fourier plug-in estimator.
//!
//! The empirical semi-dual
//!
//! ```text
//! Ŝ(φ) = n⁻¹ Σ φ(X_i) + n⁻¹ Σ φ*(Y_i),   φ = ‖·‖²/2 − (φ̃ − mean_i φ̃(X_i))
//! ```
//!
//! is minimized over the coefficients ω of `φ̃ = Σ ω_l ψ_l` subject to
//! `‖φ̃‖_{H^{γ+2}} ≤ 1`. By Danskin's rule the ω-gradient is
//! `mean_i ψ_l(x*_i) − mean_i ψ_l(X_i)` where `x*_i` attains `φ*(Y_i)`.

use std::sync::Arc;

use log::{debug, warn};
use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::conjugate::{conjugate_batch, ConjugateConfig};
use crate::error::{Error, Result};
use crate::fourier::{FourierBasis, FourierPotential, FourierPotentialRecord, NormOrder};
use crate::gamma::SmoothnessMap;
use crate::potential::{clip_unit, half_sq_norm, Brenier, Potential};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    /// Stop when the relative change of the objective falls below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Radius of the `H^{γ+2}` ball.
    pub radius: f64,
    /// First step size; later steps use `0.5 / L̂`.
    pub initial_step: f64,
    pub conjugate: ConjugateConfig,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_iter: 300,
            radius: 1.0,
            initial_step: 1.0,
            conjugate: ConjugateConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SemidualFit {
    pub potential: FourierPotential,
    /// Empirical mean of `φ̃` over the source sample.
    pub offset: f64,
    pub objective_trace: Vec<f64>,
    /// `‖φ̃‖_{H^{γ+2}}` of the returned potential.
    pub constraint_slack: f64,
    pub n: usize,
    pub j: f64,
    pub converged: bool,
}

impl SemidualFit {
    /// Clipped transport map `cl(x − ∇φ̃(x))`.
    pub fn transport(&self, x: &[f64]) -> Vec<f64> {
        transport(&self.potential, x)
    }

    pub fn to_record(&self) -> SemidualFitRecord {
        SemidualFitRecord {
            potential: self.potential.to_record(),
            offset: self.offset,
            objective_trace: self.objective_trace.clone(),
            constraint_slack: self.constraint_slack,
            n: self.n,
            converged: self.converged,
        }
    }

    pub fn from_record(rec: &SemidualFitRecord) -> Result<Self> {
        let potential = FourierPotential::from_record(&rec.potential)?;
        let j = potential.basis().budget();
        Ok(Self {
            potential,
            offset: rec.offset,
            objective_trace: rec.objective_trace.clone(),
            constraint_slack: rec.constraint_slack,
            n: rec.n,
            j,
            converged: rec.converged,
        })
    }
}

/// JSON form of a [`SemidualFit`]; the budget lives in the embedded potential.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SemidualFitRecord {
    pub potential: FourierPotentialRecord,
    pub offset: f64,
    pub objective_trace: Vec<f64>,
    pub constraint_slack: f64,
    pub n: usize,
    pub converged: bool,
}

/// Clipped gradient of the Brenier potential built from `phi`.
pub fn transport(phi: &FourierPotential, x: &[f64]) -> Vec<f64> {
    let mut t = phi.brenier_grad(x);
    clip_unit(&mut t);
    t
}

fn check_samples(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, dim: usize) -> Result<()> {
    if x.nrows() == 0 || y.nrows() == 0 {
        return Err(Error::Empty("sample"));
    }
    for m in [&x, &y] {
        if m.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: m.ncols(),
            });
        }
    }
    Ok(())
}

fn sample_mean<P: Potential + ?Sized>(phi: &P, x: ArrayView2<'_, f64>) -> f64 {
    x.rows()
        .into_iter()
        .map(|r| phi.value(r.as_slice().unwrap_or(&r.to_vec())))
        .sum::<f64>()
        / x.nrows() as f64
}

/// Evaluates `Ŝ` for the Kantorovich potential `phi` (centered at its `X`-mean).
pub fn empirical_semidual<P: Potential>(
    phi: &P,
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    cfg: &ConjugateConfig,
) -> Result<f64> {
    check_samples(x, y, phi.dim())?;
    let offset = sample_mean(phi, x);
    let brenier = Brenier::centered(phi, offset);
    let direct = sample_mean(&brenier, x);
    let conj = conjugate_batch(&brenier, y, cfg, None)?;
    let dual = conj.iter().map(|r| r.value).sum::<f64>() / y.nrows() as f64;
    Ok(direct + dual)
}

struct Evaluation {
    objective: f64,
    grad: Vec<f64>,
    argmax: Vec<Vec<f64>>,
}

struct Problem<'a> {
    y: ArrayView2<'a, f64>,
    /// `mean_i ψ(X_i)`.
    source_features: Vec<f64>,
    /// `mean_i ‖X_i‖²/2`.
    source_energy: f64,
    cfg: &'a ConjugateConfig,
}

impl Problem<'_> {
    fn evaluate(&self, phi: &FourierPotential, warm: Option<&[Vec<f64>]>) -> Result<Evaluation> {
        let basis = phi.basis();
        let offset = dot(phi.coeffs(), &self.source_features);
        let brenier = Brenier::centered(phi, offset);
        let conj = conjugate_batch(&brenier, self.y, self.cfg, warm)?;
        let n = self.y.nrows() as f64;
        let mut grad = vec![0.0; basis.len()];
        let mut dual = 0.0;
        for r in &conj {
            basis.accumulate_features(&r.argmax, 1.0 / n, &mut grad);
            dual += r.value;
        }
        for (g, s) in grad.iter_mut().zip(&self.source_features) {
            *g -= s;
        }
        Ok(Evaluation {
            objective: self.source_energy + dual / n,
            grad,
            argmax: conj.into_iter().map(|r| r.argmax).collect(),
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn diff_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Minimizes the empirical semi-dual over the truncated Fourier class.
///
/// `j` defaults to `map.select_j(n)`.
pub fn fit(
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    map: SmoothnessMap,
    j: Option<f64>,
    cfg: &FitConfig,
) -> Result<SemidualFit> {
    let n = x.nrows();
    if n == 0 || y.nrows() == 0 {
        return Err(Error::Empty("sample"));
    }
    let dim = x.ncols();
    check_samples(x, y, dim)?;
    let alpha = map.finite_alpha()?;
    if alpha > 1.0 {
        warn!("α(γ) = {alpha} exceeds 1; rate guarantees do not apply");
    }
    let j = match j {
        Some(j) => j,
        None => map.select_j(n)? as f64,
    };
    let basis = Arc::new(FourierBasis::new(map, j, dim)?);
    debug!("fourier fit: n={n} d={dim} J={j} terms={}", basis.len());

    let mut source_features = vec![0.0; basis.len()];
    let mut source_energy = 0.0;
    for r in x.rows() {
        let r = r.to_vec();
        basis.accumulate_features(&r, 1.0 / n as f64, &mut source_features);
        source_energy += half_sq_norm(&r) / n as f64;
    }
    let problem = Problem {
        y,
        source_features,
        source_energy,
        cfg: &cfg.conjugate,
    };

    let mut phi = FourierPotential::zeros(basis.clone());
    let mut current = problem.evaluate(&phi, None)?;
    let mut trace = vec![current.objective];
    let mut step = cfg.initial_step;
    let mut converged = basis.is_empty();

    for _ in 0..cfg.max_iter {
        if converged {
            break;
        }
        let mut accepted = None;
        while step > 1e-14 {
            let mut trial = phi.clone();
            for (w, g) in trial.coeffs_mut().iter_mut().zip(&current.grad) {
                *w -= step * g;
            }
            trial.project_to_ball(cfg.radius);
            let delta: Vec<f64> = trial
                .coeffs()
                .iter()
                .zip(phi.coeffs())
                .map(|(a, b)| a - b)
                .collect();
            let sq = dot(&delta, &delta);
            if sq == 0.0 {
                break;
            }
            let eval = problem.evaluate(&trial, Some(&current.argmax))?;
            let model = current.objective + dot(&current.grad, &delta) + sq / (2.0 * step);
            if eval.objective <= model && eval.objective <= current.objective + 1e-12 {
                accepted = Some((trial, eval));
                break;
            }
            step *= 0.5;
        }
        let Some((trial, eval)) = accepted else {
            // No descent available at the current resolution.
            converged = true;
            break;
        };
        let moved = diff_norm(trial.coeffs(), phi.coeffs());
        let grad_change = diff_norm(&eval.grad, &current.grad);
        let rel = (current.objective - eval.objective).abs() / current.objective.abs().max(1e-12);
        phi = trial;
        current = eval;
        trace.push(current.objective);
        if grad_change > 0.0 && moved > 0.0 {
            step = (0.5 * moved / grad_change).min(1e3);
        } else {
            step = (2.0 * step).min(1e3);
        }
        if rel < cfg.tol {
            converged = true;
        }
    }

    let offset = dot(phi.coeffs(), &problem.source_features);
    let constraint_slack = phi.h_norm(NormOrder::GammaPlus2);
    Ok(SemidualFit {
        potential: phi,
        offset,
        objective_trace: trace,
        constraint_slack,
        n,
        j,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discrete::w2_distance;
    use crate::fourier::FourierBasis;
    use crate::rng::stream_rng;
    use ndarray::{array, Array2};
    use rand::Rng;

    fn uniform(n: usize, d: usize, seed: u64) -> Array2<f64> {
        let mut rng = stream_rng(seed, 0);
        Array2::from_shape_fn((n, d), |_| rng.random())
    }

    /// Grid-search conjugate for `d = 2`, resolution 201 per axis.
    fn grid_conjugate<P: Potential>(phi: &P, y: &[f64]) -> f64 {
        let mut best = f64::NEG_INFINITY;
        for a in 0..=200 {
            for b in 0..=200 {
                let x = [a as f64 / 200.0, b as f64 / 200.0];
                best = best.max(x[0] * y[0] + x[1] * y[1] - phi.value(&x));
            }
        }
        best
    }

    fn random_potential(seed: u64) -> FourierPotential {
        let map = SmoothnessMap::sobolev(2, 2);
        let basis = Arc::new(FourierBasis::new(map, 6.0, 2).unwrap());
        let mut rng = stream_rng(seed, 1);
        let mut phi = FourierPotential::from_rule(basis, |_| rng.random::<f64>() - 0.5);
        let norm = phi.h_norm(NormOrder::GammaPlus2);
        for w in phi.coeffs_mut() {
            *w *= 0.8 / norm;
        }
        phi
    }

    #[test]
    fn semidual_examples() {
        let map = SmoothnessMap::sobolev(1, 1);
        let basis = Arc::new(FourierBasis::new(map, 3.0, 1).unwrap());
        let zero = FourierPotential::zeros(basis);
        let x = array![[0.5]];
        let cfg = ConjugateConfig::default();
        let s = empirical_semidual(&zero, x.view(), x.view(), &cfg).unwrap();
        assert!((s - 0.25).abs() < 1e-15);

        let xs = uniform(7, 1, 3);
        let s = empirical_semidual(&zero, xs.view(), xs.view(), &cfg).unwrap();
        let expected: f64 = xs.iter().map(|v| v * v).sum::<f64>() / 7.0;
        assert!((s - expected).abs() < 1e-14);
    }

    #[test]
    fn semidual_matches_grid_oracle() {
        let phi = random_potential(11);
        let x = uniform(6, 2, 4);
        let y = uniform(6, 2, 5);
        let s = empirical_semidual(&phi, x.view(), y.view(), &ConjugateConfig::default()).unwrap();
        let offset = sample_mean(&phi, x.view());
        let brenier = Brenier::centered(&phi, offset);
        let direct = sample_mean(&brenier, x.view());
        let dual: f64 = y
            .rows()
            .into_iter()
            .map(|r| grid_conjugate(&brenier, &r.to_vec()))
            .sum::<f64>()
            / 6.0;
        assert!((s - (direct + dual)).abs() < 1e-4, "{s} vs {}", direct + dual);
    }

    #[test]
    fn danskin_gradient_matches_finite_differences() {
        let phi = random_potential(21);
        let x = uniform(12, 2, 6);
        let y = uniform(12, 2, 7);
        let cfg = ConjugateConfig::default();
        let mut feats = vec![0.0; phi.basis().len()];
        for r in x.rows() {
            phi.basis().accumulate_features(&r.to_vec(), 1.0 / 12.0, &mut feats);
        }
        let problem = Problem {
            y: y.view(),
            source_features: feats,
            source_energy: 0.0,
            cfg: &cfg,
        };
        let grad = problem.evaluate(&phi, None).unwrap().grad;
        let h = 1e-5;
        for t in 0..phi.basis().len() {
            let mut plus = phi.clone();
            plus.coeffs_mut()[t] += h;
            let mut minus = phi.clone();
            minus.coeffs_mut()[t] -= h;
            let sp = empirical_semidual(&plus, x.view(), y.view(), &cfg).unwrap();
            let sm = empirical_semidual(&minus, x.view(), y.view(), &cfg).unwrap();
            let fd = (sp - sm) / (2.0 * h);
            let scale = grad[t].abs().max(1e-3);
            assert!(
                (fd - grad[t]).abs() / scale < 1e-3,
                "term {t}: fd {fd} vs analytic {}",
                grad[t]
            );
        }
    }

    #[test]
    fn identity_samples_give_identity_map() {
        let map = SmoothnessMap::mixed(crate::gamma::WeightRule::power(1.0, 1.0));
        let x = uniform(500, 5, 8);
        let fit = fit(x.view(), x.view(), map, None, &FitConfig::default()).unwrap();
        let mut err = 0.0;
        for r in x.rows() {
            let r = r.to_vec();
            let t = fit.transport(&r);
            err += t.iter().zip(&r).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        }
        assert!(err / 500.0 < 0.01);
        assert!(fit.constraint_slack <= 1.0 + 1e-9);
    }

    #[test]
    fn empty_sample_is_rejected() {
        let map = SmoothnessMap::sobolev(1, 1);
        let x = Array2::<f64>::zeros((0, 1));
        assert!(fit(x.view(), x.view(), map, Some(3.0), &FitConfig::default()).is_err());
    }

    #[test]
    fn recovers_single_mode() {
        // T0(x) = x − c sin(2πx)/(2π) is the gradient of ‖x‖²/2 − φ̃0 with
        // φ̃0 = ω √2 cos(2πx), ω = −c / (4√2 π²).
        let c = 0.1;
        let omega = -c / (4.0 * std::f64::consts::SQRT_2 * std::f64::consts::PI.powi(2));
        let x = uniform(2000, 1, 12);
        let y = x.mapv(|v| v - c * (2.0 * std::f64::consts::PI * v).sin() / (2.0 * std::f64::consts::PI));
        let map = SmoothnessMap::sobolev(1, 1);
        let fit = fit(x.view(), y.view(), map, Some(3.0), &FitConfig::default()).unwrap();
        let l = crate::gamma::FrequencyIndex::single(1, -1);
        let got = fit.potential.coefficient(&l).unwrap();
        assert!((got - omega).abs() < 0.1 * omega.abs(), "{got} vs {omega}");
        assert!(fit.converged);
    }

    #[test]
    fn trace_is_monotone_and_constraint_holds() {
        let map = SmoothnessMap::sobolev(2, 2);
        let x = uniform(80, 2, 13);
        let y = uniform(80, 2, 14).mapv(|v| v * v);
        let fit = fit(x.view(), y.view(), map, Some(6.0), &FitConfig::default()).unwrap();
        for w in fit.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-10);
        }
        assert!(fit.constraint_slack <= 1.0 + 1e-9);
        assert!(fit.objective_trace.len() > 1);
    }

    #[test]
    fn pushforward_moves_towards_target() {
        // Hockey-stick deviations on five axes, q = 1.
        let n = 200;
        let x = uniform(n, 5, 15);
        let y = uniform(n, 5, 16).mapv(|v| {
            let k = 2.6;
            v - (v - 0.5f64).abs().powf(k) / k
        });
        let map = SmoothnessMap::mixed(crate::gamma::WeightRule::Power {
            scale: 1.0,
            exponent: 0.1,
            offset: 2.1,
        });
        let fit = fit(x.view(), y.view(), map, Some(12.0), &FitConfig::default()).unwrap();
        let mut pushed = x.clone();
        for mut r in pushed.rows_mut() {
            let t = fit.transport(&r.to_vec());
            r.assign(&ndarray::Array1::from(t));
        }
        let before = w2_distance(x.view(), y.view(), None).unwrap();
        let after = w2_distance(pushed.view(), y.view(), None).unwrap();
        assert!(after < before, "{after} vs {before}");
    }

    #[test]
    fn transport_clips() {
        let map = SmoothnessMap::sobolev(1, 1);
        let basis = Arc::new(FourierBasis::new(map, 3.0, 1).unwrap());
        let l = crate::gamma::FrequencyIndex::single(1, 1);
        // φ̃ = ω √2 sin(2πx) has ∇φ̃(0) = 2π√2 ω > 0, so T(0) < 0 before clipping.
        let phi = FourierPotential::from_rule(basis.clone(), |f| if *f == l { 0.1 } else { 0.0 });
        assert_eq!(transport(&phi, &[0.0]), vec![0.0]);
        let zero = FourierPotential::zeros(basis);
        assert_eq!(transport(&zero, &[0.3]), vec![0.3]);
    }
}
