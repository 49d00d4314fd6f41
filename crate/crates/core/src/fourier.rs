//! Trigonometric basis and sparse Fourier Kantorovich potentials.
//!
//! The basis on `[0,1]^∞` is the tensor product of `ψ_0 = 1`,
//! `ψ_k = √2 sin(2πk·)` for `k > 0` and `ψ_k = √2 cos(2π|k|·)` for `k < 0`.
//! A [`FourierBasis`] fixes every frequency of every admissible dyadic scale
//! under a budget `J`; a [`FourierPotential`] pairs it with one coefficient
//! per frequency. The zero frequency is never stored.

use std::collections::HashMap;
use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gamma::{
    enumerate_frequencies_capped, DyadicScale, EnumerationLimits, FrequencyIndex, SmoothnessMap,
    DEFAULT_ENUMERATION_CAP,
};
use crate::potential::Potential;

const TWO_PI: f64 = 2.0 * PI;

/// One-dimensional factor `ψ_k(t)`.
pub fn basis_factor(k: i64, t: f64) -> f64 {
    match k.signum() {
        0 => 1.0,
        1 => SQRT_2 * (TWO_PI * k as f64 * t).sin(),
        _ => SQRT_2 * (TWO_PI * k.unsigned_abs() as f64 * t).cos(),
    }
}

/// `ψ_l(x) = Π_i ψ_{l_i}(x_i)`.
pub fn basis_eval(l: &FrequencyIndex, x: &[f64]) -> Result<f64> {
    if l.max_axis() > x.len() {
        return Err(Error::AxisOutOfRange {
            axis: l.max_axis(),
            limit: x.len(),
        });
    }
    Ok(l.entries()
        .iter()
        .map(|&(axis, k)| basis_factor(k, x[axis as usize - 1]))
        .product())
}

/// Which weighted norm to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormOrder {
    /// `Σ_s 2^{2γ(s)} ‖δ_s f‖²`.
    Gamma,
    /// `Σ_s 2^{2(1+2α)γ(s)} ‖δ_s f‖²`.
    GammaPlus2,
}

/// The frequencies of all scales with `(1 + 2α)·γ(s) ≤ J` whose axes fit in `ambient_dim`.
#[derive(Debug, Clone)]
pub struct FourierBasis {
    map: SmoothnessMap,
    budget: f64,
    ambient_dim: usize,
    alpha: f64,
    scales: Vec<DyadicScale>,
    scale_gamma: Vec<f64>,
    terms: Vec<FrequencyIndex>,
    term_scale: Vec<usize>,
    // Flattened (axis-1, k) pairs per term, for evaluation.
    flat: Vec<(usize, i64)>,
    flat_offsets: Vec<usize>,
    // Highest |k| used on each axis; zero when the axis is unused.
    axis_max_freq: Vec<usize>,
    // Prefix offsets into the per-point sin/cos table.
    table_offsets: Vec<usize>,
    table_len: usize,
}

impl FourierBasis {
    pub fn new(map: SmoothnessMap, budget: f64, ambient_dim: usize) -> Result<Self> {
        Self::with_cap(map, budget, ambient_dim, DEFAULT_ENUMERATION_CAP)
    }

    pub fn with_cap(
        map: SmoothnessMap,
        budget: f64,
        ambient_dim: usize,
        cap: usize,
    ) -> Result<Self> {
        if ambient_dim == 0 {
            return Err(Error::InvalidArgument("ambient dimension must be >= 1".into()));
        }
        let alpha = map.finite_alpha()?;
        let scales = map.enumerate_scales_with(
            budget,
            EnumerationLimits {
                max_axis: Some(ambient_dim),
                cap,
            },
        )?;
        let mut scale_gamma = Vec::with_capacity(scales.len());
        let mut terms = Vec::new();
        let mut term_scale = Vec::new();
        for (si, s) in scales.iter().enumerate() {
            scale_gamma.push(map.gamma(s)?);
            let remaining = cap.saturating_sub(terms.len());
            let freqs = enumerate_frequencies_capped(s, remaining).map_err(|_| {
                Error::EnumerationCap {
                    what: "frequencies",
                    cap,
                }
            })?;
            term_scale.extend(std::iter::repeat_n(si, freqs.len()));
            terms.extend(freqs);
        }
        let mut flat = Vec::new();
        let mut flat_offsets = Vec::with_capacity(terms.len() + 1);
        let mut axis_max_freq = vec![0usize; ambient_dim];
        flat_offsets.push(0);
        for l in &terms {
            for &(axis, k) in l.entries() {
                let a = axis as usize - 1;
                axis_max_freq[a] = axis_max_freq[a].max(k.unsigned_abs() as usize);
                flat.push((a, k));
            }
            flat_offsets.push(flat.len());
        }
        let mut table_offsets = Vec::with_capacity(ambient_dim);
        let mut table_len = 0;
        for &m in &axis_max_freq {
            table_offsets.push(table_len);
            table_len += m;
        }
        Ok(Self {
            map,
            budget,
            ambient_dim,
            alpha,
            scales,
            scale_gamma,
            terms,
            term_scale,
            flat,
            flat_offsets,
            axis_max_freq,
            table_offsets,
            table_len,
        })
    }

    pub fn map(&self) -> &SmoothnessMap {
        &self.map
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn scales(&self) -> &[DyadicScale] {
        &self.scales
    }

    pub fn terms(&self) -> &[FrequencyIndex] {
        &self.terms
    }

    /// Index into [`scales`](Self::scales) of term `t`.
    pub fn term_scale(&self, t: usize) -> usize {
        self.term_scale[t]
    }

    pub fn scale_gamma(&self, si: usize) -> f64 {
        self.scale_gamma[si]
    }

    /// Squared norm weight of scale `si` for the given order.
    pub fn scale_weight(&self, si: usize, order: NormOrder) -> f64 {
        let g = self.scale_gamma[si];
        match order {
            NormOrder::Gamma => (2.0 * g).exp2(),
            NormOrder::GammaPlus2 => (2.0 * (1.0 + 2.0 * self.alpha) * g).exp2(),
        }
    }

    /// Highest axis touched by any term (0 if empty).
    pub fn max_axis(&self) -> usize {
        self.axis_max_freq
            .iter()
            .rposition(|&m| m > 0)
            .map_or(0, |p| p + 1)
    }

    fn fill_tables(&self, x: &[f64], sin: &mut [f64], cos: &mut [f64]) {
        for (a, &m) in self.axis_max_freq.iter().enumerate() {
            let off = self.table_offsets[a];
            for k in 1..=m {
                let (s, c) = (TWO_PI * k as f64 * x[a]).sin_cos();
                sin[off + k - 1] = SQRT_2 * s;
                cos[off + k - 1] = SQRT_2 * c;
            }
        }
    }

    #[inline]
    fn factor(&self, sin: &[f64], cos: &[f64], a: usize, k: i64) -> f64 {
        let idx = self.table_offsets[a] + k.unsigned_abs() as usize - 1;
        if k > 0 {
            sin[idx]
        } else {
            cos[idx]
        }
    }

    #[inline]
    fn factor_deriv(&self, sin: &[f64], cos: &[f64], a: usize, k: i64) -> f64 {
        let m = k.unsigned_abs() as usize;
        let idx = self.table_offsets[a] + m - 1;
        let w = TWO_PI * m as f64;
        if k > 0 {
            w * cos[idx]
        } else {
            -w * sin[idx]
        }
    }

    /// Values `ψ_l(x)` of every term, in basis order.
    pub fn features(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(out.len(), self.len());
        assert!(x.len() >= self.ambient_dim, "point shorter than ambient dimension");
        let mut sin = vec![0.0; self.table_len];
        let mut cos = vec![0.0; self.table_len];
        self.fill_tables(x, &mut sin, &mut cos);
        for (t, o) in out.iter_mut().enumerate() {
            let mut v = 1.0;
            for &(a, k) in &self.flat[self.flat_offsets[t]..self.flat_offsets[t + 1]] {
                v *= self.factor(&sin, &cos, a, k);
            }
            *o = v;
        }
    }

    /// Accumulates `weight · ψ_l(x)` into `acc` for every term.
    pub fn accumulate_features(&self, x: &[f64], weight: f64, acc: &mut [f64]) {
        let mut sin = vec![0.0; self.table_len];
        let mut cos = vec![0.0; self.table_len];
        self.fill_tables(x, &mut sin, &mut cos);
        for (t, o) in acc.iter_mut().enumerate() {
            let mut v = weight;
            for &(a, k) in &self.flat[self.flat_offsets[t]..self.flat_offsets[t + 1]] {
                v *= self.factor(&sin, &cos, a, k);
            }
            *o += v;
        }
    }

    fn eval(&self, coeffs: &[f64], x: &[f64], grad: Option<&mut [f64]>) -> f64 {
        assert!(x.len() >= self.ambient_dim, "point shorter than ambient dimension");
        let mut sin = vec![0.0; self.table_len];
        let mut cos = vec![0.0; self.table_len];
        self.fill_tables(x, &mut sin, &mut cos);
        let mut value = 0.0;
        match grad {
            None => {
                for (t, &w) in coeffs.iter().enumerate() {
                    if w == 0.0 {
                        continue;
                    }
                    let mut v = w;
                    for &(a, k) in &self.flat[self.flat_offsets[t]..self.flat_offsets[t + 1]] {
                        v *= self.factor(&sin, &cos, a, k);
                    }
                    value += v;
                }
            }
            Some(g) => {
                g.fill(0.0);
                let mut fac = Vec::with_capacity(8);
                for (t, &w) in coeffs.iter().enumerate() {
                    if w == 0.0 {
                        continue;
                    }
                    let entries = &self.flat[self.flat_offsets[t]..self.flat_offsets[t + 1]];
                    fac.clear();
                    fac.extend(entries.iter().map(|&(a, k)| self.factor(&sin, &cos, a, k)));
                    value += w * fac.iter().product::<f64>();
                    for (j, &(a, k)) in entries.iter().enumerate() {
                        let mut p = w * self.factor_deriv(&sin, &cos, a, k);
                        for (i, f) in fac.iter().enumerate() {
                            if i != j {
                                p *= f;
                            }
                        }
                        g[a] += p;
                    }
                }
            }
        }
        value
    }
}

/// Sparse Fourier series `Σ_l ω_l ψ_l` over a fixed basis.
#[derive(Debug, Clone)]
pub struct FourierPotential {
    basis: Arc<FourierBasis>,
    coeffs: Vec<f64>,
}

impl FourierPotential {
    pub fn zeros(basis: Arc<FourierBasis>) -> Self {
        let n = basis.len();
        Self {
            basis,
            coeffs: vec![0.0; n],
        }
    }

    pub fn from_coeffs(basis: Arc<FourierBasis>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != basis.len() {
            return Err(Error::DimensionMismatch {
                expected: basis.len(),
                got: coeffs.len(),
            });
        }
        Ok(Self { basis, coeffs })
    }

    /// Coefficients given by a closed-form rule `l ↦ ω_l`.
    pub fn from_rule(basis: Arc<FourierBasis>, rule: impl FnMut(&FrequencyIndex) -> f64) -> Self {
        let coeffs = basis.terms().iter().map(rule).collect();
        Self { basis, coeffs }
    }

    pub fn basis(&self) -> &Arc<FourierBasis> {
        &self.basis
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn coefficient(&self, l: &FrequencyIndex) -> Option<f64> {
        self.basis
            .terms()
            .iter()
            .position(|t| t == l)
            .map(|i| self.coeffs[i])
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.basis.eval(&self.coeffs, x, None)
    }

    /// Exact gradient of the series at `x` (length `ambient_dim`).
    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.basis.ambient_dim];
        self.basis.eval(&self.coeffs, x, Some(&mut g));
        g
    }

    /// Transport map `x − ∇φ(x)` of the Brenier potential `‖x‖²/2 − φ`.
    pub fn brenier_grad(&self, x: &[f64]) -> Vec<f64> {
        let g = self.grad(x);
        x.iter().zip(&g).map(|(xi, gi)| xi - gi).collect()
    }

    /// Per-scale `‖δ_s φ‖²`, aligned with `basis().scales()`.
    pub fn block_energies(&self) -> Vec<f64> {
        let mut e = vec![0.0; self.basis.scales.len()];
        for (t, &w) in self.coeffs.iter().enumerate() {
            e[self.basis.term_scale[t]] += w * w;
        }
        e
    }

    pub fn h_norm(&self, order: NormOrder) -> f64 {
        self.block_energies()
            .iter()
            .enumerate()
            .map(|(si, e)| self.basis.scale_weight(si, order) * e)
            .sum::<f64>()
            .sqrt()
    }

    /// Upper bound `4π²‖φ‖_{H^{γ+2}}` on the operator norm of the Hessian.
    pub fn hessian_bound(&self) -> f64 {
        4.0 * PI * PI * self.h_norm(NormOrder::GammaPlus2)
    }

    /// Keeps exactly the coefficients whose scale is admissible at budget `j`.
    pub fn truncate(&self, j: f64) -> Result<FourierPotential> {
        let basis = Arc::new(FourierBasis::new(
            self.basis.map,
            j,
            self.basis.ambient_dim,
        )?);
        let lookup: HashMap<&FrequencyIndex, f64> = self
            .basis
            .terms()
            .iter()
            .zip(&self.coeffs)
            .map(|(l, &w)| (l, w))
            .collect();
        let coeffs = basis
            .terms()
            .iter()
            .map(|l| lookup.get(l).copied().unwrap_or(0.0))
            .collect();
        Ok(FourierPotential { basis, coeffs })
    }

    /// Rescales coefficients so that `‖φ‖_{H^{γ+2}} ≤ radius`; returns the norm before projection.
    pub fn project_to_ball(&mut self, radius: f64) -> f64 {
        let norm = self.h_norm(NormOrder::GammaPlus2);
        if norm > radius {
            let s = radius / norm;
            for w in &mut self.coeffs {
                *w *= s;
            }
        }
        norm
    }

    pub fn to_record(&self) -> FourierPotentialRecord {
        FourierPotentialRecord {
            smoothness_map: self.basis.map,
            j: self.basis.budget,
            ambient_dim: self.basis.ambient_dim,
            entries: self
                .basis
                .terms()
                .iter()
                .zip(&self.coeffs)
                .enumerate()
                .map(|(t, (l, &omega))| FourierEntry {
                    scale: self.basis.scales[self.basis.term_scale[t]].clone(),
                    freq: l.clone(),
                    omega,
                })
                .collect(),
        }
    }

    pub fn from_record(rec: &FourierPotentialRecord) -> Result<Self> {
        let basis = Arc::new(FourierBasis::new(rec.smoothness_map, rec.j, rec.ambient_dim)?);
        let index: HashMap<&FrequencyIndex, usize> = basis
            .terms()
            .iter()
            .enumerate()
            .map(|(i, l)| (l, i))
            .collect();
        let mut coeffs = vec![0.0; basis.len()];
        for e in &rec.entries {
            let &i = index.get(&e.freq).ok_or_else(|| {
                Error::Format(format!("frequency {:?} not admissible at J={}", e.freq, rec.j))
            })?;
            if e.freq.scale() != e.scale {
                return Err(Error::Format(format!(
                    "frequency {:?} does not belong to scale {:?}",
                    e.freq, e.scale
                )));
            }
            coeffs[i] = e.omega;
        }
        Ok(Self { basis, coeffs })
    }
}

impl Potential for FourierPotential {
    fn dim(&self) -> usize {
        self.basis.ambient_dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.eval(x)
    }
    fn value_and_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        self.basis.eval(&self.coeffs, x, Some(grad))
    }
}

/// JSON form of a [`FourierPotential`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierPotentialRecord {
    pub smoothness_map: SmoothnessMap,
    #[serde(rename = "J")]
    pub j: f64,
    pub ambient_dim: usize,
    pub entries: Vec<FourierEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierEntry {
    pub scale: DyadicScale,
    pub freq: FrequencyIndex,
    pub omega: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gamma::WeightRule;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn basis(map: SmoothnessMap, j: f64, d: usize) -> Arc<FourierBasis> {
        Arc::new(FourierBasis::new(map, j, d).unwrap())
    }

    #[test]
    fn basis_eval_examples() {
        assert_eq!(basis_eval(&FrequencyIndex::zero(), &[0.3, 0.9]).unwrap(), 1.0);
        let c = basis_eval(&FrequencyIndex::single(1, -1), &[0.0]).unwrap();
        assert!((c - 1.41421356).abs() < 1e-8);
        let s = basis_eval(&FrequencyIndex::single(1, 1), &[0.25]).unwrap();
        assert!((s - SQRT_2).abs() < 1e-15);
        assert!(basis_eval(&FrequencyIndex::single(3, 1), &[0.1, 0.2]).is_err());
    }

    #[test]
    fn potential_eval_examples() {
        let b = basis(SmoothnessMap::sobolev(1, 1), 3.0, 1);
        assert_eq!(FourierPotential::zeros(b.clone()).eval(&[0.4]), 0.0);
        let phi = FourierPotential::from_rule(b, |l| {
            if *l == FrequencyIndex::single(1, -1) {
                2.0
            } else {
                0.0
            }
        });
        assert!((phi.eval(&[0.0]) - 2.0 * SQRT_2).abs() < 1e-14);
    }

    #[test]
    fn potential_matches_naive_resummation() {
        let b = basis(SmoothnessMap::mixed(WeightRule::power(1.0, 1.0)), 12.0, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let phi = FourierPotential::from_rule(b.clone(), |_| rng.random_range(-1.0..1.0));
        for i in 0..5 {
            for j in 0..5 {
                let x = [i as f64 / 5.0, j as f64 / 5.0, 0.37];
                let naive: f64 = b
                    .terms()
                    .iter()
                    .zip(phi.coeffs())
                    .map(|(l, w)| w * basis_eval(l, &x).unwrap())
                    .sum();
                assert!((phi.eval(&x) - naive).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gradient_examples() {
        // α = 2, so scales with max level 1 need J ≥ 5.
        let b = basis(SmoothnessMap::sobolev(2, 1), 5.0, 2);
        let zero = FourierPotential::zeros(b.clone());
        assert_eq!(zero.grad(&[0.3, 0.6]), vec![0.0, 0.0]);
        assert_eq!(zero.brenier_grad(&[0.3, 0.6]), vec![0.3, 0.6]);
        let sine = FourierPotential::from_rule(b, |l| {
            if *l == FrequencyIndex::single(1, 1) {
                1.0
            } else {
                0.0
            }
        });
        let g = sine.grad(&[0.0, 0.5]);
        assert!((g[0] - TWO_PI * SQRT_2).abs() < 1e-12);
        assert!(g[1].abs() < 1e-15);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let b = basis(SmoothnessMap::mixed(WeightRule::power(1.0, 1.0)), 15.0, 4);
        for _ in 0..20 {
            let phi = FourierPotential::from_rule(b.clone(), |_| rng.random_range(-1.0..1.0));
            let x: Vec<f64> = (0..4).map(|_| rng.random::<f64>()).collect();
            let g = phi.grad(&x);
            let h = 1e-5;
            for a in 0..4 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[a] += h;
                xm[a] -= h;
                let fd = (phi.eval(&xp) - phi.eval(&xm)) / (2.0 * h);
                let scale = g[a].abs().max(1.0);
                assert!((fd - g[a]).abs() / scale < 1e-5, "axis {a}: {fd} vs {}", g[a]);
            }
        }
    }

    #[test]
    fn h_norm_examples() {
        // Sobolev(1,1): α = 1, scale {(1,1)} has γ = 1.
        let b = basis(SmoothnessMap::sobolev(1, 1), 3.0, 1);
        assert_eq!(FourierPotential::zeros(b.clone()).h_norm(NormOrder::Gamma), 0.0);
        let phi = FourierPotential::from_rule(b, |l| {
            if *l == FrequencyIndex::single(1, 1) {
                1.0
            } else {
                0.0
            }
        });
        assert!((phi.h_norm(NormOrder::Gamma) - 2.0).abs() < 1e-15);
        assert!((phi.h_norm(NormOrder::GammaPlus2) - 8.0).abs() < 1e-15);
        assert!((phi.hessian_bound() - 32.0 * PI * PI).abs() < 1e-12);
    }

    #[test]
    fn truncation_filters_scales() {
        let map = SmoothnessMap::mixed(WeightRule::power(1.0, 1.0));
        let b = basis(map, 15.0, 3);
        let phi = FourierPotential::from_rule(b.clone(), |l| 1.0 / (1.0 + l.norm()));

        assert!(phi.truncate(2.0).unwrap().is_zero_len_or_zero());
        let same = phi.truncate(15.0).unwrap();
        assert_eq!(same.coeffs(), phi.coeffs());

        // Filter oracle: per-scale mass with (1+2α)γ(s) ≤ 9.
        let kept: f64 = b
            .terms()
            .iter()
            .zip(phi.coeffs())
            .filter(|(l, _)| 3.0 * map.gamma(&l.scale()).unwrap() <= 9.0)
            .map(|(_, w)| w * w)
            .sum();
        let t = phi.truncate(9.0).unwrap();
        let mass: f64 = t.coeffs().iter().map(|w| w * w).sum();
        assert!((mass - kept).abs() < 1e-15);
        assert!(t.h_norm(NormOrder::GammaPlus2) <= phi.h_norm(NormOrder::GammaPlus2));
    }

    #[test]
    fn parseval_on_periodic_grid() {
        let b = basis(SmoothnessMap::sobolev(2, 1), 6.0, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let phi = FourierPotential::from_rule(b, |_| rng.random_range(-1.0..1.0));
        let m = 128;
        let mut integral = 0.0;
        for i in 0..m {
            for j in 0..m {
                let v = phi.eval(&[i as f64 / m as f64, j as f64 / m as f64]);
                integral += v * v;
            }
        }
        integral /= (m * m) as f64;
        let energy: f64 = phi.coeffs().iter().map(|w| w * w).sum();
        assert!((integral - energy).abs() < 1e-6);
    }

    #[test]
    fn basis_orthonormal_on_grid() {
        let mut freqs = vec![FrequencyIndex::zero()];
        for a in -3i64..=3 {
            for b in -3i64..=3 {
                let mut e = Vec::new();
                if a != 0 {
                    e.push((1, a));
                }
                if b != 0 {
                    e.push((2, b));
                }
                if !e.is_empty() {
                    freqs.push(FrequencyIndex::new(e).unwrap());
                }
            }
        }
        let m = 128;
        for (i, l) in freqs.iter().enumerate() {
            for l2 in &freqs[i..] {
                let mut ip = 0.0;
                for p in 0..m {
                    for q in 0..m {
                        let x = [p as f64 / m as f64, q as f64 / m as f64];
                        ip += basis_eval(l, &x).unwrap() * basis_eval(l2, &x).unwrap();
                    }
                }
                ip /= (m * m) as f64;
                let want = if l == l2 { 1.0 } else { 0.0 };
                assert!((ip - want).abs() < 1e-6, "{l:?} {l2:?} {ip}");
            }
        }
    }

    #[test]
    fn record_roundtrip_preserves_values() {
        let b = basis(SmoothnessMap::mixed(WeightRule::power(1.0, 1.0)), 12.0, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let phi = FourierPotential::from_rule(b, |_| rng.random_range(-1.0..1.0));
        let json = serde_json::to_string(&phi.to_record()).unwrap();
        let back =
            FourierPotential::from_record(&serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back.coeffs(), phi.coeffs());
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert!(v.get("J").is_some() && v.get("entries").is_some());
    }

    impl FourierPotential {
        fn is_zero_len_or_zero(&self) -> bool {
            self.coeffs.iter().all(|&w| w == 0.0)
        }
    }
}
