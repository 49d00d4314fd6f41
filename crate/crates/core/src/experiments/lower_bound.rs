//! Numerical fixture for the packing construction behind the minimax lower bound.
//!
//! For `l ∈ I(S) = {0, …, 2^S − 1}^d` the bumps
//! `g_l = (2√2π)^{-2} 2^{-γ(S)} M^{-1/2} ‖l‖^{-1} ψ_l` (cosine products, `M = 2^{dS}`)
//! are combined with binary codes `τ^{(m)}` into Brenier potentials
//! `‖x‖²/2 + Σ_l τ_l g_l`. The fixture checks that the gradients of distinct
//! hypotheses are separated at the order `2^{-2γ(S)}`.

use std::f64::consts::{PI, SQRT_2};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gamma::{DyadicScale, SmoothnessMap};
use crate::rng::{named_seed, stream_rng};

/// Attempts allowed when drawing codes by rejection.
pub const CODE_RETRY_CAP: usize = 100_000;
/// Default Monte Carlo size for the separation integrals.
pub const DEFAULT_MC_POINTS: usize = 100_000;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairSeparation {
    pub first: usize,
    pub second: usize,
    pub hamming: usize,
    /// Monte Carlo estimate of `∫‖∇φ_m − ∇φ_{m'}‖²`.
    pub monte_carlo: f64,
    pub monte_carlo_se: f64,
    /// The same integral from orthogonality of the basis.
    pub exact: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LowerBoundReport {
    pub d: usize,
    #[serde(rename = "S")]
    pub s: u32,
    /// `M = |I(S)| = 2^{dS}`.
    pub m: usize,
    pub codes: Vec<Vec<u8>>,
    pub hamming_threshold: f64,
    pub min_hamming: usize,
    pub code_attempts: usize,
    pub gamma_s: f64,
    /// `‖∇g‖²_{H^γ}` for `g = Σ_l g_l`, which the construction keeps at most 1.
    pub gradient_norm_sq: f64,
    pub separations: Vec<PairSeparation>,
    pub min_separation: f64,
    /// `min_separation / 2^{-2γ(S)}`.
    pub fitted_constant: f64,
    pub mc_points: usize,
}

struct Bump {
    freq: Vec<u32>,
    coeff: f64,
    /// `2^{2γ(s(l))}` for the dyadic scale containing `l`.
    weight: f64,
}

fn bit_length(v: u32) -> u32 {
    32 - v.leading_zeros()
}

fn bumps(d: usize, s: u32, map: &SmoothnessMap, gamma_s: f64) -> Result<Vec<Bump>> {
    let side = 1u32 << s;
    let m = (side as usize).pow(d as u32);
    let mut out = Vec::with_capacity(m - 1);
    for idx in 1..m {
        let mut rest = idx;
        let mut freq = vec![0u32; d];
        for f in freq.iter_mut() {
            *f = (rest % side as usize) as u32;
            rest /= side as usize;
        }
        let norm = freq.iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt();
        let entries: Vec<(u32, u32)> = freq
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0)
            .map(|(i, &v)| (i as u32 + 1, bit_length(v)))
            .collect();
        let scale = DyadicScale::new(entries)?;
        let weight = 2f64.powf(2.0 * map.gamma(&scale)?);
        let coeff = (2.0 * SQRT_2 * PI).powi(-2) * 2f64.powf(-gamma_s) / (m as f64).sqrt() / norm;
        out.push(Bump { freq, coeff, weight });
    }
    Ok(out)
}

/// `∇g_l(x)` for the cosine product `ψ_l`, written into `out`.
fn bump_grad(b: &Bump, x: &[f64], out: &mut [f64]) {
    let d = b.freq.len();
    let mut cosv = vec![0.0; d];
    let mut sinv = vec![0.0; d];
    for i in 0..d {
        let w = 2.0 * PI * b.freq[i] as f64;
        let (s, c) = (w * x[i]).sin_cos();
        cosv[i] = if b.freq[i] == 0 { 1.0 } else { SQRT_2 * c };
        sinv[i] = SQRT_2 * s;
    }
    for j in 0..d {
        if b.freq[j] == 0 {
            out[j] = 0.0;
            continue;
        }
        let mut p = -2.0 * PI * b.freq[j] as f64 * sinv[j] * b.coeff;
        for i in 0..d {
            if i != j {
                p *= cosv[i];
            }
        }
        out[j] = p;
    }
}

fn hamming(a: &[u8], b: &[u8]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// Draws `k` binary codes of length `m` with pairwise Hamming distance at least `m/8`.
///
/// Position 0 multiplies the zero bump, so codes must also differ somewhere else.
pub fn draw_codes(m: usize, k: usize, seed: u64) -> Result<(Vec<Vec<u8>>, usize)> {
    let threshold = m as f64 / 8.0;
    let mut rng = stream_rng(named_seed(seed, "codes"), 0);
    let mut codes: Vec<Vec<u8>> = Vec::with_capacity(k);
    let mut attempts = 0;
    while codes.len() < k {
        if attempts >= CODE_RETRY_CAP {
            let min_distance = codes
                .iter()
                .enumerate()
                .flat_map(|(i, a)| codes[i + 1..].iter().map(move |b| hamming(a, b)))
                .min()
                .unwrap_or(0);
            return Err(Error::CodeGeneration {
                wanted: k,
                min_distance,
                tries: attempts,
            });
        }
        attempts += 1;
        let c: Vec<u8> = (0..m).map(|_| rng.random_range(0..=1u8)).collect();
        if codes
            .iter()
            .all(|o| hamming(o, &c) as f64 >= threshold && hamming(&o[1..], &c[1..]) > 0)
        {
            codes.push(c);
        }
    }
    Ok((codes, attempts))
}

/// Builds the hypotheses and measures their pairwise gradient separations.
pub fn lower_bound_fixture(
    d: usize,
    s: u32,
    map: &SmoothnessMap,
    k: usize,
    seed: u64,
    mc_points: usize,
) -> Result<LowerBoundReport> {
    if d == 0 || s == 0 {
        return Err(Error::InvalidArgument("fixture needs d ≥ 1 and S ≥ 1".into()));
    }
    if k < 2 {
        return Err(Error::InvalidArgument("fixture needs at least two codes".into()));
    }
    if mc_points == 0 {
        return Err(Error::Empty("Monte Carlo sample"));
    }
    let m = 1usize
        .checked_shl(s * d as u32)
        .filter(|&m| m <= 1 << 16)
        .ok_or_else(|| Error::InvalidArgument(format!("2^(dS) too large for d={d}, S={s}")))?;
    let full = DyadicScale::new((1..=d as u32).map(|i| (i, s)).collect())?;
    let gamma_s = map.gamma(&full)?;
    let bumps = bumps(d, s, map, gamma_s)?;
    let (codes, attempts) = draw_codes(m, k, seed)?;

    let unit = 2f64.powf(-2.0 * gamma_s) / (16.0 * PI * PI * m as f64);
    let gradient_norm_sq: f64 = bumps.iter().map(|b| b.weight * unit).sum();

    let pairs: Vec<(usize, usize)> = (0..k)
        .flat_map(|a| (a + 1..k).map(move |b| (a, b)))
        .collect();
    // Bump index t corresponds to code position t + 1 (position 0 is g_0 = 0).
    let diffs: Vec<Vec<f64>> = pairs
        .iter()
        .map(|&(a, b)| {
            bumps
                .iter()
                .enumerate()
                .map(|(t, _)| codes[a][t + 1] as f64 - codes[b][t + 1] as f64)
                .collect()
        })
        .collect();

    let mut rng = stream_rng(named_seed(seed, "fixture-mc"), 0);
    let mut sum = vec![0.0; pairs.len()];
    let mut sum_sq = vec![0.0; pairs.len()];
    let mut grads = vec![vec![0.0; d]; bumps.len()];
    let mut x = vec![0.0; d];
    let mut acc = vec![0.0; d];
    for _ in 0..mc_points {
        for v in x.iter_mut() {
            *v = rng.random();
        }
        for (b, g) in bumps.iter().zip(grads.iter_mut()) {
            bump_grad(b, &x, g);
        }
        for (p, diff) in diffs.iter().enumerate() {
            acc.fill(0.0);
            for (t, &w) in diff.iter().enumerate() {
                if w != 0.0 {
                    for (a, g) in acc.iter_mut().zip(&grads[t]) {
                        *a += w * g;
                    }
                }
            }
            let v: f64 = acc.iter().map(|a| a * a).sum();
            sum[p] += v;
            sum_sq[p] += v * v;
        }
    }
    let nmc = mc_points as f64;
    let separations: Vec<PairSeparation> = pairs
        .iter()
        .enumerate()
        .map(|(p, &(a, b))| {
            let mean = sum[p] / nmc;
            let var = (sum_sq[p] / nmc - mean * mean).max(0.0);
            let differing = (1..m).filter(|&t| codes[a][t] != codes[b][t]).count();
            PairSeparation {
                first: a,
                second: b,
                hamming: hamming(&codes[a], &codes[b]),
                monte_carlo: mean,
                monte_carlo_se: (var / nmc).sqrt(),
                exact: differing as f64 * unit,
            }
        })
        .collect();
    let min_separation = separations
        .iter()
        .map(|p| p.monte_carlo)
        .fold(f64::INFINITY, f64::min);
    let min_hamming = separations.iter().map(|p| p.hamming).min().unwrap_or(0);
    Ok(LowerBoundReport {
        d,
        s,
        m,
        codes,
        hamming_threshold: m as f64 / 8.0,
        min_hamming,
        code_attempts: attempts,
        gamma_s,
        gradient_norm_sq,
        separations,
        min_separation,
        fitted_constant: min_separation / 2f64.powf(-2.0 * gamma_s),
        mc_points,
    })
}
