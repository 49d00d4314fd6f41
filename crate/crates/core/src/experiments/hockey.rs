//! The hockey-stick ground-truth transport map.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gamma::{SmoothnessMap, WeightRule};
use crate::rng::stream_rng;

/// `(T_0(x))_i = x_i − |x_i − 0.5|^{κ(i)} / κ(i)` with `κ(i) = i^{0.1q} + q + 0.6`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HockeyStickMap {
    pub d: usize,
    pub q: f64,
}

impl HockeyStickMap {
    pub fn new(d: usize, q: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument("hockey-stick dimension is 0".into()));
        }
        if !(q > 0.0) || !q.is_finite() {
            return Err(Error::InvalidArgument(format!("hockey-stick q = {q} must be positive")));
        }
        Ok(Self { d, q })
    }

    /// Exponent of axis `i` (1-based).
    pub fn kappa(&self, i: usize) -> f64 {
        (i as f64).powf(0.1 * self.q) + self.q + 0.6
    }

    /// Image of `[0,1]` under axis `i`: `[−0.5^κ/κ, 1 − 0.5^κ/κ]`.
    ///
    /// The lower end is negative, so targets leave the unit box slightly near 0.
    pub fn axis_range(&self, i: usize) -> (f64, f64) {
        let k = self.kappa(i);
        let dip = 0.5f64.powf(k) / k;
        (-dip, 1.0 - dip)
    }

    pub fn eval_axis(&self, i: usize, t: f64) -> f64 {
        let k = self.kappa(i);
        t - (t - 0.5).abs().powf(k) / k
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(i, &t)| self.eval_axis(i + 1, t))
            .collect()
    }

    /// Mixed-smooth map with weights `a_i = κ(i) + 1/2` for the Fourier blocks of `T_0`.
    pub fn smoothness_map(&self) -> SmoothnessMap {
        SmoothnessMap::mixed(WeightRule::Power {
            scale: 1.0,
            exponent: 0.1 * self.q,
            offset: self.q + 1.1,
        })
    }

    /// First weight as stated in the paper's simulation section, `a_1 = q − 0.4`.
    pub fn paper_a1(&self) -> f64 {
        self.q - 0.4
    }

    /// `−2a₁/(2a₁+1)` with the paper's `a₁`.
    pub fn theory_exponent(&self) -> f64 {
        let a = self.paper_a1();
        -2.0 * a / (2.0 * a + 1.0)
    }
}

/// `n × d` matrix of independent uniforms on `[0,1]`.
pub fn uniform_sample(n: usize, d: usize, seed: u64, stream: u64) -> Array2<f64> {
    let mut rng = stream_rng(seed, stream);
    Array2::from_shape_fn((n, d), |_| rng.random())
}

/// Source sample `X ~ Unif[0,1]^d` and target sample `Y = T_0(X')` with `X'` an
/// independent uniform sample.
pub fn gen_pushforward_data(map: &HockeyStickMap, n: usize, seed: u64) -> (Array2<f64>, Array2<f64>) {
    let x = uniform_sample(n, map.d, seed, 1);
    let mut y = uniform_sample(n, map.d, seed, 2);
    for mut r in y.rows_mut() {
        for (i, v) in r.iter_mut().enumerate() {
            *v = map.eval_axis(i + 1, *v);
        }
    }
    (x, y)
}
