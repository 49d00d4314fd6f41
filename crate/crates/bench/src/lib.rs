//! Shared inputs for the criterion benchmarks.

use std::sync::Arc;

use ndarray::Array2;
use otmap_core::experiments::{gen_pushforward_data, HockeyStickMap};
use otmap_core::fourier::{FourierBasis, FourierPotential};
use otmap_core::gamma::{SmoothnessMap, WeightRule};
use otmap_core::neural::{preset_config, MlpPotential, Preset};
use otmap_core::rng::stream_rng;

/// Hockey-stick sample pair with `q = 1`.
pub fn hockey_pair(n: usize, d: usize, seed: u64) -> (Array2<f64>, Array2<f64>) {
    let map = HockeyStickMap::new(d, 1.0).expect("valid hockey parameters");
    gen_pushforward_data(&map, n, seed)
}

/// Fourier potential on a mixed basis with small deterministic coefficients.
pub fn fourier_potential(d: usize, budget: f64) -> FourierPotential {
    let map = SmoothnessMap::mixed(WeightRule::power(1.0, 1.0));
    let basis = Arc::new(FourierBasis::new(map, budget, d).expect("basis fits the cap"));
    let mut k = 0.0;
    FourierPotential::from_rule(basis, |_| {
        k += 1.0;
        0.01 * (k * 0.7f64).sin() / k
    })
}

/// Randomly initialized network with the simulation architecture.
pub fn sim7_network(d: usize, seed: u64) -> MlpPotential {
    let map = HockeyStickMap::new(d, 1.0).expect("valid hockey parameters").smoothness_map();
    let cfg = preset_config(Preset::Sim7, &map, 100, d, seed).expect("preset builds");
    MlpPotential::init(cfg.architecture, cfg.bound, &mut stream_rng(seed, 0)).expect("valid architecture")
}
