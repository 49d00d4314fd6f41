//! Exact discrete optimal transport between empirical measures.
//!
//! With `n` source and `n` target atoms of equal mass the optimal plan is a
//! permutation, found by the shortest-augmenting-path (Hungarian) method on
//! the squared-Euclidean cost matrix. The nearest-neighbour plug-in estimator
//! sends a query to the plan image of its closest source atom.

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream_rng;

/// Largest problem size accepted by [`solve_assignment`].
pub const MAX_ASSIGNMENT_SIZE: usize = 5000;

/// Optimal coupling between two equal-size uniform empirical measures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    /// `assignment[i]` is the target index matched to source `i` (0-based).
    pub assignment: Vec<usize>,
    /// `Σ_i ‖X_i − Y_{σ(i)}‖²`.
    pub cost: f64,
}

impl TransportPlan {
    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn is_permutation(&self) -> bool {
        let mut seen = vec![false; self.assignment.len()];
        self.assignment
            .iter()
            .all(|&j| j < seen.len() && !std::mem::replace(&mut seen[j], true))
    }
}

/// Squared Euclidean distance over the first `dim` coordinates.
fn sq_dist(a: &[f64], b: &[f64], dim: usize) -> f64 {
    a[..dim]
        .iter()
        .zip(&b[..dim])
        .map(|(x, y)| (x - y) * (x - y))
        .sum()
}

fn row(m: &ArrayView2<'_, f64>, i: usize) -> Vec<f64> {
    m.row(i).to_vec()
}

/// Cost of pairing source `i` with target `σ(i)`, summed in source order.
pub fn assignment_cost(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, sigma: &[usize]) -> f64 {
    let d = x.ncols();
    sigma
        .iter()
        .enumerate()
        .map(|(i, &j)| sq_dist(&row(&x, i), &row(&y, j), d))
        .sum()
}

/// Exact optimal assignment for the squared-Euclidean cost.
pub fn solve_assignment(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> Result<TransportPlan> {
    solve_assignment_truncated(x, y, x.ncols())
}

/// [`solve_assignment`] with costs measured on the first `dim` coordinates only.
pub fn solve_assignment_truncated(
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    dim: usize,
) -> Result<TransportPlan> {
    let n = x.nrows();
    if y.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y.nrows(),
        });
    }
    if y.ncols() != x.ncols() {
        return Err(Error::DimensionMismatch {
            expected: x.ncols(),
            got: y.ncols(),
        });
    }
    if dim == 0 || dim > x.ncols() {
        return Err(Error::InvalidArgument(format!(
            "truncation dimension {dim} outside 1..={}",
            x.ncols()
        )));
    }
    if n > MAX_ASSIGNMENT_SIZE {
        return Err(Error::InvalidArgument(format!(
            "assignment size {n} exceeds {MAX_ASSIGNMENT_SIZE}"
        )));
    }
    if n == 0 {
        return Ok(TransportPlan {
            assignment: Vec::new(),
            cost: 0.0,
        });
    }
    let xs: Vec<Vec<f64>> = (0..n).map(|i| row(&x, i)).collect();
    let ys: Vec<Vec<f64>> = (0..n).map(|j| row(&y, j)).collect();
    let cost = Array2::from_shape_fn((n, n), |(i, j)| sq_dist(&xs[i], &ys[j], dim));
    let sigma = hungarian(&cost);
    let total = sigma.iter().enumerate().map(|(i, &j)| cost[[i, j]]).sum();
    Ok(TransportPlan {
        assignment: sigma,
        cost: total,
    })
}

/// Minimum-cost perfect matching on a square cost matrix; ties go to the lowest column.
fn hungarian(cost: &Array2<f64>) -> Vec<usize> {
    let n = cost.nrows();
    // 1-based with a virtual column 0.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut matched_row = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0f64; n + 1];
    let mut used = vec![false; n + 1];
    for i in 1..=n {
        matched_row[0] = i;
        let mut j0 = 0usize;
        minv.fill(f64::INFINITY);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[[i0 - 1, j - 1]] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut sigma = vec![0usize; n];
    for j in 1..=n {
        sigma[matched_row[j] - 1] = j - 1;
    }
    sigma
}

/// Nearest-neighbour plug-in transport estimator built on an optimal plan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NnPlanEstimator {
    pub x: Array2<f64>,
    pub y: Array2<f64>,
    pub plan: TransportPlan,
    /// Number of leading coordinates used for costs and neighbour search.
    pub dim: usize,
}

impl NnPlanEstimator {
    pub fn fit(x: Array2<f64>, y: Array2<f64>, dim: usize) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(Error::Empty("source sample"));
        }
        let plan = solve_assignment_truncated(x.view(), y.view(), dim)?;
        Ok(Self { x, y, plan, dim })
    }

    /// Index of the source atom closest to `q`; ties go to the lowest index.
    pub fn nearest_source(&self, q: &[f64]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, r) in self.x.rows().into_iter().enumerate() {
            let d: f64 = r
                .iter()
                .take(self.dim)
                .zip(q)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    pub fn transport(&self, q: &[f64]) -> Vec<f64> {
        let i = self.nearest_source(q);
        self.y.row(self.plan.assignment[i]).to_vec()
    }
}

/// Free-function form of [`NnPlanEstimator::transport`].
pub fn nn_transport(
    plan: &TransportPlan,
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    query: &[f64],
) -> Vec<f64> {
    let est = NnPlanEstimator {
        x: x.to_owned(),
        y: y.to_owned(),
        plan: plan.clone(),
        dim: x.ncols().min(query.len()),
    };
    est.transport(query)
}

/// 2-Wasserstein distance between two empirical measures.
///
/// Uniform weights with equal sizes reduce to an assignment problem; other
/// cases are solved as a transportation problem by successive shortest paths.
pub fn w2_distance(
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    weights: Option<(&[f64], &[f64])>,
) -> Result<f64> {
    if x.ncols() != y.ncols() {
        return Err(Error::DimensionMismatch {
            expected: x.ncols(),
            got: y.ncols(),
        });
    }
    if x.nrows() == 0 || y.nrows() == 0 {
        return Err(Error::Empty("empirical measure"));
    }
    match weights {
        None if x.nrows() == y.nrows() => {
            let plan = solve_assignment(x, y)?;
            Ok((plan.cost / x.nrows() as f64).max(0.0).sqrt())
        }
        None => {
            let a = vec![1.0 / x.nrows() as f64; x.nrows()];
            let b = vec![1.0 / y.nrows() as f64; y.nrows()];
            Ok(transportation_cost(x, y, &a, &b)?.max(0.0).sqrt())
        }
        Some((a, b)) => {
            if a.len() != x.nrows() || b.len() != y.nrows() {
                return Err(Error::DimensionMismatch {
                    expected: x.nrows(),
                    got: a.len(),
                });
            }
            let sa: f64 = a.iter().sum();
            let sb: f64 = b.iter().sum();
            if a.iter().chain(b).any(|w| !(*w >= 0.0)) || (sa - sb).abs() > 1e-9 * sa.max(1.0) {
                return Err(Error::InvalidArgument(
                    "weights must be nonnegative with equal totals".into(),
                ));
            }
            Ok((transportation_cost(x, y, a, b)? / sa).max(0.0).sqrt())
        }
    }
}

/// Minimum of `Σ f_ij ‖x_i − y_j‖²` over couplings with marginals `a`, `b`.
fn transportation_cost(
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    a: &[f64],
    b: &[f64],
) -> Result<f64> {
    let (n, m) = (x.nrows(), y.nrows());
    let d = x.ncols();
    let xs: Vec<Vec<f64>> = (0..n).map(|i| row(&x, i)).collect();
    let ys: Vec<Vec<f64>> = (0..m).map(|j| row(&y, j)).collect();
    let c = Array2::from_shape_fn((n, m), |(i, j)| sq_dist(&xs[i], &ys[j], d));
    let mut flow = Array2::<f64>::zeros((n, m));
    let mut supply = a.to_vec();
    let mut demand = b.to_vec();
    let total: f64 = supply.iter().sum();
    let eps = 1e-14 * total.max(1.0);
    // Node potentials keep reduced costs nonnegative for Dijkstra.
    let mut pot = vec![0.0f64; n + m];
    let max_rounds = 4 * (n + m) * (n + m) + 16;
    for _ in 0..max_rounds {
        if supply.iter().all(|&s| s <= eps) {
            break;
        }
        // Dense Dijkstra from all sources with remaining supply.
        let nodes = n + m;
        let mut dist = vec![f64::INFINITY; nodes];
        let mut prev = vec![usize::MAX; nodes];
        let mut done = vec![false; nodes];
        for i in 0..n {
            if supply[i] > eps {
                dist[i] = 0.0;
            }
        }
        loop {
            let mut u = usize::MAX;
            let mut best = f64::INFINITY;
            for k in 0..nodes {
                if !done[k] && dist[k] < best {
                    best = dist[k];
                    u = k;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            if u < n {
                for j in 0..m {
                    let t = n + j;
                    let rc = c[[u, j]] + pot[u] - pot[t];
                    let nd = dist[u] + rc.max(0.0);
                    if nd < dist[t] {
                        dist[t] = nd;
                        prev[t] = u;
                    }
                }
            } else {
                let j = u - n;
                for i in 0..n {
                    if flow[[i, j]] > eps {
                        let rc = -c[[i, j]] + pot[u] - pot[i];
                        let nd = dist[u] + rc.max(0.0);
                        if nd < dist[i] {
                            dist[i] = nd;
                            prev[i] = u;
                        }
                    }
                }
            }
        }
        let sink = (0..m)
            .filter(|&j| demand[j] > eps && dist[n + j].is_finite())
            .min_by(|&p, &q| dist[n + p].total_cmp(&dist[n + q]))
            .ok_or_else(|| Error::Numerical("transportation problem infeasible".into()))?;
        for k in 0..nodes {
            if dist[k].is_finite() {
                pot[k] += dist[k];
            }
        }
        // Bottleneck along the path.
        let mut amount = demand[sink];
        let mut node = n + sink;
        while prev[node] != usize::MAX {
            let p = prev[node];
            if p >= n {
                amount = amount.min(flow[[node, p - n]]);
            }
            node = p;
        }
        amount = amount.min(supply[node]);
        let origin = node;
        let mut node = n + sink;
        while prev[node] != usize::MAX {
            let p = prev[node];
            if p < n {
                flow[[p, node - n]] += amount;
            } else {
                flow[[node, p - n]] -= amount;
            }
            node = p;
        }
        supply[origin] -= amount;
        demand[sink] -= amount;
    }
    if supply.iter().any(|&s| s > 1e-9 * total.max(1.0)) {
        return Err(Error::Numerical(
            "transportation solver did not exhaust supply".into(),
        ));
    }
    Ok(flow
        .indexed_iter()
        .map(|((i, j), f)| f.max(0.0) * c[[i, j]])
        .sum())
}

/// Draws `n` points of the truncated Sobolev ellipsoid `Σ_{j≤d} j^{2b} θ_j² < 1`.
///
/// Coordinates are independent uniforms on `[0, j^{-b}]`; draws outside the
/// ellipsoid are rescaled radially to 0.999 times the boundary.
pub fn sample_sobolev_ellipsoid(b: f64, d: usize, n: usize, seed: u64) -> Array2<f64> {
    let mut rng = stream_rng(seed, 0x5eed_e11);
    let mut out = Array2::zeros((n, d));
    for mut r in out.rows_mut() {
        let mut q = 0.0;
        for (j, v) in r.iter_mut().enumerate() {
            let w = ((j + 1) as f64).powf(b);
            *v = rng.random::<f64>() / w;
            q += (w * *v).powi(2);
        }
        if q >= 1.0 {
            let s = 0.999 / q.sqrt();
            r.mapv_inplace(|v| v * s);
        }
    }
    out
}

/// `Σ_j j^{2b} θ_j²` for one point.
pub fn ellipsoid_norm_sq(b: f64, theta: &[f64]) -> f64 {
    theta
        .iter()
        .enumerate()
        .map(|(j, t)| ((j + 1) as f64).powf(2.0 * b) * t * t)
        .sum()
}
