//! Functional-data front end: cosine coefficients in `[0,1]`, transport of
//! coefficient vectors, and the Avg-DTW score.
//!
//! Coefficients use `u_j(t) = √(2/|I|)·cos(πj(t−t₀)/|I|)` for `j ≥ 1` (the
//! constant mode is dropped, functions are taken to be centered) with
//! trapezoid quadrature. On a uniform grid this is the type-I DCT, so the
//! discrete system is exactly orthonormal up to `j = len − 2`.

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Discretized functions on a common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionSample {
    grid: Grid,
    /// `n_functions × n_points`, row-major over the grid for planar data.
    values: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Grid {
    /// Strictly increasing abscissae of an interval `I`.
    Line { points: Vec<f64> },
    /// Uniform `rows × cols` grid on `[0,1]²` including the edges, flattened row-major.
    Plane { rows: usize, cols: usize },
}

impl Grid {
    pub fn len(&self) -> usize {
        match self {
            Grid::Line { points } => points.len(),
            Grid::Plane { rows, cols } => rows * cols,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn validate(&self) -> Result<()> {
        match self {
            Grid::Line { points } => {
                if points.len() < 2 {
                    return Err(Error::InvalidArgument("grid needs at least 2 points".into()));
                }
                if points.iter().any(|t| !t.is_finite()) {
                    return Err(Error::InvalidArgument("grid has non-finite abscissae".into()));
                }
                if let Some(w) = points.windows(2).find(|w| w[1] <= w[0]) {
                    return Err(Error::InvalidArgument(format!(
                        "grid is not strictly increasing at {} → {}",
                        w[0], w[1]
                    )));
                }
            }
            Grid::Plane { rows, cols } => {
                if *rows < 2 || *cols < 2 {
                    return Err(Error::InvalidArgument(format!(
                        "planar grid {rows}×{cols} needs at least 2 points per side"
                    )));
                }
            }
        }
        Ok(())
    }
}

impl FunctionSample {
    pub fn new(grid: Grid, values: Array2<f64>) -> Result<Self> {
        grid.validate()?;
        if values.ncols() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: values.ncols(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("function values must be finite".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn line(points: Vec<f64>, values: Array2<f64>) -> Result<Self> {
        Self::new(Grid::Line { points }, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn n_functions(&self) -> usize {
        self.values.nrows()
    }
}

/// Uniform grid of `len` points on `[a, b]`.
pub fn uniform_grid(a: f64, b: f64, len: usize) -> Vec<f64> {
    let step = (b - a) / (len.max(2) - 1) as f64;
    (0..len).map(|k| a + step * k as f64).collect()
}

/// Trapezoid weights of a 1-d grid.
fn trapezoid_weights(points: &[f64]) -> Vec<f64> {
    let mut w = vec![0.0; points.len()];
    for (k, pair) in points.windows(2).enumerate() {
        let h = 0.5 * (pair[1] - pair[0]);
        w[k] += h;
        w[k + 1] += h;
    }
    w
}

/// `u_j` sampled on a 1-d grid, `j = 1..=count`, as a `count × len` matrix.
fn cosine_table(points: &[f64], count: usize) -> Array2<f64> {
    let t0 = points[0];
    let len = points[points.len() - 1] - t0;
    let scale = (2.0 / len).sqrt();
    Array2::from_shape_fn((count, points.len()), |(j, k)| {
        scale * (std::f64::consts::PI * (j + 1) as f64 * (points[k] - t0) / len).cos()
    })
}

/// How coefficients are produced and scaled into `[0,1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoeffConfig {
    /// Number of cosine modes per axis: `d = n_coeffs` on a line, `n_coeffs²` on a plane.
    pub n_coeffs: usize,
    pub c1: f64,
    pub c2: f64,
}

impl CoeffConfig {
    /// Length of the coefficient vectors for `grid`.
    pub fn dim(&self, grid: &Grid) -> usize {
        match grid {
            Grid::Line { .. } => self.n_coeffs,
            Grid::Plane { .. } => self.n_coeffs * self.n_coeffs,
        }
    }

    fn validate(&self, grid: &Grid) -> Result<()> {
        if self.n_coeffs == 0 {
            return Err(Error::InvalidArgument("n_coeffs is 0".into()));
        }
        let limit = match grid {
            Grid::Line { points } => points.len() - 1,
            Grid::Plane { rows, cols } => rows.min(cols) - 1,
        };
        if self.n_coeffs > limit {
            return Err(Error::InvalidArgument(format!(
                "{} cosine modes do not fit a grid with {} points per side",
                self.n_coeffs,
                limit + 1
            )));
        }
        if !(self.c1 > 0.0) || !self.c1.is_finite() || !self.c2.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "scaling (c1 = {}, c2 = {}) must be finite with c1 > 0",
                self.c1, self.c2
            )));
        }
        Ok(())
    }
}

/// Margin added on both sides of the raw coefficient range by [`calibrate`].
pub const CALIBRATION_MARGIN: f64 = 0.05;

/// Unscaled inner products `∫X_i u_j`, `n × dim`.
pub fn raw_coeffs(fs: &FunctionSample, n_coeffs: usize) -> Result<Array2<f64>> {
    let probe = CoeffConfig {
        n_coeffs,
        c1: 1.0,
        c2: 0.0,
    };
    probe.validate(&fs.grid)?;
    Ok(match &fs.grid {
        Grid::Line { points } => {
            let w = trapezoid_weights(points);
            let table = cosine_table(points, n_coeffs) * &ndarray::aview1(&w);
            fs.values.dot(&table.t())
        }
        Grid::Plane { rows, cols } => {
            let rp = uniform_grid(0.0, 1.0, *rows);
            let cp = uniform_grid(0.0, 1.0, *cols);
            let ur = cosine_table(&rp, n_coeffs) * &ndarray::aview1(&trapezoid_weights(&rp));
            let uc = cosine_table(&cp, n_coeffs) * &ndarray::aview1(&trapezoid_weights(&cp));
            let mut out = Array2::zeros((fs.n_functions(), n_coeffs * n_coeffs));
            for (f, mut o) in fs.values.outer_iter().zip(out.outer_iter_mut()) {
                let img = f
                    .to_owned()
                    .into_shape_with_order((*rows, *cols))
                    .expect("length checked at construction");
                let c = ur.dot(&img).dot(&uc.t());
                o.assign(&ndarray::aview1(c.as_slice().expect("standard layout")));
            }
            out
        }
    })
}

/// Chooses `c1, c2` so the raw coefficient range, widened by 5% on each side, maps onto `[0,1]`.
pub fn calibrate(fs: &FunctionSample, n_coeffs: usize) -> Result<CoeffConfig> {
    let raw = raw_coeffs(fs, n_coeffs)?;
    if raw.is_empty() {
        return Err(Error::Empty("function sample"));
    }
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = if hi > lo { hi - lo } else { 1.0 };
    let lo = lo - CALIBRATION_MARGIN * range;
    let hi = hi + CALIBRATION_MARGIN * range;
    let c1 = 1.0 / (hi - lo);
    Ok(CoeffConfig {
        n_coeffs,
        c1,
        c2: -lo * c1,
    })
}

/// Scaled coefficients `w_ij = c1·∫X_i u_j + c2`; errors if any falls outside `[0,1]`.
pub fn to_coeffs(fs: &FunctionSample, cfg: &CoeffConfig) -> Result<Array2<f64>> {
    cfg.validate(&fs.grid)?;
    let mut w = raw_coeffs(fs, cfg.n_coeffs)?;
    w.mapv_inplace(|v| cfg.c1 * v + cfg.c2);
    for ((row, col), &v) in w.indexed_iter() {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Calibration { row, col, value: v });
        }
    }
    Ok(w)
}

/// Synthesizes `Σ_j θ_j u_j` on `grid` from scaled coefficients `w = c1·θ + c2`.
pub fn from_coeffs(coeffs: ArrayView2<'_, f64>, cfg: &CoeffConfig, grid: &Grid) -> Result<FunctionSample> {
    grid.validate()?;
    cfg.validate(grid)?;
    let dim = cfg.dim(grid);
    if coeffs.ncols() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: coeffs.ncols(),
        });
    }
    let theta = coeffs.mapv(|w| (w - cfg.c2) / cfg.c1);
    let values = match grid {
        Grid::Line { points } => theta.dot(&cosine_table(points, cfg.n_coeffs)),
        Grid::Plane { rows, cols } => {
            let ur = cosine_table(&uniform_grid(0.0, 1.0, *rows), cfg.n_coeffs);
            let uc = cosine_table(&uniform_grid(0.0, 1.0, *cols), cfg.n_coeffs);
            let mut out = Array2::zeros((theta.nrows(), rows * cols));
            for (t, mut o) in theta.outer_iter().zip(out.outer_iter_mut()) {
                let c = t
                    .to_owned()
                    .into_shape_with_order((cfg.n_coeffs, cfg.n_coeffs))
                    .expect("length checked above");
                let img = ur.t().dot(&c).dot(&uc);
                o.assign(&ndarray::aview1(img.as_slice().expect("standard layout")));
            }
            out
        }
    };
    FunctionSample::new(grid.clone(), values)
}

/// `to_coeffs`, then `transport` on every coefficient vector, then `from_coeffs`.
pub fn transport_functions<F>(fs: &FunctionSample, transport: F, cfg: &CoeffConfig) -> Result<FunctionSample>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let w = to_coeffs(fs, cfg)?;
    let dim = w.ncols();
    let mut moved = Array2::zeros(w.raw_dim());
    for (row, mut out) in w.outer_iter().zip(moved.outer_iter_mut()) {
        let t = transport(row.as_slice().expect("standard layout"));
        if t.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: t.len(),
            });
        }
        out.assign(&ndarray::aview1(&t));
    }
    from_coeffs(moved.view(), cfg, &fs.grid)
}

/// Dynamic time warping with squared pointwise cost and no band.
pub fn dtw(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("series"));
    }
    let m = b.len();
    let mut prev = vec![f64::INFINITY; m];
    let mut cur = vec![0.0; m];
    for (i, &ai) in a.iter().enumerate() {
        for j in 0..m {
            let c = (ai - b[j]).powi(2);
            let best = match (i, j) {
                (0, 0) => 0.0,
                (0, _) => cur[j - 1],
                (_, 0) => prev[0],
                _ => prev[j].min(cur[j - 1]).min(prev[j - 1]),
            };
            cur[j] = c + best;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[m - 1])
}

/// Mean over grid coordinates of the DTW between the two series of values at
/// that coordinate, the series running over the functions of each sample.
pub fn avg_dtw(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Result<f64> {
    if a.ncols() != b.ncols() {
        return Err(Error::DimensionMismatch {
            expected: a.ncols(),
            got: b.ncols(),
        });
    }
    if a.ncols() == 0 {
        return Err(Error::Empty("grid"));
    }
    let mut total = 0.0;
    for (ca, cb) in a.axis_iter(Axis(1)).zip(b.axis_iter(Axis(1))) {
        total += dtw(&ca.to_vec(), &cb.to_vec())?;
    }
    Ok(total / a.ncols() as f64)
}
