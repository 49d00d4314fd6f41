//! Smoothness maps, dyadic scales and frequency enumeration.
//!
//! A smoothness map assigns a positive weight to every dyadic scale
//! `s ∈ N^∞_0`. Three families are supported: the isotropic Sobolev map
//! `k·max(s_1..s_d)`, the mixed-smooth map `Σ a_i s_i` and the anisotropic map
//! `max a_i s_i`. Weight sequences are closed-form rules so any axis can be
//! addressed without storage.
//!
//! Axes are 1-based throughout, matching the coordinate labels of points:
//! axis `i` refers to `x[i - 1]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on the number of scales or frequencies a single enumeration may produce.
pub const DEFAULT_ENUMERATION_CAP: usize = 1_000_000;

// Axis searches that reach this index are treated as unbounded.
const AXIS_SEARCH_LIMIT: usize = 1 << 32;

/// Sparse dyadic scale `s`: `(axis, s_axis)` pairs with `s_axis ≥ 1`, axes strictly increasing.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<(u32, u32)>", into = "Vec<(u32, u32)>")]
pub struct DyadicScale {
    entries: Vec<(u32, u32)>,
}

impl DyadicScale {
    pub fn new(entries: Vec<(u32, u32)>) -> Result<Self> {
        check_axes(entries.iter().map(|e| e.0))?;
        if let Some(&(axis, _)) = entries.iter().find(|e| e.1 == 0) {
            return Err(Error::InvalidArgument(format!(
                "scale on axis {axis} is zero; omit the axis instead"
            )));
        }
        Ok(Self { entries })
    }

    /// The all-zero scale.
    pub fn zero() -> Self {
        Self { entries: Vec::new() }
    }

    /// Scale `level` on a single axis.
    pub fn single(axis: u32, level: u32) -> Self {
        assert!(axis >= 1 && level >= 1);
        Self {
            entries: vec![(axis, level)],
        }
    }

    pub fn entries(&self) -> &[(u32, u32)] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    /// `Σ s_i`.
    pub fn total(&self) -> u64 {
        self.entries.iter().map(|&(_, s)| s as u64).sum()
    }

    pub fn max_axis(&self) -> usize {
        self.entries.last().map_or(0, |e| e.0 as usize)
    }
}

impl TryFrom<Vec<(u32, u32)>> for DyadicScale {
    type Error = Error;
    fn try_from(v: Vec<(u32, u32)>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<DyadicScale> for Vec<(u32, u32)> {
    fn from(s: DyadicScale) -> Self {
        s.entries
    }
}

/// Sparse frequency multi-index `l`: `(axis, l_axis)` pairs with `l_axis ≠ 0`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<(u32, i64)>", into = "Vec<(u32, i64)>")]
pub struct FrequencyIndex {
    entries: Vec<(u32, i64)>,
}

impl FrequencyIndex {
    pub fn new(entries: Vec<(u32, i64)>) -> Result<Self> {
        check_axes(entries.iter().map(|e| e.0))?;
        if let Some(&(axis, _)) = entries.iter().find(|e| e.1 == 0) {
            return Err(Error::InvalidArgument(format!(
                "frequency on axis {axis} is zero; omit the axis instead"
            )));
        }
        Ok(Self { entries })
    }

    pub fn zero() -> Self {
        Self { entries: Vec::new() }
    }

    pub fn single(axis: u32, freq: i64) -> Self {
        assert!(axis >= 1 && freq != 0);
        Self {
            entries: vec![(axis, freq)],
        }
    }

    pub fn entries(&self) -> &[(u32, i64)] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_axis(&self) -> usize {
        self.entries.last().map_or(0, |e| e.0 as usize)
    }

    /// Euclidean norm `‖l‖`.
    pub fn norm(&self) -> f64 {
        self.entries
            .iter()
            .map(|&(_, l)| (l as f64) * (l as f64))
            .sum::<f64>()
            .sqrt()
    }

    /// The unique dyadic scale whose block contains this frequency.
    pub fn scale(&self) -> DyadicScale {
        DyadicScale {
            entries: self
                .entries
                .iter()
                .map(|&(axis, l)| (axis, 64 - l.unsigned_abs().leading_zeros()))
                .collect(),
        }
    }
}

impl TryFrom<Vec<(u32, i64)>> for FrequencyIndex {
    type Error = Error;
    fn try_from(v: Vec<(u32, i64)>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<FrequencyIndex> for Vec<(u32, i64)> {
    fn from(l: FrequencyIndex) -> Self {
        l.entries
    }
}

fn check_axes(axes: impl Iterator<Item = u32>) -> Result<()> {
    let mut prev = 0u32;
    for axis in axes {
        if axis == 0 {
            return Err(Error::InvalidArgument("axes are 1-based".into()));
        }
        if axis <= prev {
            return Err(Error::InvalidArgument(format!(
                "axes must be strictly increasing (saw {axis} after {prev})"
            )));
        }
        prev = axis;
    }
    Ok(())
}

/// Closed-form positive, nondecreasing weight sequence `i ↦ a_i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum WeightRule {
    /// `a_i = scale · i^exponent + offset`.
    Power {
        scale: f64,
        exponent: f64,
        #[serde(default)]
        offset: f64,
    },
    /// `a_i = scale · base^i`.
    Geometric { scale: f64, base: f64 },
}

impl WeightRule {
    /// `a_i = c · i^q`.
    pub fn power(scale: f64, exponent: f64) -> Self {
        WeightRule::Power {
            scale,
            exponent,
            offset: 0.0,
        }
    }

    pub fn weight(&self, axis: usize) -> f64 {
        let i = axis as f64;
        match *self {
            WeightRule::Power {
                scale,
                exponent,
                offset,
            } => scale * i.powf(exponent) + offset,
            WeightRule::Geometric { scale, base } => scale * base.powf(i),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            WeightRule::Power {
                scale,
                exponent,
                offset,
            } => {
                scale.is_finite()
                    && exponent.is_finite()
                    && offset.is_finite()
                    && scale > 0.0
                    && exponent >= 0.0
                    && scale + offset > 0.0
            }
            WeightRule::Geometric { scale, base } => {
                scale.is_finite() && base.is_finite() && scale > 0.0 && base >= 1.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidMap(format!(
                "weights must be positive and nondecreasing: {self:?}"
            )))
        }
    }

    /// Polynomial growth order `q` with `a_i = Ω(i^q)`; infinite for geometric rules.
    pub fn growth_exponent(&self) -> f64 {
        match *self {
            WeightRule::Power { exponent, .. } => exponent,
            WeightRule::Geometric { base, .. } if base > 1.0 => f64::INFINITY,
            WeightRule::Geometric { .. } => 0.0,
        }
    }

    /// `Σ_i 1/a_i`, or `+∞` when the series diverges.
    ///
    /// Power rules sum the first terms directly and close the tail with the
    /// midpoint Euler–Maclaurin formula (integral plus first derivative
    /// correction), which is accurate well below 1e-12 once the head covers
    /// a thousand terms.
    pub fn reciprocal_sum(&self) -> f64 {
        match *self {
            WeightRule::Geometric { scale, base } => {
                if base <= 1.0 {
                    f64::INFINITY
                } else {
                    1.0 / (scale * (base - 1.0))
                }
            }
            WeightRule::Power {
                scale,
                exponent,
                offset,
            } => {
                if exponent <= 1.0 {
                    return f64::INFINITY;
                }
                const HEAD: usize = 2000;
                // Sum smallest terms first.
                let head: f64 = (1..=HEAD).rev().map(|i| 1.0 / self.weight(i)).sum();
                let m = HEAD as f64 + 0.5;
                let p = exponent;
                let tail_integral = if offset == 0.0 {
                    m.powf(1.0 - p) / (scale * (p - 1.0))
                } else {
                    // x = m t^{-1/(p-1)} maps [m, ∞) onto (0, 1].
                    let cm = scale * m.powf(p);
                    let r = p / (p - 1.0);
                    simpson(|t| (m / (p - 1.0)) / (cm + offset * t.powf(r)), 0.0, 1.0, 256)
                };
                let deriv =
                    -scale * p * m.powf(p - 1.0) / (scale * m.powf(p) + offset).powi(2);
                head + tail_integral + deriv / 24.0
            }
        }
    }
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let n = intervals + intervals % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + k as f64 * h);
    }
    acc * h / 3.0
}

/// Smoothness map `γ: N^∞_0 → R_{≥0}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum SmoothnessMap {
    /// `γ(s) = k · max{s_1, …, s_d}`; axes beyond `d` are not allowed.
    SobolevDk { d: usize, k: usize },
    /// `γ(s) = Σ a_i s_i`.
    Mixed { weights: WeightRule },
    /// `γ(s) = max_i a_i s_i`.
    Anisotropic { weights: WeightRule },
}

#[derive(Clone, Copy)]
enum Combine {
    Sum,
    Max,
}

/// Bounds applied when enumerating scales.
#[derive(Debug, Clone, Copy)]
pub struct EnumerationLimits {
    /// Largest axis allowed to appear (e.g. the ambient dimension).
    pub max_axis: Option<usize>,
    pub cap: usize,
}

impl Default for EnumerationLimits {
    fn default() -> Self {
        Self {
            max_axis: None,
            cap: DEFAULT_ENUMERATION_CAP,
        }
    }
}

impl SmoothnessMap {
    pub fn sobolev(d: usize, k: usize) -> Self {
        SmoothnessMap::SobolevDk { d, k }
    }

    pub fn mixed(weights: WeightRule) -> Self {
        SmoothnessMap::Mixed { weights }
    }

    pub fn anisotropic(weights: WeightRule) -> Self {
        SmoothnessMap::Anisotropic { weights }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SmoothnessMap::SobolevDk { d, k } => {
                if *d == 0 || *k == 0 {
                    return Err(Error::InvalidMap(format!(
                        "sobolev map needs d >= 1 and k >= 1 (got d={d}, k={k})"
                    )));
                }
                Ok(())
            }
            SmoothnessMap::Mixed { weights } | SmoothnessMap::Anisotropic { weights } => {
                weights.validate()
            }
        }
    }

    /// Largest axis the family is defined on, if finite.
    pub fn axis_limit(&self) -> Option<usize> {
        match self {
            SmoothnessMap::SobolevDk { d, .. } => Some(*d),
            _ => None,
        }
    }

    /// `γ(e_axis)`: the value on the unit scale of a single axis.
    pub fn axis_weight(&self, axis: usize) -> f64 {
        match self {
            SmoothnessMap::SobolevDk { k, .. } => *k as f64,
            SmoothnessMap::Mixed { weights } | SmoothnessMap::Anisotropic { weights } => {
                weights.weight(axis)
            }
        }
    }

    fn combine(&self) -> Combine {
        match self {
            SmoothnessMap::Mixed { .. } => Combine::Sum,
            _ => Combine::Max,
        }
    }

    /// `γ(s)`; zero for the empty scale.
    pub fn gamma(&self, s: &DyadicScale) -> Result<f64> {
        if let Some(limit) = self.axis_limit() {
            if s.max_axis() > limit {
                return Err(Error::AxisOutOfRange {
                    axis: s.max_axis(),
                    limit,
                });
            }
        }
        let mut acc = 0.0f64;
        for &(axis, level) in s.entries() {
            let term = self.axis_weight(axis as usize) * level as f64;
            acc = match self.combine() {
                Combine::Sum => acc + term,
                Combine::Max => acc.max(term),
            };
        }
        Ok(acc)
    }

    /// Inverse smoothness index `α(γ)` in closed form.
    pub fn alpha(&self) -> f64 {
        match self {
            SmoothnessMap::SobolevDk { d, k } => *d as f64 / *k as f64,
            SmoothnessMap::Mixed { weights } => 1.0 / weights.weight(1),
            SmoothnessMap::Anisotropic { weights } => weights.reciprocal_sum(),
        }
    }

    /// `α(γ)`, failing when it is infinite.
    pub fn finite_alpha(&self) -> Result<f64> {
        let a = self.alpha();
        if a.is_finite() {
            Ok(a)
        } else {
            Err(Error::InfiniteAlpha)
        }
    }

    /// Largest axis `i` with `pred(γ(e_i))`; `Ok(0)` if none, error if unbounded.
    fn last_axis_where(&self, pred: impl Fn(f64) -> bool) -> Result<usize> {
        let hard = self.axis_limit().unwrap_or(AXIS_SEARCH_LIMIT);
        let ok = |i: usize| pred(self.axis_weight(i));
        if !ok(1) {
            return Ok(0);
        }
        // Weights are nondecreasing, so the predicate is monotone in the axis.
        let mut lo = 1usize;
        let mut hi = 2usize;
        while hi <= hard && ok(hi) {
            lo = hi;
            hi = hi.saturating_mul(2);
        }
        if hi > hard {
            if ok(hard) {
                return if self.axis_limit().is_some() {
                    Ok(hard)
                } else {
                    Err(Error::EnumerationCap {
                        what: "axes",
                        cap: AXIS_SEARCH_LIMIT,
                    })
                };
            }
            hi = hard;
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if ok(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo)
    }

    /// All nonzero scales with `(1 + 2α)·γ(s) ≤ budget`, in lexicographic order.
    pub fn enumerate_scales(&self, budget: f64) -> Result<Vec<DyadicScale>> {
        self.enumerate_scales_with(budget, EnumerationLimits::default())
    }

    pub fn enumerate_scales_with(
        &self,
        budget: f64,
        limits: EnumerationLimits,
    ) -> Result<Vec<DyadicScale>> {
        self.validate()?;
        if !(budget > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "budget must be positive, got {budget}"
            )));
        }
        let factor = 1.0 + 2.0 * self.finite_alpha()?;
        let admissible = |g: f64| factor * g <= budget;
        let mut last = self.last_axis_where(admissible)?;
        if let Some(m) = limits.max_axis {
            last = last.min(m);
        }
        let mut out = Vec::new();
        let mut current = Vec::new();
        let mut walker = ScaleWalker {
            map: self,
            factor,
            budget,
            last_axis: last,
            cap: limits.cap,
            out: &mut out,
        };
        walker.walk(1, 0.0, &mut current)?;
        out.sort();
        Ok(out)
    }

    /// `max{i : (1 + 2α)·γ(e_i) < J}`, floored at 1.
    pub fn d_max(&self, budget: f64) -> Result<usize> {
        self.validate()?;
        let factor = 1.0 + 2.0 * self.finite_alpha()?;
        Ok(self.last_axis_where(|g| factor * g < budget)?.max(1))
    }

    /// `⌊(1 + 2α)/(2 + α) · log₂ n⌋`, floored at 1.
    pub fn select_j(&self, n: usize) -> Result<usize> {
        let a = self.finite_alpha()?;
        if n == 0 {
            return Err(Error::Empty("sample"));
        }
        let j = ((1.0 + 2.0 * a) / (2.0 + a) * (n as f64).log2()).floor();
        Ok((j as usize).max(1))
    }
}

struct ScaleWalker<'a> {
    map: &'a SmoothnessMap,
    factor: f64,
    budget: f64,
    last_axis: usize,
    cap: usize,
    out: &'a mut Vec<DyadicScale>,
}

impl ScaleWalker<'_> {
    fn walk(&mut self, first_axis: usize, acc: f64, current: &mut Vec<(u32, u32)>) -> Result<()> {
        for axis in first_axis..=self.last_axis {
            let w = self.map.axis_weight(axis);
            let mut level = 1u32;
            loop {
                let term = w * level as f64;
                let next = match self.map.combine() {
                    Combine::Sum => acc + term,
                    Combine::Max => acc.max(term),
                };
                if self.factor * next > self.budget {
                    break;
                }
                current.push((axis as u32, level));
                if self.out.len() >= self.cap {
                    return Err(Error::EnumerationCap {
                        what: "scales",
                        cap: self.cap,
                    });
                }
                self.out.push(DyadicScale {
                    entries: current.clone(),
                });
                self.walk(axis + 1, next, current)?;
                current.pop();
                level += 1;
            }
            if level == 1 {
                // Later axes are at least as heavy.
                break;
            }
        }
        Ok(())
    }
}

/// Number of frequencies in the block of scale level `s` on one axis (both signs).
pub fn block_width(level: u32) -> u64 {
    let hi = 1u64 << level;
    let lo = 1u64 << (level - 1);
    2 * (hi - lo)
}

/// All frequencies `l` with `⌊2^{s_i-1}⌋ ≤ |l_i| < 2^{s_i}` on the axes of `s`.
pub fn enumerate_frequencies(s: &DyadicScale) -> Result<Vec<FrequencyIndex>> {
    enumerate_frequencies_capped(s, DEFAULT_ENUMERATION_CAP)
}

pub fn enumerate_frequencies_capped(s: &DyadicScale, cap: usize) -> Result<Vec<FrequencyIndex>> {
    if s.is_zero() {
        return Err(Error::InvalidArgument(
            "frequency enumeration needs a nonzero scale".into(),
        ));
    }
    let mut count: u64 = 1;
    for &(_, level) in s.entries() {
        if level >= 63 {
            return Err(Error::EnumerationCap {
                what: "frequencies",
                cap,
            });
        }
        count = count.saturating_mul(block_width(level));
    }
    if count > cap as u64 {
        return Err(Error::EnumerationCap {
            what: "frequencies",
            cap,
        });
    }
    let per_axis: Vec<Vec<i64>> = s
        .entries()
        .iter()
        .map(|&(_, level)| {
            let lo = 1i64 << (level - 1);
            let hi = 1i64 << level;
            (lo..hi).flat_map(|m| [m, -m]).collect()
        })
        .collect();
    let mut out = Vec::with_capacity(count as usize);
    let mut idx = vec![0usize; per_axis.len()];
    loop {
        out.push(FrequencyIndex {
            entries: s
                .entries()
                .iter()
                .zip(&idx)
                .zip(&per_axis)
                .map(|((&(axis, _), &k), vals)| (axis, vals[k]))
                .collect(),
        });
        // Odometer increment, last axis fastest.
        let mut pos = per_axis.len();
        loop {
            if pos == 0 {
                return Ok(out);
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < per_axis[pos].len() {
                break;
            }
            idx[pos] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scale(e: &[(u32, u32)]) -> DyadicScale {
        DyadicScale::new(e.to_vec()).unwrap()
    }

    fn linear() -> WeightRule {
        WeightRule::power(1.0, 1.0)
    }

    #[test]
    fn gamma_values_per_family() {
        let s = scale(&[(1, 2), (3, 1)]);
        assert_eq!(SmoothnessMap::mixed(linear()).gamma(&s).unwrap(), 5.0);
        assert_eq!(SmoothnessMap::anisotropic(linear()).gamma(&s).unwrap(), 3.0);
        assert_eq!(
            SmoothnessMap::sobolev(2, 3).gamma(&scale(&[(2, 4)])).unwrap(),
            12.0
        );
        assert_eq!(
            SmoothnessMap::mixed(linear())
                .gamma(&DyadicScale::zero())
                .unwrap(),
            0.0
        );
    }

    #[test]
    fn sobolev_rejects_axes_beyond_d() {
        let err = SmoothnessMap::sobolev(2, 1).gamma(&scale(&[(3, 1)]));
        assert!(matches!(err, Err(Error::AxisOutOfRange { axis: 3, limit: 2 })));
    }

    #[test]
    fn alpha_closed_forms() {
        assert_eq!(SmoothnessMap::sobolev(4, 2).alpha(), 2.0);
        let shifted = WeightRule::Power {
            scale: 1.0,
            exponent: 1.0,
            offset: 1.0,
        };
        assert_eq!(SmoothnessMap::mixed(shifted).alpha(), 0.5);
        let geo = WeightRule::Geometric {
            scale: 1.0,
            base: 2.0,
        };
        assert_eq!(SmoothnessMap::anisotropic(geo).alpha(), 1.0);
        assert!(SmoothnessMap::anisotropic(linear()).alpha().is_infinite());
    }

    #[test]
    fn anisotropic_power_series_matches_zeta() {
        // ζ(2) = π²/6, ζ(3) = 1.2020569031595942
        let two = SmoothnessMap::anisotropic(WeightRule::power(1.0, 2.0)).alpha();
        assert!((two - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-12);
        let three = SmoothnessMap::anisotropic(WeightRule::power(2.0, 3.0)).alpha();
        assert!((three - 1.2020569031595942 / 2.0).abs() < 1e-12);
    }

    #[test]
    fn anisotropic_series_with_offset_matches_long_sum() {
        let rule = WeightRule::Power {
            scale: 1.0,
            exponent: 3.0,
            offset: 0.5,
        };
        // Kahan-free reference: 10^6 terms plus the 1/(2N²) tail.
        let n = 1_000_000usize;
        let head: f64 = (1..=n).rev().map(|i| 1.0 / rule.weight(i)).sum();
        let reference = head + 1.0 / (2.0 * (n as f64).powi(2));
        assert!((rule.reciprocal_sum() - reference).abs() < 1e-12);
    }

    #[test]
    fn enumerate_scales_mixed_example() {
        let map = SmoothnessMap::mixed(linear());
        let got = map.enumerate_scales(9.0).unwrap();
        let want = vec![
            scale(&[(1, 1)]),
            scale(&[(1, 1), (2, 1)]),
            scale(&[(1, 2)]),
            scale(&[(1, 3)]),
            scale(&[(2, 1)]),
            scale(&[(3, 1)]),
        ];
        assert_eq!(got, want);
    }

    #[test]
    fn enumerate_scales_sobolev_example() {
        let got = SmoothnessMap::sobolev(1, 1).enumerate_scales(6.0).unwrap();
        assert_eq!(got, vec![scale(&[(1, 1)]), scale(&[(1, 2)])]);
    }

    #[test]
    fn enumerate_scales_below_smallest_threshold_is_empty() {
        let map = SmoothnessMap::mixed(linear());
        assert!(map.enumerate_scales(2.9).unwrap().is_empty());
    }

    #[test]
    fn enumerate_scales_respects_cap_and_infinite_alpha() {
        let map = SmoothnessMap::sobolev(6, 1);
        let limits = EnumerationLimits {
            max_axis: None,
            cap: 10,
        };
        assert!(matches!(
            map.enumerate_scales_with(100.0, limits),
            Err(Error::EnumerationCap { .. })
        ));
        assert!(matches!(
            SmoothnessMap::anisotropic(linear()).enumerate_scales(10.0),
            Err(Error::InfiniteAlpha)
        ));
    }

    #[test]
    fn enumerate_scales_axis_limit() {
        let map = SmoothnessMap::mixed(linear());
        let limits = EnumerationLimits {
            max_axis: Some(1),
            cap: DEFAULT_ENUMERATION_CAP,
        };
        let got = map.enumerate_scales_with(9.0, limits).unwrap();
        assert_eq!(got.len(), 3);
        assert!(got.iter().all(|s| s.max_axis() == 1));
    }

    #[test]
    fn frequencies_examples() {
        let one = enumerate_frequencies(&scale(&[(1, 1)])).unwrap();
        assert_eq!(
            one,
            vec![FrequencyIndex::single(1, 1), FrequencyIndex::single(1, -1)]
        );
        let mut two: Vec<i64> = enumerate_frequencies(&scale(&[(1, 2)]))
            .unwrap()
            .iter()
            .map(|l| l.entries()[0].1)
            .collect();
        two.sort();
        assert_eq!(two, vec![-3, -2, 2, 3]);
        assert_eq!(
            enumerate_frequencies(&scale(&[(1, 1), (2, 1)])).unwrap().len(),
            4
        );
        assert!(enumerate_frequencies(&DyadicScale::zero()).is_err());
    }

    #[test]
    fn frequency_scale_roundtrip() {
        let s = scale(&[(2, 3), (5, 1)]);
        for l in enumerate_frequencies(&s).unwrap() {
            assert_eq!(l.scale(), s);
        }
    }

    #[test]
    fn select_j_examples() {
        // α = 1
        let a1 = SmoothnessMap::mixed(linear());
        assert_eq!(a1.select_j(1024).unwrap(), 10);
        // α = 0.5
        let a05 = SmoothnessMap::mixed(WeightRule::power(2.0, 1.0));
        assert_eq!(a05.select_j(256).unwrap(), 6);
        assert!(a1.select_j(2).unwrap() >= 1);
        assert_eq!(a1.select_j(1).unwrap(), 1);
    }

    #[test]
    fn d_max_examples() {
        assert_eq!(SmoothnessMap::mixed(linear()).d_max(9.0).unwrap(), 2);
        assert_eq!(SmoothnessMap::mixed(linear()).d_max(1.0).unwrap(), 1);
        assert_eq!(SmoothnessMap::sobolev(5, 1).d_max(1e6).unwrap(), 5);
        let flat = SmoothnessMap::mixed(WeightRule::power(1.0, 0.0));
        assert!(matches!(flat.d_max(10.0), Err(Error::EnumerationCap { .. })));
    }

    #[test]
    fn d_max_monotone_in_budget() {
        let map = SmoothnessMap::anisotropic(WeightRule::power(1.0, 2.0));
        let mut prev = 0;
        for j in 1..60 {
            let d = map.d_max(j as f64).unwrap();
            assert!(d >= prev);
            prev = d;
        }
    }

    #[test]
    fn invalid_weights_rejected() {
        let bad = SmoothnessMap::mixed(WeightRule::power(-1.0, 1.0));
        assert!(bad.validate().is_err());
        assert!(SmoothnessMap::sobolev(0, 1).validate().is_err());
        assert!(DyadicScale::new(vec![(2, 1), (1, 1)]).is_err());
        assert!(FrequencyIndex::new(vec![(1, 0)]).is_err());
    }

    #[test]
    fn map_json_schema() {
        let map = SmoothnessMap::mixed(WeightRule::power(1.0, 2.0));
        let v = serde_json::to_value(map).unwrap();
        assert_eq!(v["family"], "mixed");
        assert_eq!(v["params"]["weights"]["rule"], "power");
        let back: SmoothnessMap = serde_json::from_value(v).unwrap();
        assert_eq!(back, map);
        let sob: SmoothnessMap =
            serde_json::from_str(r#"{"family":"sobolev_dk","params":{"d":3,"k":2}}"#).unwrap();
        assert_eq!(sob, SmoothnessMap::sobolev(3, 2));
    }
}
