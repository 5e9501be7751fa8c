//! Multiple structural breaks in a monthly series by global SSR minimization.
//!
//! Break dates come from dynamic programming over all segmentations that
//! respect the minimum segment length. The number of breaks is chosen by
//! sequential sup-F(ℓ+1 | ℓ) tests, and each break gets an asymptotic
//! break-date interval. A break index is the position of the first
//! observation of the new regime.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::f_upper_tail;
use crate::error::{Error, Result};
use crate::month::YearMonth;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BreakModel {
    /// Piecewise-constant mean.
    #[default]
    MeanShift,
    /// Piecewise-linear trend (intercept and slope change together).
    TrendShift,
}

impl BreakModel {
    /// Parameters per regime.
    pub fn params(self) -> usize {
        match self {
            BreakModel::MeanShift => 1,
            BreakModel::TrendShift => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BreakConfig {
    pub max_breaks: usize,
    pub trimming: f64,
    pub model: BreakModel,
    /// Remove a global linear trend before the search.
    pub detrend: bool,
    /// Level of each sequential test.
    pub level: f64,
    /// Coverage of break-date intervals; 0.90 or 0.95.
    pub ci_level: f64,
    pub bootstrap_replications: usize,
    pub seed: u64,
}

impl Default for BreakConfig {
    fn default() -> Self {
        BreakConfig {
            max_breaks: 3,
            trimming: 0.15,
            model: BreakModel::MeanShift,
            detrend: false,
            level: 0.05,
            ci_level: 0.95,
            bootstrap_replications: 999,
            seed: 20_110_701,
        }
    }
}

impl BreakConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=5).contains(&self.max_breaks) {
            return Err(Error::Config(format!("max_breaks must be in 1..=5, got {}", self.max_breaks)));
        }
        if !(self.trimming > 0.0 && self.trimming < 0.5) {
            return Err(Error::Config(format!("trimming must be in (0, 0.5), got {}", self.trimming)));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Config(format!("level must be in (0, 1), got {}", self.level)));
        }
        if ci_constant(self.ci_level).is_none() {
            return Err(Error::Config(format!("ci_level must be 0.90 or 0.95, got {}", self.ci_level)));
        }
        if self.bootstrap_replications < 19 {
            return Err(Error::Config("at least 19 bootstrap replications are required".into()));
        }
        Ok(())
    }

    /// Minimum segment length for a series of `n` observations.
    pub fn min_segment(&self, n: usize) -> usize {
        ((self.trimming * n as f64 - 1e-9).ceil() as usize).max(self.model.params() + 1)
    }
}

/// Quantile of the limiting break-date distribution for a symmetric interval.
fn ci_constant(level: f64) -> Option<f64> {
    if (level - 0.95).abs() < 1e-9 {
        Some(11.03)
    } else if (level - 0.90).abs() < 1e-9 {
        Some(7.69)
    } else {
        None
    }
}

/// sup-F(ℓ+1 | ℓ) critical values at trimming 0.15, indexed by ℓ = 0..=4.
const CRIT_Q1: [[f64; 5]; 3] = [
    [7.04, 8.51, 9.41, 10.04, 10.58],
    [8.58, 10.13, 11.14, 11.83, 12.25],
    [12.29, 13.89, 14.80, 15.28, 15.76],
];
const CRIT_Q2: [[f64; 5]; 3] = [
    [9.81, 11.40, 12.29, 12.90, 13.47],
    [11.47, 12.95, 14.03, 14.85, 15.29],
    [15.37, 16.84, 17.72, 18.67, 18.76],
];

/// Tabulated critical value, if `(model, trimming, ℓ, level)` is covered.
pub fn sequential_critical_value(model: BreakModel, trimming: f64, l: usize, level: f64) -> Option<f64> {
    if (trimming - 0.15).abs() > 1e-12 || l > 4 {
        return None;
    }
    let row = [0.10, 0.05, 0.01].iter().position(|&a| (a - level).abs() < 1e-12)?;
    Some(match model {
        BreakModel::MeanShift => CRIT_Q1[row][l],
        BreakModel::TrendShift => CRIT_Q2[row][l],
    })
}

const SIM_STEPS: usize = 1000;
const SIM_REPS: usize = 5000;
const SIM_SEED: u64 = 0x5_u64 << 32 | 0x0f;

type NullKey = (usize, u64);

fn null_cache() -> &'static Mutex<HashMap<NullKey, &'static [f64]>> {
    static CACHE: OnceLock<Mutex<HashMap<NullKey, &'static [f64]>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Sorted draws of sup over λ ∈ [ε, 1−ε] of the squared norm of a
/// `q`-dimensional Brownian bridge scaled by λ(1−λ), divided by `q`.
pub fn simulated_sup_f_null(q: usize, trimming: f64) -> &'static [f64] {
    let key = (q, trimming.to_bits());
    if let Some(v) = null_cache().lock().unwrap().get(&key) {
        return v;
    }
    let lo = (trimming * SIM_STEPS as f64).ceil() as usize;
    let hi = ((1.0 - trimming) * SIM_STEPS as f64).floor() as usize;
    let scale = 1.0 / (SIM_STEPS as f64).sqrt();
    let mut draws: Vec<f64> = (0..SIM_REPS)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(SIM_SEED);
            rng.set_stream(rep as u64);
            let mut paths = vec![vec![0.0f64; SIM_STEPS + 1]; q];
            for path in &mut paths {
                for k in 1..=SIM_STEPS {
                    let z: f64 = rng.sample(StandardNormal);
                    path[k] = path[k - 1] + z * scale;
                }
            }
            (lo..=hi)
                .map(|k| {
                    let lam = k as f64 / SIM_STEPS as f64;
                    let num: f64 = paths
                        .iter()
                        .map(|p| {
                            let b = p[k] - lam * p[SIM_STEPS];
                            b * b
                        })
                        .sum();
                    num / (lam * (1.0 - lam)) / q as f64
                })
                .fold(0.0, f64::max)
        })
        .collect();
    draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let leaked: &'static [f64] = Box::leak(draws.into_boxed_slice());
    null_cache().lock().unwrap().entry(key).or_insert(leaked)
}

/// Asymptotic p-value of an observed F(ℓ+1 | ℓ).
pub fn sequential_p_value(f: f64, q: usize, trimming: f64, l: usize) -> f64 {
    if !(f > 0.0) {
        return 1.0;
    }
    let draws = simulated_sup_f_null(q, trimming);
    let below = draws.partition_point(|&d| d <= f);
    let g = below as f64 / draws.len() as f64;
    1.0 - g.powi(l as i32 + 1)
}

/// SSR of every admissible segment `[i, j)`, stored flat.
struct SegmentCosts<T> {
    n: usize,
    cost: Vec<T>,
}

impl<T: Scalar> SegmentCosts<T> {
    fn new(y: &[T], model: BreakModel, min_len: usize) -> Self {
        let n = y.len();
        let rows: Vec<Vec<T>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut row = vec![T::nan(); n + 1 - i];
                let mut acc = Moments::<T>::default();
                for j in i..n {
                    acc.push(T::of_usize(j - i), y[j]);
                    if j + 1 - i >= min_len {
                        row[j + 1 - i] = acc.ssr(model);
                    }
                }
                row
            })
            .collect();
        let mut cost = vec![T::nan(); n * (n + 1)];
        for (i, row) in rows.into_iter().enumerate() {
            for (len, v) in row.into_iter().enumerate() {
                cost[i * (n + 1) + i + len] = v;
            }
        }
        SegmentCosts { n, cost }
    }

    fn get(&self, i: usize, j: usize) -> T {
        self.cost[i * (self.n + 1) + j]
    }
}

/// Running means and co-moments of `(t, y)`.
#[derive(Default, Clone, Copy)]
struct Moments<T> {
    n: T,
    mt: T,
    my: T,
    ctt: T,
    cty: T,
    cyy: T,
}

impl<T: Scalar> Moments<T> {
    fn push(&mut self, t: T, y: T) {
        self.n += T::one();
        let dt = t - self.mt;
        let dy = y - self.my;
        self.mt += dt / self.n;
        self.my += dy / self.n;
        self.ctt += dt * (t - self.mt);
        self.cty += dt * (y - self.my);
        self.cyy += dy * (y - self.my);
    }

    fn ssr(&self, model: BreakModel) -> T {
        match model {
            BreakModel::MeanShift => self.cyy.max(T::zero()),
            BreakModel::TrendShift => {
                if self.ctt > T::zero() {
                    (self.cyy - self.cty * self.cty / self.ctt).max(T::zero())
                } else {
                    self.cyy.max(T::zero())
                }
            }
        }
    }

    /// `(intercept at local t = 0, slope)`.
    fn line(&self, model: BreakModel) -> (T, T) {
        match model {
            BreakModel::MeanShift => (self.my, T::zero()),
            BreakModel::TrendShift => {
                let slope = if self.ctt > T::zero() { self.cty / self.ctt } else { T::zero() };
                (self.my - slope * self.mt, slope)
            }
        }
    }
}

fn segment_moments<T: Scalar>(y: &[T], from: usize, to: usize) -> Moments<T> {
    let mut m = Moments::default();
    for (k, &v) in y[from..to].iter().enumerate() {
        m.push(T::of_usize(k), v);
    }
    m
}

/// Global minimum SSR and its break positions for every `m` in `0..=m_max`.
fn optimal_partitions<T: Scalar>(costs: &SegmentCosts<T>, h: usize, m_max: usize) -> Vec<(T, Vec<usize>)> {
    let n = costs.n;
    let inf = T::infinity();
    // best[m][j]: min SSR of y[0..j) split into m + 1 segments
    let mut best = vec![vec![inf; n + 1]; m_max + 1];
    let mut arg = vec![vec![0usize; n + 1]; m_max + 1];
    for j in h..=n {
        best[0][j] = costs.get(0, j);
    }
    for m in 1..=m_max {
        for j in (m + 1) * h..=n {
            let mut b = inf;
            let mut a = 0;
            for k in m * h..=j - h {
                let prev = best[m - 1][k];
                if prev == inf {
                    continue;
                }
                let v = prev + costs.get(k, j);
                if v < b {
                    b = v;
                    a = k;
                }
            }
            best[m][j] = b;
            arg[m][j] = a;
        }
    }
    (0..=m_max)
        .map(|m| {
            let mut breaks = Vec::with_capacity(m);
            let mut j = n;
            for level in (1..=m).rev() {
                j = arg[level][j];
                breaks.push(j);
            }
            breaks.reverse();
            (best[m][n], breaks)
        })
        .collect()
}

/// Best SSR after adding one break inside any segment of `breaks`.
fn best_extra_break<T: Scalar>(costs: &SegmentCosts<T>, breaks: &[usize], h: usize) -> Option<(T, usize)> {
    let n = costs.n;
    let mut bounds = Vec::with_capacity(breaks.len() + 2);
    bounds.push(0);
    bounds.extend_from_slice(breaks);
    bounds.push(n);
    let base: Vec<T> = bounds.windows(2).map(|w| costs.get(w[0], w[1])).collect();
    let total: T = base.iter().copied().sum();
    let mut out: Option<(T, usize)> = None;
    for (s, w) in bounds.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        if b - a < 2 * h {
            continue;
        }
        for k in a + h..=b - h {
            let v = total - base[s] + costs.get(a, k) + costs.get(k, b);
            if out.map_or(true, |(o, _)| v < o) {
                out = Some((v, k));
            }
        }
    }
    out
}

fn f_statistic<T: Scalar>(ssr_null: T, ssr_alt: T, q: usize, l: usize, n: usize) -> T {
    let dof = n as i64 - ((l + 2) * q) as i64;
    if dof <= 0 {
        return T::zero();
    }
    let num = (ssr_null - ssr_alt).max(T::zero()) / T::of_usize(q);
    if num == T::zero() {
        return T::zero();
    }
    if ssr_alt <= T::zero() {
        return T::infinity();
    }
    num / (ssr_alt / T::of(dof as f64))
}

/// Sequential statistic F(ℓ+1 | ℓ) for `y`, from the global ℓ-break optimum.
fn sequential_stat<T: Scalar>(costs: &SegmentCosts<T>, parts: &[(T, Vec<usize>)], l: usize, h: usize, q: usize) -> T {
    let (ssr_l, ref br) = parts[l];
    match best_extra_break(costs, br, h) {
        Some((alt, _)) => f_statistic(ssr_l, alt, q, l, costs.n),
        None => T::zero(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SequentialTest<T> {
    /// Breaks under the null.
    pub l: usize,
    pub f_stat: T,
    pub critical_value: T,
    pub p_value: T,
    pub rejected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BreakInterval {
    pub low: YearMonth,
    pub high: YearMonth,
    /// `asymptotic` or `bootstrap_percentile`.
    pub method: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BreakEstimate<T> {
    /// Positions (into the input series) of the first observation of each new regime.
    pub break_indices: Vec<usize>,
    pub break_months: Vec<YearMonth>,
    pub sup_f_stats: Vec<T>,
    pub p_values: Vec<T>,
    pub tests: Vec<SequentialTest<T>>,
    pub ci_per_break: Vec<BreakInterval>,
    /// SSR at the chosen segmentation.
    pub ssr_path: T,
    /// Minimal SSR for 0..=max_breaks breaks.
    pub min_ssr_by_breaks: Vec<T>,
    /// Global optimum break positions for each number of breaks.
    pub optimal_breaks_by_count: Vec<Vec<usize>>,
    pub trimming: f64,
    pub min_segment: usize,
    pub model: BreakModel,
    pub detrended: bool,
    /// `table` or `bootstrap`.
    pub critical_value_method: String,
    pub n: usize,
}

impl<T: Scalar> BreakEstimate<T> {
    pub fn n_breaks(&self) -> usize {
        self.break_indices.len()
    }
}

fn check_series<T: Scalar>(series: &[(YearMonth, T)]) -> Result<()> {
    if let Some(w) = series.windows(2).find(|w| w[1].0 <= w[0].0) {
        return Err(Error::Config(format!("series months not strictly increasing at {}", w[1].0)));
    }
    if let Some((m, _)) = series.iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::Config(format!("non-finite value at {m}")));
    }
    Ok(())
}

/// Residuals from a global OLS line on position.
pub fn detrend<T: Scalar>(y: &[T]) -> Vec<T> {
    let m = segment_moments(y, 0, y.len());
    let (a, b) = m.line(BreakModel::TrendShift);
    y.iter().enumerate().map(|(t, &v)| v - (a + b * T::of_usize(t))).collect()
}

fn fitted_values<T: Scalar>(y: &[T], breaks: &[usize], model: BreakModel) -> Vec<T> {
    let mut bounds = vec![0];
    bounds.extend_from_slice(breaks);
    bounds.push(y.len());
    let mut out = Vec::with_capacity(y.len());
    for w in bounds.windows(2) {
        let (a, b) = segment_moments(y, w[0], w[1]).line(model);
        out.extend((0..w[1] - w[0]).map(|k| a + b * T::of_usize(k)));
    }
    out
}

/// Circular moving-block resample of `resid` added to `fitted`.
fn block_resample<T: Scalar>(fitted: &[T], resid: &[T], seed: u64, stream: u64) -> Vec<T> {
    let n = resid.len();
    let block = ((n as f64).cbrt().ceil() as usize).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let start = rng.random_range(0..n);
        for k in 0..block {
            if out.len() == n {
                break;
            }
            out.push(fitted[out.len()] + resid[(start + k) % n]);
        }
    }
    out
}

/// Estimate break dates and their number. `series` must be ordered by month.
pub fn estimate_breaks<T: Scalar>(series: &[(YearMonth, T)], config: &BreakConfig) -> Result<BreakEstimate<T>> {
    config.validate()?;
    check_series(series)?;
    let n = series.len();
    let h = config.min_segment(n);
    let required = (config.max_breaks + 1) * h;
    if n < required {
        return Err(Error::ThinSample { n, required });
    }
    let q = config.model.params();
    let raw: Vec<T> = series.iter().map(|&(_, v)| v).collect();
    let y = if config.detrend { detrend(&raw) } else { raw.clone() };

    let costs = SegmentCosts::new(&y, config.model, h);
    let parts = optimal_partitions(&costs, h, config.max_breaks);
    let min_ssr: Vec<T> = parts.iter().map(|p| p.0).collect();
    let scale: T = raw.iter().map(|&v| v * v).sum::<T>() + T::of_usize(n);
    let tol = scale * (T::epsilon() * T::of(1e3)).powi(2);

    let use_table = sequential_critical_value(config.model, config.trimming, 0, config.level).is_some()
        && config.max_breaks <= 5;
    let mut tests = Vec::new();
    let mut chosen = 0;
    if min_ssr[0] > tol {
        for l in 0..config.max_breaks {
            let f = sequential_stat(&costs, &parts, l, h, q);
            let (crit, p) = match sequential_critical_value(config.model, config.trimming, l, config.level) {
                Some(c) if use_table => (
                    T::of(c),
                    T::of(sequential_p_value(f.as_f64(), q, config.trimming, l)),
                ),
                _ => bootstrap_sequential(&y, &parts, l, h, f, config),
            };
            let rejected = f > crit;
            tests.push(SequentialTest { l, f_stat: f, critical_value: crit, p_value: p, rejected });
            if !rejected {
                break;
            }
            chosen = l + 1;
        }
    } else {
        let crit = sequential_critical_value(config.model, config.trimming, 0, config.level).unwrap_or(f64::INFINITY);
        tests.push(SequentialTest {
            l: 0,
            f_stat: T::zero(),
            critical_value: T::of(crit),
            p_value: T::one(),
            rejected: false,
        });
    }

    let breaks = parts[chosen].1.clone();
    let ci_per_break = break_intervals(series, &y, &breaks, h, config);
    Ok(BreakEstimate {
        break_months: breaks.iter().map(|&k| series[k].0).collect(),
        sup_f_stats: tests.iter().map(|t| t.f_stat).collect(),
        p_values: tests.iter().map(|t| t.p_value).collect(),
        tests,
        ci_per_break,
        ssr_path: parts[chosen].0,
        min_ssr_by_breaks: min_ssr,
        optimal_breaks_by_count: parts.iter().map(|p| p.1.clone()).collect(),
        break_indices: breaks,
        trimming: config.trimming,
        min_segment: h,
        model: config.model,
        detrended: config.detrend,
        critical_value_method: if use_table { "table" } else { "bootstrap" }.to_string(),
        n,
    })
}

/// Bootstrap critical value and p-value of F(ℓ+1 | ℓ) under the ℓ-break fit.
fn bootstrap_sequential<T: Scalar>(
    y: &[T],
    parts: &[(T, Vec<usize>)],
    l: usize,
    h: usize,
    observed: T,
    config: &BreakConfig,
) -> (T, T) {
    let q = config.model.params();
    let fitted = fitted_values(y, &parts[l].1, config.model);
    let resid: Vec<T> = y.iter().zip(&fitted).map(|(&a, &b)| a - b).collect();
    let reps = config.bootstrap_replications;
    let mut stats: Vec<T> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let ys = block_resample(&fitted, &resid, config.seed ^ (l as u64) << 48, r as u64);
            let costs = SegmentCosts::new(&ys, config.model, h);
            let p = optimal_partitions(&costs, h, l);
            sequential_stat(&costs, &p, l, h, q)
        })
        .collect();
    stats.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let exceed = stats.iter().filter(|&&s| s >= observed).count();
    let p = T::of((1 + exceed) as f64 / (reps + 1) as f64);
    let idx = (((1.0 - config.level) * (reps + 1) as f64).ceil() as usize).clamp(1, reps) - 1;
    (stats[idx], p)
}

fn break_intervals<T: Scalar>(
    series: &[(YearMonth, T)],
    y: &[T],
    breaks: &[usize],
    h: usize,
    config: &BreakConfig,
) -> Vec<BreakInterval> {
    let n = y.len();
    let c = ci_constant(config.ci_level).unwrap_or(11.03);
    let fitted = fitted_values(y, breaks, config.model);
    let resid: Vec<T> = y.iter().zip(&fitted).map(|(&a, &b)| a - b).collect();
    let dof = n.saturating_sub((breaks.len() + 1) * config.model.params()).max(1);
    let sigma2 = resid.iter().map(|&r| (r * r).as_f64()).sum::<f64>() / dof as f64;
    let mut bounds = vec![0];
    bounds.extend_from_slice(breaks);
    bounds.push(n);

    (0..breaks.len())
        .map(|i| {
            let k = breaks[i];
            let (a0, b0) = segment_moments(y, bounds[i], k).line(config.model);
            let (a1, _) = segment_moments(y, k, bounds[i + 2]).line(config.model);
            // jump in fitted values at the break, old regime extrapolated
            let old = a0 + b0 * T::of_usize(k - bounds[i]);
            let delta = (a1 - old).as_f64();
            let width = c * sigma2 / (delta * delta);
            if delta != 0.0 && width.is_finite() && sigma2 > 0.0 {
                let w = width.floor() as usize + 1;
                let lo = k.saturating_sub(w);
                let hi = (k + w).min(n - 1);
                BreakInterval { low: series[lo].0, high: series[hi].0, method: "asymptotic".into() }
            } else {
                let (lo, hi) = bootstrap_break_interval(y, &fitted, &resid, bounds[i], bounds[i + 2], h, i, config);
                BreakInterval { low: series[lo].0, high: series[hi].0, method: "bootstrap_percentile".into() }
            }
        })
        .collect()
}

/// Percentile interval of the re-estimated single break within `[from, to)`.
#[allow(clippy::too_many_arguments)]
fn bootstrap_break_interval<T: Scalar>(
    y: &[T],
    fitted: &[T],
    resid: &[T],
    from: usize,
    to: usize,
    h: usize,
    which: usize,
    config: &BreakConfig,
) -> (usize, usize) {
    let reps = config.bootstrap_replications;
    let mut locs: Vec<usize> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let ys = block_resample(fitted, resid, config.seed ^ 0xc1 ^ (which as u64) << 40, r as u64);
            let seg = &ys[from..to];
            let costs = SegmentCosts::new(seg, config.model, h);
            from + optimal_partitions(&costs, h, 1)[1].1[0]
        })
        .collect();
    let _ = y;
    locs.sort_unstable();
    let alpha = 1.0 - config.ci_level;
    let lo = ((alpha / 2.0) * reps as f64).floor() as usize;
    let hi = (((1.0 - alpha / 2.0) * reps as f64).ceil() as usize).clamp(1, reps) - 1;
    (locs[lo.min(reps - 1)], locs[hi])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChowTest<T> {
    pub f_stat: T,
    pub p_value: T,
    pub df1: usize,
    pub df2: usize,
}

/// Chow test of a single break at `candidate` (first month of the second regime).
pub fn chow_f_test<T: Scalar>(series: &[(YearMonth, T)], candidate: YearMonth, model: BreakModel) -> Result<ChowTest<T>> {
    check_series(series)?;
    let k = model.params();
    let n = series.len();
    let split = series.partition_point(|(m, _)| *m < candidate);
    if split < k + 1 || n - split < k + 1 {
        return Err(Error::ThinSegment { left: split, right: n - split, required: k + 1 });
    }
    let y: Vec<T> = series.iter().map(|&(_, v)| v).collect();
    let pooled = segment_moments(&y, 0, n).ssr(model);
    let split_ssr = segment_moments(&y, 0, split).ssr(model) + segment_moments(&y, split, n).ssr(model);
    let scale: T = y.iter().map(|&v| v * v).sum::<T>() + T::of_usize(n);
    let tol = scale * (T::epsilon() * T::of(1e3)).powi(2);
    let df2 = n - 2 * k;
    let num = pooled - split_ssr;
    let (f, p) = if num <= tol {
        (T::zero(), T::one())
    } else if split_ssr <= tol {
        (T::infinity(), T::zero())
    } else {
        let f = (num / T::of_usize(k)) / (split_ssr / T::of_usize(df2));
        (f, T::of(f_upper_tail(f.as_f64(), k as f64, df2 as f64)))
    };
    Ok(ChowTest { f_stat: f, p_value: p, df1: k, df2 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(values: &[f64]) -> Vec<(YearMonth, f64)> {
        let start = YearMonth::new(2005, 1);
        values.iter().enumerate().map(|(i, &v)| (start.offset(i as i32), v)).collect()
    }

    fn shift_fixture() -> Vec<(YearMonth, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let v: Vec<f64> = (0..80)
            .map(|i| {
                let z: f64 = rng.sample(StandardNormal);
                let mean = if i < 30 { 10.0 } else { 2.0 };
                mean + 0.5 * z
            })
            .collect();
        series(&v)
    }

    #[test]
    fn segment_costs_match_direct_ssr() {
        let y = [3.0f64, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0];
        for model in [BreakModel::MeanShift, BreakModel::TrendShift] {
            let c = SegmentCosts::new(&y, model, 3);
            let m = segment_moments(&y, 2, 7);
            assert!((c.get(2, 7) - m.ssr(model)).abs() < 1e-12);
        }
        let c = SegmentCosts::new(&y, BreakModel::MeanShift, 2);
        let seg = &y[1..5];
        let mean = seg.iter().sum::<f64>() / 4.0;
        let direct: f64 = seg.iter().map(|v| (v - mean) * (v - mean)).sum();
        assert!((c.get(1, 5) - direct).abs() < 1e-12);
    }

    #[test]
    fn single_shift_found_and_significant() {
        let cfg = BreakConfig { max_breaks: 3, ..BreakConfig::default() };
        let est = estimate_breaks(&shift_fixture(), &cfg).unwrap();
        assert_eq!(est.break_indices, vec![30]);
        assert!(est.p_values[0] < 1e-3);
        assert!(!est.tests.last().unwrap().rejected);
        let ci = &est.ci_per_break[0];
        assert!(ci.low <= est.break_months[0] && est.break_months[0] <= ci.high);
        assert_eq!(ci.method, "asymptotic");
    }

    #[test]
    fn constant_and_linear_series_have_no_break() {
        let est = estimate_breaks(&series(&[5.0; 40]), &BreakConfig::default()).unwrap();
        assert!(est.break_indices.is_empty());
        assert_eq!(est.p_values, vec![1.0]);
        let line: Vec<f64> = (0..60).map(|t| 2.0 + 0.37 * t as f64).collect();
        let cfg = BreakConfig { detrend: true, ..BreakConfig::default() };
        let est = estimate_breaks(&series(&line), &cfg).unwrap();
        assert!(est.break_indices.is_empty());
    }

    #[test]
    fn min_ssr_monotone_and_trimming_respected() {
        let est = estimate_breaks(&shift_fixture(), &BreakConfig::default()).unwrap();
        for w in est.min_ssr_by_breaks.windows(2) {
            assert!(w[1] <= w[0] + 1e-9);
        }
        for b in &est.optimal_breaks_by_count {
            let mut bounds = vec![0];
            bounds.extend(b);
            bounds.push(est.n);
            assert!(bounds.windows(2).all(|w| w[1] - w[0] >= est.min_segment));
        }
    }

    #[test]
    fn too_short_series_is_thin() {
        let err = estimate_breaks(&series(&[1.0, 2.0, 3.0, 4.0, 5.0]), &BreakConfig::default()).unwrap_err();
        assert!(matches!(err, Error::ThinSample { .. }));
    }

    #[test]
    fn trend_model_finds_slope_change() {
        let v: Vec<f64> = (0..60)
            .map(|t| if t < 35 { 1.0 + 0.5 * t as f64 } else { 25.0 - 0.8 * (t - 35) as f64 })
            .map(|v| v + if v as i64 % 2 == 0 { 0.05 } else { -0.05 })
            .collect();
        let cfg = BreakConfig { model: BreakModel::TrendShift, max_breaks: 2, ..BreakConfig::default() };
        let est = estimate_breaks(&series(&v), &cfg).unwrap();
        assert_eq!(est.break_indices.first().copied(), Some(35));
    }

    #[test]
    fn bootstrap_used_off_table() {
        let cfg = BreakConfig { trimming: 0.2, max_breaks: 1, bootstrap_replications: 99, ..BreakConfig::default() };
        let est = estimate_breaks(&shift_fixture(), &cfg).unwrap();
        assert_eq!(est.critical_value_method, "bootstrap");
        assert_eq!(est.break_indices, vec![30]);
        assert!(est.p_values[0] <= 0.02);
        let again = estimate_breaks(&shift_fixture(), &cfg).unwrap();
        assert_eq!(est, again);
    }

    #[test]
    fn simulated_null_matches_table() {
        let d = simulated_sup_f_null(1, 0.15);
        let q95 = d[(0.95 * d.len() as f64) as usize];
        assert!((q95 - 8.58).abs() < 0.6, "{q95}");
        let p = sequential_p_value(8.58, 1, 0.15, 0);
        assert!((p - 0.05).abs() < 0.02, "{p}");
    }

    #[test]
    fn chow_examples() {
        let flat = series(&[3.0; 20]);
        let t = chow_f_test(&flat, YearMonth::new(2005, 11), BreakModel::MeanShift).unwrap();
        assert_eq!((t.f_stat, t.p_value), (0.0, 1.0));
        let step: Vec<f64> = (0..20).map(|i| if i < 10 { 10.0 } else { 2.0 }).collect();
        let t = chow_f_test(&series(&step), YearMonth::new(2005, 11), BreakModel::MeanShift).unwrap();
        assert!(t.p_value < 1e-12);
        let err = chow_f_test(&series(&step), YearMonth::new(2005, 2), BreakModel::MeanShift).unwrap_err();
        assert!(matches!(err, Error::ThinSegment { .. }));
    }

    #[test]
    fn chow_noisy_split_matches_anova_identity() {
        let s = shift_fixture();
        let t = chow_f_test(&s, s[30].0, BreakModel::MeanShift).unwrap();
        assert!(t.f_stat > 100.0 && t.p_value < 1e-12);
        assert_eq!((t.df1, t.df2), (1, 78));
    }
}
