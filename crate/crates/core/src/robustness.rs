//! Robustness checks around the main RD estimate: donut, rolling cutoff,
//! placebo outcomes, polynomial order, serial correlation and group ANOVA.
//! Each check can be condensed into a [`Verdict`].

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{build_monthly_panel, midpoints, InclusionPolicy, MonthlyPanel, StrikeRecord};
use crate::dist::{f_upper_tail, t_two_sided};
use crate::error::{Error, Result};
use crate::month::YearMonth;
use crate::rd::{estimate_rd, Outcome, RdConfig, RdEstimate};
use crate::scalar::Scalar;

/// Significance level for every robustness verdict.
pub const ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DonutSpec {
    pub center: YearMonth,
    pub half_width: u32,
    /// Explicit exclusion that overrides the symmetric window.
    pub range: Option<(YearMonth, YearMonth)>,
}

impl DonutSpec {
    pub fn symmetric(center: YearMonth, half_width: u32) -> Self {
        DonutSpec { center, half_width, range: None }
    }

    /// Donut covering `from..=to`; its center is the midpoint month.
    pub fn range(from: YearMonth, to: YearMonth) -> Self {
        let (from, to) = if from <= to { (from, to) } else { (to, from) };
        let span = to.months_since(from);
        DonutSpec {
            center: from.offset(span / 2),
            half_width: (span as u32).div_ceil(2),
            range: Some((from, to)),
        }
    }

    /// Inclusive excluded months; `None` when nothing is excluded.
    pub fn excluded_range(&self) -> Option<(YearMonth, YearMonth)> {
        if let Some(r) = self.range {
            return Some(r);
        }
        if self.half_width == 0 {
            return None;
        }
        let w = self.half_width as i32;
        Some((self.center.offset(-w), self.center.offset(w)))
    }

    pub fn label(&self) -> String {
        match self.excluded_range() {
            None => "none".to_string(),
            Some((a, b)) if self.range.is_some() => format!("{a}..{b}"),
            Some(_) => format!("{}±{}", self.center, self.half_width),
        }
    }
}

/// Half-widths 3, 6 and 9 months around 2012-04 plus the full 2011-07..2013-05 window.
pub fn default_donuts() -> Vec<DonutSpec> {
    let center = YearMonth::new(2012, 4);
    let mut out: Vec<DonutSpec> = [3, 6, 9].iter().map(|&w| DonutSpec::symmetric(center, w)).collect();
    out.push(DonutSpec::range(YearMonth::new(2011, 7), YearMonth::new(2013, 5)));
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DonutResult<T> {
    pub donut: DonutSpec,
    pub excluded: Option<(YearMonth, YearMonth)>,
    pub months_excluded: usize,
    pub estimate: RdEstimate<T>,
}

pub fn donut_rd<T: Scalar>(panel: &MonthlyPanel, config: &RdConfig, donut: DonutSpec) -> Result<DonutResult<T>> {
    let excluded = donut.excluded_range();
    let punctured = match excluded {
        Some((a, b)) => panel.without_months(a, b),
        None => panel.clone(),
    };
    let estimate = estimate_rd(&punctured, config)?;
    Ok(DonutResult {
        donut,
        excluded,
        months_excluded: panel.observations.len() - punctured.observations.len(),
        estimate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RollingWindow {
    pub from: YearMonth,
    pub to: YearMonth,
}

impl Default for RollingWindow {
    fn default() -> Self {
        RollingWindow { from: YearMonth::new(2010, 10), to: YearMonth::new(2013, 5) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RollingEntry<T> {
    pub cutoff: YearMonth,
    /// Conventional estimate; absent when estimation failed at this cutoff.
    pub estimate: Option<T>,
    pub se: Option<T>,
    pub z: Option<T>,
    pub p_value: Option<T>,
    pub significant_at_05: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RollingResult<T> {
    pub window: RollingWindow,
    pub entries: Vec<RollingEntry<T>>,
    pub max_abs_z_cutoff: Option<YearMonth>,
}

/// Re-estimates the RD at every month of `window`, rebuilding the panel so
/// event time is measured from each candidate cutoff.
pub fn rolling_rd<T: Scalar>(
    records: &[StrikeRecord],
    config: &RdConfig,
    window: RollingWindow,
    policy: InclusionPolicy,
) -> Result<RollingResult<T>> {
    if window.from > window.to {
        return Err(Error::Config(format!("rolling window {}..{} is empty", window.from, window.to)));
    }
    let cutoffs: Vec<YearMonth> = window.from.through(window.to).collect();
    let entries: Vec<RollingEntry<T>> = cutoffs
        .par_iter()
        .map(|&cutoff| {
            let cfg = RdConfig { cutoff, ..config.clone() };
            let est = build_monthly_panel(records, cutoff, policy).and_then(|p| estimate_rd::<T>(&p, &cfg));
            match est {
                Ok(e) => RollingEntry {
                    cutoff,
                    estimate: Some(e.tau_conventional),
                    se: Some(e.se_conventional),
                    z: Some(e.z_conventional()),
                    p_value: Some(e.p_conventional),
                    significant_at_05: e.p_conventional < T::of(ALPHA),
                    error: None,
                },
                Err(err) => RollingEntry {
                    cutoff,
                    estimate: None,
                    se: None,
                    z: None,
                    p_value: None,
                    significant_at_05: false,
                    error: Some(err.to_string()),
                },
            }
        })
        .collect();
    let mut max_abs_z_cutoff = None;
    let mut best = T::neg_infinity();
    for e in &entries {
        if let Some(z) = e.z {
            if z.abs() > best {
                best = z.abs();
                max_abs_z_cutoff = Some(e.cutoff);
            }
        }
    }
    Ok(RollingResult { window, entries, max_abs_z_cutoff })
}

/// RD on a placebo outcome with otherwise unchanged settings.
pub fn falsification_rd<T: Scalar>(panel: &MonthlyPanel, outcome: Outcome, config: &RdConfig) -> Result<RdEstimate<T>> {
    let cfg = RdConfig { outcome, ..config.clone() };
    estimate_rd(panel, &cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepEntry<T> {
    pub p: usize,
    pub q: usize,
    pub estimate: Option<RdEstimate<T>>,
    pub error: Option<String>,
}

/// One RD per polynomial order `p`, with bias order `p + 1`.
pub fn polynomial_sweep<T: Scalar>(panel: &MonthlyPanel, config: &RdConfig, orders: &[usize]) -> Vec<SweepEntry<T>> {
    orders
        .par_iter()
        .map(|&p| {
            let cfg = config.clone().with_orders(p, p + 1);
            match estimate_rd(panel, &cfg) {
                Ok(e) => SweepEntry { p, q: p + 1, estimate: Some(e), error: None },
                Err(err) => SweepEntry { p, q: p + 1, estimate: None, error: Some(err.to_string()) },
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Autocorrelation<T> {
    pub lag1_coefficient: T,
    pub test_stat: T,
    pub p_value: T,
    pub df: usize,
    /// Set when the lagged series has no variation.
    pub degenerate: bool,
}

/// AR(1) coefficient from OLS of `y_t` on a constant and `y_{t-1}`, with its t test.
pub fn autocorrelation_diagnostic<T: Scalar>(series: &[T]) -> Result<Autocorrelation<T>> {
    let n = series.len();
    if n < 10 {
        return Err(Error::ThinSample { n, required: 10 });
    }
    let lag = &series[..n - 1];
    let cur = &series[1..];
    let m = T::of_usize(n - 1);
    let mx = lag.iter().copied().sum::<T>() / m;
    let my = cur.iter().copied().sum::<T>() / m;
    let sxx: T = lag.iter().map(|&x| (x - mx) * (x - mx)).sum();
    let sxy: T = lag.iter().zip(cur).map(|(&x, &y)| (x - mx) * (y - my)).sum();
    let df = n - 3;
    if sxx <= T::zero() {
        return Ok(Autocorrelation {
            lag1_coefficient: T::zero(),
            test_stat: T::zero(),
            p_value: T::one(),
            df,
            degenerate: true,
        });
    }
    let rho = sxy / sxx;
    let alpha = my - rho * mx;
    let sse: T = lag.iter().zip(cur).map(|(&x, &y)| (y - alpha - rho * x).powi(2)).sum();
    let s2 = sse / T::of_usize(df);
    let se = (s2 / sxx).sqrt();
    let (t, p) = if se > T::zero() {
        let t = rho / se;
        (t, T::of(t_two_sided(t.as_f64(), df as f64)))
    } else if rho == T::zero() {
        (T::zero(), T::one())
    } else {
        (T::infinity() * rho.signum(), T::zero())
    };
    Ok(Autocorrelation { lag1_coefficient: rho, test_stat: t, p_value: p, df, degenerate: false })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnovaResult<T> {
    pub f_stat: T,
    pub df_between: usize,
    pub df_within: usize,
    pub p_value: T,
    pub group_means: Vec<T>,
    pub group_sizes: Vec<usize>,
}

/// Classical one-way ANOVA F test.
pub fn one_way_anova<T: Scalar>(groups: &[Vec<T>]) -> Result<AnovaResult<T>> {
    if groups.len() < 2 {
        return Err(Error::Grouping(format!("{} group(s); at least 2 required", groups.len())));
    }
    if let Some(i) = groups.iter().position(|g| g.is_empty()) {
        return Err(Error::Grouping(format!("group {i} is empty")));
    }
    let total: usize = groups.iter().map(Vec::len).sum();
    let k = groups.len();
    if total <= k {
        return Err(Error::Grouping(format!("{total} observations leave no within-group degrees of freedom")));
    }
    let means: Vec<T> = groups
        .iter()
        .map(|g| g.iter().copied().sum::<T>() / T::of_usize(g.len()))
        .collect();
    let grand = groups.iter().flatten().copied().sum::<T>() / T::of_usize(total);
    let ssb: T = groups.iter().zip(&means).map(|(g, &m)| T::of_usize(g.len()) * (m - grand).powi(2)).sum();
    let ssw: T = groups
        .iter()
        .zip(&means)
        .map(|(g, &m)| g.iter().map(|&v| (v - m).powi(2)).sum::<T>())
        .sum();
    let (df_between, df_within) = (k - 1, total - k);
    let (f, p) = if means.iter().all(|&m| m == means[0]) {
        (T::zero(), T::one())
    } else if ssw <= T::zero() {
        (T::infinity(), T::zero())
    } else {
        let f = (ssb / T::of_usize(df_between)) / (ssw / T::of_usize(df_within));
        (f, T::of(f_upper_tail(f.as_f64(), df_between as f64, df_within as f64)))
    };
    Ok(AnovaResult {
        f_stat: f,
        df_between,
        df_within,
        p_value: p,
        group_means: means,
        group_sizes: groups.iter().map(Vec::len).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExposureOutcome {
    /// Strike-level civilian midpoint.
    Civilian,
    /// Strike-level precision, where defined.
    Precision,
    /// Monthly civilian casualties per strike.
    CivPerStrike,
}

impl ExposureOutcome {
    pub fn name(self) -> &'static str {
        match self {
            ExposureOutcome::Civilian => "civilian",
            ExposureOutcome::Precision => "precision",
            ExposureOutcome::CivPerStrike => "civ_per_strike",
        }
    }
}

/// Pre-cutoff versus post-cutoff ANOVA on strike-level (or, for
/// civilians per strike, strike-month) outcomes.
pub fn anova_by_exposure(
    records: &[StrikeRecord],
    cutoff: YearMonth,
    outcome: ExposureOutcome,
) -> Result<AnovaResult<f64>> {
    let mut pre = Vec::new();
    let mut post = Vec::new();
    match outcome {
        ExposureOutcome::Civilian | ExposureOutcome::Precision => {
            for r in records {
                let mid = midpoints(r);
                let v = match outcome {
                    ExposureOutcome::Civilian => Some(mid.civilian),
                    _ => mid.precision,
                };
                if let Some(v) = v {
                    if YearMonth::from_date(r.date) < cutoff {
                        pre.push(v)
                    } else {
                        post.push(v)
                    }
                }
            }
        }
        ExposureOutcome::CivPerStrike => {
            let mut by_month: BTreeMap<YearMonth, (f64, usize)> = BTreeMap::new();
            for r in records {
                let e = by_month.entry(YearMonth::from_date(r.date)).or_default();
                e.0 += midpoints(r).civilian;
                e.1 += 1;
            }
            for (m, (civ, n)) in by_month {
                let v = civ / n as f64;
                if m < cutoff {
                    pre.push(v)
                } else {
                    post.push(v)
                }
            }
        }
    }
    if pre.is_empty() || post.is_empty() {
        return Err(Error::Grouping(format!(
            "{} has {} pre-cutoff and {} post-cutoff values",
            outcome.name(),
            pre.len(),
            post.len()
        )));
    }
    one_way_anova(&[pre, post])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictStatus {
    Pass,
    Fail,
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub check: String,
    pub status: VerdictStatus,
    pub criterion: String,
    pub statistics: BTreeMap<String, f64>,
    pub dates: BTreeMap<String, YearMonth>,
}

impl Verdict {
    pub fn new(check: &str, status: VerdictStatus, criterion: &str) -> Self {
        Verdict {
            check: check.to_string(),
            status,
            criterion: criterion.to_string(),
            statistics: BTreeMap::new(),
            dates: BTreeMap::new(),
        }
    }

    pub fn stat(mut self, key: impl Into<String>, value: f64) -> Self {
        self.statistics.insert(key.into(), value);
        self
    }

    pub fn date(mut self, key: impl Into<String>, month: YearMonth) -> Self {
        self.dates.insert(key.into(), month);
        self
    }
}

fn same_sign<T: Scalar>(a: T, b: T) -> bool {
    a.signum() == b.signum() && a != T::zero()
}

/// Passes when every donut estimate keeps the baseline sign.
pub fn donut_verdict<T: Scalar>(baseline: &RdEstimate<T>, donuts: &[Result<DonutResult<T>>]) -> Verdict {
    let ok: Vec<&DonutResult<T>> = donuts.iter().filter_map(|d| d.as_ref().ok()).collect();
    let status = if ok.is_empty() {
        VerdictStatus::Indeterminate
    } else if ok.iter().all(|d| same_sign(d.estimate.tau_conventional, baseline.tau_conventional)) {
        VerdictStatus::Pass
    } else {
        VerdictStatus::Fail
    };
    let mut v = Verdict::new("donut", status, "every donut estimate has the sign of the baseline estimate")
        .stat("baseline_estimate", baseline.tau_conventional.as_f64())
        .stat("donuts_estimated", ok.len() as f64)
        .stat("donuts_failed", (donuts.len() - ok.len()) as f64);
    for d in ok {
        v = v.stat(format!("estimate[{}]", d.donut.label()), d.estimate.tau_conventional.as_f64());
    }
    v
}

/// Passes when the maximal-|z| cutoff falls inside `expected`.
pub fn rolling_verdict<T: Scalar>(rolling: &RollingResult<T>, expected: (YearMonth, YearMonth)) -> Verdict {
    let criterion = format!("maximal |z| cutoff within {}..{}", expected.0, expected.1);
    let mut v = match rolling.max_abs_z_cutoff {
        None => Verdict::new("rolling", VerdictStatus::Indeterminate, &criterion),
        Some(c) => {
            let status = if c >= expected.0 && c <= expected.1 { VerdictStatus::Pass } else { VerdictStatus::Fail };
            Verdict::new("rolling", status, &criterion).date("max_abs_z_cutoff", c)
        }
    };
    v = v
        .stat("cutoffs", rolling.entries.len() as f64)
        .stat("significant", rolling.entries.iter().filter(|e| e.significant_at_05).count() as f64)
        .stat("failed", rolling.entries.iter().filter(|e| e.estimate.is_none()).count() as f64);
    v
}

/// Passes when no placebo outcome shows a discontinuity at `ALPHA`.
pub fn falsification_verdict<T: Scalar>(results: &[(String, Result<RdEstimate<T>>)]) -> Verdict {
    let ok: Vec<(&String, &RdEstimate<T>)> = results.iter().filter_map(|(n, r)| r.as_ref().ok().map(|e| (n, e))).collect();
    let status = if ok.is_empty() {
        VerdictStatus::Indeterminate
    } else if ok.iter().all(|(_, e)| e.p_conventional.as_f64() >= ALPHA) {
        VerdictStatus::Pass
    } else {
        VerdictStatus::Fail
    };
    let mut v = Verdict::new("falsification", status, "no placebo outcome significant at 0.05 (conventional)");
    for (name, e) in ok {
        v = v
            .stat(format!("estimate[{name}]"), e.tau_conventional.as_f64())
            .stat(format!("p_value[{name}]"), e.p_conventional.as_f64());
    }
    v
}

/// Passes when every order's estimate keeps the baseline sign.
pub fn polynomial_verdict<T: Scalar>(baseline: &RdEstimate<T>, sweep: &[SweepEntry<T>]) -> Verdict {
    let ok: Vec<(usize, &RdEstimate<T>)> = sweep.iter().filter_map(|s| s.estimate.as_ref().map(|e| (s.p, e))).collect();
    let status = if ok.is_empty() {
        VerdictStatus::Indeterminate
    } else if ok.iter().all(|(_, e)| same_sign(e.tau_conventional, baseline.tau_conventional)) {
        VerdictStatus::Pass
    } else {
        VerdictStatus::Fail
    };
    let mut v = Verdict::new("polynomial_order", status, "every order's estimate has the sign of the baseline estimate");
    for (p, e) in ok {
        v = v.stat(format!("estimate[p={p}]"), e.tau_conventional.as_f64());
    }
    v
}

/// Passes when the lag-1 coefficient is not significant at `ALPHA`.
pub fn autocorrelation_verdict<T: Scalar>(ac: &Autocorrelation<T>) -> Verdict {
    let status = if ac.degenerate {
        VerdictStatus::Indeterminate
    } else if ac.p_value.as_f64() > ALPHA {
        VerdictStatus::Pass
    } else {
        VerdictStatus::Fail
    };
    Verdict::new("autocorrelation", status, "lag-1 coefficient not significant at 0.05")
        .stat("lag1_coefficient", ac.lag1_coefficient.as_f64())
        .stat("test_stat", ac.test_stat.as_f64())
        .stat("p_value", ac.p_value.as_f64())
}

/// Passes when the pre/post means differ at `ALPHA`.
pub fn anova_verdict(outcome: ExposureOutcome, result: &Result<AnovaResult<f64>>) -> Verdict {
    let check = format!("anova_{}", outcome.name());
    let criterion = "pre/post means differ at 0.05";
    match result {
        Err(_) => Verdict::new(&check, VerdictStatus::Indeterminate, criterion),
        Ok(a) => {
            let status = if a.p_value < ALPHA { VerdictStatus::Pass } else { VerdictStatus::Fail };
            Verdict::new(&check, status, criterion)
                .stat("f_stat", a.f_stat)
                .stat("p_value", a.p_value)
                .stat("mean_pre", a.group_means[0])
                .stat("mean_post", a.group_means[1])
        }
    }
}
