//! Monte Carlo projection of civilian casualties for post-cutoff strikes had
//! they followed the pre-cutoff casualty distribution, and the monetary value
//! of the difference.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{midpoints, MonthlyPanel, StrikeRecord};
use crate::error::{Error, Result};
use crate::month::YearMonth;

pub const DEFAULT_VSL_LOW: f64 = 200_000.0;
pub const DEFAULT_VSL_HIGH: f64 = 800_000.0;
/// Published monetary range kept as an annotation next to computed totals.
pub const REPORTED_VSL_RANGE: (f64, f64) = (80e6, 260e6);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloConfig {
    pub cutoff: YearMonth,
    pub iterations: usize,
    pub seed: u64,
    /// First donor month; `None` admits every pre-cutoff strike.
    pub donor_start: Option<YearMonth>,
    /// Last treated month, inclusive; `None` treats every post-cutoff strike.
    pub treated_end: Option<YearMonth>,
}

impl MonteCarloConfig {
    pub fn new(cutoff: YearMonth, seed: u64) -> Self {
        MonteCarloConfig {
            cutoff,
            iterations: 5000,
            seed,
            donor_start: Some(YearMonth::new(2009, 1)),
            treated_end: None,
        }
    }

    pub fn widened(mut self) -> Self {
        self.donor_start = None;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DonorSummary {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub median: f64,
    pub max: f64,
    pub window_start: Option<YearMonth>,
    pub window_end_exclusive: YearMonth,
}

impl DonorSummary {
    fn new(values: &[f64], window_start: Option<YearMonth>, cutoff: YearMonth) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = if n % 2 == 1 { sorted[n / 2] } else { (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0 };
        DonorSummary {
            n,
            mean,
            sd,
            min: sorted[0],
            median,
            max: sorted[n - 1],
            window_start,
            window_end_exclusive: cutoff,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreatedStrike {
    pub strike_id: String,
    pub month: YearMonth,
    pub actual_civilian: f64,
    pub matched_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VslTotals {
    pub vsl_low: f64,
    pub vsl_high: f64,
    pub vsl_low_total: f64,
    pub vsl_high_total: f64,
    pub vsl_low_total_floored: f64,
    pub vsl_high_total_floored: f64,
    /// Published range, not derived from the totals above.
    pub reported_range: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AvertedResult {
    pub cutoff: YearMonth,
    pub treated: Vec<TreatedStrike>,
    pub grand_matched_mean: f64,
    /// Σ (matched mean − actual), signed.
    pub averted_total: f64,
    /// Σ max(0, matched mean − actual).
    pub averted_total_floored: f64,
    pub iterations: usize,
    pub seed: u64,
    pub donor: DonorSummary,
    /// Monte Carlo standard error of the grand matched mean.
    pub mc_standard_error: f64,
    pub vsl: Option<VslTotals>,
}

impl AvertedResult {
    pub fn per_strike_matched_mean(&self) -> Vec<f64> {
        self.treated.iter().map(|t| t.matched_mean).collect()
    }
}

/// Average of `iterations` uniform draws from `donors` on the substream `stream`.
fn matched_mean(donors: &[f64], iterations: usize, seed: u64, stream: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut sum = 0.0;
    for _ in 0..iterations {
        sum += donors[rng.random_range(0..donors.len())];
    }
    sum / iterations as f64
}

/// Draws matched civilian casualty values for each treated strike. The
/// random substream of a strike is its position in `records`.
pub fn run_monte_carlo(records: &[StrikeRecord], config: &MonteCarloConfig) -> Result<AvertedResult> {
    if config.iterations == 0 {
        return Err(Error::Config("iterations must be positive".into()));
    }
    let in_donor = |m: YearMonth| m < config.cutoff && config.donor_start.is_none_or(|s| m >= s);
    let donors: Vec<f64> = records
        .iter()
        .filter(|r| in_donor(YearMonth::from_date(r.date)))
        .map(|r| midpoints(r).civilian)
        .collect();
    if donors.is_empty() {
        return Err(Error::EmptyDonorPool);
    }
    let treated_ix: Vec<usize> = (0..records.len())
        .filter(|&i| {
            let m = YearMonth::from_date(records[i].date);
            m >= config.cutoff && config.treated_end.is_none_or(|e| m <= e)
        })
        .collect();
    let means: Vec<f64> = treated_ix
        .par_iter()
        .map(|&i| matched_mean(&donors, config.iterations, config.seed, i as u64))
        .collect();
    let mut treated: Vec<TreatedStrike> = treated_ix
        .iter()
        .zip(&means)
        .map(|(&i, &m)| TreatedStrike {
            strike_id: records[i].strike_id.clone(),
            month: YearMonth::from_date(records[i].date),
            actual_civilian: midpoints(&records[i]).civilian,
            matched_mean: m,
        })
        .collect();
    treated.sort_by(|a, b| a.month.cmp(&b.month).then_with(|| a.strike_id.cmp(&b.strike_id)));

    let donor = DonorSummary::new(&donors, config.donor_start, config.cutoff);
    let k = treated.len();
    let grand = if k == 0 { 0.0 } else { treated.iter().map(|t| t.matched_mean).sum::<f64>() / k as f64 };
    let diffs = treated.iter().map(|t| t.matched_mean - t.actual_civilian);
    let averted_total = diffs.clone().sum();
    let averted_total_floored = diffs.map(|d| d.max(0.0)).sum();
    let mc_standard_error = if k == 0 { 0.0 } else { donor.sd / ((config.iterations * k) as f64).sqrt() };
    Ok(AvertedResult {
        cutoff: config.cutoff,
        treated,
        grand_matched_mean: grand,
        averted_total,
        averted_total_floored,
        iterations: config.iterations,
        seed: config.seed,
        donor,
        mc_standard_error,
        vsl: None,
    })
}

/// Attaches monetary totals at per-life values `low` and `high` (USD).
pub fn vsl_scale(mut result: AvertedResult, low: f64, high: f64) -> Result<AvertedResult> {
    if !(low.is_finite() && high.is_finite() && low > 0.0 && high > 0.0) {
        return Err(Error::Config(format!("VSL values must be positive, got {low} and {high}")));
    }
    if low > high {
        return Err(Error::Config(format!("VSL low {low} exceeds high {high}")));
    }
    result.vsl = Some(VslTotals {
        vsl_low: low,
        vsl_high: high,
        vsl_low_total: result.averted_total * low,
        vsl_high_total: result.averted_total * high,
        vsl_low_total_floored: result.averted_total_floored * low,
        vsl_high_total_floored: result.averted_total_floored * high,
        reported_range: REPORTED_VSL_RANGE,
    });
    Ok(result)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProjectionPoint {
    pub month: YearMonth,
    pub projected: f64,
    pub actual: f64,
}

/// Monthly sums of matched means and actual midpoints over the treated
/// period; months of the panel without treated strikes are zero.
pub fn projection_series(result: &AvertedResult, panel: &MonthlyPanel) -> Vec<ProjectionPoint> {
    let mut by_month: BTreeMap<YearMonth, (f64, f64)> = panel
        .observations
        .iter()
        .filter(|o| o.month >= result.cutoff)
        .map(|o| (o.month, (0.0, 0.0)))
        .collect();
    for t in &result.treated {
        let e = by_month.entry(t.month).or_default();
        e.0 += t.matched_mean;
        e.1 += t.actual_civilian;
    }
    by_month
        .into_iter()
        .map(|(month, (projected, actual))| ProjectionPoint { month, projected, actual })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{build_monthly_panel, EstimateRange, InclusionPolicy};
    use chrono::NaiveDate;

    fn strike(id: &str, y: i32, m: u32, civ: f64) -> StrikeRecord {
        StrikeRecord {
            strike_id: id.into(),
            date: NaiveDate::from_ymd_opt(y, m, 10).unwrap(),
            location: String::new(),
            civilian: EstimateRange::exact(civ),
            child: EstimateRange::exact(0.0),
            total: EstimateRange::exact(civ + 1.0),
            sources: vec![],
        }
    }

    fn cfg(iterations: usize, seed: u64) -> MonteCarloConfig {
        MonteCarloConfig { iterations, ..MonteCarloConfig::new(YearMonth::new(2011, 7), seed) }
    }

    #[test]
    fn single_donor_is_exact() {
        let records = vec![
            strike("a", 2010, 3, 4.0),
            strike("b", 2011, 8, 0.0),
            strike("c", 2011, 9, 0.0),
            strike("d", 2012, 1, 0.0),
        ];
        for seed in [0, 7, 99] {
            let r = run_monte_carlo(&records, &cfg(500, seed)).unwrap();
            assert_eq!(r.averted_total, 12.0);
            assert_eq!(r.per_strike_matched_mean(), vec![4.0; 3]);
        }
    }

    #[test]
    fn two_point_donor_converges() {
        let records = vec![strike("a", 2010, 1, 0.0), strike("b", 2010, 2, 10.0), strike("t", 2012, 1, 0.0)];
        let r = run_monte_carlo(&records, &cfg(100_000, 7)).unwrap();
        assert!((r.treated[0].matched_mean - 5.0).abs() < 0.1);
        assert!((r.grand_matched_mean - r.donor.mean).abs() < 3.0 * r.mc_standard_error);
    }

    #[test]
    fn donor_window_and_errors() {
        let records = vec![strike("old", 2008, 5, 50.0), strike("t", 2012, 1, 1.0)];
        assert!(matches!(run_monte_carlo(&records, &cfg(10, 1)), Err(Error::EmptyDonorPool)));
        let wide = run_monte_carlo(&records, &cfg(10, 1).widened()).unwrap();
        assert_eq!(wide.averted_total, 49.0);
        assert!(matches!(run_monte_carlo(&records, &cfg(0, 1)), Err(Error::Config(_))));
    }

    #[test]
    fn no_treated_strikes() {
        let records = vec![strike("a", 2010, 1, 3.0)];
        let r = run_monte_carlo(&records, &cfg(10, 1)).unwrap();
        assert!(r.treated.is_empty());
        assert_eq!(r.averted_total, 0.0);
    }

    #[test]
    fn floored_variant_drops_negative_differences() {
        let records = vec![strike("a", 2010, 1, 2.0), strike("t1", 2012, 1, 5.0), strike("t2", 2012, 2, 0.0)];
        let r = run_monte_carlo(&records, &cfg(10, 1)).unwrap();
        assert_eq!(r.averted_total, -1.0);
        assert_eq!(r.averted_total_floored, 2.0);
    }

    #[test]
    fn seed_determinism_and_substreams() {
        let mut records: Vec<StrikeRecord> = (1..=12).map(|m| strike(&format!("p{m}"), 2010, m, m as f64)).collect();
        records.push(strike("t1", 2012, 1, 0.0));
        let a = run_monte_carlo(&records, &cfg(1000, 42)).unwrap();
        let b = run_monte_carlo(&records, &cfg(1000, 42)).unwrap();
        assert_eq!(a, b);
        let mut more = records.clone();
        more.push(strike("t2", 2012, 3, 0.0));
        let c = run_monte_carlo(&more, &cfg(1000, 42)).unwrap();
        assert_eq!(c.treated[0].matched_mean.to_bits(), a.treated[0].matched_mean.to_bits());
    }

    #[test]
    fn vsl_scaling() {
        let records = vec![strike("a", 2010, 1, 4.0), strike("t", 2012, 1, 0.0)];
        let r = run_monte_carlo(&records, &cfg(10, 1)).unwrap();
        let v = vsl_scale(r.clone(), DEFAULT_VSL_LOW, DEFAULT_VSL_HIGH).unwrap().vsl.unwrap();
        assert_eq!((v.vsl_low_total, v.vsl_high_total), (800_000.0, 3_200_000.0));
        let d = vsl_scale(r.clone(), 2.0 * DEFAULT_VSL_LOW, 2.0 * DEFAULT_VSL_HIGH).unwrap().vsl.unwrap();
        assert_eq!(d.vsl_low_total, 2.0 * v.vsl_low_total);
        assert!(vsl_scale(r.clone(), 0.0, 1.0).is_err());
        assert!(vsl_scale(r, 2.0, 1.0).is_err());
    }

    #[test]
    fn projection_conserves_total() {
        let records = vec![
            strike("a", 2010, 1, 1.0),
            strike("b", 2010, 5, 6.0),
            strike("t1", 2011, 7, 0.0),
            strike("t2", 2011, 7, 3.0),
            strike("t3", 2011, 10, 1.0),
        ];
        let r = run_monte_carlo(&records, &cfg(2000, 3)).unwrap();
        let cutoff = YearMonth::new(2011, 7);
        let panel = build_monthly_panel(&records, cutoff, InclusionPolicy::AllCalendarMonthsZeroFilled).unwrap();
        let s = projection_series(&r, &panel);
        assert_eq!(s.len(), 4);
        assert_eq!((s[1].projected, s[1].actual), (0.0, 0.0));
        let diff: f64 = s.iter().map(|p| p.projected - p.actual).sum();
        assert!((diff - r.averted_total).abs() < 1e-9);
    }
}
