use serde::Serialize;

use super::panel::{MonthlyObservation, MonthlyPanel};
use super::strike::{midpoints, StrikeRecord};
use crate::month::YearMonth;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CasualtySummary {
    pub count: f64,
    pub mean: f64,
    pub mean_min_est: f64,
    pub mean_max_est: f64,
}

/// Descriptive statistics for one side of a cutoff. Monthly means divide by
/// the number of months included in the panel on that side.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SideSummary {
    pub months_included: usize,
    pub calendar_months: usize,
    pub civilian: CasualtySummary,
    pub child: CasualtySummary,
    pub total: CasualtySummary,
    /// Mean over months of the monthly precision means.
    pub precision_mean: Option<f64>,
    /// Mean over strikes with a defined precision.
    pub strike_precision_mean: Option<f64>,
    pub strike_count: usize,
    pub strike_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryTable {
    pub cutoff: YearMonth,
    /// `None` when the side has no observations.
    pub pre: Option<SideSummary>,
    pub post: Option<SideSummary>,
}

fn side(
    obs: &[&MonthlyObservation],
    strikes: &[&StrikeRecord],
    calendar_months: usize,
) -> Option<SideSummary> {
    if obs.is_empty() {
        return None;
    }
    let months = obs.len() as f64;
    let sum = |f: fn(&MonthlyObservation) -> f64| obs.iter().map(|o| f(o)).sum::<f64>();
    let civ = sum(|o| o.civilian_sum);
    let child = sum(|o| o.child_sum);
    let total = sum(|o| o.total_sum);
    let precisions: Vec<f64> = obs.iter().filter_map(|o| o.precision_mean).collect();
    let strike_precisions: Vec<f64> = strikes.iter().filter_map(|r| midpoints(r).precision).collect();
    let mean_of = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    let strike_count: usize = obs.iter().map(|o| o.strike_count).sum();
    let total_min: f64 = strikes.iter().map(|r| r.total.min).sum();
    let total_max: f64 = strikes.iter().map(|r| r.total.max).sum();

    Some(SideSummary {
        months_included: obs.len(),
        calendar_months,
        civilian: CasualtySummary {
            count: civ,
            mean: civ / months,
            mean_min_est: sum(|o| o.civilian_min_sum) / months,
            mean_max_est: sum(|o| o.civilian_max_sum) / months,
        },
        child: CasualtySummary {
            count: child,
            mean: child / months,
            mean_min_est: sum(|o| o.child_min_sum) / months,
            mean_max_est: sum(|o| o.child_max_sum) / months,
        },
        total: CasualtySummary {
            count: total,
            mean: total / months,
            mean_min_est: total_min / months,
            mean_max_est: total_max / months,
        },
        precision_mean: mean_of(&precisions),
        strike_precision_mean: mean_of(&strike_precisions),
        strike_count,
        strike_mean: strike_count as f64 / months,
    })
}

/// Pre/post descriptive table for `cutoff`; the cutoff month counts as post.
pub fn summary_table(panel: &MonthlyPanel, records: &[StrikeRecord], cutoff: YearMonth) -> SummaryTable {
    let (pre_obs, post_obs): (Vec<_>, Vec<_>) =
        panel.observations.iter().partition(|o| o.month < cutoff);
    let (pre_rec, post_rec): (Vec<_>, Vec<_>) = records
        .iter()
        .partition(|r| YearMonth::from_date(r.date) < cutoff);
    let (first, last) = panel.corpus_range;
    let pre_cal = cutoff.months_since(first).max(0) as usize;
    let post_cal = (last.months_since(cutoff) + 1).max(0) as usize;
    SummaryTable {
        cutoff,
        pre: side(&pre_obs, &pre_rec, pre_cal),
        post: side(&post_obs, &post_rec, post_cal),
    }
}
