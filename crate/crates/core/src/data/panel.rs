use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::strike::{midpoints, StrikeRecord};
use crate::error::{Error, Result};
use crate::month::YearMonth;

/// Which calendar months enter the panel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InclusionPolicy {
    /// Only months with at least one strike.
    #[default]
    StrikeMonthsOnly,
    /// Every month between the first and last strike; empty months carry zeros.
    AllCalendarMonthsZeroFilled,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonthlyObservation {
    pub month: YearMonth,
    /// Months relative to the cutoff; the cutoff month is 0.
    pub event_time: i32,
    pub civilian_sum: f64,
    pub civilian_min_sum: f64,
    pub civilian_max_sum: f64,
    pub child_sum: f64,
    pub child_min_sum: f64,
    pub child_max_sum: f64,
    pub total_sum: f64,
    pub strike_count: usize,
    pub precision_mean: Option<f64>,
    pub civ_per_strike: Option<f64>,
    pub treated: bool,
}

impl MonthlyObservation {
    pub fn month_index(&self) -> i32 {
        self.month.index()
    }

    pub fn combatant_sum(&self) -> f64 {
        self.total_sum - self.civilian_sum
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonthlyPanel {
    pub observations: Vec<MonthlyObservation>,
    pub cutoff: YearMonth,
    pub inclusion_policy: InclusionPolicy,
    /// First and last strike month of the source corpus.
    pub corpus_range: (YearMonth, YearMonth),
}

impl MonthlyPanel {
    pub fn cutoff_index(&self) -> i32 {
        self.cutoff.index()
    }

    pub fn pre(&self) -> impl Iterator<Item = &MonthlyObservation> {
        self.observations.iter().filter(|o| !o.treated)
    }

    pub fn post(&self) -> impl Iterator<Item = &MonthlyObservation> {
        self.observations.iter().filter(|o| o.treated)
    }

    /// Drops every observation whose month lies in `from..=to`.
    pub fn without_months(&self, from: YearMonth, to: YearMonth) -> MonthlyPanel {
        MonthlyPanel {
            observations: self
                .observations
                .iter()
                .filter(|o| o.month < from || o.month > to)
                .cloned()
                .collect(),
            ..self.clone()
        }
    }
}

#[derive(Default)]
struct MonthAccumulator {
    civ: f64,
    civ_min: f64,
    civ_max: f64,
    child: f64,
    child_min: f64,
    child_max: f64,
    total: f64,
    strikes: usize,
    precision_sum: f64,
    precision_n: usize,
}

pub fn build_monthly_panel(
    records: &[StrikeRecord],
    cutoff: YearMonth,
    policy: InclusionPolicy,
) -> Result<MonthlyPanel> {
    if records.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut months: BTreeMap<YearMonth, MonthAccumulator> = BTreeMap::new();
    for r in records {
        let m = midpoints(r);
        let acc = months.entry(YearMonth::from_date(r.date)).or_default();
        acc.civ += m.civilian;
        acc.civ_min += r.civilian.min;
        acc.civ_max += r.civilian.max;
        acc.child += m.child;
        acc.child_min += r.child.min;
        acc.child_max += r.child.max;
        acc.total += m.total;
        acc.strikes += 1;
        if let Some(p) = m.precision {
            acc.precision_sum += p;
            acc.precision_n += 1;
        }
    }
    let first = *months.keys().next().unwrap();
    let last = *months.keys().next_back().unwrap();
    if cutoff < first || cutoff > last {
        return Err(Error::Config(format!(
            "cutoff {cutoff} outside corpus range {first}..={last}"
        )));
    }
    if policy == InclusionPolicy::AllCalendarMonthsZeroFilled {
        for m in first.through(last) {
            months.entry(m).or_default();
        }
    }

    let observations = months
        .into_iter()
        .map(|(month, a)| {
            let event_time = month.months_since(cutoff);
            MonthlyObservation {
                month,
                event_time,
                civilian_sum: a.civ,
                civilian_min_sum: a.civ_min,
                civilian_max_sum: a.civ_max,
                child_sum: a.child,
                child_min_sum: a.child_min,
                child_max_sum: a.child_max,
                total_sum: a.total,
                strike_count: a.strikes,
                precision_mean: (a.precision_n > 0).then(|| a.precision_sum / a.precision_n as f64),
                civ_per_strike: (a.strikes > 0).then(|| a.civ / a.strikes as f64),
                treated: event_time >= 0,
            }
        })
        .collect();

    Ok(MonthlyPanel {
        observations,
        cutoff,
        inclusion_policy: policy,
        corpus_range: (first, last),
    })
}
