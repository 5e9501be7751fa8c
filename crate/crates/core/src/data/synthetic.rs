use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use super::strike::{EstimateRange, StrikeRecord};
use crate::error::{Error, Result};
use crate::month::YearMonth;

/// Fixture generator settings. Month `cutoff_offset` (0-based from `start`)
/// is the first month drawn around `post_mean`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub n_months: usize,
    pub cutoff_offset: usize,
    pub pre_mean: f64,
    pub post_mean: f64,
    pub noise_sd: f64,
    pub seed: u64,
    pub start: YearMonth,
    pub strikes_per_month: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_months: 120,
            cutoff_offset: 60,
            pre_mean: 10.0,
            post_mean: 2.0,
            noise_sd: 1.0,
            seed: 7,
            start: YearMonth::new(2005, 1),
            strikes_per_month: 2,
        }
    }
}

impl SyntheticConfig {
    pub fn cutoff(&self) -> YearMonth {
        self.start.offset(self.cutoff_offset as i32)
    }

    fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(format!("synthetic corpus: {m}")));
        if self.n_months < 4 {
            return fail("n_months must be at least 4");
        }
        if self.cutoff_offset == 0 || self.cutoff_offset >= self.n_months {
            return fail("cutoff_offset must leave at least one month on each side");
        }
        if !(self.pre_mean >= 0.0 && self.post_mean >= 0.0) {
            return fail("means must be nonnegative");
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return fail("noise_sd must be finite and nonnegative");
        }
        if self.strikes_per_month == 0 || self.strikes_per_month > 28 {
            return fail("strikes_per_month must be in 1..=28");
        }
        Ok(())
    }
}

/// Deterministic strike corpus whose monthly civilian sums are
/// `max(0, mean + noise)`, split evenly across the month's strikes.
pub fn generate_synthetic_corpus(config: &SyntheticConfig) -> Result<Vec<StrikeRecord>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let noise = Normal::new(0.0, config.noise_sd).map_err(|e| Error::Config(e.to_string()))?;
    let k = config.strikes_per_month;
    let mut out = Vec::with_capacity(config.n_months * k);

    for m in 0..config.n_months {
        let month = config.start.offset(m as i32);
        let mean = if m < config.cutoff_offset { config.pre_mean } else { config.post_mean };
        let draw: f64 = if config.noise_sd > 0.0 { rng.sample(noise) } else { 0.0 };
        let per_strike = (mean + draw).max(0.0) / k as f64;
        for j in 0..k {
            let combatants = f64::from(rng.random_range(1u32..=6));
            let civ = EstimateRange::new(0.5 * per_strike, 1.5 * per_strike);
            out.push(StrikeRecord {
                strike_id: format!("syn-{month}-{j}"),
                date: NaiveDate::from_ymd_opt(month.year(), month.month(), 1 + j as u32).unwrap(),
                location: "synthetic".into(),
                civilian: civ,
                child: EstimateRange::new(0.1 * civ.min, 0.1 * civ.max),
                total: EstimateRange::new(civ.min + combatants, civ.max + combatants),
                sources: vec![],
            });
        }
    }
    Ok(out)
}
