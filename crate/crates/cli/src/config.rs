use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use rdit::breaks::BreakConfig;
use rdit::counterfactual::{DEFAULT_VSL_HIGH, DEFAULT_VSL_LOW};
use rdit::data::{InclusionPolicy, Schema};
use rdit::localpoly::{Kernel, VarianceKind};
use rdit::rd::{BandwidthChoice, Outcome, RdConfig, RdSettings};
use rdit::robustness::{DonutSpec, RollingWindow};
use rdit::{Error, Result, YearMonth};

/// Every choice a replication run depends on. Loaded from TOML, then
/// overridden by command-line flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub schema: Schema,
    pub cutoff: YearMonth,
    pub announcement_cutoff: YearMonth,
    pub inclusion: InclusionPolicy,
    pub outcomes: Vec<String>,
    pub bandwidths: Vec<String>,
    pub p: usize,
    pub q: usize,
    pub kernel: Kernel,
    pub variance: VarianceKind,
    /// Half-widths in months around `donut_center`, or explicit `FROM..TO` ranges.
    pub donuts: Vec<String>,
    pub donut_center: YearMonth,
    pub rolling_window: RollingWindow,
    pub rolling_bandwidth: String,
    pub orders: Vec<usize>,
    pub falsification_outcomes: Vec<String>,
    pub breaks: BreakConfig,
    pub iterations: usize,
    pub seed: u64,
    /// Admit every pre-cutoff strike as a donor instead of the default window.
    pub wide_donor_pool: bool,
    pub vsl_low: f64,
    pub vsl_high: f64,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data: None,
            schema: Schema::default(),
            cutoff: YearMonth::new(2011, 7),
            announcement_cutoff: YearMonth::new(2013, 5),
            inclusion: InclusionPolicy::StrikeMonthsOnly,
            outcomes: ["civilian_casualties", "strike_precision", "civ_per_strike"].map(String::from).to_vec(),
            bandwidths: ["mserd", "manual:48"].map(String::from).to_vec(),
            p: 1,
            q: 2,
            kernel: Kernel::Triangular,
            variance: VarianceKind::default(),
            donuts: ["3", "6", "9", "2011-07..2013-05"].map(String::from).to_vec(),
            donut_center: YearMonth::new(2012, 4),
            rolling_window: RollingWindow::default(),
            rolling_bandwidth: "manual:48".into(),
            orders: vec![1, 2, 3],
            falsification_outcomes: ["strike_count", "combatant_casualties"].map(String::from).to_vec(),
            breaks: BreakConfig::default(),
            iterations: 5000,
            seed: 20130523,
            wide_donor_pool: false,
            vsl_low: DEFAULT_VSL_LOW,
            vsl_high: DEFAULT_VSL_HIGH,
            out: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("config {}: {e}", path.display())))
    }

    pub fn settings(&self, bandwidth: BandwidthChoice) -> RdSettings {
        RdSettings { p: self.p, q: self.q, kernel: self.kernel, bandwidth, variance: self.variance }
    }

    pub fn rd_config(&self, cutoff: YearMonth, outcome: Outcome, bandwidth: BandwidthChoice) -> RdConfig {
        RdConfig { cutoff, outcome, settings: self.settings(bandwidth) }
    }

    pub fn bandwidth_choices(&self) -> Result<Vec<BandwidthChoice>> {
        self.bandwidths.iter().map(|b| b.parse()).collect()
    }

    pub fn outcome_list(&self, names: &[String]) -> Result<Vec<Outcome>> {
        names
            .iter()
            .map(|n| Outcome::from_name(n).ok_or_else(|| Error::Config(format!("unknown outcome `{n}`"))))
            .collect()
    }

    pub fn donut_specs(&self) -> Result<Vec<DonutSpec>> {
        self.donuts.iter().map(|d| parse_donut(d, self.donut_center)).collect()
    }

    /// Checks everything that can fail before any data is read.
    pub fn validate(&self) -> Result<()> {
        let data = self.data.as_ref().ok_or_else(|| {
            Error::Config("no data path: pass --data, set RDIT_DATA, or set `data` in the config file".into())
        })?;
        if !data.is_file() {
            return Err(Error::Config(format!("data file {} does not exist", data.display())));
        }
        if self.announcement_cutoff <= self.cutoff {
            return Err(Error::Config("announcement cutoff must follow the implementation cutoff".into()));
        }
        if self.bandwidths.is_empty() || self.outcomes.is_empty() {
            return Err(Error::Config("at least one outcome and one bandwidth are required".into()));
        }
        for b in self.bandwidth_choices()? {
            self.settings(b).validate()?;
        }
        self.settings(self.rolling_bandwidth.parse()?).validate()?;
        self.outcome_list(&self.outcomes)?;
        self.outcome_list(&self.falsification_outcomes)?;
        self.donut_specs()?;
        if self.orders.is_empty() || self.orders.contains(&0) {
            return Err(Error::Config("polynomial orders must be positive".into()));
        }
        if self.rolling_window.from > self.rolling_window.to {
            return Err(Error::Config("rolling window start follows its end".into()));
        }
        self.breaks.validate()?;
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be positive".into()));
        }
        if !(self.vsl_low > 0.0 && self.vsl_low <= self.vsl_high && self.vsl_high.is_finite()) {
            return Err(Error::Config("VSL bounds must satisfy 0 < low <= high".into()));
        }
        Ok(())
    }
}

/// `N` is a half-width around `center`; `FROM..TO` an explicit inclusive range.
pub fn parse_donut(s: &str, center: YearMonth) -> Result<DonutSpec> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once("..") {
        return Ok(DonutSpec::range(a.trim().parse()?, b.trim().parse()?));
    }
    s.parse::<u32>()
        .map(|w| DonutSpec::symmetric(center, w))
        .map_err(|_| Error::Config(format!("invalid donut `{s}` (expected a half-width or FROM..TO)")))
}

pub fn parse_window(s: &str) -> Result<RollingWindow> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| Error::Config(format!("invalid window `{s}` (expected FROM..TO)")))?;
    Ok(RollingWindow { from: a.trim().parse()?, to: b.trim().parse()? })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = RunConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg: RunConfig = toml::from_str("cutoff = \"2010-01\"\n[schema]\ndate = \"when\"\n").unwrap();
        assert_eq!(cfg.cutoff, YearMonth::new(2010, 1));
        assert_eq!(cfg.schema.date, "when");
        assert_eq!(cfg.schema.civ_min, "civ_min");
        assert_eq!(cfg.seed, 20130523);
        assert!(toml::from_str::<RunConfig>("cutof = \"2010-01\"").is_err());
    }

    #[test]
    fn donut_forms() {
        let c = YearMonth::new(2012, 4);
        assert_eq!(parse_donut("6", c).unwrap(), DonutSpec::symmetric(c, 6));
        let full = parse_donut("2011-07..2013-05", c).unwrap();
        assert_eq!(full.excluded_range(), Some((YearMonth::new(2011, 7), YearMonth::new(2013, 5))));
        assert!(parse_donut("wide", c).is_err());
        assert!(parse_window("2010-10").is_err());
    }

    #[test]
    fn validation_rejects_bad_settings() {
        let mut cfg = RunConfig::default();
        assert!(cfg.validate().is_err());
        let file = std::env::current_exe().unwrap();
        cfg.data = Some(file);
        cfg.validate().unwrap();
        cfg.bandwidths = vec!["manual:2".into()];
        assert!(cfg.validate().is_err());
        cfg.bandwidths = vec!["mserd".into()];
        cfg.announcement_cutoff = cfg.cutoff;
        assert!(cfg.validate().is_err());
    }
}
