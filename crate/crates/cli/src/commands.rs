use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use rdit::breaks::{estimate_breaks, BreakEstimate};
use rdit::counterfactual::{projection_series, run_monte_carlo, vsl_scale, MonteCarloConfig};
use rdit::data::{build_monthly_panel, parse_strike_csv, summary_table, MonthlyPanel, StrikeRecord};
use rdit::plot::{breaks_svg, projection_svg, raw_rd_svg, rolling_svg, RawPoint};
use rdit::rd::{estimate_rd, outcome_series, Outcome};
use rdit::report::{fmt_num, table1_csv, table2_csv, Table2Column};
use rdit::robustness::{
    anova_by_exposure, anova_verdict, autocorrelation_diagnostic, autocorrelation_verdict, donut_rd, donut_verdict,
    falsification_rd, falsification_verdict, polynomial_sweep, polynomial_verdict, rolling_rd, rolling_verdict,
    ExposureOutcome, Verdict, VerdictStatus,
};
use rdit::{Error, Result, YearMonth};

use crate::config::RunConfig;

/// A loaded corpus plus the configuration that produced it.
pub struct Run {
    pub config: RunConfig,
    pub records: Vec<StrikeRecord>,
}

impl Run {
    pub fn load(config: RunConfig) -> Result<Run> {
        config.validate()?;
        let path = config.data.as_ref().expect("validated");
        let records = parse_strike_csv(path, &config.schema)?;
        if records.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        Ok(Run { config, records })
    }

    fn panel(&self, cutoff: YearMonth) -> Result<MonthlyPanel> {
        build_monthly_panel(&self.records, cutoff, self.config.inclusion)
    }

    fn write(&self, dir: &str, name: &str, contents: &str) -> Result<PathBuf> {
        let dir = self.config.out.join(dir);
        fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
        let path = dir.join(name);
        fs::write(&path, contents).map_err(|e| io_error(&path, e))?;
        Ok(path)
    }

    fn write_json<S: Serialize>(&self, dir: &str, name: &str, value: &S) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
        text.push('\n');
        self.write(dir, name, &text)
    }
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Config(format!("cannot write {}: {e}", path.display()))
}

/// A result that may have failed, in serializable form.
#[derive(Serialize)]
struct Attempt<T> {
    #[serde(flatten)]
    value: Option<T>,
    error: Option<String>,
}

impl<T> From<Result<T>> for Attempt<T> {
    fn from(r: Result<T>) -> Self {
        match r {
            Ok(v) => Attempt { value: Some(v), error: None },
            Err(e) => Attempt { value: None, error: Some(e.to_string()) },
        }
    }
}

fn attempt<T: Clone>(r: &Result<T>) -> Attempt<T> {
    match r {
        Ok(v) => Attempt { value: Some(v.clone()), error: None },
        Err(e) => Attempt { value: None, error: Some(e.to_string()) },
    }
}

fn outcome_label(outcome: &Outcome) -> &str {
    match outcome {
        Outcome::CivilianCasualties => "civilian casualties",
        Outcome::StrikePrecision => "strike precision",
        Outcome::CivPerStrike => "civilian casualties per strike",
        Outcome::StrikeCount => "strikes",
        Outcome::CombatantCasualties => "combatant casualties",
        Outcome::Custom { name, .. } => name,
    }
}

fn raw_points(panel: &MonthlyPanel, outcome: &Outcome) -> Result<Vec<RawPoint>> {
    let series = outcome_series(panel, outcome)?;
    let ranges = matches!(outcome, Outcome::CivilianCasualties);
    Ok(series
        .into_iter()
        .map(|(month, value)| {
            let range = ranges.then(|| {
                let o = panel.observations.iter().find(|o| o.month == month).expect("series month is in panel");
                (o.civilian_min_sum, o.civilian_max_sum)
            });
            RawPoint { month, value, range }
        })
        .collect())
}

pub fn summarize(run: &Run) -> Result<()> {
    let tables = [run.config.cutoff, run.config.announcement_cutoff]
        .into_iter()
        .map(|c| Ok(summary_table(&run.panel(c)?, &run.records, c)))
        .collect::<Result<Vec<_>>>()?;
    run.write("tables", "table1.csv", &table1_csv(&tables))?;
    run.write_json("tables", "table1.json", &tables)?;
    Ok(())
}

pub fn estimate(run: &Run) -> Result<()> {
    let cfg = &run.config;
    let panel = run.panel(cfg.cutoff)?;
    let outcomes = cfg.outcome_list(&cfg.outcomes)?;
    let mut columns = Vec::new();
    let mut first_error = None;
    for outcome in &outcomes {
        for (label, bw) in cfg.bandwidths.iter().zip(cfg.bandwidth_choices()?) {
            let est = estimate_rd(&panel, &cfg.rd_config(cfg.cutoff, outcome.clone(), bw));
            if let Err(e) = &est {
                eprintln!("warning: {} [{label}]: {e}", outcome.name());
            }
            let (estimate, error) = match est {
                Ok(e) => (Some(e), None),
                Err(e) => {
                    let msg = e.to_string();
                    first_error.get_or_insert(e);
                    (None, Some(msg))
                }
            };
            columns.push(Table2Column { outcome: outcome.name().to_string(), bandwidth: label.clone(), estimate, error });
        }
        match raw_points(&panel, outcome) {
            Ok(points) => {
                let title = format!("Monthly {} around {}", outcome_label(outcome), cfg.cutoff);
                let svg = raw_rd_svg(&title, outcome_label(outcome), &points, cfg.cutoff, None);
                run.write("plots", &format!("raw_{}.svg", outcome.name()), &svg)?;
            }
            Err(e) => eprintln!("warning: no raw plot for {}: {e}", outcome.name()),
        }
    }
    run.write("tables", "table2.csv", &table2_csv(&columns))?;
    run.write_json("tables", "table2.json", &columns)?;
    match first_error {
        Some(e) if columns.iter().all(|c| c.estimate.is_none()) => Err(e),
        _ => Ok(()),
    }
}

#[derive(Serialize)]
struct VerdictSummary<'a> {
    overall: VerdictStatus,
    passed: usize,
    failed: usize,
    indeterminate: usize,
    checks: &'a [Verdict],
}

fn break_verdict(est: &Result<BreakEstimate<f64>>, cutoff: YearMonth) -> Verdict {
    let criterion = format!("a detected break has a confidence interval containing {cutoff}");
    let est = match est {
        Ok(e) => e,
        Err(_) => return Verdict::new("structural_break", VerdictStatus::Indeterminate, &criterion),
    };
    let hit = est.ci_per_break.iter().position(|ci| ci.low <= cutoff && cutoff <= ci.high);
    let status = if hit.is_some() { VerdictStatus::Pass } else { VerdictStatus::Fail };
    let mut v = Verdict::new("structural_break", status, &criterion).stat("breaks", est.n_breaks() as f64);
    for (i, m) in est.break_months.iter().enumerate() {
        v = v.date(format!("break[{i}]"), *m);
        if let Some(p) = est.p_values.get(i) {
            v = v.stat(format!("p_value[{i}]"), *p);
        }
    }
    if let Some(i) = hit {
        let ci = &est.ci_per_break[i];
        v = v.date("ci_low", ci.low).date("ci_high", ci.high);
    }
    v
}

/// Series minus its pre- or post-cutoff mean, so the step itself does not
/// register as serial correlation.
fn demean_by_side(series: &[(YearMonth, f64)], cutoff: YearMonth) -> Vec<f64> {
    let side_mean = |post: bool| {
        let v: Vec<f64> = series.iter().filter(|p| (p.0 >= cutoff) == post).map(|p| p.1).collect();
        v.iter().sum::<f64>() / v.len().max(1) as f64
    };
    let (pre, post) = (side_mean(false), side_mean(true));
    series.iter().map(|&(m, v)| v - if m >= cutoff { post } else { pre }).collect()
}

/// Runs every robustness check and writes one verdict per check plus a
/// summary. Returns the verdicts; failed checks do not abort the bundle.
pub fn validate(run: &Run) -> Result<Vec<Verdict>> {
    let cfg = &run.config;
    let panel = run.panel(cfg.cutoff)?;
    let civ = Outcome::CivilianCasualties;
    let baseline_bw = cfg.bandwidth_choices()?[0];
    let base_cfg = cfg.rd_config(cfg.cutoff, civ.clone(), baseline_bw);
    let mut verdicts = Vec::new();

    let series = outcome_series(&panel, &civ)?;
    let breaks = estimate_breaks(&series, &cfg.breaks);
    run.write_json("tables", "breaks.json", &attempt(&breaks))?;
    if let Ok(b) = &breaks {
        run.write("plots", "breaks.svg", &breaks_svg("Structural breaks in monthly civilian casualties", &series, b))?;
    }
    verdicts.push(break_verdict(&breaks, cfg.cutoff));

    let rolling_cfg = cfg.rd_config(cfg.cutoff, civ.clone(), cfg.rolling_bandwidth.parse()?);
    let rolling = rolling_rd::<f64>(&run.records, &rolling_cfg, cfg.rolling_window, cfg.inclusion);
    run.write_json("tables", "rolling.json", &attempt(&rolling))?;
    match &rolling {
        Ok(r) => {
            let shade = breaks.as_ref().ok().and_then(|b| {
                let cis = &b.ci_per_break;
                cis.iter().find(|ci| ci.low <= cfg.cutoff && cfg.cutoff <= ci.high).or(cis.first()).map(|ci| (ci.low, ci.high))
            });
            run.write("plots", "rolling.svg", &rolling_svg("Rolling cutoff estimates", r, shade))?;
            verdicts.push(rolling_verdict(r, (cfg.cutoff.offset(-2), cfg.cutoff.offset(1))));
        }
        Err(_) => verdicts.push(Verdict::new("rolling", VerdictStatus::Indeterminate, "rolling estimation failed")),
    }

    let baseline = estimate_rd::<f64>(&panel, &base_cfg);
    let donuts: Vec<_> = cfg.donut_specs()?.into_iter().map(|d| donut_rd::<f64>(&panel, &base_cfg, d)).collect();
    run.write_json("tables", "donuts.json", &donuts.iter().map(attempt).collect::<Vec<_>>())?;
    let points = raw_points(&panel, &civ)?;
    for (i, d) in donuts.iter().enumerate() {
        if let Ok(d) = d {
            let title = format!("Donut {} around {}", d.donut.label(), cfg.cutoff);
            let svg = raw_rd_svg(&title, outcome_label(&civ), &points, cfg.cutoff, d.excluded);
            run.write("plots", &format!("donut_{}.svg", i + 1), &svg)?;
        }
    }

    let placebos: Vec<(String, Result<_>)> = cfg
        .outcome_list(&cfg.falsification_outcomes)?
        .into_iter()
        .map(|o| (o.name().to_string(), falsification_rd::<f64>(&panel, o, &base_cfg)))
        .collect();
    let placebo_json: Vec<_> = placebos.iter().map(|(n, r)| (n.clone(), attempt(r))).collect();
    run.write_json("tables", "falsification.json", &placebo_json)?;
    verdicts.push(falsification_verdict(&placebos));

    let sweep = polynomial_sweep::<f64>(&panel, &base_cfg, &cfg.orders);
    run.write_json("tables", "polynomial_sweep.json", &sweep)?;
    match &baseline {
        Ok(b) => {
            verdicts.push(donut_verdict(b, &donuts));
            verdicts.push(polynomial_verdict(b, &sweep));
        }
        Err(_) => {
            verdicts.push(Verdict::new("donut", VerdictStatus::Indeterminate, "baseline estimation failed"));
            verdicts.push(Verdict::new("polynomial_order", VerdictStatus::Indeterminate, "baseline estimation failed"));
        }
    }

    let values = demean_by_side(&series, cfg.cutoff);
    let ac = autocorrelation_diagnostic::<f64>(&values);
    run.write_json("tables", "autocorrelation.json", &attempt(&ac))?;
    verdicts.push(match &ac {
        Ok(a) => autocorrelation_verdict(a),
        Err(_) => Verdict::new("autocorrelation", VerdictStatus::Indeterminate, "autocorrelation diagnostic failed"),
    });

    let mut anovas = Vec::new();
    for outcome in [ExposureOutcome::Civilian, ExposureOutcome::Precision, ExposureOutcome::CivPerStrike] {
        let r = anova_by_exposure(&run.records, cfg.cutoff, outcome);
        verdicts.push(anova_verdict(outcome, &r));
        anovas.push((outcome.name(), Attempt::from(r)));
    }
    run.write_json("tables", "anova.json", &anovas)?;

    for v in &verdicts {
        run.write_json("verdicts", &format!("{}.json", v.check), v)?;
    }
    let count = |s: VerdictStatus| verdicts.iter().filter(|v| v.status == s).count();
    let (passed, failed, indeterminate) =
        (count(VerdictStatus::Pass), count(VerdictStatus::Fail), count(VerdictStatus::Indeterminate));
    let overall = if failed > 0 {
        VerdictStatus::Fail
    } else if indeterminate > 0 {
        VerdictStatus::Indeterminate
    } else {
        VerdictStatus::Pass
    };
    run.write_json("verdicts", "summary.json", &VerdictSummary { overall, passed, failed, indeterminate, checks: &verdicts })?;
    Ok(verdicts)
}

pub fn simulate(run: &Run) -> Result<()> {
    let cfg = &run.config;
    let mut mc = MonteCarloConfig { iterations: cfg.iterations, ..MonteCarloConfig::new(cfg.cutoff, cfg.seed) };
    if cfg.wide_donor_pool {
        mc = mc.widened();
    }
    let result = vsl_scale(run_monte_carlo(&run.records, &mc)?, cfg.vsl_low, cfg.vsl_high)?;
    run.write_json("tables", "simulation.json", &result)?;
    let points = projection_series(&result, &run.panel(cfg.cutoff)?);
    let mut csv = String::from("month,projected,actual\n");
    for p in &points {
        csv.push_str(&format!("{},{},{}\n", p.month, fmt_num(p.projected), fmt_num(p.actual)));
    }
    run.write("tables", "projection.csv", &csv)?;
    run.write("plots", "projection.svg", &projection_svg("Projected civilian deaths", &points))?;
    Ok(())
}
