//! Fixed-format CSV renderings of the descriptive and estimate tables.
//! Numbers use three decimals (integers print bare) so files diff cleanly.

use std::fmt::Write;

use serde::Serialize;

use crate::data::{SideSummary, SummaryTable};
use crate::rd::RdEstimate;

/// Integers print without decimals; everything else with three.
pub fn fmt_num(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() { "NA".into() } else if v > 0.0 { "Inf".into() } else { "-Inf".into() };
    }
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        let s = format!("{v:.3}");
        if s == "-0.000" { "0.000".into() } else { s }
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_num).unwrap_or_else(|| "NA".into())
}

type Getter = fn(&SideSummary) -> Option<f64>;

const TABLE1_ROWS: &[(&str, Getter)] = &[
    ("civilian_count", |s| Some(s.civilian.count)),
    ("civilian_mean", |s| Some(s.civilian.mean)),
    ("civilian_mean_min_est", |s| Some(s.civilian.mean_min_est)),
    ("civilian_mean_max_est", |s| Some(s.civilian.mean_max_est)),
    ("child_count", |s| Some(s.child.count)),
    ("child_mean", |s| Some(s.child.mean)),
    ("child_mean_min_est", |s| Some(s.child.mean_min_est)),
    ("child_mean_max_est", |s| Some(s.child.mean_max_est)),
    ("total_count", |s| Some(s.total.count)),
    ("total_mean", |s| Some(s.total.mean)),
    ("precision_mean", |s| s.precision_mean),
    ("precision_mean_strike_level", |s| s.strike_precision_mean),
    ("strike_count", |s| Some(s.strike_count as f64)),
    ("strike_mean", |s| Some(s.strike_mean)),
    ("months_included", |s| Some(s.months_included as f64)),
    ("calendar_months", |s| Some(s.calendar_months as f64)),
];

/// Descriptive table with a pre and a post column per cutoff.
pub fn table1_csv(tables: &[SummaryTable]) -> String {
    let mut out = String::from("statistic");
    for t in tables {
        let _ = write!(out, ",pre_{0},post_{0}", t.cutoff);
    }
    out.push('\n');
    for (name, get) in TABLE1_ROWS {
        out.push_str(name);
        for t in tables {
            for side in [&t.pre, &t.post] {
                let _ = write!(out, ",{}", opt(side.as_ref().and_then(get)));
            }
        }
        out.push('\n');
    }
    out
}

/// One column of the estimate table: an outcome at one bandwidth choice.
#[derive(Debug, Clone, Serialize)]
pub struct Table2Column {
    pub outcome: String,
    pub bandwidth: String,
    pub estimate: Option<RdEstimate<f64>>,
    pub error: Option<String>,
}

fn stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else if p < 0.1 {
        "+"
    } else {
        ""
    }
}

/// Estimate table: three estimator rows with p-values and standard errors,
/// then the specification rows.
pub fn table2_csv(columns: &[Table2Column]) -> String {
    let mut out = String::from("row");
    for c in columns {
        let _ = write!(out, ",{} [{}]", c.outcome, c.bandwidth);
    }
    out.push('\n');
    let mut row = |label: &str, f: &dyn Fn(&RdEstimate<f64>) -> String| {
        out.push_str(label);
        for c in columns {
            let cell = c.estimate.as_ref().map(f).unwrap_or_else(|| "NA".into());
            let _ = write!(out, ",{cell}");
        }
        out.push('\n');
    };
    for i in 0..3 {
        let label = ["Conventional", "Bias-Corrected", "Robust"][i];
        row(label, &|e| {
            let (_, tau, _, p) = e.rows()[i];
            format!("{:.3}{}", tau, stars(p))
        });
        row(&format!("{label} p"), &|e| format!("{:.3}", e.rows()[i].3));
        row(&format!("{label} se"), &|e| format!("{:.3}", e.rows()[i].2));
    }
    row("PolyOrder", &|e| e.p.to_string());
    row("OrderBias", &|e| e.q.to_string());
    row("Kernel", &|e| e.kernel.name().to_string());
    row("Bandwidth", &|e| format!("{:.3}", e.bandwidth_used));
    row("BiasBandwidth", &|e| format!("{:.3}", e.bias_bandwidth_used));
    row("BWType", &|e| e.bandwidth_type.clone());
    row("N left", &|e| e.n_left.to_string());
    row("N right", &|e| e.n_right.to_string());
    out
}
