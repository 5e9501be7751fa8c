use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum and maximum reported estimate for one casualty category.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateRange {
    pub min: f64,
    pub max: f64,
}

impl EstimateRange {
    pub fn new(min: f64, max: f64) -> Self {
        EstimateRange { min, max }
    }

    pub fn exact(v: f64) -> Self {
        EstimateRange { min: v, max: v }
    }

    pub fn midpoint(&self) -> f64 {
        (self.min + self.max) / 2.0
    }
}

/// One strike as ingested from the source CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrikeRecord {
    pub strike_id: String,
    pub date: NaiveDate,
    pub location: String,
    pub civilian: EstimateRange,
    pub child: EstimateRange,
    pub total: EstimateRange,
    #[serde(default)]
    pub sources: Vec<String>,
}

impl StrikeRecord {
    /// Checks the ordering invariants; `Err` carries a human-readable reason.
    pub fn validate(&self) -> std::result::Result<(), String> {
        for (name, r) in [("civ", &self.civilian), ("child", &self.child), ("total", &self.total)] {
            if !r.min.is_finite() || !r.max.is_finite() {
                return Err(format!("{name} estimate is not finite"));
            }
            if r.min < 0.0 {
                return Err(format!("{name}_min is negative ({})", r.min));
            }
            if r.min > r.max {
                return Err(format!("{name}_min ({}) exceeds {name}_max ({})", r.min, r.max));
            }
        }
        let m = midpoints(self);
        if m.child > m.civilian {
            return Err(format!(
                "child midpoint ({}) exceeds civilian midpoint ({})",
                m.child, m.civilian
            ));
        }
        if m.civilian > m.total {
            return Err(format!(
                "civilian midpoint ({}) exceeds total midpoint ({})",
                m.civilian, m.total
            ));
        }
        Ok(())
    }
}

/// Per-strike outcome values derived from the estimate ranges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CasualtyMidpoints {
    pub civilian: f64,
    pub child: f64,
    pub total: f64,
    /// Share of deaths that were not civilians; `None` when nobody died.
    pub precision: Option<f64>,
}

pub fn midpoints(record: &StrikeRecord) -> CasualtyMidpoints {
    let civilian = record.civilian.midpoint();
    let total = record.total.midpoint();
    let precision = (total > 0.0).then(|| (total - civilian) / total);
    CasualtyMidpoints {
        civilian,
        child: record.child.midpoint(),
        total,
        precision,
    }
}

/// Maps logical fields onto CSV header names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Schema {
    pub strike_id: Option<String>,
    pub date: String,
    pub location: Option<String>,
    pub civ_min: String,
    pub civ_max: String,
    pub child_min: String,
    pub child_max: String,
    pub total_min: String,
    pub total_max: String,
    pub sources: Option<String>,
    /// chrono format string for the date column.
    pub date_format: String,
    /// Separator between citations in the sources column.
    pub sources_separator: String,
    /// Inclusive admissible date range; `None` disables the check.
    pub date_range: Option<(NaiveDate, NaiveDate)>,
}

impl Default for Schema {
    fn default() -> Self {
        Schema {
            strike_id: Some("strike_id".into()),
            date: "date".into(),
            location: Some("location".into()),
            civ_min: "civ_min".into(),
            civ_max: "civ_max".into(),
            child_min: "child_min".into(),
            child_max: "child_max".into(),
            total_min: "total_min".into(),
            total_max: "total_max".into(),
            sources: Some("sources".into()),
            date_format: "%Y-%m-%d".into(),
            sources_separator: ";".into(),
            date_range: Some((
                NaiveDate::from_ymd_opt(2002, 1, 1).unwrap(),
                NaiveDate::from_ymd_opt(2019, 12, 31).unwrap(),
            )),
        }
    }
}

struct Columns {
    strike_id: Option<usize>,
    date: usize,
    location: Option<usize>,
    casualties: [usize; 6],
    sources: Option<usize>,
}

impl Columns {
    fn resolve(schema: &Schema, header: &csv::StringRecord) -> Result<Self> {
        let index: HashMap<&str, usize> = header
            .iter()
            .enumerate()
            .map(|(i, h)| (h.trim().trim_start_matches('\u{feff}'), i))
            .collect();
        let required = |name: &String| {
            index.get(name.as_str()).copied().ok_or_else(|| Error::Schema {
                column: name.clone(),
            })
        };
        let optional = |name: &Option<String>| name.as_ref().and_then(|n| index.get(n.as_str()).copied());
        Ok(Columns {
            date: required(&schema.date)?,
            casualties: [
                required(&schema.civ_min)?,
                required(&schema.civ_max)?,
                required(&schema.child_min)?,
                required(&schema.child_max)?,
                required(&schema.total_min)?,
                required(&schema.total_max)?,
            ],
            strike_id: optional(&schema.strike_id),
            location: optional(&schema.location),
            sources: optional(&schema.sources),
        })
    }
}

fn parse_date(raw: &str, format: &str) -> Option<NaiveDate> {
    let raw = raw.trim();
    NaiveDate::parse_from_str(raw, format).ok().or_else(|| {
        // timestamps such as `2011-07-01T00:00:00` or `2011-07-01 00:00`
        let head = raw.split(['T', ' ']).next()?;
        NaiveDate::parse_from_str(head, format).ok()
    })
}

/// Reads and validates strike records from any CSV source, in file order.
pub fn read_strike_csv<R: Read>(reader: R, schema: &Schema) -> Result<Vec<StrikeRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let cols = Columns::resolve(schema, &header)?;
    let names = [
        &schema.civ_min,
        &schema.civ_max,
        &schema.child_min,
        &schema.child_max,
        &schema.total_min,
        &schema.total_max,
    ];

    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let row_err = |message: String| Error::Row { line, message };
        let cell = |i: usize| row.get(i).unwrap_or("").trim();

        let date_raw = cell(cols.date);
        let date = parse_date(date_raw, &schema.date_format)
            .ok_or_else(|| row_err(format!("unparseable date `{date_raw}`")))?;
        if let Some((lo, hi)) = schema.date_range {
            if date < lo || date > hi {
                return Err(row_err(format!("date {date} outside admissible range {lo}..={hi}")));
            }
        }

        let mut values = [0.0f64; 6];
        for (k, &col) in cols.casualties.iter().enumerate() {
            let raw = cell(col);
            values[k] = raw
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| row_err(format!("non-numeric value `{raw}` in column `{}`", names[k])))?;
        }

        let record = StrikeRecord {
            strike_id: cols
                .strike_id
                .map(|i| cell(i).to_string())
                .filter(|s| !s.is_empty())
                .unwrap_or_else(|| format!("row-{line}")),
            date,
            location: cols.location.map(|i| cell(i).to_string()).unwrap_or_default(),
            civilian: EstimateRange::new(values[0], values[1]),
            child: EstimateRange::new(values[2], values[3]),
            total: EstimateRange::new(values[4], values[5]),
            sources: cols
                .sources
                .map(|i| {
                    cell(i)
                        .split(schema.sources_separator.as_str())
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(String::from)
                        .collect()
                })
                .unwrap_or_default(),
        };
        record.validate().map_err(row_err)?;
        out.push(record);
    }
    Ok(out)
}

pub fn parse_strike_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<Vec<StrikeRecord>> {
    let file = std::fs::File::open(path.as_ref())?;
    read_strike_csv(std::io::BufReader::new(file), schema)
}

/// Writes records with the default column names.
pub fn write_strike_csv<W: Write>(records: &[StrikeRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "strike_id", "date", "location", "civ_min", "civ_max", "child_min", "child_max",
        "total_min", "total_max", "sources",
    ])?;
    for r in records {
        w.write_record([
            r.strike_id.clone(),
            r.date.format("%Y-%m-%d").to_string(),
            r.location.clone(),
            r.civilian.min.to_string(),
            r.civilian.max.to_string(),
            r.child.min.to_string(),
            r.child.max.to_string(),
            r.total.min.to_string(),
            r.total.max.to_string(),
            r.sources.join(";"),
        ])?;
    }
    w.flush()?;
    Ok(())
}
