//! Strike-level records, casualty midpoints and monthly event-time panels.

mod panel;
mod strike;
mod summary;
mod synthetic;

pub use panel::{build_monthly_panel, InclusionPolicy, MonthlyObservation, MonthlyPanel};
pub use strike::{
    midpoints, parse_strike_csv, read_strike_csv, write_strike_csv, CasualtyMidpoints,
    EstimateRange, Schema, StrikeRecord,
};
pub use summary::{summary_table, CasualtySummary, SideSummary, SummaryTable};
pub use synthetic::{generate_synthetic_corpus, SyntheticConfig};
