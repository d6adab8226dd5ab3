//! Event-centric metrics and the backtracking-recall harness.

mod backtrack;
mod metrics;

pub use backtrack::{
    backtracking_recall, br_table, forced_queries, BrQuery, BrRow, QuerySource,
};
pub use metrics::{
    cea, ec, parse_gold_jsonl, sec, tua, CoherenceJudge, GoldAnnotation, GoldTurn,
    IdentityJudge, MetricsReport, PredictedTurn,
};
