//! Bi-temporal tree matching and change reporting.

pub mod hungarian;
pub mod matching;
pub mod report;

pub use matching::{
    candidates, centroid_distance, greedy_assignment, match_epochs, optimal_assignment, verdict_counts, ChangeRecord,
    MatchCriterion, MatchOptions, MatchStrategy, Verdict, VerdictCounts, DEFAULT_MAX_DIST_M,
};
pub use report::{
    changes_geojson, count_trees, region_report, regions_from_geojson, regions_to_geojson, report_csv,
    summary_markdown, ChangeReport, Region, RegionReport, TreeCount,
};
