//! Seed-wise aggregation, the pooled two-sample t-test and report tables.

mod aggregate;
mod report;
mod ttest;

pub use aggregate::{aggregate, converged_accuracies, summarize, SampleStats};
pub use report::{
    format_cell, format_converged, parse_cell, render_table1, render_table2, Rendered, ReportStyle,
    Table1, MISSING, STD_NOTE,
};
pub use ttest::{
    reg_inc_beta, significance_matrix, t_test_pooled, t_two_tailed_p, SignificanceMatrix,
    TTestResult, SIGNIFICANCE_LEVEL,
};
