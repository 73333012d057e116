//! Output formats: exact CSV for matrices and reports, Markdown tables in
//! the blocked layout, and comparison against transcribed golden tables.

pub mod csvio;
pub mod golden;
pub mod markdown;

pub use csvio::{
    fmt_full, matrix_from_csv, matrix_to_csv, read_matrix, report_from_csv, report_to_csv,
    write_atomic, write_matrix,
};
pub use golden::{
    golden_check, golden_csv_from_report, BlockTolerance, CellFailure, GoldenCell, GoldenReport,
    GoldenTable, TolerancePolicy, PAPER_SCALE_DRAWS,
};
pub use markdown::{fmt_cell, render_blocked, render_parameter, render_rows};
