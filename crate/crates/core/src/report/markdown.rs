use crate::sensitivity::{ColumnStatus, SensitivityReport};

/// Entries of flagged columns above this magnitude print as `>100*`.
pub const LARGE_CUTOFF: f64 = 100.0;

pub const FLAG_NOTE: &str = "\\* Not identified once this moment is dropped; \
entries above 100 are printed as >100.";

/// One cell at three decimals, with the table conventions for flagged columns.
pub fn fmt_cell(v: f64, status: ColumnStatus) -> String {
    match status {
        ColumnStatus::Ok => format!("{v:.3}"),
        ColumnStatus::NotIdentified if !v.is_finite() || v.abs() > LARGE_CUTOFF => ">100*".into(),
        ColumnStatus::NotIdentified => format!("{v:.3}*"),
        ColumnStatus::Unavailable => "n/a".into(),
    }
}

fn any_flagged(report: &SensitivityReport) -> bool {
    report
        .blocks()
        .iter()
        .any(|b| b.status.contains(&ColumnStatus::NotIdentified))
}

fn escape(s: &str) -> String {
    s.replace('|', "\\|")
}

/// Blocked layout: one heading row per measure, parameters as rows,
/// moments as columns.
pub fn render_blocked(report: &SensitivityReport, title: &str, notes: &[String]) -> String {
    let mut out = format!("### {title}\n\n|  |");
    for m in &report.moments {
        out.push_str(&format!(" {} |", escape(m)));
    }
    out.push_str("\n|---|");
    out.push_str(&"---:|".repeat(report.n_moments()));
    out.push('\n');
    for b in report.blocks() {
        out.push_str(&format!("| **{}** |{}\n", b.measure.name(), " |".repeat(report.n_moments())));
        for (i, p) in report.params.iter().enumerate() {
            out.push_str(&format!("| {} |", escape(p)));
            for k in 0..report.n_moments() {
                out.push_str(&format!(" {} |", fmt_cell(b.values[(i, k)], b.status[k])));
            }
            out.push('\n');
        }
    }
    finish(out, any_flagged(report), notes)
}

/// Transposed layout for a single parameter: numbered moments as rows,
/// measures as columns.
pub fn render_parameter(report: &SensitivityReport, param: usize, title: &str, notes: &[String]) -> String {
    let blocks = report.blocks();
    let mut out = format!("### {title}\n\n| # | moment |");
    for b in blocks {
        out.push_str(&format!(" {} |", b.measure.name()));
    }
    out.push_str("\n|---:|---|");
    out.push_str(&"---:|".repeat(blocks.len()));
    out.push('\n');
    for (k, m) in report.moments.iter().enumerate() {
        out.push_str(&format!("| {} | {} |", k + 1, escape(m)));
        for b in blocks {
            out.push_str(&format!(" {} |", fmt_cell(b.values[(param, k)], b.status[k])));
        }
        out.push('\n');
    }
    finish(out, any_flagged(report), notes)
}

/// Simple labelled table with values at three decimals.
pub fn render_rows(title: &str, header: &[&str], rows: &[(String, Vec<f64>)], notes: &[String]) -> String {
    let mut out = format!("### {title}\n\n|");
    for h in header {
        out.push_str(&format!(" {} |", escape(h)));
    }
    out.push_str("\n|---|");
    out.push_str(&"---:|".repeat(header.len().saturating_sub(1)));
    out.push('\n');
    for (label, vals) in rows {
        out.push_str(&format!("| {} |", escape(label)));
        for v in vals {
            out.push_str(&format!(" {v:.3} |"));
        }
        out.push('\n');
    }
    finish(out, false, notes)
}

fn finish(mut out: String, flagged: bool, notes: &[String]) -> String {
    if flagged || !notes.is_empty() {
        out.push('\n');
    }
    for n in notes {
        out.push_str(n);
        out.push_str("\n\n");
    }
    if flagged {
        out.push_str(FLAG_NOTE);
        out.push('\n');
    }
    out
}
