use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::sensitivity::{ColumnStatus, Measure, MeasureBlock, SensitivityReport};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes `bytes` to a temporary sibling of `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::Invalid(format!("`{}` is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let mut f = std::fs::File::create(&tmp).map_err(io_err(&tmp))?;
    f.write_all(bytes).map_err(io_err(&tmp))?;
    f.sync_all().map_err(io_err(&tmp))?;
    drop(f);
    std::fs::rename(&tmp, path).map_err(io_err(path))
}

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_full(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:?}")
    }
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Invalid(format!("cannot parse `{s}` as a number in {what}")))
}

/// Matrix as `j,k,value` rows with 1-based indices, row-major.
pub fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::from("j,k,value\n");
    for j in 0..m.nrows() {
        for k in 0..m.ncols() {
            out.push_str(&format!("{},{},{}\n", j + 1, k + 1, fmt_full(m[(j, k)])));
        }
    }
    out
}

/// Parses the `j,k,value` format. Every cell of the implied shape must
/// appear exactly once.
pub fn matrix_from_csv(text: &str, what: &str) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let headers = rdr.headers()?.clone();
    if headers.iter().map(str::trim).collect::<Vec<_>>() != ["j", "k", "value"] {
        return Err(Error::Invalid(format!("{what}: header must be `j,k,value`")));
    }
    let mut cells = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let idx = |i: usize, name: &str| -> Result<usize> {
            rec[i]
                .trim()
                .parse::<usize>()
                .ok()
                .filter(|v| *v >= 1)
                .ok_or_else(|| Error::Invalid(format!("{what}: bad {name} index `{}`", &rec[i])))
        };
        cells.push((idx(0, "row")?, idx(1, "column")?, parse_f64(&rec[2], what)?));
    }
    let rows = cells.iter().map(|c| c.0).max().unwrap_or(0);
    let cols = cells.iter().map(|c| c.1).max().unwrap_or(0);
    if rows == 0 || cells.len() != rows * cols {
        return Err(Error::Invalid(format!(
            "{what}: expected {} cells for a {rows}x{cols} matrix, found {}",
            rows * cols,
            cells.len()
        )));
    }
    let mut m = DMatrix::from_element(rows, cols, f64::NAN);
    let mut seen = vec![false; rows * cols];
    for (j, k, v) in cells {
        let at = (j - 1) * cols + (k - 1);
        if seen[at] {
            return Err(Error::Invalid(format!("{what}: cell ({j},{k}) appears twice")));
        }
        seen[at] = true;
        m[(j - 1, k - 1)] = v;
    }
    Ok(m)
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    write_atomic(path, matrix_to_csv(m).as_bytes())
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    matrix_from_csv(&text, &path.display().to_string())
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Long format: `parameter,moment,measure,value,flag`, parameters outermost.
pub fn report_to_csv(report: &SensitivityReport) -> String {
    let mut out = String::from("parameter,moment,measure,value,flag\n");
    for b in report.blocks() {
        for (i, p) in report.params.iter().enumerate() {
            for (k, m) in report.moments.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    quote(p),
                    quote(m),
                    b.measure.name(),
                    fmt_full(b.values[(i, k)]),
                    b.status[k].flag()
                ));
            }
        }
    }
    out
}

/// Inverse of [`report_to_csv`]. Label order follows first appearance.
pub fn report_from_csv(text: &str) -> Result<SensitivityReport> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let headers = rdr.headers()?.clone();
    let want = ["parameter", "moment", "measure", "value", "flag"];
    if headers.iter().map(str::trim).collect::<Vec<_>>() != want {
        return Err(Error::Invalid(format!(
            "sensitivity CSV header must be `{}`",
            want.join(",")
        )));
    }
    let mut rows = Vec::new();
    let mut params: Vec<String> = Vec::new();
    let mut moments: Vec<String> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let measure = Measure::parse(rec[2].trim())
            .ok_or_else(|| Error::Invalid(format!("unknown measure `{}`", &rec[2])))?;
        let flag = ColumnStatus::parse(rec[4].trim())
            .ok_or_else(|| Error::Invalid(format!("unknown flag `{}`", &rec[4])))?;
        let (p, m) = (rec[0].to_string(), rec[1].to_string());
        if !params.contains(&p) {
            params.push(p.clone());
        }
        if !moments.contains(&m) {
            moments.push(m.clone());
        }
        rows.push((p, m, measure, parse_f64(&rec[3], "sensitivity CSV")?, flag));
    }
    let (np, nm) = (params.len(), moments.len());
    let mut blocks: Vec<MeasureBlock> = Vec::new();
    let mut filled: Vec<Vec<bool>> = Vec::new();
    for (p, m, measure, v, flag) in rows {
        let bi = match blocks.iter().position(|b| b.measure == measure) {
            Some(i) => i,
            None => {
                blocks.push(MeasureBlock {
                    measure,
                    values: DMatrix::from_element(np, nm, f64::NAN),
                    status: vec![ColumnStatus::Ok; nm],
                });
                filled.push(vec![false; np * nm]);
                blocks.len() - 1
            }
        };
        let i = params.iter().position(|x| *x == p).expect("label recorded");
        let k = moments.iter().position(|x| *x == m).expect("label recorded");
        if filled[bi][i * nm + k] {
            return Err(Error::Invalid(format!(
                "duplicate cell {} / {p} / {m}",
                measure.name()
            )));
        }
        filled[bi][i * nm + k] = true;
        blocks[bi].values[(i, k)] = v;
        blocks[bi].status[k] = flag;
    }
    if let Some(bi) = filled.iter().position(|f| f.iter().any(|x| !x)) {
        return Err(Error::ShapeMismatch(format!(
            "block {} is missing cells",
            blocks[bi].measure.name()
        )));
    }
    SensitivityReport::from_blocks(params, moments, blocks)
}
