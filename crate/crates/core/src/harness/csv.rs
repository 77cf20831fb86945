//! Plain CSV tables: header row, LF line endings, numbers with 17
//! significant digits.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

/// One column of a table.
pub enum Column<'a> {
    Num(&'a str, &'a [f64]),
    Text(&'a str, &'a [&'a str]),
    /// Same string on every row.
    Const(&'a str, &'a str),
}

impl Column<'_> {
    fn name(&self) -> &str {
        match self {
            Column::Num(n, _) | Column::Text(n, _) | Column::Const(n, _) => n,
        }
    }

    fn len(&self) -> Option<usize> {
        match self {
            Column::Num(_, v) => Some(v.len()),
            Column::Text(_, v) => Some(v.len()),
            Column::Const(..) => None,
        }
    }
}

/// Formats `x` with 17 significant digits; non-finite values as `nan`, `inf`, `-inf`.
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

/// Renders the table; all non-constant columns must have equal length.
pub fn render(columns: &[Column<'_>]) -> String {
    let rows = columns.iter().filter_map(Column::len).min().unwrap_or(0);
    debug_assert!(columns.iter().filter_map(Column::len).all(|n| n == rows));
    let mut out = String::new();
    let header: Vec<&str> = columns.iter().map(Column::name).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for r in 0..rows {
        for (k, col) in columns.iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            match col {
                Column::Num(_, v) => out.push_str(&format_number(v[r])),
                Column::Text(_, v) => out.push_str(v[r]),
                Column::Const(_, s) => {
                    let _ = write!(out, "{s}");
                }
            }
        }
        out.push('\n');
    }
    out
}

pub fn write(path: &Path, columns: &[Column<'_>]) -> io::Result<()> {
    std::fs::write(path, render(columns))
}

/// Reads a numeric column by header name.
pub fn read_column(text: &str, name: &str) -> Result<Vec<f64>, String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty file")?;
    let idx = header
        .split(',')
        .position(|h| h.trim() == name)
        .ok_or_else(|| format!("no column '{name}' in header '{header}'"))?;
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(k, l)| {
            let cell = l.split(',').nth(idx).ok_or_else(|| format!("row {}: missing column {idx}", k + 2))?;
            cell.trim().parse::<f64>().map_err(|e| format!("row {}: {e}", k + 2))
        })
        .collect()
}
