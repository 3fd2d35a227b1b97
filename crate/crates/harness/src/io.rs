//! Plain-text matrix and label files.
//!
//! A matrix file starts with a `p,n` line followed by `p` rows of `n`
//! comma-separated values. A label file holds 1-based labels separated by
//! commas or whitespace. Blank lines and lines starting with `#` are skipped.

use std::fs;
use std::path::Path;

use loocluster_core::Matrix;

use crate::error::{HarnessError, Result};

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))
}

/// Writes through a sibling temporary file and a rename, so readers never
/// see a half-written file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = Path::new(&tmp);
    fs::write(tmp, contents).map_err(|e| HarnessError::io(tmp, e))?;
    fs::rename(tmp, path).map_err(|e| HarnessError::io(path, e))
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

pub fn parse_matrix(text: &str, path: &Path) -> Result<Matrix> {
    let mut lines = content_lines(text);
    let (line_no, header) = lines
        .next()
        .ok_or_else(|| HarnessError::parse(path, 1, "empty matrix file"))?;
    let dims: Vec<usize> = header
        .split(',')
        .map(|t| t.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| {
            HarnessError::parse(path, line_no, format!("expected `p,n`, found `{header}`"))
        })?;
    let [p, n] = dims[..] else {
        return Err(HarnessError::parse(
            path,
            line_no,
            format!("expected `p,n`, found `{header}`"),
        ));
    };
    let mut data = vec![0.0; p * n];
    let mut rows = 0;
    for (line_no, line) in lines {
        if rows == p {
            return Err(HarnessError::parse(
                path,
                line_no,
                format!("more than {p} rows"),
            ));
        }
        let mut count = 0;
        for (j, tok) in line.split(',').enumerate() {
            let v: f64 = tok.trim().parse().map_err(|_| {
                HarnessError::parse(path, line_no, format!("bad number `{}`", tok.trim()))
            })?;
            if j < n {
                data[j * p + rows] = v;
            }
            count += 1;
        }
        if count != n {
            return Err(HarnessError::parse(
                path,
                line_no,
                format!("expected {n} values, found {count}"),
            ));
        }
        rows += 1;
    }
    if rows != p {
        return Err(HarnessError::parse(
            path,
            text.lines().count(),
            format!("expected {p} rows, found {rows}"),
        ));
    }
    Ok(Matrix::from_col_major(p, n, data)?)
}

/// Values are written with 17 significant digits, which round-trips every `f64`.
pub fn format_matrix(m: &Matrix) -> String {
    let (p, n) = m.shape();
    let mut out = format!("{p},{n}\n");
    for i in 0..p {
        let row: Vec<String> = (0..n).map(|j| format!("{:.16e}", m[(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn read_matrix(path: &Path) -> Result<Matrix> {
    parse_matrix(&read_to_string(path)?, path)
}

pub fn write_matrix(path: &Path, m: &Matrix) -> Result<()> {
    write_atomic(path, format_matrix(m).as_bytes())
}

/// Parses 1-based labels and returns them 0-based.
pub fn parse_labels(text: &str, path: &Path) -> Result<Vec<usize>> {
    let mut labels = Vec::new();
    for (line_no, line) in content_lines(text) {
        for tok in line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
        {
            match tok.parse::<usize>() {
                Ok(a) if a >= 1 => labels.push(a - 1),
                _ => {
                    return Err(HarnessError::parse(
                        path,
                        line_no,
                        format!("labels are positive integers, found `{tok}`"),
                    ))
                }
            }
        }
    }
    Ok(labels)
}

pub fn format_labels(labels: &[usize]) -> String {
    let parts: Vec<String> = labels.iter().map(|a| (a + 1).to_string()).collect();
    parts.join(",") + "\n"
}

pub fn read_labels(path: &Path) -> Result<Vec<usize>> {
    parse_labels(&read_to_string(path)?, path)
}

pub fn write_labels(path: &Path, labels: &[usize]) -> Result<()> {
    write_atomic(path, format_labels(labels).as_bytes())
}
