//! `RPLL1` text datasets.
//!
//! ```text
//! RPLL1 <n> <d> <k> <has_labels 0|1>
//! <d floats> <k-char 0/1 candidate mask> [<1-based label>]
//! ...
//! ```
//!
//! Floats are written in shortest round-trip form, so reading back is lossless.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use robust_pll_core::data::PartialDataset;
use robust_pll_core::DenseMatrix;

use crate::error::{CliError, Result};

pub const MAGIC: &str = "RPLL1";

fn line_error(path: &Path, line: usize, reason: impl Into<String>) -> CliError {
    CliError::Format {
        path: path.display().to_string(),
        unit: "line",
        offset: line as u64,
        reason: reason.into(),
    }
}

pub fn to_string(data: &PartialDataset) -> String {
    let (n, d, k) = (data.len(), data.dim(), data.num_classes());
    let labels = data.true_labels();
    let mut out = String::with_capacity(n * (d * 8 + k + 4) + 32);
    let _ = writeln!(out, "{MAGIC} {n} {d} {k} {}", labels.is_some() as u8);
    for i in 0..n {
        for v in data.features().row(i) {
            let _ = write!(out, "{v} ");
        }
        out.extend(data.candidate_mask(i).iter().map(|&c| if c { '1' } else { '0' }));
        if let Some(l) = labels {
            let _ = write!(out, " {}", l[i] + 1);
        }
        out.push('\n');
    }
    out
}

pub fn parse(text: &str, path: &Path) -> Result<PartialDataset> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines.next().ok_or_else(|| line_error(path, 1, "empty file"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 5 || fields[0] != MAGIC {
        return Err(line_error(
            path,
            1,
            format!("header must be `{MAGIC} n d k has_labels`"),
        ));
    }
    let num = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| line_error(path, 1, format!("bad header field `{s}`")))
    };
    let (n, d, k) = (num(fields[1])?, num(fields[2])?, num(fields[3])?);
    let has_labels = match fields[4] {
        "0" => false,
        "1" => true,
        other => return Err(line_error(path, 1, format!("has_labels must be 0 or 1, got `{other}`"))),
    };
    if k == 0 {
        return Err(line_error(path, 1, "k must be positive"));
    }
    let mut features = Vec::with_capacity(n * d);
    let mut mask = Vec::with_capacity(n * k);
    let mut labels = Vec::with_capacity(if has_labels { n } else { 0 });
    for row in 0..n {
        let (ln, line) = lines
            .next()
            .ok_or_else(|| line_error(path, row + 2, format!("expected {n} instances, found {row}")))?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let want = d + 1 + has_labels as usize;
        if tokens.len() != want {
            return Err(line_error(
                path,
                ln,
                format!("expected {want} fields, found {}", tokens.len()),
            ));
        }
        for t in &tokens[..d] {
            let v: f64 = t
                .parse()
                .map_err(|_| line_error(path, ln, format!("bad float `{t}`")))?;
            if !v.is_finite() {
                return Err(line_error(path, ln, "non-finite feature"));
            }
            features.push(v);
        }
        let m = tokens[d];
        if m.len() != k || !m.bytes().all(|b| b == b'0' || b == b'1') {
            return Err(line_error(
                path,
                ln,
                format!("candidate mask must be {k} characters of 0/1"),
            ));
        }
        if !m.contains('1') {
            return Err(line_error(path, ln, format!("empty candidate set in row {}", row + 1)));
        }
        mask.extend(m.bytes().map(|b| b == b'1'));
        if has_labels {
            let t = tokens[d + 1];
            let y: usize = t
                .parse()
                .map_err(|_| line_error(path, ln, format!("bad label `{t}`")))?;
            if y == 0 || y > k {
                return Err(line_error(path, ln, format!("label {y} outside 1..={k}")));
            }
            if !mask[row * k + y - 1] {
                return Err(line_error(path, ln, format!("label {y} not in the candidate set")));
            }
            labels.push(y - 1);
        }
    }
    if let Some((ln, extra)) = lines.find(|(_, l)| !l.trim().is_empty()) {
        return Err(line_error(
            path,
            ln,
            format!("unexpected content after {n} instances: `{extra}`"),
        ));
    }
    let x = DenseMatrix::from_vec(n, d, features)?;
    Ok(PartialDataset::new(x, mask, k, has_labels.then_some(labels))?)
}

pub fn read_pll_file(path: &Path) -> Result<PartialDataset> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    parse(&text, path)
}

/// Writes `data`, creating missing parent directories.
pub fn write_pll_file(data: &PartialDataset, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(CliError::io(parent))?;
    }
    fs::write(path, to_string(data)).map_err(CliError::io(path))
}
