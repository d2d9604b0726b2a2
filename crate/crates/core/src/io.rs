//! Eigenvalue CSV files: optional `#` comment lines (used for run
//! metadata), a `re,im` header, and one eigenvalue per row.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::C64;

/// `comment` lines are written first, each prefixed with `# `.
pub fn write_eigenvalues<W: Write>(mut out: W, eigs: &[C64], comment: Option<&str>) -> Result<()> {
    if let Some(c) = comment {
        for line in c.lines() {
            writeln!(out, "# {line}")?;
        }
    }
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::InvalidInput(e.to_string());
    w.write_record(["re", "im"]).map_err(err)?;
    for z in eigs {
        w.write_record([format!("{:e}", z.re), format!("{:e}", z.im)]).map_err(err)?;
    }
    w.flush()?;
    Ok(())
}

/// Parses eigenvalues; errors name the offending line. A single column is
/// read as a real spectrum.
pub fn read_eigenvalues<R: Read>(input: R) -> Result<Vec<C64>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input);
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::InvalidInput(format!("CSV error: {e}")))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let field = |k: usize| -> Result<f64> {
            let s = rec.get(k).unwrap_or("");
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::InvalidInput(format!("line {line}: cannot parse {s:?} as a finite number")))
        };
        match rec.len() {
            1 => out.push(C64::new(field(0)?, 0.0)),
            2 => out.push(C64::new(field(0)?, field(1)?)),
            k => {
                return Err(Error::InvalidInput(format!(
                    "line {line}: expected 1 or 2 fields, found {k}"
                )))
            }
        }
    }
    Ok(out)
}

pub fn read_eigenvalues_file(path: &std::path::Path) -> Result<Vec<C64>> {
    read_eigenvalues(std::fs::File::open(path)?)
}

pub fn write_eigenvalues_file(path: &std::path::Path, eigs: &[C64], comment: Option<&str>) -> Result<()> {
    write_eigenvalues(std::io::BufWriter::new(std::fs::File::create(path)?), eigs, comment)
}
