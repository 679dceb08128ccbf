//! Path serialisation: CSV with header `t,x1,...,xc` and a JSON
//! array-of-arrays form (`[[t, x1, ..., xc], ...]`).

use std::io::{Read, Write};

use super::Path;
use crate::{Error, Result};

pub fn path_to_csv<W: Write>(path: &Path, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend((1..=path.dim()).map(|i| format!("x{i}")));
    w.write_record(&header)?;
    for (i, t) in path.times().iter().enumerate() {
        let mut row = vec![format_f64(*t)];
        row.extend(path.vertex(i).iter().map(|v| format_f64(*v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn path_from_csv<R: Read>(input: R) -> Result<Path> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = r.headers()?.clone();
    if header.is_empty() || &header[0] != "t" {
        return Err(Error::Parse("path CSV header must start with `t`".into()));
    }
    for (i, h) in header.iter().enumerate().skip(1) {
        if h != format!("x{i}") {
            return Err(Error::Parse(format!("unexpected column `{h}`, expected `x{i}`")));
        }
    }
    let dim = header.len() - 1;
    let mut times = Vec::new();
    let mut points = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != dim + 1 {
            return Err(Error::Parse(format!("row {} has {} fields", line + 2, rec.len())));
        }
        let mut vals = rec.iter().map(|f| {
            f.parse::<f64>()
                .map_err(|e| Error::Parse(format!("row {}: {e}", line + 2)))
        });
        times.push(vals.next().unwrap()?);
        for v in vals {
            points.push(v?);
        }
    }
    Path::new(times, points, dim)
}

pub fn path_to_json(path: &Path) -> String {
    let rows: Vec<Vec<f64>> = (0..path.len())
        .map(|i| {
            let mut r = vec![path.times()[i]];
            r.extend_from_slice(path.vertex(i));
            r
        })
        .collect();
    serde_json::to_string(&rows).expect("finite floats serialise")
}

pub fn path_from_json(text: &str) -> Result<Path> {
    let rows: Vec<Vec<f64>> = serde_json::from_str(text)?;
    let width = rows.first().map(|r| r.len()).unwrap_or(0);
    if width < 2 || rows.iter().any(|r| r.len() != width) {
        return Err(Error::Parse("JSON path rows must be [t, x1, ..., xc] of equal length".into()));
    }
    let times = rows.iter().map(|r| r[0]).collect();
    let points = rows.iter().flat_map(|r| r[1..].iter().copied()).collect();
    Path::new(times, points, width - 1)
}

/// Shortest representation that round-trips.
pub(crate) fn format_f64(v: f64) -> String {
    format!("{v:?}")
}
