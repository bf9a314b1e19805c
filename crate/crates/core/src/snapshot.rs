//! CSV snapshots of macroscopic fields.
//!
//! ```text
//! # t=<time>
//! x,y,rho,ux,uy,theta
//! ...
//! ```
//! Floats carry 17 significant digits so files round-trip exactly.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

use crate::kinetic::MacroState;
use crate::reference::MacroField;
use crate::solver::Grid;

const AXES: [&str; 3] = ["x", "y", "z"];

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("sites do not form a uniform periodic grid: {0}")]
    NotAGrid(String),
}

pub fn header(dimension: usize) -> String {
    let mut cols: Vec<&str> = AXES[..dimension].to_vec();
    cols.push("rho");
    cols.extend(["ux", "uy", "uz"][..dimension].iter());
    cols.push("theta");
    cols.join(",")
}

pub fn write_csv<W: Write>(out: &mut W, field: &MacroField, time: f64) -> io::Result<()> {
    let d = field.grid.dimension;
    writeln!(out, "# t={time:.16e}")?;
    writeln!(out, "{}", header(d))?;
    let mut line = String::new();
    for (s, m) in field.values.iter().enumerate() {
        line.clear();
        let x = field.grid.coordinates(s);
        let values = x[..d].iter().copied().chain(m.to_vec(d));
        for (k, v) in values.enumerate() {
            if k > 0 {
                line.push(',');
            }
            line.push_str(&format!("{v:.16e}"));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn to_csv_string(field: &MacroField, time: f64) -> String {
    let mut buf = Vec::new();
    write_csv(&mut buf, field, time).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("snapshot text is ASCII")
}

pub fn write_file(path: &Path, field: &MacroField, time: f64) -> Result<(), SnapshotError> {
    let mut f = io::BufWriter::new(fs::File::create(path)?);
    write_csv(&mut f, field, time)?;
    f.flush()?;
    Ok(())
}

/// Parses a snapshot, reconstructing the grid from the site coordinates.
pub fn parse_csv(text: &str) -> Result<(f64, MacroField), SnapshotError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines.next().ok_or(SnapshotError::Parse { line: 1, reason: "empty file".into() })?;
    let time = first
        .trim()
        .strip_prefix("# t=")
        .and_then(|t| t.trim().parse::<f64>().ok())
        .ok_or(SnapshotError::Parse { line: 1, reason: "expected `# t=<time>`".into() })?;
    let (hline, head) = lines.next().ok_or(SnapshotError::Parse { line: 2, reason: "missing header".into() })?;
    let cols: Vec<&str> = head.split(',').map(str::trim).collect();
    let dimension = (1..=3)
        .find(|&d| cols.join(",") == header(d))
        .ok_or(SnapshotError::Parse { line: hline + 1, reason: format!("unrecognised header `{head}`") })?;

    let mut coords: Vec<[f64; 3]> = Vec::new();
    let mut states: Vec<MacroState> = Vec::new();
    for (i, l) in lines {
        let vals: Result<Vec<f64>, _> = l.split(',').map(|v| v.trim().parse::<f64>()).collect();
        let vals = vals.map_err(|e| SnapshotError::Parse { line: i + 1, reason: e.to_string() })?;
        if vals.len() != cols.len() {
            return Err(SnapshotError::Parse {
                line: i + 1,
                reason: format!("{} values, expected {}", vals.len(), cols.len()),
            });
        }
        let mut x = [0.0; 3];
        x[..dimension].copy_from_slice(&vals[..dimension]);
        coords.push(x);
        states.push(MacroState::from_slice(&vals[dimension..], dimension));
    }
    if states.is_empty() {
        return Err(SnapshotError::NotAGrid("no sites".into()));
    }

    let mut axes: Vec<Vec<f64>> = Vec::new();
    for a in 0..dimension {
        let mut v: Vec<f64> = coords.iter().map(|c| c[a]).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        axes.push(v);
    }
    let eps = axes
        .iter()
        .find(|v| v.len() > 1)
        .map(|v| v[1] - v[0])
        .ok_or_else(|| SnapshotError::NotAGrid("cannot infer spacing from a single site".into()))?;
    let extent: Vec<usize> = axes.iter().map(Vec::len).collect();
    let origin: Vec<f64> = axes.iter().map(|v| v[0]).collect();
    let lengths: Vec<f64> = extent.iter().map(|&n| n as f64 * eps).collect();
    let grid = Grid::new(dimension, &extent, &lengths, &origin).map_err(|e| SnapshotError::NotAGrid(e.to_string()))?;
    if grid.site_count() != states.len() {
        return Err(SnapshotError::NotAGrid(format!("{} rows for {} sites", states.len(), grid.site_count())));
    }
    let mut values = vec![None; grid.site_count()];
    for (x, m) in coords.iter().zip(states) {
        let mut idx = [0usize; 3];
        for a in 0..dimension {
            let f = (x[a] - origin[a]) / eps;
            let r = f.round();
            if (f - r).abs() > 1e-6 {
                return Err(SnapshotError::NotAGrid(format!("coordinate {} off the lattice", x[a])));
            }
            idx[a] = r as usize;
        }
        let slot = &mut values[grid.index(idx[0], idx[1], idx[2])];
        if slot.is_some() {
            return Err(SnapshotError::NotAGrid("duplicate site".into()));
        }
        *slot = Some(m);
    }
    let values = values.into_iter().collect::<Option<Vec<_>>>().ok_or(SnapshotError::NotAGrid("missing sites".into()))?;
    Ok((time, MacroField { grid, values }))
}

pub fn read_file(path: &Path) -> Result<(f64, MacroField), SnapshotError> {
    parse_csv(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn headers() {
        assert_eq!(header(1), "x,rho,ux,theta");
        assert_eq!(header(2), "x,y,rho,ux,uy,theta");
        assert_eq!(header(3), "x,y,z,rho,ux,uy,uz,theta");
    }

    #[test]
    fn round_trip_is_lossless() {
        let g = Grid::new(2, &[3, 4], &[0.3, 0.4], &[0.0, 0.0]).unwrap();
        let f = MacroField::from_fn(&g, |x| MacroState::new((x[0] * 7.1).sin(), [x[1] / 3.0, -x[0], 0.0], 1.0 / 7.0));
        let text = to_csv_string(&f, 0.1 + 0.2);
        assert!(text.starts_with("# t="));
        assert_eq!(text.lines().nth(1), Some("x,y,rho,ux,uy,theta"));
        let (t, back) = parse_csv(&text).unwrap();
        assert_eq!(t, 0.1 + 0.2);
        assert_eq!(back.values, f.values);
        assert_eq!(back.grid.extent, g.extent);
    }

    #[test]
    fn malformed_input_is_reported() {
        assert!(matches!(parse_csv(""), Err(SnapshotError::Parse { .. })));
        assert!(matches!(parse_csv("# t=0\nfoo\n"), Err(SnapshotError::Parse { .. })));
        assert!(matches!(parse_csv("# t=0\nx,rho,ux,theta\n0,1,2\n"), Err(SnapshotError::Parse { .. })));
        assert!(matches!(parse_csv("# t=0\nx,rho,ux,theta\n0,1,2,3\n"), Err(SnapshotError::NotAGrid(_))));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        let g = Grid::cubic(1, 5, 1.0).unwrap();
        let f = MacroField::from_fn(&g, |x| MacroState::density(x[0]));
        write_file(&p, &f, 2.0).unwrap();
        let (t, back) = read_file(&p).unwrap();
        assert_eq!(t, 2.0);
        assert_eq!(back, f);
    }
}
