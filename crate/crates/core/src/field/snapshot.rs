//! Plain-text field snapshots.
//!
//! ```text
//! dim=2 nodes=33,33 extent=1,1 components=3 time=0.05
//! 0.0000000000000000e0,0.0000000000000000e0,1.0000000000000000e0
//! ...
//! ```
//!
//! One row per node in flat index order (x fastest), components
//! comma-separated, 17 significant digits.

use std::fmt::Write as _;
use std::path::Path;

use super::{Field, GridSpec};
use crate::error::{Error, Result};

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

pub fn to_string(field: &Field, time: f64) -> String {
    let grid = field.grid();
    let mut out = format!(
        "dim={} nodes={} extent={} components={} time={}\n",
        grid.dim(),
        join(grid.nodes()),
        join(grid.extent()),
        field.ncomp(),
        time
    );
    for k in 0..grid.node_count() {
        for c in 0..field.ncomp() {
            if c > 0 {
                out.push(',');
            }
            let _ = write!(out, "{:.16e}", field.at(c, k));
        }
        out.push('\n');
    }
    out
}

fn header_value<'a>(tokens: &'a [(&'a str, &'a str)], key: &str) -> Result<&'a str> {
    tokens
        .iter()
        .find(|(k, _)| *k == key)
        .map(|(_, v)| *v)
        .ok_or_else(|| Error::Snapshot(format!("header is missing `{key}`")))
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|t| t.trim().parse::<T>().map_err(|_| Error::Snapshot(format!("bad {what} entry `{t}`"))))
        .collect()
}

/// Parses a snapshot, returning the field and its time stamp.
pub fn from_str(text: &str) -> Result<(Field, f64)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| Error::Snapshot("empty snapshot".into()))?;
    let tokens: Vec<(&str, &str)> = header
        .split_whitespace()
        .map(|t| t.split_once('=').ok_or_else(|| Error::Snapshot(format!("bad header token `{t}`"))))
        .collect::<Result<_>>()?;
    let dim: usize = header_value(&tokens, "dim")?
        .parse()
        .map_err(|_| Error::Snapshot("bad dim".into()))?;
    let nodes: Vec<usize> = parse_list(header_value(&tokens, "nodes")?, "nodes")?;
    let extent: Vec<f64> = parse_list(header_value(&tokens, "extent")?, "extent")?;
    let ncomp: usize = header_value(&tokens, "components")?
        .parse()
        .map_err(|_| Error::Snapshot("bad components".into()))?;
    let time: f64 = header_value(&tokens, "time")?
        .parse()
        .map_err(|_| Error::Snapshot("bad time".into()))?;
    let grid = GridSpec::new(dim, &extent, &nodes)?;
    let n = grid.node_count();
    let mut values = vec![0.0; ncomp * n];
    let mut count = 0;
    for (k, line) in lines.enumerate() {
        if k >= n {
            return Err(Error::Snapshot(format!("more than {n} node rows")));
        }
        let row: Vec<f64> = parse_list(line, "value")?;
        if row.len() != ncomp {
            return Err(Error::Snapshot(format!("row {k} has {} values, expected {ncomp}", row.len())));
        }
        for (c, v) in row.into_iter().enumerate() {
            values[c * n + k] = v;
        }
        count += 1;
    }
    if count != n {
        return Err(Error::Snapshot(format!("{count} node rows, expected {n}")));
    }
    Ok((Field::from_values(grid, ncomp, values)?, time))
}

pub fn write(path: &Path, field: &Field, time: f64) -> Result<()> {
    std::fs::write(path, to_string(field, time))?;
    Ok(())
}

pub fn read(path: &Path) -> Result<(Field, f64)> {
    from_str(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let g = GridSpec::new(2, &[1.0, 0.5], &[5, 6]).unwrap();
        let f = Field::constant(g, &[0.0, 0.0, 1.0]);
        let text = to_string(&f, 0.25);
        let first = text.lines().next().unwrap();
        assert_eq!(first, "dim=2 nodes=5,6 extent=1,0.5 components=3 time=0.25");
        assert_eq!(text.lines().count(), 31);
        assert_eq!(text.lines().nth(1).unwrap(), "0.0000000000000000e0,0.0000000000000000e0,1.0000000000000000e0");
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(from_str("").is_err());
        assert!(from_str("dim=1 nodes=5 extent=1 components=1 time=0\n1\n2\n").is_err());
        assert!(from_str("dim=1 nodes=5 extent=1 components=1\n1\n2\n3\n4\n5\n").is_err());
        assert!(from_str("dim=1 nodes=5 extent=1 components=1 time=0\n1\n2\n3\n4\nx\n").is_err());
    }

    proptest! {
        #[test]
        fn round_trip_within_17_digits(values in prop::collection::vec(-1e6f64..1e6, 14), t in 0.0f64..10.0) {
            let g = GridSpec::line(1.0, 7).unwrap();
            let f = Field::from_values(g, 2, values).unwrap();
            let (back, time) = from_str(&to_string(&f, t)).unwrap();
            prop_assert_eq!(time, t);
            prop_assert_eq!(back.grid(), f.grid());
            for (a, b) in back.values().iter().zip(f.values()) {
                prop_assert!((a - b).abs() <= 1e-15 * b.abs().max(1e-300));
            }
        }
    }
}
