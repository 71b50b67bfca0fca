//! Plain-text tables: field snapshots, series, outflow traces and
//! convergence-order tables. Every file starts with a versioned `# mmbl-…`
//! line followed by a space-separated column header. Values use
//! `{:.16e}` (17 significant digits), so a write/read round trip is exact.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use crate::error::{Error, Result};
use crate::outflow::OutflowTrace;
use crate::state::{LiftedState, PhysicalState};

pub const PHYSICAL_COLUMNS: &str = "t x y u1 u2 w1 h1 h2 q psi rho p";
pub const TRANSFORMED_COLUMNS: &str = "t x ybar u w q";
pub const TRACE_COLUMNS: &str = "t x U I H P";
pub const ORDER_COLUMNS: &str = "level h error order";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableKind {
    Physical,
    Transformed,
    Trace,
    Orders,
}

impl TableKind {
    fn magic(self) -> &'static str {
        match self {
            TableKind::Physical => "# mmbl-snapshot v1 physical",
            TableKind::Transformed => "# mmbl-snapshot v1 transformed",
            TableKind::Trace => "# mmbl-trace v1",
            TableKind::Orders => "# mmbl-orders v1",
        }
    }

    fn columns(self) -> &'static str {
        match self {
            TableKind::Physical => PHYSICAL_COLUMNS,
            TableKind::Transformed => TRANSFORMED_COLUMNS,
            TableKind::Trace => TRACE_COLUMNS,
            TableKind::Orders => ORDER_COLUMNS,
        }
    }

    fn from_magic(line: &str) -> Option<(Self, String)> {
        [
            TableKind::Physical,
            TableKind::Transformed,
            TableKind::Trace,
            TableKind::Orders,
        ]
        .into_iter()
        .find_map(|k| {
            let rest = line.strip_prefix(k.magic())?;
            (rest.is_empty() || rest.starts_with(' ')).then(|| (k, rest.trim().to_string()))
        })
    }
}

/// A parsed table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub kind: TableKind,
    /// Text after the magic (the study name for order tables).
    pub label: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let c = self.columns.iter().position(|n| n == name)?;
        Some(self.rows.iter().map(|r| r[c]).collect())
    }
}

fn create(path: &Path, gzip: bool) -> Result<Box<dyn Write>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(if gzip {
        Box::new(BufWriter::new(GzEncoder::new(f, Compression::default())))
    } else {
        Box::new(BufWriter::new(f))
    })
}

fn write_rows(
    path: &Path,
    gzip: bool,
    kind: TableKind,
    label: &str,
    rows: impl Iterator<Item = Vec<f64>>,
) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut w = create(path, gzip)?;
    if label.is_empty() {
        writeln!(w, "{}", kind.magic()).map_err(io)?;
    } else {
        writeln!(w, "{} {}", kind.magic(), label).map_err(io)?;
    }
    writeln!(w, "{}", kind.columns()).map_err(io)?;
    let mut line = String::new();
    for row in rows {
        line.clear();
        for (c, v) in row.iter().enumerate() {
            if c > 0 {
                line.push(' ');
            }
            line.push_str(&format!("{v:.16e}"));
        }
        line.push('\n');
        w.write_all(line.as_bytes()).map_err(io)?;
    }
    w.flush().map_err(io)
}

fn physical_rows(s: &PhysicalState) -> impl Iterator<Item = Vec<f64>> + '_ {
    let grid = s.grid();
    let q = s.q();
    (0..grid.len()).map(move |k| {
        let (i, j) = (k / grid.ny(), k % grid.ny());
        vec![
            s.time,
            grid.x(i),
            grid.y(j),
            s.u1.values()[k],
            s.u2.values()[k],
            s.w1.values()[k],
            s.h1.values()[k],
            s.h2.values()[k],
            q.values()[k],
            s.psi.values()[k],
            s.rho.values()[k],
            s.p.values()[k],
        ]
    })
}

fn transformed_rows(s: &LiftedState) -> impl Iterator<Item = Vec<f64>> + '_ {
    let grid = s.q1.grid();
    (0..grid.len()).map(move |k| {
        let (i, j) = (k / grid.ny(), k % grid.ny());
        vec![
            s.time,
            grid.x(i),
            grid.y(j),
            s.u1.values()[k],
            s.w1.values()[k],
            s.q1.values()[k],
        ]
    })
}

pub fn write_physical(path: &Path, state: &PhysicalState) -> Result<()> {
    write_rows(path, false, TableKind::Physical, "", physical_rows(state))
}

pub fn write_transformed(path: &Path, state: &LiftedState) -> Result<()> {
    write_rows(path, false, TableKind::Transformed, "", transformed_rows(state))
}

/// Several levels in one table, optionally gzip-compressed.
pub fn write_physical_series(path: &Path, states: &[&PhysicalState], gzip: bool) -> Result<()> {
    let rows = states.iter().flat_map(|s| physical_rows(s));
    write_rows(path, gzip, TableKind::Physical, "", rows)
}

pub fn write_transformed_series(path: &Path, states: &[&LiftedState], gzip: bool) -> Result<()> {
    let rows = states.iter().flat_map(|s| transformed_rows(s));
    write_rows(path, gzip, TableKind::Transformed, "", rows)
}

pub fn write_trace(path: &Path, trace: &OutflowTrace) -> Result<()> {
    let rows = trace.levels.iter().flat_map(|l| {
        (0..l.nx()).map(move |i| vec![l.t, trace.x(i), l.u[i], l.i[i], l.h[i], l.p[i]])
    });
    write_rows(path, false, TableKind::Trace, "", rows)
}

/// One refinement level of a convergence study.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct OrderRow {
    pub level: usize,
    pub h: f64,
    pub error: f64,
    /// Observed order against the previous level.
    pub order: Option<f64>,
}

pub fn write_orders(path: &Path, study: &str, rows: &[OrderRow]) -> Result<()> {
    if study.is_empty() || study.contains(char::is_whitespace) {
        return Err(Error::Config(format!("study name {study:?} must be one word")));
    }
    let it = rows.iter().map(|r| {
        vec![
            r.level as f64,
            r.h,
            r.error,
            r.order.unwrap_or(f64::NAN),
        ]
    });
    write_rows(path, false, TableKind::Orders, study, it)
}

pub fn read_orders(path: &Path) -> Result<(String, Vec<OrderRow>)> {
    let t = read_table(path)?;
    if t.kind != TableKind::Orders {
        return Err(Error::Schema {
            path: path.display().to_string(),
            detail: "not an order table".into(),
        });
    }
    let rows = t
        .rows
        .iter()
        .map(|r| OrderRow {
            level: r[0] as usize,
            h: r[1],
            error: r[2],
            order: (!r[3].is_nan()).then_some(r[3]),
        })
        .collect();
    Ok((t.label, rows))
}

/// Read any table written by this module; gzip is detected from the magic
/// bytes. Unknown headers or versions are rejected.
pub fn read_table(path: &Path) -> Result<Table> {
    let schema = |detail: String| Error::Schema {
        path: path.display().to_string(),
        detail,
    };
    let mut f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut magic = [0u8; 2];
    let n = f.read(&mut magic).map_err(|e| Error::io(path, e))?;
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader: Box<dyn BufRead> = if n == 2 && magic == [0x1f, 0x8b] {
        Box::new(BufReader::new(GzDecoder::new(f)))
    } else {
        Box::new(BufReader::new(f))
    };
    let mut lines = reader.lines();
    let mut next = || -> Result<Option<String>> {
        lines.next().transpose().map_err(|e| Error::io(path, e))
    };
    let first = next()?.ok_or_else(|| schema("empty file".into()))?;
    let (kind, label) = TableKind::from_magic(&first)
        .ok_or_else(|| schema(format!("unknown header {first:?}")))?;
    let header = next()?.ok_or_else(|| schema("missing column header".into()))?;
    if header != kind.columns() {
        return Err(schema(format!(
            "column header {header:?}, expected {:?}",
            kind.columns()
        )));
    }
    let columns: Vec<String> = header.split(' ').map(str::to_string).collect();
    let mut rows = Vec::new();
    let mut line_no = 2;
    while let Some(line) = next()? {
        line_no += 1;
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(' ')
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| schema(format!("line {line_no}: {e}")))?;
        if row.len() != columns.len() {
            return Err(schema(format!(
                "line {line_no}: {} values for {} columns",
                row.len(),
                columns.len()
            )));
        }
        rows.push(row);
    }
    Ok(Table {
        kind,
        label,
        columns,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn magic_lines_parse() {
        assert_eq!(
            TableKind::from_magic("# mmbl-orders v1 space"),
            Some((TableKind::Orders, "space".into()))
        );
        assert_eq!(TableKind::from_magic("# mmbl-snapshot v2 physical"), None);
        assert_eq!(TableKind::from_magic("# mmbl-trace v10"), None);
    }

    #[test]
    fn order_rows_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("o.txt");
        let rows = vec![
            OrderRow { level: 0, h: 0.1, error: 1e-2, order: None },
            OrderRow { level: 1, h: 0.05, error: 2.5e-3, order: Some(2.0) },
        ];
        write_orders(&p, "space", &rows).unwrap();
        let (study, back) = read_orders(&p).unwrap();
        assert_eq!(study, "space");
        assert_eq!(back, rows);
        assert!(write_orders(&p, "two words", &rows).is_err());
    }
}
