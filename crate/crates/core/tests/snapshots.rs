use std::sync::Arc;

use mmbl_core::io::snapshot::{
    read_table, write_physical, write_physical_series, write_trace, write_transformed,
    TableKind, PHYSICAL_COLUMNS, TRANSFORMED_COLUMNS,
};
use mmbl_core::outflow::OutflowTrace;
use mmbl_core::state::{LiftedState, PhysicalState};
use mmbl_core::{Error, Field, Grid};

fn grid() -> Arc<Grid> {
    Arc::new(Grid::uniform_2pi(8, 9, 4.0).unwrap())
}

fn state(g: &Arc<Grid>, t: f64, scale: f64) -> PhysicalState {
    let f = |k: f64| Field::from_fn(g, move |x, y| scale * (k * x + 0.1).sin() * (-y / 3.0).exp() / 3.0);
    PhysicalState {
        time: t,
        u1: f(1.0),
        u2: f(2.0),
        w1: f(3.0),
        h1: f(4.0),
        h2: f(5.0),
        psi: f(6.0),
        rho: f(7.0),
        p: f(8.0),
    }
}

#[test]
fn zero_state_gives_rows_of_zeros() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("zero.txt");
    let g = grid();
    write_physical(&path, &state(&g, 0.0, 0.0)).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(!text.contains('\r'));
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# mmbl-snapshot v1 physical"));
    assert_eq!(lines.next(), Some(PHYSICAL_COLUMNS));
    let t = read_table(&path).unwrap();
    assert_eq!(t.rows.len(), 8 * 9);
    for row in &t.rows {
        assert!(row[3..].iter().all(|&v| v == 0.0));
    }
    // x-outer ordering
    assert_eq!(t.rows[1][1], 0.0);
    assert_eq!(t.rows[9][1], g.x(1));
}

#[test]
fn physical_round_trip_is_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.txt");
    let g = grid();
    let s = state(&g, 0.125, 1.0);
    write_physical(&path, &s).unwrap();
    let t = read_table(&path).unwrap();
    assert_eq!(t.kind, TableKind::Physical);
    let fields = [&s.u1, &s.u2, &s.w1, &s.h1, &s.h2];
    for (c, f) in fields.iter().enumerate() {
        let col = t.column(PHYSICAL_COLUMNS.split(' ').nth(3 + c).unwrap()).unwrap();
        for (a, b) in col.iter().zip(f.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
    let q = t.column("q").unwrap();
    for (a, b) in q.iter().zip(s.q().values()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn gzip_series_matches_plain_series() {
    let dir = tempfile::tempdir().unwrap();
    let g = grid();
    let a = state(&g, 0.0, 1.0);
    let b = state(&g, 0.5, -2.0);
    let plain = dir.path().join("s.txt");
    let gz = dir.path().join("s.txt.gz");
    write_physical_series(&plain, &[&a, &b], false).unwrap();
    write_physical_series(&gz, &[&a, &b], true).unwrap();
    let bytes = std::fs::read(&gz).unwrap();
    assert_eq!(&bytes[..2], &[0x1f, 0x8b]);
    let (tp, tg) = (read_table(&plain).unwrap(), read_table(&gz).unwrap());
    assert_eq!(tp, tg);
    assert_eq!(tp.rows.len(), 2 * 8 * 9);
}

#[test]
fn transformed_snapshot_header() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.txt");
    let g = grid();
    let l = LiftedState {
        u1: Field::constant(&g, 0.25),
        w1: Field::zeros(&g),
        q1: Field::constant(&g, 0.5),
        time: 0.0,
    };
    write_transformed(&path, &l).unwrap();
    let t = read_table(&path).unwrap();
    assert_eq!(t.columns.join(" "), TRANSFORMED_COLUMNS);
    assert!(t.column("q").unwrap().iter().all(|&v| v == 0.5));
}

#[test]
fn trace_table_has_every_level() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.txt");
    let tr = OutflowTrace::constant(8, 2.0 * std::f64::consts::PI, 0.1, 3, 0.2, 0.0, 1.0, 2.0);
    write_trace(&path, &tr).unwrap();
    let t = read_table(&path).unwrap();
    assert_eq!(t.kind, TableKind::Trace);
    assert_eq!(t.rows.len(), 4 * 8);
    assert!(t.column("P").unwrap().iter().all(|&p| p == 2.0));
}

#[test]
fn unknown_versions_and_headers_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.txt");
    std::fs::write(&path, "# mmbl-snapshot v2 physical\nt x y\n").unwrap();
    assert!(matches!(read_table(&path), Err(Error::Schema { .. })));
    std::fs::write(&path, "# mmbl-snapshot v1 physical\nt x y u1\n").unwrap();
    assert!(matches!(read_table(&path), Err(Error::Schema { .. })));
    std::fs::write(&path, format!("# mmbl-snapshot v1 transformed\n{TRANSFORMED_COLUMNS}\n1 2 3\n")).unwrap();
    assert!(matches!(read_table(&path), Err(Error::Schema { .. })));
}
