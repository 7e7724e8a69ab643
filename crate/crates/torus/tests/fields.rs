//! Grid construction, field arithmetic, and the two field file formats.

use mfe_torus::{min_image, wrap_offset, TorusField, TorusGrid, TorusError};

#[test]
fn grid_validation() {
    for n in [8usize, 16, 64, 1024] {
        let g = TorusGrid::new(n).unwrap();
        assert_eq!(g.n(), n);
        assert_eq!(g.len(), n * n);
        assert!((g.spacing() - 1.0 / n as f64).abs() < 1e-18);
    }
    for n in [0usize, 4, 6, 24, 100] {
        assert!(matches!(TorusGrid::new(n), Err(TorusError::GridSize(m)) if m == n));
    }
}

#[test]
fn wrapping_and_min_image() {
    assert_eq!(wrap_offset(0.0), 0.0);
    assert_eq!(wrap_offset(0.49), 0.49);
    assert_eq!(wrap_offset(0.5), -0.5);
    assert_eq!(wrap_offset(-0.51), 0.49);
    let (dx, dy) = min_image((0.05, 0.95), (0.95, 0.05));
    assert!((dx - 0.1).abs() < 1e-15);
    assert!((dy + 0.1).abs() < 1e-15);
}

#[test]
fn nearest_node_wraps() {
    let g = TorusGrid::new(8).unwrap();
    assert_eq!(g.nearest_node((0.0, 0.0)), (0, 0));
    assert_eq!(g.nearest_node((0.99, 0.13)), (0, 1));
    assert_eq!(g.nearest_node((-0.05, 0.51)), (0, 4));
}

#[test]
fn field_arithmetic_and_norms() {
    let g = TorusGrid::new(16).unwrap();
    let f = TorusField::from_fn(g, |x, _| (2.0 * std::f64::consts::PI * x).cos());
    let c = TorusField::constant(g, 2.0);
    assert!((c.mean() - 2.0).abs() < 1e-15);
    assert!(f.mean().abs() < 1e-15);
    let s = f.add(&c).unwrap();
    assert!((s.mean() - 2.0).abs() < 1e-15);
    assert!((s.project_mean_zero().mean()).abs() < 1e-15);
    // cos^2 integrates to 1/2 (exact for the trapezoidal rule on this grid).
    assert!((f.l2().powi(2) - 0.5).abs() < 1e-15);
    assert!((f.inner(&f).unwrap() - 0.5).abs() < 1e-15);
    assert!((f.linf() - 1.0).abs() < 1e-15);
    assert!((f.max() - 1.0).abs() < 1e-15);
    assert!((f.min() + 1.0).abs() < 1e-15);
    let mut g2 = f.clone();
    g2.axpy(2.0, &f).unwrap();
    assert!((g2.linf() - 3.0).abs() < 1e-15);
    let d = f.sub(&f).unwrap();
    assert_eq!(d.linf(), 0.0);
    assert_eq!(f.argmax(), (0, 0));
}

#[test]
fn grid_mismatch_is_reported() {
    let a = TorusField::zeros(TorusGrid::new(8).unwrap());
    let b = TorusField::zeros(TorusGrid::new(16).unwrap());
    assert!(matches!(
        a.add(&b),
        Err(TorusError::GridMismatch { left: 8, right: 16 })
    ));
}

#[test]
fn from_values_checks_length() {
    let g = TorusGrid::new(8).unwrap();
    assert!(TorusField::from_values(g, vec![0.0; 63]).is_err());
    assert!(TorusField::from_values(g, vec![0.0; 64]).is_ok());
}

#[test]
fn csv_roundtrip_is_exact_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let g = TorusGrid::new(16).unwrap();
    let f = TorusField::from_fn(g, |x, y| {
        (7.3 * x - 2.0 * y).sin() * 1e-3 + x * 1e7 + 0.1234567890123456
    });
    let p1 = dir.path().join("a.csv");
    let p2 = dir.path().join("b.csv");
    f.write_csv(&p1).unwrap();
    let back = TorusField::read_csv(&p1).unwrap();
    assert_eq!(back.values(), f.values(), "CSV roundtrip must be bit exact");
    back.write_csv(&p2).unwrap();
    assert_eq!(
        std::fs::read(&p1).unwrap(),
        std::fs::read(&p2).unwrap(),
        "rewriting must be byte identical"
    );
}

#[test]
fn binary_roundtrip_and_header_layout() {
    let dir = tempfile::tempdir().unwrap();
    let g = TorusGrid::new(8).unwrap();
    let f = TorusField::from_fn(g, |x, y| x + 100.0 * y);
    let p = dir.path().join("f.bin");
    f.write_binary(&p).unwrap();
    let bytes = std::fs::read(&p).unwrap();
    assert_eq!(bytes.len(), 8 + 64 * 8);
    assert_eq!(&bytes[..4], &8u32.to_le_bytes());
    assert_eq!(&bytes[4..8], &[0u8; 4]);
    // Row-major: second value is the node (ix = 1, iy = 0).
    let second = f64::from_le_bytes(bytes[16..24].try_into().unwrap());
    assert_eq!(second, f.at(1, 0));
    let back = TorusField::read_binary(&p).unwrap();
    assert_eq!(back.values(), f.values());
}

#[test]
fn malformed_files_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let g = TorusGrid::new(8).unwrap();
    let f = TorusField::zeros(g);
    let p = dir.path().join("f.bin");
    f.write_binary(&p).unwrap();

    // Corrupt the reserved header bytes.
    let mut bytes = std::fs::read(&p).unwrap();
    bytes[5] = 1;
    let bad = dir.path().join("bad.bin");
    std::fs::write(&bad, &bytes).unwrap();
    assert!(matches!(
        TorusField::read_binary(&bad),
        Err(TorusError::Format(_))
    ));

    // Truncate the payload.
    let trunc = dir.path().join("trunc.bin");
    let orig = std::fs::read(&p).unwrap();
    std::fs::write(&trunc, &orig[..orig.len() - 4]).unwrap();
    assert!(TorusField::read_binary(&trunc).is_err());

    // Trailing garbage.
    let mut extended = orig.clone();
    extended.push(0);
    let tail = dir.path().join("tail.bin");
    std::fs::write(&tail, &extended).unwrap();
    assert!(matches!(
        TorusField::read_binary(&tail),
        Err(TorusError::Format(_))
    ));

    // Ragged CSV.
    let csv = dir.path().join("ragged.csv");
    std::fs::write(&csv, "1,2\n3\n").unwrap();
    assert!(matches!(
        TorusField::read_csv(&csv),
        Err(TorusError::Format(_))
    ));

    // Unparseable CSV token.
    let csv2 = dir.path().join("badtok.csv");
    std::fs::write(&csv2, "1,x\n3,4\n").unwrap();
    assert!(matches!(
        TorusField::read_csv(&csv2),
        Err(TorusError::Format(_))
    ));
}

#[test]
fn non_finite_fields_refuse_to_serialize() {
    let dir = tempfile::tempdir().unwrap();
    let g = TorusGrid::new(8).unwrap();
    let mut f = TorusField::zeros(g);
    f.values_mut()[3] = f64::NAN;
    assert!(f.write_csv(&dir.path().join("nan.csv")).is_err());
    assert!(f.write_binary(&dir.path().join("nan.bin")).is_err());
}
