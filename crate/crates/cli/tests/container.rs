use std::path::Path;

use balanced_cli::container::{Container, ContainerError, MAGIC};
use balanced_cli::rng::Uniform;
use balanced_core::bundle::EndField;
use balanced_core::{sample, Axis, Lattice};

fn lattice() -> Lattice {
    Lattice::with_axes(4, &[Axis::X1, Axis::Y2]).unwrap()
}

fn sample_container() -> Container {
    let l = lattice();
    let mut u = Uniform::new(1);
    let mut c = Container::new().meta("alpha", 0.25).meta("rank", 2.0);
    c.push_form("beta", &sample::real_11(l, 1.0, &mut u.source()));
    c.push_end("u", &EndField::from_field(2, sample::hermitian_traceless(l, 2, 1.0, &mut u.source())).unwrap());
    c.push_metric("metric", &sample::smooth_metric(l, 0.2, &mut u.source()));
    c
}

fn parse(bytes: &[u8]) -> Result<Container, ContainerError> {
    Container::from_bytes(bytes, Path::new("x.strm"))
}

fn malformed_offset(bytes: &[u8]) -> usize {
    match parse(bytes) {
        Err(ContainerError::Malformed { offset, file, .. }) => {
            assert_eq!(file, Path::new("x.strm"));
            offset
        }
        other => panic!("expected malformed, got {other:?}"),
    }
}

#[test]
fn round_trip_is_bit_exact() {
    let c = sample_container();
    let bytes = c.to_bytes();
    assert_eq!(&bytes[..8], MAGIC);
    let back = parse(&bytes).unwrap();
    assert_eq!(back.metadata, c.metadata);
    assert_eq!(back.records, c.records);
    assert_eq!(back.to_bytes(), bytes);
    assert_eq!(back.form("beta").unwrap().bidegree(), (1, 1));
    assert_eq!(back.end("u").unwrap().rank(), 2);
    assert_eq!(back.metric("metric").unwrap().matrices(), c.metric("metric").unwrap().matrices());
}

#[test]
fn file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("s.strm");
    let c = sample_container();
    c.write(&p).unwrap();
    let back = Container::read(&p).unwrap();
    assert_eq!(back.records, c.records);
    assert_eq!(back.source.as_deref(), Some(p.as_path()));
}

#[test]
fn malformed_inputs_report_offsets() {
    let bytes = sample_container().to_bytes();
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert_eq!(malformed_offset(&bad), 0);
    let mut bad = bytes.clone();
    bad[8] = 9;
    assert_eq!(malformed_offset(&bad), 8);
    assert_eq!(malformed_offset(&bytes[..5]), 0);
    let cut = bytes.len() - 3;
    assert!(malformed_offset(&bytes[..cut]) <= cut);
    let mut extra = bytes.clone();
    extra.push(0);
    assert_eq!(malformed_offset(&extra), bytes.len());
}

#[test]
fn unknown_kind_is_reported_at_its_header() {
    let mut c = Container::new();
    c.push_form("f", &sample::real_11(lattice(), 1.0, &mut Uniform::new(2).source()));
    let mut bytes = c.to_bytes();
    // magic, version, zero metadata, one record, name length 1, name
    let header = 8 + 4 + 4 + 4 + 2 + 1;
    bytes[header] = 77;
    assert_eq!(malformed_offset(&bytes), header);
}

#[test]
fn typed_accessors_check_kind_and_presence() {
    let c = sample_container();
    assert!(matches!(c.end("beta"), Err(ContainerError::WrongKind { .. })));
    assert!(matches!(c.form("psi"), Err(ContainerError::Missing { .. })));
}
