#![no_main]
//! Nodal CSV decoding against a fixed 2D mesh.

use dphase::mesh::{read_nodal_csv, write_nodal_csv, DomainMesh, Interval};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let iv = Interval::new(0.0, 1.0);
    let mesh = DomainMesh::new(&[iv, iv], &[4, 4]).expect("fixed mesh");
    let Ok(values) = read_nodal_csv(&mesh, data) else { return };
    assert_eq!(values.len(), mesh.len());
    // Whatever decodes must re-encode and decode to the same bits.
    let mut buf = Vec::new();
    write_nodal_csv(&mesh, &[("u", &values)], &mut buf).expect("encode");
    let back = read_nodal_csv(&mesh, buf.as_slice()).expect("re-decode");
    assert!(values.iter().zip(&back).all(|(a, b)| a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan())));
});
