//! Replays the checked-in fuzz seeds through the same decoders the fuzz targets drive.

use std::fs;
use std::path::{Path, PathBuf};

use dphase::config::RunConfig;
use dphase::ledger::LedgerReport;
use dphase::mesh::{read_nodal_csv, write_nodal_csv, DomainMesh, Interval};
use dphase::Error;

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir: PathBuf = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn config_seeds() {
    for (name, data) in seeds("config_parse") {
        let text = String::from_utf8(data).unwrap();
        let parsed = RunConfig::from_toml(&text);
        match name.as_str() {
            "missing-q.toml" => {
                assert!(matches!(&parsed, Err(Error::Config { key, .. }) if key == "q"), "{parsed:?}")
            }
            "unknown-reaction.toml" | "truncated.toml" => {
                assert_eq!(parsed.as_ref().map_err(Error::exit_code).err(), Some(2), "{name}")
            }
            _ => {
                let cfg = parsed.unwrap_or_else(|e| panic!("{name}: {e}"));
                let again = cfg.to_toml().unwrap();
                let back = RunConfig::from_toml(&again).unwrap();
                assert_eq!(back, cfg, "{name}");
                assert!(cfg.validate().unwrap().is_ok(), "{name}");
            }
        }
    }
}

#[test]
fn grid_csv_seeds() {
    let iv = Interval::new(0.0, 1.0);
    let mesh = DomainMesh::new(&[iv, iv], &[4, 4]).unwrap();
    for (name, data) in seeds("grid_csv") {
        let decoded = read_nodal_csv(&mesh, data.as_slice());
        if name == "valid_4x4.csv" {
            let values = decoded.unwrap();
            let mut buf = Vec::new();
            write_nodal_csv(&mesh, &[("u", &values)], &mut buf).unwrap();
            assert_eq!(read_nodal_csv(&mesh, buf.as_slice()).unwrap(), values);
        } else {
            assert!(decoded.is_err(), "{name} should be rejected");
        }
    }
}

#[test]
fn ledger_json_seeds() {
    for (name, data) in seeds("ledger_json") {
        let text = String::from_utf8(data).unwrap();
        let decoded = LedgerReport::from_json(&text);
        match name.as_str() {
            "old_schema.json" | "nan_string.json" => {
                assert!(matches!(decoded, Err(Error::Parse(_))), "{name}: {decoded:?}")
            }
            _ => {
                let report = decoded.unwrap_or_else(|e| panic!("{name}: {e}"));
                let once = report.to_json().unwrap();
                if name != "compact_inf.json" {
                    assert_eq!(once, text, "{name} is not a fixed point");
                }
                assert_eq!(LedgerReport::from_json(&once).unwrap().to_json().unwrap(), once);
            }
        }
    }
}
