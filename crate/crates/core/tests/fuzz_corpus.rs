//! Replays the checked-in fuzz seeds through every parser with the same
//! invariants the fuzz targets assert.

use std::fs;
use std::path::PathBuf;

use tmplan_core::milp::{export_lp, parse_lp};
use tmplan_core::parse_topology;
use tmplan_core::resource::{parse_catalog, parse_fixing, parse_resource};
use tmplan_core::sndlib::convert_sndlib;

const TOPOLOGY: &str = "node R1\nnode R2\nnode R3\nnode R4\nlink R1 R2\nlink R2 R3\nlink R3 R4\n";

/// Seeds of one target as `(file name, contents)`, sorted by name.
fn seeds(target: &str) -> Vec<(String, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut out: Vec<(String, String)> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            (name, fs::read_to_string(&p).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

fn accepted(target: &str, ok: impl Fn(&str) -> bool) -> Vec<String> {
    seeds(target)
        .into_iter()
        .filter(|(_, s)| ok(s))
        .map(|(n, _)| n)
        .collect()
}

#[test]
fn topology_seeds() {
    let ok = accepted("parse_topology", |s| match parse_topology(s) {
        Ok(t) => {
            let again = parse_topology(&t.to_native()).unwrap();
            assert_eq!(again.to_native(), t.to_native());
            true
        }
        Err(_) => false,
    });
    assert_eq!(ok, ["chain.topo", "metrics.topo"]);
}

#[test]
fn catalog_seeds() {
    let t = parse_topology(TOPOLOGY).unwrap();
    let ok = accepted("parse_catalog", |s| parse_catalog(&t, s).is_ok());
    assert_eq!(ok, ["full.cat", "inf.cat"]);
}

#[test]
fn fixing_seeds() {
    let t = parse_topology(TOPOLOGY).unwrap();
    let ok = accepted("parse_fixing", |s| {
        let _ = parse_resource(&t, s);
        parse_fixing(&t, s).is_ok()
    });
    assert_eq!(ok, ["mixed.txt", "spaces.txt"]);
}

#[test]
fn lp_seeds() {
    let ok = accepted("parse_lp", |s| match parse_lp(s) {
        Ok(m) => {
            let once = export_lp(&m);
            assert_eq!(export_lp(&parse_lp(&once).unwrap()), once);
            true
        }
        Err(_) => false,
    });
    assert_eq!(ok, ["aliases.lp", "empty.lp", "small.lp"]);
}

#[test]
fn sndlib_seeds() {
    let ok = accepted("convert_sndlib", |s| match convert_sndlib(s) {
        Ok(native) => {
            parse_topology(&native).unwrap();
            true
        }
        Err(_) => false,
    });
    assert_eq!(ok, ["native.txt", "small.xml"]);
}
