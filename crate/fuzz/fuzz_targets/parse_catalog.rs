#![no_main]

use libfuzzer_sys::fuzz_target;
use tmplan_core::parse_topology;
use tmplan_core::resource::parse_catalog;

const TOPOLOGY: &str = "node R1\nnode R2\nnode R3\nnode R4\nlink R1 R2\nlink R2 R3\nlink R3 R4\n";

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let t = parse_topology(TOPOLOGY).unwrap();
    let _ = parse_catalog(&t, text);
});
