#![no_main]

use libfuzzer_sys::fuzz_target;
use tmplan_core::parse_topology;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(t) = parse_topology(text) {
        // accepted input must survive a write/parse cycle
        let again = parse_topology(&t.to_native()).expect("written topology parses");
        assert_eq!(again.to_native(), t.to_native());
    }
});
