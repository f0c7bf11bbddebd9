#![no_main]

use libfuzzer_sys::fuzz_target;
use tmplan_core::parse_topology;
use tmplan_core::sndlib::convert_sndlib;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(native) = convert_sndlib(text) {
        parse_topology(&native).expect("converted network parses");
    }
});
