#![no_main]

use libfuzzer_sys::fuzz_target;
use tmplan_core::milp::{export_lp, parse_lp};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(m) = parse_lp(text) {
        let once = export_lp(&m);
        let back = parse_lp(&once).expect("exported model parses");
        assert_eq!(export_lp(&back), once);
    }
});
