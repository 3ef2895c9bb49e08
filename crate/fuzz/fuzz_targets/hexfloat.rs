#![no_main]

use libfuzzer_sys::fuzz_target;
use tllsize::hexfloat::{format_hex, parse_hex};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(v) = parse_hex(text) {
        // formatting is exact, so a second parse must give the same bits
        let back = parse_hex(&format_hex(v)).expect("formatted value parses");
        assert!(back.to_bits() == v.to_bits() || (v.is_nan() && back.is_nan()));
    }
});
