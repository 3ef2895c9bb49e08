#![no_main]

use libfuzzer_sys::fuzz_target;
use tllsize::geometry::EtaGrid;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(g) = EtaGrid::from_json(text) {
        let again = EtaGrid::from_json(&g.to_json()).expect("written grid reloads");
        assert_eq!(again.points(), g.points());
    }
});
