#![no_main]

use libfuzzer_sys::fuzz_target;
use tllsize::cpwa::CpwaInterpolant;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(interp) = CpwaInterpolant::from_json(text) {
        let center = interp.grid().domain().center();
        let _ = interp.eval(&center);
        let again = CpwaInterpolant::from_json(&interp.to_json()).expect("written interpolant reloads");
        assert_eq!(again.to_json(), interp.to_json());
    }
});
