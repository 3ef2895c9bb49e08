#![no_main]

use libfuzzer_sys::fuzz_target;
use tllsize::dynamics::{check_ads, FiniteTransitionSystem};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(ts) = FiniteTransitionSystem::from_json(text) {
        let again = FiniteTransitionSystem::from_json(&ts.to_json()).expect("written system reloads");
        assert_eq!(again.transitions(), ts.transitions());
        if ts.state_count() <= 16 {
            let rel = check_ads(&ts, &ts, 0.0);
            assert!(rel.relation().pairs.iter().all(|&(x, y)| x < ts.state_count() && y < ts.state_count()));
        }
    }
});
