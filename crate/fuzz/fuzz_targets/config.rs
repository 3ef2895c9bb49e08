#![no_main]

use libfuzzer_sys::fuzz_target;
use tllsize::sizing::{mu_max, SpecBudget};
use tllsize_cli::config::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = RunConfig::parse(text) {
        let b = cfg.budget();
        assert!(mu_max(&b).is_ok());
    }
    if let Ok(b) = serde_json::from_str::<SpecBudget>(text) {
        let _ = mu_max(&b);
    }
});
