#![no_main]

use libfuzzer_sys::fuzz_target;
use tllsize::tll::TllNetwork;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(net) = TllNetwork::from_json(text) {
        let x = vec![0.25; net.input_dim()];
        let y = net.eval(&x);
        assert_eq!(y.len(), net.output_dim());
        let again = TllNetwork::from_json(&net.to_json()).expect("written network reloads");
        let z = again.eval(&x);
        assert!(y.iter().zip(&z).all(|(a, b)| a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan())));
    }
});
