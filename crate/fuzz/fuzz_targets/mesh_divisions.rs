#![no_main]

use libfuzzer_sys::fuzz_target;
use tissue_fem::scenario::parse_divisions;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(n) = parse_divisions(text) {
        assert!(n.iter().all(|&k| k >= 1));
        assert_eq!(parse_divisions(&format!("{},{},{}", n[0], n[1], n[2])).unwrap(), n);
    }
});
