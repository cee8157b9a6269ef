#![no_main]

use libfuzzer_sys::fuzz_target;
use tissue_fem::scenario::{mesh_for, ScenarioConfig};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(config) = ScenarioConfig::from_json(text) else {
        return;
    };
    let back = ScenarioConfig::from_json(&config.to_json().unwrap()).unwrap();
    assert_eq!(back, config);
    let _ = config.schedule();
    if config.mesh_divisions.iter().product::<usize>() <= 64 {
        let _ = mesh_for(&config);
    }
});
