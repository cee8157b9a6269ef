//! Replays the checked-in fuzz seeds through the same parsers.

use std::fs;
use std::path::PathBuf;

use tissue_fem::fem::Mesh;
use tissue_fem::scenario::{parse_divisions, ResultTable, ScenarioConfig};

fn seeds(target: &str) -> Vec<(String, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut out: Vec<(String, String)> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|entry| {
            let path = entry.unwrap().path();
            (
                path.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read_to_string(&path).unwrap(),
            )
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn config_seeds_parse() {
    for (name, text) in seeds("scenario_config") {
        let c = ScenarioConfig::from_json(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(ScenarioConfig::from_json(&c.to_json().unwrap()).unwrap(), c);
    }
}

#[test]
fn mesh_seeds_parse() {
    for (name, text) in seeds("mesh_json") {
        let m = Mesh::from_json(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(m.reference_volume().unwrap() > 0.0);
    }
}

#[test]
fn division_seeds() {
    for (name, text) in seeds("mesh_divisions") {
        let ok = parse_divisions(&text).is_ok();
        assert_eq!(ok, !matches!(name.as_str(), "zero" | "two"), "{name}");
    }
}

#[test]
fn csv_seeds_round_trip() {
    for (name, text) in seeds("results_csv") {
        let t = ResultTable::from_csv(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(t.to_csv().unwrap(), text, "{name}");
    }
}
