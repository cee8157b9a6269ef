#![no_main]

use libfuzzer_sys::fuzz_target;
use tissue_fem::fem::Mesh;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(mesh) = Mesh::from_json(text) else { return };
    let _ = mesh.reference_volume();
    for label in mesh.faces.keys() {
        let _ = mesh.face_set_area(label);
    }
    assert_eq!(Mesh::from_json(&mesh.to_json().unwrap()).unwrap(), mesh);
});
