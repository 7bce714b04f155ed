#![no_main]

use libfuzzer_sys::fuzz_target;
use limitlab_core::geometry::{read_mesh, write_mesh};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(mesh) = read_mesh(text) {
        let again = read_mesh(&write_mesh(&mesh)).expect("written mesh must parse");
        assert_eq!(again.n_cells(), mesh.n_cells());
        assert_eq!(again.n_faces(), mesh.n_faces());
    }
});
