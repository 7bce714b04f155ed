#![no_main]

use std::sync::OnceLock;

use libfuzzer_sys::fuzz_target;
use limitlab_core::geometry::Mesh;
use limitlab_core::spectral::read_cache;

fn mesh() -> &'static Mesh {
    static M: OnceLock<Mesh> = OnceLock::new();
    M.get_or_init(|| Mesh::rectangle(3, 2, [1.5, 1.0], [false, false]).unwrap())
}

fuzz_target!(|data: &[u8]| {
    let _ = read_cache(data, mesh());
});
