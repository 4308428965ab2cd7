#![no_main]

use libfuzzer_sys::fuzz_target;
use softhand::mesh::HandMesh;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = HandMesh::from_json_str(text);
    }
});
