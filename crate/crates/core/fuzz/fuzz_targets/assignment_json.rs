#![no_main]

use libfuzzer_sys::fuzz_target;
use softhand::stage1::FingerAssignment;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = FingerAssignment::from_json_str(text);
    }
});
