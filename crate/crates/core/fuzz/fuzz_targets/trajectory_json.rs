#![no_main]

use libfuzzer_sys::fuzz_target;
use softhand::stage2::RetargetedTrajectory;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = RetargetedTrajectory::from_json_str(text);
    }
});
