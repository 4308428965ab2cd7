#![no_main]

use libfuzzer_sys::fuzz_target;
use softhand::control::ForwardModel;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(model) = ForwardModel::from_json_str(text) {
        // A model that loads must be evaluable without panicking.
        let _ = model.predict(&[10.0, 20.0, 30.0]);
    }
});
