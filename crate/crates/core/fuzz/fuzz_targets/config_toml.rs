#![no_main]

use libfuzzer_sys::fuzz_target;
use softhand::config::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = RunConfig::from_toml_str(text) {
        let again = RunConfig::from_toml_str(&cfg.to_toml_string()).expect("round trip");
        assert_eq!(again.hash(), cfg.hash());
    }
});
