#![no_main]

use libfuzzer_sys::fuzz_target;
use softhand::demo::parse_demonstration;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(demo) = parse_demonstration(text) {
        // Anything accepted must survive its own serializer.
        let again = parse_demonstration(&demo.to_json_string()).expect("round trip");
        assert_eq!(again.frames().len(), demo.frames().len());
    }
});
