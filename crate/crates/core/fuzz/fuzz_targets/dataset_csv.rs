#![no_main]

use libfuzzer_sys::fuzz_target;
use softhand::sim::Dataset;

fuzz_target!(|data: &[u8]| {
    let _ = Dataset::read_csv(data);
});
