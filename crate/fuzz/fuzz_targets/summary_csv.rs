#![no_main]

use blindeq::harness::read_summary;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = read_summary(data);
});
