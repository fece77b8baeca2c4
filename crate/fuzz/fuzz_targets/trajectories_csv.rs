#![no_main]

use blindeq::harness::read_trajectories;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = read_trajectories(data);
});
