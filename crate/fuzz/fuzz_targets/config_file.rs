#![no_main]

use blindeq::harness::{parse_config, resolve_config, SchemeId};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(entries) = parse_config(text) {
        if let Ok(cfg) = resolve_config(&entries, SchemeId::Cma) {
            let _ = cfg.validate();
        }
    }
});
