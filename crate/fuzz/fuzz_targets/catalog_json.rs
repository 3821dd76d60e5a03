#![no_main]

use libfuzzer_sys::fuzz_target;

use colombeau::catalog::{KernelSpec, NetSpec};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = NetSpec::from_json_str(text);
        let _ = KernelSpec::from_json_str(text);
    }
});
