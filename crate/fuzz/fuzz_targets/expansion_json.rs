#![no_main]

use libfuzzer_sys::fuzz_target;

use colombeau::hermite::HermiteExpansion;

fuzz_target!(|data: &[u8]| {
    if let Ok(expansion) = HermiteExpansion::from_json_bytes(data) {
        let _ = expansion.synthesize(0.3);
        let round = expansion.to_json_string();
        let _ = HermiteExpansion::from_json_str(&round).expect("serialized form must reparse");
    }
});
