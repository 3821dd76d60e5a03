#![no_main]

use libfuzzer_sys::fuzz_target;

use colombeau::weights::WeightSequence;

fuzz_target!(|data: &[u8]| {
    if let Ok(seq) = WeightSequence::from_json_bytes(data) {
        let _ = seq.associated_function(1.5);
        let round = seq.to_json_string();
        let again = WeightSequence::from_json_str(&round).expect("serialized form must reparse");
        assert_eq!(again.p_max(), seq.p_max());
    }
});
