#![no_main]

use libfuzzer_sys::fuzz_target;

use colombeau_cli::scenario::{
    ClassifyScenario, ComposeScenario, ExpmapScenario, HermiteScenario,
};

fuzz_target!(|data: &[u8]| {
    let _ = serde_json::from_slice::<ClassifyScenario>(data);
    let _ = serde_json::from_slice::<ComposeScenario>(data);
    let _ = serde_json::from_slice::<ExpmapScenario>(data);
    let _ = serde_json::from_slice::<HermiteScenario>(data);
});
