#![no_main]

use libfuzzer_sys::fuzz_target;
use structpop_cli::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(cfg) = RunConfig::from_json(text) else { return };
    // An accepted config survives its own manifest.
    let echoed = serde_json::to_string(&cfg).unwrap();
    let back = RunConfig::from_json(&echoed).expect("echoed config rejected");
    assert_eq!(back, cfg);
});
