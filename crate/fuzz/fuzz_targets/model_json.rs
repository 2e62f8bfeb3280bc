#![no_main]

use libfuzzer_sys::fuzz_target;
use structpop::ModelSpec;

fuzz_target!(|data: &[u8]| {
    let Ok(model) = serde_json::from_slice::<ModelSpec>(data) else { return };
    assert!(model.z0_bound() < 0.0);
    let dom = model.state_domain();
    let hi = dom.hi.min(dom.lo + 50.0);
    if hi > dom.lo {
        let _ = model.validate(dom.lo, hi, 16);
    }
    let back: ModelSpec = serde_json::from_str(&serde_json::to_string(&model).unwrap()).unwrap();
    assert_eq!(back, model);
});
