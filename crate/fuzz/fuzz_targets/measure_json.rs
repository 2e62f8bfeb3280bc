#![no_main]

use libfuzzer_sys::fuzz_target;
use structpop::{distance, HybridMeasure};

fuzz_target!(|data: &[u8]| {
    let Ok(m) = serde_json::from_slice::<HybridMeasure>(data) else { return };
    let total = m.total_mass();
    assert!(total >= 0.0);
    if let Ok(p) = m.project_to_grid() {
        assert!(p.atoms().is_empty());
        assert_eq!(distance(&p, &p).unwrap().value, 0.0);
    }
    let (s, c) = m.split();
    assert!(s.singular_mass() == m.singular_mass() && c.continuous_mass() == m.continuous_mass());
    let back: HybridMeasure = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
    assert_eq!(back, m);
});
