#![no_main]

use std::path::Path;

use aclab::pipeline::RunConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(cfg) = RunConfig::from_json(text) else {
        return;
    };
    let _ = cfg.validate(Path::new("."));
    let _ = cfg.boundary.to_kind();
    let _ = cfg.grid.build();
    let again = RunConfig::from_json(&serde_json::to_string(&cfg).expect("configs serialize")).expect("serialized configs parse");
    assert_eq!(again.hash(), cfg.hash());
});
