#![no_main]

use libfuzzer_sys::fuzz_target;
use ofl_core::harness::parse_experiment;
use ofl_core::{GeneratorParams, HarnessError};

// keeps generated instances small enough to build on every input
const MAX_SIZE: usize = 64;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(doc) = parse_experiment(text) else {
        return;
    };
    let text = serde_json::to_string(&doc).expect("documents serialize");
    assert_eq!(parse_experiment(&text).expect("serialized documents parse"), doc);

    let small = match doc.generator {
        Some(GeneratorParams::Star { k } | GeneratorParams::Clique { k, .. }) => k <= MAX_SIZE,
        Some(GeneratorParams::SubsetIid { n } | GeneratorParams::Fotakis { n }) => n <= MAX_SIZE,
        None => true,
    };
    if small {
        let _ = doc.into_spec(&|path| Err(HarnessError::Spec(format!("no file {path}"))));
    }
});
