#![no_main]

use libfuzzer_sys::fuzz_target;
use ofl_core::arrival::{parse_arrival, ArrivalSpec};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(model) = parse_arrival(text) {
        let back = serde_json::to_string(&ArrivalSpec::from(&model)).expect("specs serialize");
        assert_eq!(parse_arrival(&back).expect("converted specs are valid"), model);
    }
});
