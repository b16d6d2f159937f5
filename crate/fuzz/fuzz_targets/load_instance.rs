#![no_main]

use libfuzzer_sys::fuzz_target;
use ofl_core::instance::load_instance;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(instance) = load_instance(text) {
        let again = load_instance(&instance.to_json()).expect("saved instances load");
        assert_eq!(again, instance);
    }
});
