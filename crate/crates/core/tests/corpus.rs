//! Every checked-in fuzz seed must parse and survive the round trips the
//! fuzz targets assert.

use std::fs;
use std::path::PathBuf;

use ofl_core::arrival::{parse_arrival, ArrivalSpec};
use ofl_core::harness::parse_experiment;
use ofl_core::instance::load_instance;
use ofl_core::HarnessError;

fn seeds(target: &str) -> Vec<(PathBuf, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .map(|p| {
            let text = fs::read_to_string(&p).unwrap();
            (p, text)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn instance_seeds_round_trip() {
    for (path, text) in seeds("load_instance") {
        let inst = load_instance(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(load_instance(&inst.to_json()).unwrap(), inst, "{}", path.display());
    }
}

#[test]
fn experiment_seeds_resolve() {
    let instances = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus/load_instance");
    for (path, text) in seeds("parse_experiment") {
        let doc = parse_experiment(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let again = parse_experiment(&serde_json::to_string(&doc).unwrap()).unwrap();
        assert_eq!(again, doc);
        let resolved = doc.into_spec(&|p| {
            let text = fs::read_to_string(instances.join(p)).map_err(|e| HarnessError::Spec(e.to_string()))?;
            Ok(load_instance(&text)?)
        });
        // regression seeds are fuzzer finds and need not describe a valid experiment
        let regression = path.file_name().unwrap().to_string_lossy().starts_with("regression_");
        if let (Err(e), false) = (resolved, regression) {
            panic!("{}: {e}", path.display());
        }
    }
}

#[test]
fn arrival_seeds_round_trip() {
    for (path, text) in seeds("parse_arrival") {
        let model = parse_arrival(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let back = serde_json::to_string(&ArrivalSpec::from(&model)).unwrap();
        assert_eq!(parse_arrival(&back).unwrap(), model);
    }
}

#[test]
fn malformed_inputs_are_errors() {
    for bad in [
        "",
        "{",
        "[]",
        "{\"version\":1}",
        "{\"version\":2,\"facility_cost\":1,\"metric\":{\"type\":\"star\",\"leaves\":2,\"spoke\":0.1},\"demands\":[]}",
    ] {
        assert!(load_instance(bad).is_err(), "{bad}");
    }
    for bad in [
        "{\"model\":\"partial\"}",
        "{\"model\":\"partial\",\"rho\":1.5}",
        "{\"model\":\"sorted\"}",
        "{\"model\":\"uniform\",\"extra\":1}",
    ] {
        assert!(parse_arrival(bad).is_err(), "{bad}");
    }
    assert!(parse_experiment(
        "{\"arrival\":{\"model\":\"uniform\"},\"rule\":{\"kind\":\"clamped_linear\",\"q\":1},\"seeds\":3}"
    )
    .is_err());
}
