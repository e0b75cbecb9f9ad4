use std::path::Path;

use qmc_tsfp::harness::estimate_work;
use qmc_tsfp::ExperimentConfig;

fn configs_in(dir: &str) -> Vec<(String, ExperimentConfig)> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(dir);
    let mut out: Vec<_> = std::fs::read_dir(&root)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .map(|p| {
            let config = ExperimentConfig::from_path(&p)
                .unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            (p.file_name().unwrap().to_string_lossy().into_owned(), config)
        })
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

#[test]
fn shipped_configs_validate_within_budget() {
    let desk = configs_in("");
    assert!(desk.len() >= 7);
    for (name, config) in &desk {
        let kind = config.kind.unwrap_or_else(|| panic!("{name} has no kind"));
        config.validate(kind).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(!config.expensive, "{name}");
        assert!(estimate_work(kind, config).unwrap() <= config.budget.max_work, "{name}");
    }
}

#[test]
fn full_scale_configs_are_flagged_expensive() {
    let full = configs_in("full-scale");
    assert!(!full.is_empty());
    for (name, config) in &full {
        let kind = config.kind.unwrap_or_else(|| panic!("{name} has no kind"));
        config.validate(kind).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(config.expensive, "{name}");
        assert!(estimate_work(kind, config).unwrap() <= config.budget.max_work, "{name}");
    }
}
