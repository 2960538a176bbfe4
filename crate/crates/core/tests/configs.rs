use std::path::Path;

use qcpinn::config::ExperimentConfig;
use qcpinn::neural::ConstraintMode;
use qcpinn::trainer::TrainConfig;

fn load(name: &str) -> ExperimentConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name);
    ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn shipped_configs_load() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut count = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            cfg.spec().unwrap();
            let again = ExperimentConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
            assert_eq!(again, cfg, "{}", path.display());
            count += 1;
        }
    }
    assert!(count >= 7);
}

#[test]
fn spelled_out_preset_matches_builtin() {
    assert_eq!(load("tls.toml").training(), TrainConfig::tls_preset());
    let soft = load("tls_soft.toml").training();
    assert_eq!(soft.constraint, ConstraintMode::Soft { weight: 1.0 });
    assert_eq!(
        TrainConfig {
            constraint: ConstraintMode::Hard,
            ..soft
        },
        TrainConfig::tls_preset()
    );
    assert_eq!(load("lambda.toml").training(), TrainConfig::lambda_preset());
}
