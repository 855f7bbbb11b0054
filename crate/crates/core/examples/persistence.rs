//! Save a fitted model, reload it and detect tampering.

use gbm_ssrf::cli::{cmd_train, DataSource, ModelKind, RunConfig};
use gbm_ssrf::dataset::SynthSpec;
use gbm_ssrf::model_file::{load_model, parse_model};

fn main() -> gbm_ssrf::Result<()> {
    let dir = std::env::temp_dir().join(format!("gbm-ssrf-persist-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| gbm_ssrf::Error::io(&dir, e))?;
    let synth = SynthSpec { n: 3000, fraud_rate: 0.05, n_features: 5, difficulty: 0.3, seed: 4 };
    let probe = [0.3, -1.0, 0.5, 2.0, -0.2];

    for kind in [ModelKind::Rf, ModelKind::Gbm, ModelKind::Ssrf, ModelKind::Hybrid] {
        let mut cfg = RunConfig { data: Some(DataSource::Synth(synth)), kind, ..RunConfig::default() };
        cfg.model.gbm.n_stages = 40;
        cfg.model.ssrf.n_trees = 40;
        let path = dir.join(format!("{kind}.json"));
        let trained = cmd_train(&cfg, &path)?;
        let back = load_model(&path)?;
        let bytes = std::fs::metadata(&path).map(|m| m.len()).unwrap_or(0);
        println!(
            "{:<7} {bytes:>8} bytes, threshold {:.4}, probe score {:.6}, reloaded {:.6}",
            kind.as_str(),
            trained.threshold,
            trained.file.score(&probe),
            back.score(&probe)
        );
    }

    let text = std::fs::read_to_string(dir.join("gbm.json")).map_err(|e| gbm_ssrf::Error::io(&dir, e))?;
    let truncated = parse_model(&text[..text.len() / 2]).unwrap_err();
    println!("truncated file: {truncated}");
    let tampered = parse_model(&text.replacen("\"threshold\":", "\"threshold\":1", 1)).unwrap_err();
    println!("tampered file: {tampered}");
    let future = parse_model(&text.replacen("\"schema_version\":1", "\"schema_version\":7", 1)).unwrap_err();
    println!("newer schema: {future}");
    Ok(())
}
