//! Train, evaluate and score CSV files through the command functions.

use gbm_ssrf::cli::{cmd_evaluate, cmd_predict, cmd_synth, cmd_train, DataSource, ModelKind, RunConfig};
use gbm_ssrf::dataset::SynthSpec;

fn main() -> gbm_ssrf::Result<()> {
    let dir = std::env::temp_dir().join(format!("gbm-ssrf-csv-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| gbm_ssrf::Error::io(&dir, e))?;
    let train_csv = dir.join("train.csv");
    let new_csv = dir.join("new.csv");
    let all_csv = dir.join("all.csv");
    cmd_synth(&SynthSpec { n: 10_000, fraud_rate: 0.02, n_features: 6, difficulty: 0.3, seed: 1 }, "label", &all_csv)?;
    // hold out every fifth row as new data
    let text = std::fs::read_to_string(&all_csv).map_err(|e| gbm_ssrf::Error::io(&all_csv, e))?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    let (mut old, mut new) = (vec![header], vec![header]);
    for (i, line) in lines.enumerate() {
        if i % 5 == 0 {
            new.push(line);
        } else {
            old.push(line);
        }
    }
    std::fs::write(&train_csv, old.join("\n") + "\n").map_err(|e| gbm_ssrf::Error::io(&train_csv, e))?;
    std::fs::write(&new_csv, new.join("\n") + "\n").map_err(|e| gbm_ssrf::Error::io(&new_csv, e))?;

    let cfg = RunConfig { data: Some(DataSource::File(train_csv)), kind: ModelKind::Hybrid, seed: 1, ..RunConfig::default() };
    let model = dir.join("model.json");
    let trained = cmd_train(&cfg.with_seed(1), &model)?;
    println!("trained {} with threshold {:.4}", trained.model_kind, trained.threshold);
    if let Some(v) = &trained.validation {
        print!("validation\n{}", v.to_text());
    }

    let eval = cmd_evaluate(&model, &new_csv, None)?;
    print!("fresh data, {} rows\n{}", eval.n_rows, eval.report.to_text());

    let scored = dir.join("scored.csv");
    let pred = cmd_predict(&model, &new_csv, &scored)?;
    println!("wrote {} scored rows to {}", pred.rows, pred.out.display());
    let text = std::fs::read_to_string(&scored).map_err(|e| gbm_ssrf::Error::io(&scored, e))?;
    for line in text.lines().take(4) {
        println!("  {line}");
    }
    Ok(())
}
