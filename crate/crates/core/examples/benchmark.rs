//! Multi-seed comparison of RF, GBM and GBM-SSRF on synthetic data.
//!
//! ```text
//! cargo run --release --example benchmark -- 20000 0.01 0.4 13,14,15
//! ```

use gbm_ssrf::cli::{cmd_benchmark, DataSource, RunConfig};
use gbm_ssrf::dataset::SynthSpec;
use gbm_ssrf::metrics::comparison_table;

fn main() -> gbm_ssrf::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: &str| args.get(i).cloned().unwrap_or_else(|| default.to_string());
    let n: usize = arg(0, "20000").parse().expect("rows");
    let rate: f64 = arg(1, "0.01").parse().expect("fraud rate");
    let difficulty: f64 = arg(2, "0.4").parse().expect("difficulty");
    let seeds: Vec<u64> = arg(3, "13,14,15").split(',').map(|s| s.trim().parse().expect("seed")).collect();

    let cfg = RunConfig {
        data: Some(DataSource::Synth(SynthSpec { n, fraud_rate: rate, n_features: 10, difficulty, seed: 0 })),
        ..RunConfig::default()
    };
    let out = cmd_benchmark(&cfg, &seeds, Vec::new())?;
    for run in &out.per_seed {
        println!("seed {}", run.seed);
        print!("{}", comparison_table(&run.rows));
    }
    println!("mean over {} seeds", seeds.len());
    print!("{}", comparison_table(&out.rows));
    Ok(())
}
