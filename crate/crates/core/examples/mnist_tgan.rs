//! A short MNIST TGAN run that writes a grid of samples:
//! `cargo run --release --example mnist_tgan -- [ITERATIONS] [OUT.pgm]`.
//! Needs the IDX files from `scripts/fetch_mnist.py`.

use std::path::PathBuf;

use ftnet::cli::config::ExperimentConfig;
use ftnet::cli::output::write_samples;
use ftnet::cli::train::train_experiment;
use ftnet::gan::rng_stream;

fn main() -> ftnet::Result<()> {
    let mut args = std::env::args().skip(1);
    let iterations: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(2000);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "mnist_tgan.pgm".into()));
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..");
    let mut cfg = ExperimentConfig::load(&root.join("configs/mnist_tgan.toml"))?;
    cfg.train.iterations = iterations;

    let outcome = train_experiment(&cfg, None, |r| {
        if r.iter % 500 == 0 || r.iter == iterations {
            println!("iter {:>6}  d_loss {:.3}  g_loss {:.3}", r.iter, r.d_loss, r.g_loss);
        }
    })?;
    let samples = outcome.model.generate(64, &mut rng_stream(cfg.train.seed, 5))?;
    let mean = samples.data().iter().sum::<f64>() / samples.len() as f64;
    write_samples(&out, &samples)?;
    println!("64 samples, mean pixel {mean:.3} → {}", out.display());
    Ok(())
}
