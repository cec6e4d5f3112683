//! Trains a 2-D ring-of-Gaussians GAN from a config and reports mode
//! coverage: `cargo run --release --example synthetic_tgan -- [CONFIG] [OUT_DIR]`.

use std::path::PathBuf;

use ftnet::cli::config::ExperimentConfig;
use ftnet::cli::train::train_experiment;

fn main() -> ftnet::Result<()> {
    let mut args = std::env::args().skip(1);
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..");
    let path = args.next().map(PathBuf::from).unwrap_or_else(|| root.join("configs/synthetic_tgan.toml"));
    let cfg = ExperimentConfig::load(&path)?;
    let out = args.next().map(PathBuf::from);
    let (g, d) = cfg.param_counts()?;
    println!("{}: {} parameters, {} iterations", cfg.name, g + d, cfg.train.iterations);

    let outcome = train_experiment(&cfg, out.as_deref(), |r| {
        if r.iter % 1000 == 0 {
            println!(
                "iter {:>6}  d_loss {:.3}  g_loss {:.3}  modes {}/6",
                r.iter,
                r.d_loss,
                r.g_loss,
                r.covered_modes.unwrap_or(0)
            );
        }
    })?;
    if let Some(dir) = out {
        println!("{} files in {}", outcome.artifacts.len(), dir.display());
    }
    Ok(())
}
