//! Parameter totals of the shipped experiment configs and the compression
//! ratio of each tensorized model against its dense baselines.

use std::path::Path;

use ftnet::cli::config::ExperimentConfig;

fn main() -> ftnet::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for (tgan, baselines) in [
        ("mnist_tgan", &["mnist_gan1", "mnist_gan2"][..]),
        ("synthetic_tgan", &["synthetic_gan1", "synthetic_gan2", "synthetic_gan3"][..]),
    ] {
        let total = |name: &str| -> ftnet::Result<usize> {
            let (g, d) = ExperimentConfig::load(&dir.join(format!("{name}.toml")))?.param_counts()?;
            println!("{name:<16} G {g:>7}  D {d:>7}  total {:>7}", g + d);
            Ok(g + d)
        };
        let t = total(tgan)?;
        for b in baselines {
            let n = total(b)?;
            println!("{:<16} {b}/{tgan} = {:.2}", "", n as f64 / t as f64);
        }
        println!();
    }
    Ok(())
}
