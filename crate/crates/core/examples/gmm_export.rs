//! Writes both ring-of-Gaussians presets as CSV: `cargo run --example
//! gmm_export -- OUT_DIR`.

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use ftnet::data::{gmm_sample, write_gmm_csv, GmmSpec};
use ftnet::gan::rng_stream;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "runs/gmm".into()));
    std::fs::create_dir_all(&dir)?;
    for (name, spec) in [("gmm_literal.csv", GmmSpec::default()), ("gmm_separated.csv", GmmSpec::separated())] {
        let ds = gmm_sample(&spec, &mut rng_stream(0, 1))?;
        let path = dir.join(name);
        let mut w = BufWriter::new(File::create(&path)?);
        write_gmm_csv(&mut w, &ds)?;
        println!("{} points, variance {} → {}", ds.len(), spec.variance, path.display());
    }
    Ok(())
}
