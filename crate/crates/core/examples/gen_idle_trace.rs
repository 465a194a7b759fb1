//! Writes the bundled idle trace to `data/idle_300s.csv`, or to the path
//! given as the first argument.

use irsolve_core::power::{generate_idle_trace, write_trace};
use std::fs::File;
use std::io::BufWriter;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/data/idle_300s.csv").to_string());
    write_trace(BufWriter::new(File::create(&path)?), &generate_idle_trace())?;
    println!("wrote {path}");
    Ok(())
}
