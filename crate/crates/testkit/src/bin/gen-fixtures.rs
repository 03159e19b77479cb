//! Regenerates the shipped fixtures under `fixtures/`.
//!
//! Usage: `cargo run -p tradecraft-testkit --bin gen-fixtures [-- <dir>]`

use std::path::PathBuf;

use tradecraft_testkit::fixtures::{ohlcv_csv, random_walk};
use tradecraft_testkit::shipped;

fn main() -> std::io::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(shipped::fixtures_dir);
    std::fs::create_dir_all(&dir)?;
    let bars = random_walk(shipped::SEED, shipped::BARS, shipped::start());
    std::fs::write(dir.join("AAPL.csv"), ohlcv_csv(&bars))?;
    std::fs::write(dir.join("AAPL.json"), shipped::aux_json(&bars))?;
    std::fs::write(dir.join("scripted_5day.json"), shipped::script_json(&bars))?;
    println!("wrote fixtures to {}", dir.display());
    Ok(())
}
