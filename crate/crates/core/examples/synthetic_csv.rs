//! Writes a schema-compatible synthetic grid CSV for smoke runs:
//! `cargo run --example synthetic_csv -- ROWS PATH [SEED]`.

use gan_stability::data::synthetic::synthetic_grid;
use gan_stability::data::write_csv;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().collect();
    if args.len() < 3 {
        eprintln!("usage: synthetic_csv ROWS PATH [SEED]");
        std::process::exit(2);
    }
    let rows: usize = args[1].parse()?;
    let seed: u64 = args.get(3).map(|s| s.parse()).transpose()?.unwrap_or(0);
    let d = synthetic_grid(rows, seed);
    write_csv(&d, std::fs::File::create(&args[2])?)?;
    Ok(())
}
