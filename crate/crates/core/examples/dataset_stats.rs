//! Counts users, items and interactions of a dataset and reports its density.
//!
//! ```text
//! cargo run --example dataset_stats -- crates/core/tests/fixtures/electronics_synthetic.txt
//! ```

use std::path::PathBuf;

use lightgcn::experiment::cmd_stats;
use lightgcn::Format;

fn main() -> lightgcn::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/electronics_synthetic.txt")));
    let format: Format = std::env::args().nth(2).as_deref().unwrap_or("adjacency-list").parse()?;
    let (stats, text) = cmd_stats(&path, format, None)?;
    print!("{text}");
    println!("mean items per user {:.2}", stats.num_interactions as f64 / stats.num_users as f64);
    Ok(())
}
