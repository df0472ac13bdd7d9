//! Writes a toy corpus with matching attention maps and embeddings.
//!
//! cargo run -p aclm-core --features testkit --example make_toy_data -- <dir> [n] [seed]

use aclm_core::testkit::write_toy_dataset;
use std::path::PathBuf;

fn main() -> std::io::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "toy-data".into()));
    let n = args.next().map_or(50, |a| a.parse().expect("n must be an integer"));
    let seed = args.next().map_or(7, |a| a.parse().expect("seed must be an integer"));
    let paths = write_toy_dataset(&dir, n, seed)?;
    println!("corpus      {}", paths.corpus.display());
    println!("attention   {}", paths.attention.display());
    println!("embeddings  {}", paths.embeddings.display());
    Ok(())
}
