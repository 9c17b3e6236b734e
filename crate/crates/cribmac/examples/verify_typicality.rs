//! Exercise the strong-typicality bounds empirically on a bundled law.
//!
//! Assembles the joint distribution of a channel/law pair and runs the
//! same statistical battery as the `verify-typicality` subcommand: the
//! probability windows on typical samples, the typical-set mass and its
//! Wilson interval, an exhaustive count of typical sequences against the
//! cardinality bound, and two cross-law packing rates against their
//! exponential bounds.
//!
//! ```text
//! cargo run --release --example verify_typicality
//! ```

use std::path::{Path, PathBuf};

use cribmac::cli::typicality_suite;
use cribmac::{load_channel, load_law_document, DEFAULT_SEED};

fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .join(rel)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let channel_path = fixture("channels/pp_clean.json");
    let law_path = fixture("laws/pp_clean_law.json");
    let (channel, _) = load_channel(&channel_path)?;
    let document = load_law_document(&law_path)?;
    let law_file = document.select(None, &law_path.display().to_string())?;
    let law = law_file.to_law(&channel, &law_path.display().to_string())?;
    let joint = law.assemble_joint(&channel)?;

    println!("channel: {}", channel_path.display());
    println!(
        "law: {} (X1 ~ Bernoulli(0.1), output copies X1)",
        law_path.display()
    );
    println!("n = 800, epsilon = 0.1, 4000 samples, 1000 packing trials");
    println!();

    let lines = typicality_suite(&joint, 800, 0.1, 4000, 1000, DEFAULT_SEED)?;
    let mut failed = 0;
    for line in &lines {
        println!(
            "{} {}: {}",
            if line.pass { "PASS" } else { "FAIL" },
            line.name,
            line.detail
        );
        if !line.pass {
            failed += 1;
        }
    }
    assert!(failed == 0, "{failed} typicality bounds failed");
    println!();
    println!("all {} bounds hold", lines.len());
    Ok(())
}
