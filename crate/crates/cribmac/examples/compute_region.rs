//! Search the achievable rate region of a channel and export the hull.
//!
//! Loads the bundled AND-channel description, runs the strictly-causal
//! region search, prints every hull vertex together with the auxiliary law
//! that achieves it, and writes the same data as a CSV report plus a
//! witness-law sidecar.
//!
//! ```text
//! cargo run --release --example compute_region
//! ```

use std::path::{Path, PathBuf};

use cribmac::{
    load_channel, region_csv, witness_file, witness_json, CribMode, ReportMeta, SearchConfig,
    DEFAULT_SEED,
};

fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .join(rel)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let channel_path = fixture("channels/and_mac.json");
    let (channel, _) = load_channel(&channel_path)?;
    println!(
        "channel: {} (|X1|={} |X2|={} |S|={} |Y|={})",
        channel_path.display(),
        channel.x1().size(),
        channel.x2().size(),
        channel.s().size(),
        channel.y().size(),
    );

    let cfg = SearchConfig {
        samples: 512,
        refine: 6,
        ..SearchConfig::default()
    };
    let region = cribmac::search_region(&channel, CribMode::StrictlyCausal, &cfg)?;

    println!(
        "searched {} laws, kept {} boundary points, hull has {} vertices:",
        region.laws().len(),
        region.points().len(),
        region.hull().len(),
    );
    for (&(r1, r2), &law_idx) in region.hull().iter().zip(region.hull_witnesses()) {
        let law = &region.laws()[law_idx];
        println!(
            "  (R1, R2) = ({r1:.6}, {r2:.6}) nats  via law {law_idx} \
             (|V|={}, |U|={})",
            law.v_size(),
            law.u_size(),
        );
    }

    // Membership queries against the sampled region.
    let inside = (0.3, 0.3);
    let outside = (0.6, 0.6);
    println!("contains {inside:?}: {}", region.contains(inside, 1e-9));
    println!("contains {outside:?}: {}", region.contains(outside, 1e-9));

    // The same exports the `region` subcommand writes.
    let meta = ReportMeta::new("example compute_region", DEFAULT_SEED);
    let out_dir = std::env::temp_dir();
    let csv_path = out_dir.join("cribmac_example_region.csv");
    let witness_path = out_dir.join("cribmac_example_region.witness.json");
    std::fs::write(&csv_path, region_csv(&region, &meta))?;
    let sidecar = witness_file(&region, &meta, CribMode::StrictlyCausal);
    std::fs::write(&witness_path, witness_json(&sidecar))?;
    println!(
        "wrote {} and {}",
        csv_path.display(),
        witness_path.display()
    );
    Ok(())
}
