//! Verify that strictly-causal cribbing never beats causal cribbing.
//!
//! A causal law may choose `X2` from the current crib symbol as well as
//! the state, so every strictly-causal law embeds into a causal one and
//! the strictly-causal region must sit inside the causal region. This
//! example searches both regions of the bundled AND channel, checks the
//! inclusion vertex by vertex, and prints where the causal region is
//! strictly bigger.
//!
//! ```text
//! cargo run --release --example check_inclusion
//! ```

use std::path::{Path, PathBuf};

use cribmac::geometry::{hull_contains_point, linf_distance_to_hull};
use cribmac::{load_channel, CribMode, SearchConfig};

fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .join(rel)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let channel_path = fixture("channels/and_mac.json");
    let (channel, _) = load_channel(&channel_path)?;
    println!("channel: {}", channel_path.display());

    let cfg = SearchConfig {
        samples: 512,
        refine: 6,
        ..SearchConfig::default()
    };
    let sc = cribmac::search_region(&channel, CribMode::StrictlyCausal, &cfg)?;
    let causal = cribmac::search_region(&channel, CribMode::Causal, &cfg)?;

    println!(
        "strictly causal: {} hull vertices, max R1 {:.4}, max R2 {:.4}",
        sc.hull().len(),
        sc.max_r1(),
        sc.max_r2()
    );
    println!(
        "causal:          {} hull vertices, max R1 {:.4}, max R2 {:.4}",
        causal.hull().len(),
        causal.max_r1(),
        causal.max_r2()
    );

    // Sampled searches carry a small deficit, so the inclusion check gets
    // a matching slack.
    let tol = 0.02;
    let mut worst = 0.0_f64;
    for &v in sc.hull() {
        let dist = if hull_contains_point(causal.hull(), v, 0.0) {
            0.0
        } else {
            linf_distance_to_hull(causal.hull(), v)
        };
        worst = worst.max(dist);
        assert!(
            dist <= tol,
            "strictly-causal vertex {v:?} sits {dist:.4} nats outside the causal hull"
        );
    }
    println!("inclusion holds: worst overshoot {worst:.6} nats (tolerance {tol})");

    // The reverse containment fails: causal cribbing genuinely helps here.
    let gap = causal
        .hull()
        .iter()
        .filter(|&&v| !hull_contains_point(sc.hull(), v, 1e-9))
        .map(|&v| linf_distance_to_hull(sc.hull(), v))
        .fold(0.0_f64, f64::max);
    println!("largest causal vertex excursion beyond the strictly-causal hull: {gap:.4} nats");
    Ok(())
}
