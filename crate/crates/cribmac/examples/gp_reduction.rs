//! Specialize to a single-user state channel and compare against the
//! closed form.
//!
//! When `|X1| = 1` the first encoder is silent and the model collapses to
//! one encoder that knows the state sequence ahead of time. The bundled
//! channel adds a uniform binary state to the input and then flips the
//! result with probability 0.1. Writing `U = X2 xor S` makes the auxiliary
//! layer independent of the state while the output becomes `U` through a
//! clean BSC(0.1), so the binning layer cancels the interference entirely:
//! the best rate equals the clean-channel capacity `ln 2 - Hb(0.1)`. That
//! value is also an upper bound, because revealing the state to the
//! decoder as well can only help and turns the channel into that same
//! clean BSC.
//!
//! ```text
//! cargo run --release --example gp_reduction
//! ```

use std::path::{Path, PathBuf};

use cribmac::{load_channel, CribMode, SearchConfig};

fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .join(rel)
}

fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -p * p.ln() - (1.0 - p) * (1.0 - p).ln()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let channel_path = fixture("channels/gp_dirty_bsc.json");
    let (channel, _) = load_channel(&channel_path)?;
    println!(
        "channel: {} (single-user: |X1| = 1)",
        channel_path.display()
    );

    let cfg = SearchConfig {
        samples: 512,
        refine: 6,
        ..SearchConfig::default()
    };
    let region = cribmac::search_region(&channel, CribMode::Causal, &cfg)?;
    let searched = region.max_r2();

    let closed_form = 2.0_f64.ln() - binary_entropy(0.1);
    println!("searched best rate: {searched:.9} nats");
    println!("closed form ln 2 - Hb(0.1): {closed_form:.9} nats");
    println!("gap: {:.3e} nats", closed_form - searched);

    assert!(
        (closed_form - searched).abs() < 2e-3,
        "search should land within 2e-3 nats of the closed form, gap {:.3e}",
        closed_form - searched
    );
    println!("state interference cancelled: the dirty channel attains the clean capacity");
    Ok(())
}
