//! Run the full block-Markov encoder/decoder stack and watch the error
//! rate fall with the block length.
//!
//! Loads the bundled state-revealing channel (the output displays both
//! inputs symbol by symbol) and a law whose binned layer carries one bit
//! per use. The binned-layer message is live; the cribbed layer runs with
//! a single message because on a quaternary output the typicality window
//! wide enough to accept the true received block at these block lengths
//! is already too wide to tell two binary crib candidates apart.
//!
//! ```text
//! cargo run --release --example simulate_scheme
//! ```

use std::path::{Path, PathBuf};

use cribmac::{load_channel, load_law_document, CodeParams, SimConfig};

fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .join(rel)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let channel_path = fixture("channels/reveal_pair.json");
    let law_path = fixture("laws/reveal_square.json");
    let (channel, _) = load_channel(&channel_path)?;
    let document = load_law_document(&law_path)?;
    let law_file = document.select(None, &law_path.display().to_string())?;
    let law = law_file.to_law(&channel, &law_path.display().to_string())?;

    // Low rates keep the codebooks tiny, so the error curve is governed
    // purely by the typicality tests sharpening as n grows.
    let mut params = CodeParams::new(50, 8, 0.0, 0.007, 1.8);
    params.rprime = Some(0.01);
    let sim = SimConfig {
        trials: 100,
        ..SimConfig::default()
    };

    println!("channel: {}", channel_path.display());
    println!("law: {} (mode {})", law_path.display(), law.mode().token());
    println!(
        "rates: R1 = {} nats, R2 = {} nats, R' = {}, epsilon = {}, {} blocks, {} trials/n",
        params.r1,
        params.r2,
        params.rprime.unwrap(),
        params.epsilon,
        params.blocks,
        sim.trials
    );
    println!();
    println!(
        "{:>5} {:>9} {:>19} {:>9} {:>21}",
        "n", "msg_err", "wilson95", "enc_err", "events e0..e5"
    );

    for report in cribmac::sweep_n(&channel, &law, &params, &[50, 100, 200], &sim)? {
        let e = &report.events;
        println!(
            "{:>5} {:>9.4} [{:>8.4}, {:>8.4}] {:>9.4} {:>21}",
            report.n,
            report.message_error_rate,
            report.wilson_lo,
            report.wilson_hi,
            report.encoder_error_rate,
            format!("{}/{}/{}/{}/{}/{}", e.e0, e.e1, e.e2, e.e3, e.e4, e.e5),
        );
    }
    println!();
    println!("e0: source block atypical      e1: crib decode wrong");
    println!("e2: covering (encoder) failure e3: received block atypical");
    println!("e4: wrong resolution index     e5: wrong fresh message");
    Ok(())
}
