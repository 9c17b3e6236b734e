//! Command-line interface: one binary with `region`, `simulate`,
//! `verify-typicality`, and `check-inclusion` subcommands.
//!
//! Structured inputs are JSON (channel and law files), tabular outputs are
//! CSV written atomically. Option precedence is flags > `--config` file >
//! built-in defaults; the config file is a flat JSON object whose keys are
//! the long option names (plus `threads`). Exit codes: 0 success, 1 domain
//! error (bad input file, failed check, over-budget codebook), 2 usage
//! error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand};

use crate::channel::MacChannel;
use crate::coding::CodeParams;
use crate::files::{
    atomic_write, fnv1a64, load_channel, load_law_document, region_csv, simulate_csv, witness_file,
    witness_json, ChannelFile, LawFile, ReportMeta,
};
use crate::geometry;
use crate::probability::JointLaw;
use crate::region::{
    search_region, u_bound, v_bound, CribMode, FactorizedLaw, SearchConfig, DEFAULT_V_CAP, VAR_S,
    VAR_U, VAR_V, VAR_X1, VAR_Y,
};
use crate::rng::{seeded_rng, DEFAULT_SEED};
use crate::sim::{sweep_n, SimConfig};
use crate::stats;
use crate::typicality::{cross_law_typicality_rate, typical_set_size_bounds, TypicalityContext};
use rand::Rng;

const DEFAULT_SAMPLES: usize = 512;
const DEFAULT_REFINE: usize = 6;
const DEFAULT_TRIALS: usize = 200;
const DEFAULT_BLOCKS: usize = 8;
const DEFAULT_EPSILON: f64 = 0.1;
const DEFAULT_TOL: f64 = 0.02;
const DEFAULT_VERIFY_N: usize = 1000;
const DEFAULT_VERIFY_SAMPLES: u64 = 10_000;
const DEFAULT_VERIFY_TRIALS: u64 = 2_000;
/// Packing (cross-law) checks run at a short block so the empirical rate is
/// not trivially zero.
const PACKING_N_CAP: usize = 25;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Missing or inconsistent options: exit code 2.
    #[error("{0}")]
    Usage(String),
    /// Bad input files, failed checks, or runtime limits: exit code 1.
    #[error("{0}")]
    Domain(String),
}

macro_rules! domain_from {
    ($($ty:ty),*) => {$(
        impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError::Domain(e.to_string())
            }
        }
    )*};
}
domain_from!(
    crate::files::FilesError,
    crate::region::RegionError,
    crate::coding::CodingError,
    crate::channel::ChannelError,
    crate::probability::ProbError,
    crate::typicality::TypicalityError
);

type Result<T> = std::result::Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(
    name = "cribmac",
    version,
    about = "Rate regions and coding-scheme simulation for a state-dependent \
             multiple-access channel with a cribbing encoder",
    after_help = "Option precedence: flags > --config JSON file > defaults. \
                  The default seed is 12648430 (0x00C0FFEE). Config keys are \
                  the long option names; `threads` may also come from the \
                  CRIBMAC_THREADS environment variable."
)]
pub struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Flat JSON object of option defaults (long names as keys).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Simulation worker threads (0 = all cores); falls back to
    /// CRIBMAC_THREADS.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// More detail (per-vertex and per-event listings).
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,
    /// Only errors.
    #[arg(short, long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Search the achievable-rate region of a channel and write the hull.
    Region(RegionArgs),
    /// Monte Carlo simulation of the block-Markov coding scheme.
    Simulate(SimulateArgs),
    /// Statistical checks of the strong-typicality bounds on a channel/law.
    VerifyTypicality(VerifyArgs),
    /// Check that the strictly-causal hull lies inside the causal hull.
    CheckInclusion(InclusionArgs),
}

#[derive(Args, Debug)]
struct RegionArgs {
    /// Channel description JSON.
    #[arg(long, value_name = "FILE")]
    channel: Option<PathBuf>,
    /// Cribbing mode: sc (strictly causal) or c (causal).
    #[arg(long, value_parser = ["sc", "c"])]
    mode: Option<String>,
    /// Random laws sampled before refinement.
    #[arg(long)]
    samples: Option<usize>,
    /// Hill-climb refinement iterations.
    #[arg(long)]
    refine: Option<usize>,
    /// Cap on the time-sharing alphabet |V| (clamped to the proven bound).
    #[arg(long)]
    vmax: Option<usize>,
    /// Cap on the binning alphabet |U| (clamped to the proven bound).
    #[arg(long)]
    umax: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV; the witness sidecar lands next to it.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Witness sidecar path (default: --out with extension .witness.json).
    #[arg(long, value_name = "FILE")]
    witness_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Channel description JSON.
    #[arg(long, value_name = "FILE")]
    channel: Option<PathBuf>,
    /// Law JSON: a bare law or a witness sidecar (select with --witness).
    #[arg(long, value_name = "FILE")]
    law: Option<PathBuf>,
    /// Witness id when --law points at a sidecar.
    #[arg(long, value_name = "ID")]
    witness: Option<String>,
    /// Cribbing mode; defaults to the law's own mode. A strictly-causal
    /// law may be promoted to causal, not the reverse.
    #[arg(long, value_parser = ["sc", "c"])]
    mode: Option<String>,
    /// Encoder 1 rate in nats per channel use.
    #[arg(long)]
    r1: Option<f64>,
    /// Encoder 2 rate in nats per channel use.
    #[arg(long)]
    r2: Option<f64>,
    /// Bin rate R' (default: I(U;S|V) + 3 epsilon from the law).
    #[arg(long)]
    rprime: Option<f64>,
    /// Block length; repeat the flag to sweep several lengths.
    #[arg(long = "n", value_name = "N")]
    n: Vec<usize>,
    /// Blocks per session.
    #[arg(long)]
    blocks: Option<usize>,
    /// Monte Carlo sessions per block length.
    #[arg(long)]
    trials: Option<usize>,
    /// Typicality slack.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Channel description JSON.
    #[arg(long, value_name = "FILE")]
    channel: Option<PathBuf>,
    /// Law JSON (bare or sidecar).
    #[arg(long, value_name = "FILE")]
    law: Option<PathBuf>,
    /// Witness id when --law points at a sidecar.
    #[arg(long, value_name = "ID")]
    witness: Option<String>,
    /// Block length for the sampling checks.
    #[arg(long)]
    n: Option<usize>,
    /// Typicality slack.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Samples for the probability-window and mass checks.
    #[arg(long)]
    samples: Option<u64>,
    /// Trials for the packing (cross-law) checks.
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct InclusionArgs {
    /// Channel description JSON.
    #[arg(long, value_name = "FILE")]
    channel: Option<PathBuf>,
    /// Random laws sampled per mode.
    #[arg(long)]
    samples: Option<usize>,
    /// Hill-climb refinement iterations.
    #[arg(long)]
    refine: Option<usize>,
    /// Cap on |V| (clamped to the proven bound).
    #[arg(long)]
    vmax: Option<usize>,
    /// Cap on |U| (clamped to the proven bound).
    #[arg(long)]
    umax: Option<usize>,
    /// Containment tolerance in nats.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

// ---------------------------------------------------------------------------
// Config file
// ---------------------------------------------------------------------------

/// Flat JSON map giving defaults for long option names.
struct FileConfig {
    map: serde_json::Map<String, serde_json::Value>,
}

impl FileConfig {
    fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self {
                map: serde_json::Map::new(),
            });
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Domain(format!("config {}: {e}", path.display())))?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Domain(format!("config {}: {e}", path.display())))?;
        match value {
            serde_json::Value::Object(map) => Ok(Self { map }),
            _ => Err(CliError::Domain(format!(
                "config {}: top level must be a JSON object",
                path.display()
            ))),
        }
    }

    fn wrong_type(key: &str, want: &str) -> CliError {
        CliError::Domain(format!("config key {key:?}: expected {want}"))
    }

    fn usize_(&self, key: &str) -> Result<Option<usize>> {
        match self.map.get(key) {
            None => Ok(None),
            Some(v) => v
                .as_u64()
                .map(|x| Some(x as usize))
                .ok_or_else(|| Self::wrong_type(key, "a non-negative integer")),
        }
    }

    fn u64_(&self, key: &str) -> Result<Option<u64>> {
        match self.map.get(key) {
            None => Ok(None),
            Some(v) => v
                .as_u64()
                .map(Some)
                .ok_or_else(|| Self::wrong_type(key, "a non-negative integer")),
        }
    }

    fn f64_(&self, key: &str) -> Result<Option<f64>> {
        match self.map.get(key) {
            None => Ok(None),
            Some(v) => v
                .as_f64()
                .map(Some)
                .ok_or_else(|| Self::wrong_type(key, "a number")),
        }
    }

    fn string(&self, key: &str) -> Result<Option<String>> {
        match self.map.get(key) {
            None => Ok(None),
            Some(v) => v
                .as_str()
                .map(|s| Some(s.to_string()))
                .ok_or_else(|| Self::wrong_type(key, "a string")),
        }
    }

    fn path(&self, key: &str) -> Result<Option<PathBuf>> {
        Ok(self.string(key)?.map(PathBuf::from))
    }

    fn usize_list(&self, key: &str) -> Result<Option<Vec<usize>>> {
        match self.map.get(key) {
            None => Ok(None),
            Some(serde_json::Value::Array(items)) => {
                let mut out = Vec::with_capacity(items.len());
                for item in items {
                    let x = item
                        .as_u64()
                        .ok_or_else(|| Self::wrong_type(key, "an array of integers"))?;
                    out.push(x as usize);
                }
                Ok(Some(out))
            }
            Some(_) => Err(Self::wrong_type(key, "an array of integers")),
        }
    }
}

fn require<T>(value: Option<T>, usage: &str) -> Result<T> {
    value.ok_or_else(|| CliError::Usage(usage.to_string()))
}

fn parse_mode(token: &str) -> Result<CribMode> {
    CribMode::from_token(token)
        .ok_or_else(|| CliError::Usage(format!("mode must be one of {{sc, c}}, got {token:?}")))
}

fn resolve_threads(flag: Option<usize>, cfg: &FileConfig) -> Result<usize> {
    if let Some(t) = flag {
        return Ok(t);
    }
    if let Ok(text) = std::env::var("CRIBMAC_THREADS") {
        return text.trim().parse().map_err(|_| {
            CliError::Domain(format!(
                "CRIBMAC_THREADS must be a non-negative integer, got {text:?}"
            ))
        });
    }
    Ok(cfg.usize_("threads")?.unwrap_or(0))
}

// ---------------------------------------------------------------------------
// Entry points
// ---------------------------------------------------------------------------

/// Full CLI: parse `std::env::args`, run, map errors to exit codes.
pub fn run_main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Domain(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    let cfg = FileConfig::load(cli.config.as_deref())?;
    let verbosity = if cli.quiet {
        0
    } else {
        1 + u32::from(cli.verbose)
    };
    let threads = resolve_threads(cli.threads, &cfg)?;
    match cli.cmd {
        Cmd::Region(a) => run_region(a, &cfg, verbosity),
        Cmd::Simulate(a) => run_simulate(a, &cfg, verbosity, threads),
        Cmd::VerifyTypicality(a) => run_verify(a, &cfg, verbosity),
        Cmd::CheckInclusion(a) => run_inclusion(a, &cfg, verbosity),
    }
}

fn announce_channel(path: &Path, c: &MacChannel, echo: &ChannelFile, verbosity: u32) {
    if verbosity == 0 {
        return;
    }
    println!(
        "loaded channel {}: |X1|={} |X2|={} |S|={} |Y|={}",
        path.display(),
        c.x1().size(),
        c.x2().size(),
        c.s().size(),
        c.y().size()
    );
    println!("canonical form:");
    print!("{}", echo.canonical_json());
}

fn search_options(
    flags_samples: Option<usize>,
    flags_refine: Option<usize>,
    flags_vmax: Option<usize>,
    flags_umax: Option<usize>,
    flags_seed: Option<u64>,
    cfg: &FileConfig,
    channel: &MacChannel,
) -> Result<SearchConfig> {
    let samples = flags_samples
        .or(cfg.usize_("samples")?)
        .unwrap_or(DEFAULT_SAMPLES);
    let refine = flags_refine
        .or(cfg.usize_("refine")?)
        .unwrap_or(DEFAULT_REFINE);
    let seed = flags_seed.or(cfg.u64_("seed")?).unwrap_or(DEFAULT_SEED);
    let vb = v_bound(channel);
    let v_size = flags_vmax.or(cfg.usize_("vmax")?).map(|v| v.clamp(1, vb));
    let v_used = v_size.unwrap_or_else(|| vb.min(DEFAULT_V_CAP));
    let ub = u_bound(channel, v_used);
    let u_size = flags_umax.or(cfg.usize_("umax")?).map(|u| u.clamp(1, ub));
    Ok(SearchConfig {
        samples,
        refine,
        v_size,
        u_size,
        seed,
        starts: Vec::new(),
    })
}

fn run_region(a: RegionArgs, cfg: &FileConfig, verbosity: u32) -> Result<()> {
    let channel_path = require(
        a.channel.or(cfg.path("channel")?),
        "region needs --channel <file>",
    )?;
    let mode = parse_mode(&require(
        a.mode.or(cfg.string("mode")?),
        "region needs --mode <sc|c>",
    )?)?;
    let out = require(a.out.or(cfg.path("out")?), "region needs --out <csv>")?;

    let (channel, echo) = load_channel(&channel_path)?;
    announce_channel(&channel_path, &channel, &echo, verbosity);
    let sc = search_options(a.samples, a.refine, a.vmax, a.umax, a.seed, cfg, &channel)?;

    let region = search_region(&channel, mode, &sc)?;

    let config_line = format!(
        "region mode={} samples={} refine={} vmax={:?} umax={:?} seed={} channel={:016x}",
        mode.token(),
        sc.samples,
        sc.refine,
        sc.v_size,
        sc.u_size,
        sc.seed,
        fnv1a64(echo.canonical_json().as_bytes()),
    );
    let meta = ReportMeta::new(&config_line, sc.seed);
    atomic_write(&out, region_csv(&region, &meta).as_bytes())?;
    let sidecar = a
        .witness_out
        .or(cfg.path("witness_out")?)
        .unwrap_or_else(|| out.with_extension("witness.json"));
    atomic_write(
        &sidecar,
        witness_json(&witness_file(&region, &meta, mode)).as_bytes(),
    )?;

    if verbosity >= 1 {
        println!(
            "{} region: {} boundary points, {} hull vertices, max R1 {:.4} nats, max R2 {:.4} nats",
            mode_name(mode),
            region.points().len(),
            region.hull().len(),
            region.max_r1(),
            region.max_r2()
        );
        if verbosity >= 2 {
            for (p, w) in region.hull().iter().zip(region.hull_witnesses()) {
                println!("  hull vertex ({:.6}, {:.6}) witness w{w}", p.0, p.1);
            }
        }
        println!("wrote {} and {}", out.display(), sidecar.display());
    }
    Ok(())
}

fn mode_name(mode: CribMode) -> &'static str {
    match mode {
        CribMode::StrictlyCausal => "strictly-causal",
        CribMode::Causal => "causal",
    }
}

/// Loads the law file, picks the witness, and rebuilds the law against the
/// channel. Returns the law together with the hash of its JSON form.
fn load_law(
    path: &Path,
    witness: Option<&str>,
    channel: &MacChannel,
) -> Result<(FactorizedLaw, u64)> {
    let doc = load_law_document(path)?;
    let file: &LawFile = doc.select(witness, &path.display().to_string())?;
    let law = file.to_law(channel, &path.display().to_string())?;
    let hash = fnv1a64(
        serde_json::to_string(file)
            .expect("law serializes")
            .as_bytes(),
    );
    Ok((law, hash))
}

fn run_simulate(a: SimulateArgs, cfg: &FileConfig, verbosity: u32, threads: usize) -> Result<()> {
    let channel_path = require(
        a.channel.or(cfg.path("channel")?),
        "simulate needs --channel <file>",
    )?;
    let law_path = require(a.law.or(cfg.path("law")?), "simulate needs --law <file>")?;
    let out = require(a.out.or(cfg.path("out")?), "simulate needs --out <csv>")?;
    let r1 = require(a.r1.or(cfg.f64_("r1")?), "simulate needs --r1 <nats>")?;
    let r2 = require(a.r2.or(cfg.f64_("r2")?), "simulate needs --r2 <nats>")?;

    let (channel, echo) = load_channel(&channel_path)?;
    announce_channel(&channel_path, &channel, &echo, verbosity);
    let witness = a.witness.or(cfg.string("witness")?);
    let (mut law, law_hash) = load_law(&law_path, witness.as_deref(), &channel)?;

    // Mode reconciliation: a strictly-causal law embeds into the causal
    // scheme; a causal law cannot be demoted.
    if let Some(token) = a.mode.or(cfg.string("mode")?) {
        let want = parse_mode(&token)?;
        match (law.mode(), want) {
            (CribMode::StrictlyCausal, CribMode::Causal) => law = law.to_causal(),
            (CribMode::Causal, CribMode::StrictlyCausal) => {
                return Err(CliError::Domain(
                    "law file is causal but --mode sc was requested; a causal law cannot be \
                     simulated strictly causally"
                        .to_string(),
                ));
            }
            _ => {}
        }
    }

    let mut lengths = if a.n.is_empty() {
        cfg.usize_list("n")?.unwrap_or_else(|| vec![200])
    } else {
        a.n
    };
    lengths.sort_unstable();
    lengths.dedup();

    let blocks = a.blocks.or(cfg.usize_("blocks")?).unwrap_or(DEFAULT_BLOCKS);
    let trials = a.trials.or(cfg.usize_("trials")?).unwrap_or(DEFAULT_TRIALS);
    let epsilon = a
        .epsilon
        .or(cfg.f64_("epsilon")?)
        .unwrap_or(DEFAULT_EPSILON);
    let rprime = match a.rprime {
        Some(r) => Some(r),
        None => cfg.f64_("rprime")?,
    };
    let seed = a.seed.or(cfg.u64_("seed")?).unwrap_or(DEFAULT_SEED);

    let mut params = CodeParams::new(lengths[0], blocks, r1, r2, epsilon);
    params.rprime = rprime;
    let sim = SimConfig {
        trials,
        seed,
        threads,
    };

    if verbosity >= 1 {
        println!(
            "simulating {} law (|V|={} |U|={}) at R1={r1} R2={r2} nats, {} blocks, {} trials",
            mode_name(law.mode()),
            law.v_size(),
            law.u_size(),
            blocks,
            trials
        );
    }

    let reports = sweep_n(&channel, &law, &params, &lengths, &sim).map_err(map_budget)?;

    let rprime_text = rprime.map_or_else(|| "auto".to_string(), |r| format!("{r:?}"));
    let n_text = lengths
        .iter()
        .map(|n| n.to_string())
        .collect::<Vec<_>>()
        .join("+");
    let config_line = format!(
        "simulate mode={} r1={r1:?} r2={r2:?} rprime={rprime_text} n={n_text} blocks={blocks} \
         trials={trials} epsilon={epsilon:?} seed={seed} channel={:016x} law={law_hash:016x}",
        law.mode().token(),
        fnv1a64(echo.canonical_json().as_bytes()),
    );
    let meta = ReportMeta::new(&config_line, seed);
    atomic_write(&out, simulate_csv(&reports, &meta).as_bytes())?;

    if verbosity >= 1 {
        for r in &reports {
            println!(
                "n={}: msg_err {:.4} wilson95 [{:.4}, {:.4}] encoder_err {:.4}",
                r.n, r.message_error_rate, r.wilson_lo, r.wilson_hi, r.encoder_error_rate
            );
            if verbosity >= 2 {
                let e = r.events.as_array();
                println!(
                    "  events e0..e5 = {:?}, M1={} M2={} M'={} R'={:.4}, effective rates \
                     ({:.4}, {:.4})",
                    e, r.m1, r.m2, r.mprime, r.rprime, r.effective_r1, r.effective_r2
                );
            }
        }
        println!("wrote {}", out.display());
    }
    Ok(())
}

/// Rewords the codebook-budget error with the flag that lifts it.
fn map_budget(e: crate::coding::CodingError) -> CliError {
    CliError::Domain(e.to_string())
}

// ---------------------------------------------------------------------------
// verify-typicality
// ---------------------------------------------------------------------------

/// One named pass/fail outcome from the typicality battery.
pub struct CheckLine {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn run_verify(a: VerifyArgs, cfg: &FileConfig, verbosity: u32) -> Result<()> {
    let channel_path = require(
        a.channel.or(cfg.path("channel")?),
        "verify-typicality needs --channel <file>",
    )?;
    let law_path = require(
        a.law.or(cfg.path("law")?),
        "verify-typicality needs --law <file>",
    )?;
    let (channel, echo) = load_channel(&channel_path)?;
    announce_channel(&channel_path, &channel, &echo, verbosity);
    let witness = a.witness.or(cfg.string("witness")?);
    let (law, _) = load_law(&law_path, witness.as_deref(), &channel)?;

    let n = a.n.or(cfg.usize_("n")?).unwrap_or(DEFAULT_VERIFY_N);
    let epsilon = a
        .epsilon
        .or(cfg.f64_("epsilon")?)
        .unwrap_or(DEFAULT_EPSILON);
    let samples = a
        .samples
        .or(cfg.u64_("samples")?)
        .unwrap_or(DEFAULT_VERIFY_SAMPLES);
    let trials = a
        .trials
        .or(cfg.u64_("trials")?)
        .unwrap_or(DEFAULT_VERIFY_TRIALS);
    let seed = a.seed.or(cfg.u64_("seed")?).unwrap_or(DEFAULT_SEED);

    let joint = law.assemble_joint(&channel)?;
    let lines = typicality_suite(&joint, n, epsilon, samples, trials, seed)?;

    let mut failed = 0usize;
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
    if failed == 0 {
        println!(
            "verify-typicality: {}/{} bounds hold",
            lines.len(),
            lines.len()
        );
        Ok(())
    } else {
        Err(CliError::Domain(format!(
            "verify-typicality: {failed}/{} bounds failed",
            lines.len()
        )))
    }
}

/// Draws one i.i.d. block of `n` tuples from `joint`; returns one symbol
/// row per variable, in the joint's variable order.
fn sample_joint_rows(joint: &JointLaw, n: usize, rng: &mut impl Rng) -> Vec<Vec<u8>> {
    let sizes: Vec<usize> = joint.variables().iter().map(|a| a.size()).collect();
    let mut cums = Vec::with_capacity(joint.mass().len());
    let mut acc = 0.0;
    for &m in joint.mass() {
        acc += m;
        cums.push(acc);
    }
    let mut rows = vec![Vec::with_capacity(n); sizes.len()];
    for _ in 0..n {
        let u: f64 = rng.gen::<f64>() * acc;
        let mut cell = cums.partition_point(|&c| c <= u);
        if cell >= cums.len() {
            cell = cums.len() - 1;
        }
        for (slot, &size) in sizes.iter().enumerate().rev() {
            rows[slot].push((cell % size) as u8);
            cell /= size;
        }
    }
    rows
}

/// Log product probability of aligned rows under `law` (whose variables are
/// a subset of the full order), with `positions[i]` the row index feeding
/// the law's `i`-th variable.
fn rows_log_probability(law: &JointLaw, rows: &[Vec<u8>], positions: &[usize]) -> f64 {
    let n = rows.first().map(Vec::len).unwrap_or(0);
    let mut tuple = vec![0usize; positions.len()];
    let mut log_prob = 0.0;
    for k in 0..n {
        for (slot, &src) in positions.iter().enumerate() {
            tuple[slot] = rows[src][k] as usize;
        }
        let p = law.prob(&tuple);
        if p <= 0.0 {
            return f64::NEG_INFINITY;
        }
        log_prob += p.ln();
    }
    log_prob
}

/// The strong-typicality statistical battery on one joint law. Returns one
/// pass/fail line per bound.
pub fn typicality_suite(
    joint: &JointLaw,
    n: usize,
    epsilon: f64,
    samples: u64,
    trials: u64,
    seed: u64,
) -> Result<Vec<CheckLine>> {
    let labels: Vec<String> = joint
        .variables()
        .iter()
        .map(|a| a.label().to_string())
        .collect();
    let label_refs: Vec<&str> = labels.iter().map(String::as_str).collect();
    let ctx = TypicalityContext::new(joint.clone(), epsilon, n)?;
    let tester = ctx.tester(&label_refs)?;

    // Sampling pass: typical-mass rate plus the probability windows on
    // every typical sample. Window checks run in log domain because the
    // product probabilities underflow f64 at these block lengths.
    let h_all = joint.entropy();
    let nf = n as f64;
    let full_window = (-nf * (h_all + epsilon), -nf * (h_all - epsilon));
    let rest_labels: Vec<&str> = label_refs.iter().copied().filter(|l| *l != VAR_Y).collect();
    let rest_law = joint.marginalize(&rest_labels)?;
    let rest_positions: Vec<usize> = rest_law
        .variables()
        .iter()
        .map(|a| {
            label_refs
                .iter()
                .position(|l| *l == a.label())
                .expect("subset of labels")
        })
        .collect();
    let h_cond = joint.conditional_entropy(&[VAR_Y], &rest_labels)?;
    let cond_window = (
        -nf * (h_cond + 2.0 * epsilon),
        -nf * (h_cond - 2.0 * epsilon),
    );
    let full_positions: Vec<usize> = (0..labels.len()).collect();

    let mut typical = 0u64;
    let mut window_ok = 0u64;
    let mut cond_ok = 0u64;
    for i in 0..samples {
        let mut rng = seeded_rng(seed, 0x7F1C, i);
        let rows = sample_joint_rows(joint, n, &mut rng);
        let row_refs: Vec<&[u8]> = rows.iter().map(Vec::as_slice).collect();
        if !tester.test_letters(&row_refs)? {
            continue;
        }
        typical += 1;
        let log_full = rows_log_probability(joint, &rows, &full_positions);
        if full_window.0 <= log_full && log_full <= full_window.1 {
            window_ok += 1;
        }
        let log_rest = rows_log_probability(&rest_law, &rows, &rest_positions);
        let log_cond = log_full - log_rest;
        if cond_window.0 <= log_cond && log_cond <= cond_window.1 {
            cond_ok += 1;
        }
    }

    let mut lines = Vec::new();
    lines.push(CheckLine {
        name: "probability-window",
        pass: window_ok == typical,
        detail: format!(
            "{window_ok}/{typical} typical samples inside exp(-n(H +/- eps)), H = {h_all:.4} nats"
        ),
    });
    lines.push(CheckLine {
        name: "conditional-window",
        pass: cond_ok == typical,
        detail: format!(
            "{cond_ok}/{typical} typical samples inside exp(-n(H(Y|rest) +/- 2 eps)), \
             H(Y|rest) = {h_cond:.4} nats"
        ),
    });
    let rate = typical as f64 / samples as f64;
    let wilson = stats::wilson_interval(typical, samples, stats::Z99);
    lines.push(CheckLine {
        name: "typical-mass",
        pass: rate >= 1.0 - epsilon,
        detail: format!(
            "rate {rate:.4} >= {:.4} required (wilson99 [{:.4}, {:.4}], n = {n})",
            1.0 - epsilon,
            wilson.0,
            wilson.1
        ),
    });

    // Counting bound by exhaustive enumeration over the smallest
    // non-degenerate alphabet (a size-1 variable would make the check
    // vacuous).
    let (count_label, count_size) = joint
        .variables()
        .iter()
        .map(|a| (a.label().to_string(), a.size()))
        .min_by_key(|&(_, size)| (size == 1, size))
        .expect("joint has variables");
    let mut n_enum = 0usize;
    let mut total = 1u64;
    while n_enum < 12 && total.saturating_mul(count_size as u64) <= (1 << 20) {
        total *= count_size as u64;
        n_enum += 1;
    }
    let marginal = joint.marginalize(&[&count_label])?;
    let enum_ctx = TypicalityContext::new(marginal, epsilon, n_enum)?;
    let enum_tester = enum_ctx.tester(&[&count_label])?;
    let mut typical_count = 0u64;
    let mut counts = vec![0u64; count_size];
    for idx in 0..total {
        counts.iter_mut().for_each(|c| *c = 0);
        let mut rest = idx;
        for _ in 0..n_enum {
            counts[(rest % count_size as u64) as usize] += 1;
            rest /= count_size as u64;
        }
        if enum_tester.test_counts(&counts) {
            typical_count += 1;
        }
    }
    let (_, upper) = typical_set_size_bounds(&enum_ctx, &[&count_label])?;
    lines.push(CheckLine {
        name: "counting-bound",
        pass: (typical_count as f64) <= upper,
        detail: format!(
            "{typical_count} typical {count_label}-sequences of length {n_enum} <= {upper:.1} \
             allowed"
        ),
    });

    // Packing checks (cross-law typicality) at a short block so the rate is
    // resolvable; the bound is exp(-n [I - eps]).
    let n_pack = n.min(PACKING_N_CAP);
    let pack_ctx = TypicalityContext::new(joint.clone(), epsilon, n_pack)?;
    for (name, x, y, z) in [
        ("packing-U-S", VAR_U, VAR_S, VAR_V),
        ("packing-X1-Y", VAR_X1, VAR_Y, VAR_V),
    ] {
        let report = cross_law_typicality_rate(&pack_ctx, x, y, z, trials, seed)?;
        let mi = joint.mutual_information(&[x], &[y], &[z])?;
        lines.push(CheckLine {
            name,
            pass: report.wilson99.0 <= report.bound,
            detail: format!(
                "rate {:.5} (wilson99 lower {:.5}) vs bound {:.5} at n = {n_pack}, \
                 I({x};{y}|{z}) = {mi:.4} nats",
                report.rate, report.wilson99.0, report.bound
            ),
        });
    }
    Ok(lines)
}

// ---------------------------------------------------------------------------
// check-inclusion
// ---------------------------------------------------------------------------

fn run_inclusion(a: InclusionArgs, cfg: &FileConfig, verbosity: u32) -> Result<()> {
    let channel_path = require(
        a.channel.or(cfg.path("channel")?),
        "check-inclusion needs --channel <file>",
    )?;
    let tol = a.tol.or(cfg.f64_("tol")?).unwrap_or(DEFAULT_TOL);
    if tol < 0.0 {
        return Err(CliError::Usage("--tol must be non-negative".to_string()));
    }
    let (channel, echo) = load_channel(&channel_path)?;
    announce_channel(&channel_path, &channel, &echo, verbosity);
    let sc = search_options(a.samples, a.refine, a.vmax, a.umax, a.seed, cfg, &channel)?;

    let sc_region = search_region(&channel, CribMode::StrictlyCausal, &sc)?;
    let c_region = search_region(&channel, CribMode::Causal, &sc)?;
    if verbosity >= 1 {
        println!(
            "strictly-causal hull: {} vertices, max R1 {:.4}, max R2 {:.4}",
            sc_region.hull().len(),
            sc_region.max_r1(),
            sc_region.max_r2()
        );
        println!(
            "causal hull: {} vertices, max R1 {:.4}, max R2 {:.4}",
            c_region.hull().len(),
            c_region.max_r1(),
            c_region.max_r2()
        );
    }

    let mut outside = 0usize;
    for &p in sc_region.hull() {
        let inside = c_region.contains(p, tol);
        if !inside {
            outside += 1;
        }
        if verbosity >= 2 || !inside {
            let dist = geometry::linf_distance_to_hull(c_region.hull(), p);
            println!(
                "  ({:.6}, {:.6}) {} (distance {:.6} nats)",
                p.0,
                p.1,
                if inside { "inside" } else { "OUTSIDE" },
                dist
            );
        }
    }
    let total = sc_region.hull().len();
    if outside == 0 {
        println!(
            "check-inclusion: {total}/{total} strictly-causal hull vertices inside the causal \
             hull (tol {tol} nats)"
        );
        Ok(())
    } else {
        Err(CliError::Domain(format!(
            "check-inclusion: {outside}/{total} strictly-causal hull vertices fall outside the \
             causal hull (tol {tol} nats)"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn clap_configuration_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn modes_outside_sc_and_c_are_rejected_at_parse_time() {
        let err = Cli::try_parse_from([
            "cribmac",
            "region",
            "--channel",
            "ch.json",
            "--mode",
            "x",
            "--out",
            "o.csv",
        ])
        .unwrap_err();
        let text = err.to_string();
        assert!(
            text.contains("sc") && text.contains('c'),
            "error lists choices: {text}"
        );
    }

    #[test]
    fn missing_required_option_is_a_usage_error() {
        let cli =
            Cli::try_parse_from(["cribmac", "region", "--mode", "sc", "--out", "o.csv"]).unwrap();
        let err = execute(cli).unwrap_err();
        assert!(matches!(err, CliError::Usage(_)), "got {err:?}");
    }

    #[test]
    fn config_file_fills_missing_options_and_flags_win() {
        let cfg = FileConfig {
            map: serde_json::from_str(
                r#"{"samples": 32, "refine": 1, "seed": 99, "vmax": 2, "umax": 3}"#,
            )
            .map(|v: serde_json::Value| match v {
                serde_json::Value::Object(m) => m,
                _ => unreachable!(),
            })
            .unwrap(),
        };
        let c = crate::channel::MacChannel::from_fn(
            crate::probability::Alphabet::new(VAR_X1, 2).unwrap(),
            crate::probability::Alphabet::new("X2", 2).unwrap(),
            crate::probability::Alphabet::new(VAR_S, 2).unwrap(),
            crate::probability::Alphabet::new(VAR_Y, 2).unwrap(),
            vec![0.5, 0.5],
            |x1, _, _, y| if y == x1 { 1.0 } else { 0.0 },
        )
        .unwrap();
        let sc = search_options(Some(64), None, None, None, None, &cfg, &c).unwrap();
        assert_eq!(sc.samples, 64, "flag beats config");
        assert_eq!(sc.refine, 1, "config beats default");
        assert_eq!(sc.seed, 99);
        assert_eq!(sc.v_size, Some(2));
        assert_eq!(sc.u_size, Some(3));
        let sc2 = search_options(None, None, Some(500), None, None, &cfg, &c).unwrap();
        assert_eq!(
            sc2.v_size,
            Some(v_bound(&c)),
            "vmax clamps to the proven bound"
        );
    }

    #[test]
    fn config_type_mismatch_is_reported() {
        let cfg = FileConfig {
            map: serde_json::from_str(r#"{"samples": "many"}"#)
                .map(|v: serde_json::Value| match v {
                    serde_json::Value::Object(m) => m,
                    _ => unreachable!(),
                })
                .unwrap(),
        };
        let err = cfg.usize_("samples").unwrap_err();
        assert!(matches!(err, CliError::Domain(_)));
    }

    #[test]
    fn sampled_rows_match_joint_marginals() {
        let joint = JointLaw::new(
            vec![
                crate::probability::Alphabet::new("A", 2).unwrap(),
                crate::probability::Alphabet::new("B", 3).unwrap(),
            ],
            vec![0.1, 0.2, 0.05, 0.3, 0.15, 0.2],
        )
        .unwrap();
        let mut rng = seeded_rng(5, 0x7F1C, 0);
        let rows = sample_joint_rows(&joint, 60_000, &mut rng);
        assert_eq!(rows.len(), 2);
        let mut freq = [[0.0f64; 3]; 2];
        for k in 0..60_000 {
            freq[rows[0][k] as usize][rows[1][k] as usize] += 1.0 / 60_000.0;
        }
        for a in 0..2 {
            for b in 0..3 {
                let want = joint.prob(&[a, b]);
                assert!(
                    (freq[a][b] - want).abs() < 0.01,
                    "cell ({a},{b}): sampled {} want {want}",
                    freq[a][b]
                );
            }
        }
    }

    #[test]
    fn log_probability_matches_direct_product() {
        let joint = JointLaw::new(
            vec![
                crate::probability::Alphabet::new("A", 2).unwrap(),
                crate::probability::Alphabet::new("B", 2).unwrap(),
            ],
            vec![0.4, 0.1, 0.2, 0.3],
        )
        .unwrap();
        let rows = vec![vec![0u8, 1, 0], vec![1u8, 1, 0]];
        let got = rows_log_probability(&joint, &rows, &[0, 1]);
        let want = (0.1f64 * 0.3 * 0.4).ln();
        assert!((got - want).abs() < 1e-12, "got {got}, want {want}");
    }
}
