//! Capacity-region computation and Monte Carlo simulation for discrete
//! memoryless state-dependent multiple-access channels in which the second
//! encoder both knows the state sequence ahead of time and overhears
//! ("cribs") the first encoder's channel inputs.
//!
//! The crate has two halves:
//!
//! * **Region side** — [`region`] enumerates factorized auxiliary laws,
//!   assembles their joint distributions, evaluates the pentagon of
//!   achievable rate pairs per law, and unions pentagons into a convex
//!   region with witness laws attached to every hull vertex.
//! * **Scheme side** — [`coding`] and [`sim`] run the block-Markov
//!   achievability scheme (superposition codebooks, bin search against the
//!   state, cribbing recovery, backward decoding) on a sampled channel and
//!   estimate error probabilities with confidence intervals.
//!
//! Start from the runnable examples, one per capability:
//!
//! * `compute_region` — search the achievable region of a channel and
//!   export hull vertices with their witness laws.
//! * `simulate_scheme` — run the full encoder/decoder stack at a chosen
//!   rate pair and report per-event error statistics.
//! * `gp_reduction` — specialize to a single-user state channel and
//!   compare the searched region against the known closed form.
//! * `verify_typicality` — exercise the strong-typicality bounds
//!   empirically on a user-supplied law.
//! * `check_inclusion` — test that the strictly-causal region sits inside
//!   the causal region of the same channel, vertex by vertex.
//!
//! Every random quantity in the crate flows from explicit `(seed, stream,
//! index)` triples, so any reported number can be replayed exactly.

pub mod channel;
pub mod cli;
pub mod coding;
pub mod files;
pub mod geometry;
pub mod probability;
pub mod region;
pub mod sim;
pub mod stats;
pub mod typicality;

pub(crate) mod rng;

pub use channel::{ChannelError, MacChannel, SymbolSeq};
pub use coding::{
    generate_codebook, run_session, CodeParams, Codebook, CodingError, EventCounts, Scheme,
    SessionTranscript,
};
pub use files::{
    atomic_write, fnv1a64, load_channel, load_law_document, region_csv, simulate_csv, witness_file,
    witness_json, ChannelFile, FilesError, LawDocument, LawFile, ReportMeta, WitnessFile,
};
pub use probability::{Alphabet, CondPmf, JointLaw, Pmf, ProbError};
pub use region::{
    rate_pentagon, region_contains, search_region, CribMode, FactorizedLaw, RatePentagon,
    RateRegion, RegionError, SearchConfig,
};
pub use sim::{estimate_error, sweep_n, SimConfig, TrialReport};
pub use typicality::{TypicalityContext, TypicalityError};

pub use rng::{seeded_rng, DEFAULT_SEED};
