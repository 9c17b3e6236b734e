//! The block-Markov achievability scheme: superposition codebooks with
//! binning against the state, the overheard-input (crib) decoder at
//! Encoder 2, and backward decoding at the receiver.
//!
//! A session spans `B` blocks of `n` letters and carries `B - 1` message
//! pairs. In block `b` Encoder 1 sends `x1(w1_b, omega0_b)` where
//! `omega0_b = w1_{b-1}` is the previous fresh message (resolution
//! information); Encoder 2, having decoded `omega0_b` from the overheard
//! inputs, picks a `u` codeword from bin `w2_b` that is jointly typical
//! with the upcoming state block, and transmits `x2` drawn letterwise —
//! from `p(x2|s,v,u)` in strictly-causal mode, from `p(x2|v,u,s,x1)` in
//! causal mode. The receiver decodes backward from the last block, testing
//! `(v, x1, u, y)` tuples only.
//!
//! Message sizes are `ceil(exp(n * rate))`; all rates are nats per channel
//! use. Because one of the `B` blocks carries no fresh pair, the effective
//! rates are `ln(M) / n * (B - 1) / B`.

use thiserror::Error;

use crate::channel::{sample_index, ChannelError, MacChannel, SymbolSeq};
use crate::probability::{Alphabet, CondPmf, JointLaw, ProbError};
use crate::region::{CribMode, FactorizedLaw, RegionError, VAR_S, VAR_U, VAR_V, VAR_X1, VAR_Y};
use crate::rng::seeded_rng;
use crate::typicality::{TypicalityContext, TypicalityError, TypicalityTester};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Error)]
pub enum CodingError {
    #[error(transparent)]
    Prob(#[from] ProbError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Region(#[from] RegionError),
    #[error(transparent)]
    Typicality(#[from] TypicalityError),
    #[error("bad code parameters: {0}")]
    BadParams(String),
    #[error(
        "codebook needs {required_bytes:.3e} bytes, over the {budget_bytes} byte budget; \
         lower the rates, the block length, or raise the budget"
    )]
    BudgetExceeded {
        required_bytes: f64,
        budget_bytes: u64,
    },
}

pub type Result<T> = std::result::Result<T, CodingError>;

/// Default codebook memory cap: 2 GiB.
pub const DEFAULT_MEMORY_BUDGET: u64 = 2 * 1024 * 1024 * 1024;

/// Block-coding parameters. Rates are nats per channel use.
#[derive(Debug, Clone)]
pub struct CodeParams {
    /// Letters per block.
    pub n: usize,
    /// Blocks per session (`B >= 2`; `B - 1` message pairs).
    pub blocks: usize,
    /// Encoder 1 message rate.
    pub r1: f64,
    /// Encoder 2 message (bin) rate.
    pub r2: f64,
    /// Bin-refinement rate; `None` resolves to `I(U;S|V) + 3 * epsilon`
    /// on the law in use.
    pub rprime: Option<f64>,
    /// Typicality slack. Encoder-side tests run at `epsilon / 2`, decoder
    /// tests at `epsilon`.
    pub epsilon: f64,
    /// Codebook memory cap in bytes; generation fails fast when the
    /// tables would not fit.
    pub memory_budget: u64,
}

impl CodeParams {
    pub fn new(n: usize, blocks: usize, r1: f64, r2: f64, epsilon: f64) -> Self {
        Self {
            n,
            blocks,
            r1,
            r2,
            rprime: None,
            epsilon,
            memory_budget: DEFAULT_MEMORY_BUDGET,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(CodingError::BadParams(
                "block length must be positive".into(),
            ));
        }
        if self.blocks < 2 {
            return Err(CodingError::BadParams(
                "a session needs at least 2 blocks".into(),
            ));
        }
        for (name, r) in [("r1", self.r1), ("r2", self.r2)] {
            if !(r >= 0.0) || !r.is_finite() {
                return Err(CodingError::BadParams(format!(
                    "{name} must be a finite nonnegative rate, got {r}"
                )));
            }
        }
        if let Some(rp) = self.rprime {
            if !(rp >= 0.0) || !rp.is_finite() {
                return Err(CodingError::BadParams(format!(
                    "rprime must be a finite nonnegative rate, got {rp}"
                )));
            }
        }
        if !(self.epsilon > 0.0) {
            return Err(CodingError::BadParams(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Per-session counts of the attributable error events, by block:
/// `e0` source tuple atypical, `e1` crib decode wrong, `e2` bin covering
/// failed, `e3` received tuple atypical, `e4` wrong resolution index at
/// the receiver, `e5` wrong fresh `w2` at the receiver.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EventCounts {
    pub e0: u64,
    pub e1: u64,
    pub e2: u64,
    pub e3: u64,
    pub e4: u64,
    pub e5: u64,
}

impl EventCounts {
    pub fn merge(&mut self, other: &EventCounts) {
        self.e0 += other.e0;
        self.e1 += other.e1;
        self.e2 += other.e2;
        self.e3 += other.e3;
        self.e4 += other.e4;
        self.e5 += other.e5;
    }

    pub fn total(&self) -> u64 {
        self.e0 + self.e1 + self.e2 + self.e3 + self.e4 + self.e5
    }

    pub fn as_array(&self) -> [u64; 6] {
        [self.e0, self.e1, self.e2, self.e3, self.e4, self.e5]
    }
}

/// The random codebooks of one session: `v` indexed by the resolution
/// message, `x1` by (fresh, resolution), `u` by (bin, refinement,
/// resolution). Symbols are stored flat, one byte per letter.
#[derive(Debug, Clone)]
pub struct Codebook {
    n: usize,
    m1: usize,
    m2: usize,
    mprime: usize,
    v: Vec<u8>,
    x1: Vec<u8>,
    u: Vec<u8>,
}

impl Codebook {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m1(&self) -> usize {
        self.m1
    }

    pub fn m2(&self) -> usize {
        self.m2
    }

    pub fn mprime(&self) -> usize {
        self.mprime
    }

    /// Cooperation codeword for resolution index `w0`.
    pub fn v_word(&self, w0: usize) -> &[u8] {
        &self.v[w0 * self.n..(w0 + 1) * self.n]
    }

    /// Encoder 1 codeword for fresh message `i` and resolution index `w0`.
    pub fn x1_word(&self, i: usize, w0: usize) -> &[u8] {
        let at = (i * self.m1 + w0) * self.n;
        &self.x1[at..at + self.n]
    }

    /// Binned codeword for bin `j`, refinement `jj`, resolution `w0`.
    pub fn u_word(&self, j: usize, jj: usize, w0: usize) -> &[u8] {
        let at = ((j * self.mprime + jj) * self.m1 + w0) * self.n;
        &self.u[at..at + self.n]
    }
}

/// What one block of a session did, with full sequences for audits.
#[derive(Debug, Clone)]
pub struct BlockRecord {
    /// Fresh Encoder 1 message sent this block (0 in the last block).
    pub w1: usize,
    /// Fresh Encoder 2 message sent this block (0 in the last block).
    pub w2: usize,
    /// True resolution index (previous block's `w1`; 0 in block 0).
    pub omega0: usize,
    /// Encoder 2's running estimate of the resolution index.
    pub omega0_est: usize,
    /// Bin refinement index the encoder settled on.
    pub jj0: usize,
    /// Covering failure flag from the bin search (event `e2`).
    pub encoder_error: bool,
    /// Encoder 2's crib decode of this block's fresh `w1`.
    pub crib_decoded: usize,
    pub states: SymbolSeq,
    pub x1: SymbolSeq,
    pub x2: SymbolSeq,
    pub y: SymbolSeq,
    /// Source tuple `(v, s, x1)` failed the `epsilon/2` test (event `e0`).
    pub source_atypical: bool,
    /// Transmitted tuple `(v, u, x1, y)` failed the receiver-side test
    /// (event `e3`).
    pub channel_atypical: bool,
}

/// Everything one simulated session produced.
#[derive(Debug, Clone)]
pub struct SessionTranscript {
    pub m1: usize,
    pub m2: usize,
    pub mprime: usize,
    /// Bin-refinement rate actually used (after defaulting).
    pub rprime: f64,
    pub blocks: Vec<BlockRecord>,
    /// The `B - 1` transmitted message pairs.
    pub messages: Vec<(usize, usize)>,
    /// The receiver's `B - 1` decoded pairs.
    pub decoded: Vec<(usize, usize)>,
    /// Receiver's resolution index per block (block 0 is fixed).
    pub omega0_decoded: Vec<usize>,
    pub message_error: bool,
    pub events: EventCounts,
    /// `ln(M1) / n * (B-1) / B`.
    pub effective_r1: f64,
    /// `ln(M2) / n * (B-1) / B`.
    pub effective_r2: f64,
}

/// Result of the backward pass: decoded resolution index per block and the
/// `B - 1` decoded message pairs.
#[derive(Debug, Clone)]
pub struct DecodePath {
    pub omega0: Vec<usize>,
    pub pairs: Vec<(usize, usize)>,
}

/// A channel, a law and code parameters bound together: message counts
/// resolved, samplers and typicality testers precompiled.
#[derive(Debug, Clone)]
pub struct Scheme {
    channel: MacChannel,
    law: FactorizedLaw,
    params: CodeParams,
    m1: usize,
    m2: usize,
    mprime: usize,
    rprime: f64,
    /// `p(v)` cells.
    p_v: Vec<f64>,
    /// `p(x1|v)` rows, indexed by `v`.
    x1_rows: Vec<Vec<f64>>,
    /// `p(u|v) = sum_s p(s) p(u|s,v)` rows, indexed by `v` — the codeword
    /// marginal for the binned layer.
    u_rows: Vec<Vec<f64>>,
    /// `p(x2|s,v,u)` for strictly-causal letter sampling.
    x2_sc: Option<CondPmf>,
    /// `(v, s, u)` at `epsilon/2`: the bin search test.
    enc_tester: TypicalityTester,
    /// `(v, s, x1)` at `epsilon/2`: source atypicality, event `e0`.
    source_tester: TypicalityTester,
    /// `(v, x1_candidate, x1_observed)` at `epsilon`: the crib test.
    crib_tester: TypicalityTester,
    /// `(v, u, x1, y)` at `epsilon`: the receiver test.
    rx_tester: TypicalityTester,
}

fn message_count(n: usize, rate: f64) -> f64 {
    (n as f64 * rate).exp().ceil()
}

impl Scheme {
    pub fn new(c: &MacChannel, f: &FactorizedLaw, p: &CodeParams) -> Result<Self> {
        p.validate()?;
        let joint = f.assemble_joint(c)?;
        let penalty = joint.mutual_information(&[VAR_U], &[VAR_S], &[VAR_V])?;
        let rprime = p.rprime.unwrap_or(penalty + 3.0 * p.epsilon);

        // Message counts and the memory gate, all in floating point so
        // infeasible rates report their true size instead of overflowing.
        let n = p.n as f64;
        let m1f = message_count(p.n, p.r1);
        let m2f = message_count(p.n, p.r2);
        let mprimef = message_count(p.n, rprime);
        let required = m1f * n + m1f * m1f * n + m2f * mprimef * m1f * n;
        if !(required <= p.memory_budget as f64) {
            return Err(CodingError::BudgetExceeded {
                required_bytes: required,
                budget_bytes: p.memory_budget,
            });
        }
        let (m1, m2, mprime) = (m1f as usize, m2f as usize, mprimef as usize);

        let p_v = f.p_v().mass().to_vec();
        let x1_rows: Vec<Vec<f64>> = (0..f.v_size())
            .map(|v| f.p_x1_given_v().row(&[v]).to_vec())
            .collect();
        let u_given_sv = f.u_given_sv();
        let u_rows: Vec<Vec<f64>> = (0..f.v_size())
            .map(|v| {
                (0..f.u_size())
                    .map(|u| {
                        (0..f.s_size())
                            .map(|s| c.state().prob(s) * u_given_sv.prob(&[s, v], u))
                            .sum()
                    })
                    .collect()
            })
            .collect();
        let x2_sc = match f.mode() {
            CribMode::StrictlyCausal => Some(f.x2_given_svu()),
            CribMode::Causal => None,
        };

        let half = p.epsilon / 2.0;
        let enc_ctx =
            TypicalityContext::new(joint.marginalize(&[VAR_V, VAR_S, VAR_U])?, half, p.n)?;
        let enc_tester = enc_ctx.tester(&[VAR_V, VAR_S, VAR_U])?;
        let src_ctx =
            TypicalityContext::new(joint.marginalize(&[VAR_V, VAR_S, VAR_X1])?, half, p.n)?;
        let source_tester = src_ctx.tester(&[VAR_V, VAR_S, VAR_X1])?;
        let rx_ctx = TypicalityContext::new(
            joint.marginalize(&[VAR_V, VAR_U, VAR_X1, VAR_Y])?,
            p.epsilon,
            p.n,
        )?;
        let rx_tester = rx_ctx.tester(&[VAR_V, VAR_U, VAR_X1, VAR_Y])?;

        // The crib reference law: (V, X1, X1') with X1' a noiseless copy.
        let v_alpha = Alphabet::new(VAR_V, f.v_size())?;
        let x1_alpha = Alphabet::new(VAR_X1, f.x1_size())?;
        let copy_alpha = Alphabet::new("X1copy", f.x1_size())?;
        let crib_joint = JointLaw::from_fn(vec![v_alpha, x1_alpha, copy_alpha], |t| {
            if t[2] == t[1] {
                f.p_v().prob(t[0]) * f.p_x1_given_v().prob(&[t[0]], t[1])
            } else {
                0.0
            }
        })?;
        let crib_ctx = TypicalityContext::new(crib_joint, p.epsilon, p.n)?;
        let crib_tester = crib_ctx.tester(&[VAR_V, VAR_X1, "X1copy"])?;

        Ok(Self {
            channel: c.clone(),
            law: f.clone(),
            params: p.clone(),
            m1,
            m2,
            mprime,
            rprime,
            p_v,
            x1_rows,
            u_rows,
            x2_sc,
            enc_tester,
            source_tester,
            crib_tester,
            rx_tester,
        })
    }

    pub fn m1(&self) -> usize {
        self.m1
    }

    pub fn m2(&self) -> usize {
        self.m2
    }

    pub fn mprime(&self) -> usize {
        self.mprime
    }

    /// The bin-refinement rate in effect (explicit or defaulted).
    pub fn rprime(&self) -> f64 {
        self.rprime
    }

    pub fn params(&self) -> &CodeParams {
        &self.params
    }

    /// Draws the three codeword tables from per-table streams of `seed`.
    pub fn generate_codebook(&self, seed: u64) -> Codebook {
        let n = self.params.n;
        let mut v = vec![0u8; self.m1 * n];
        let mut rng = seeded_rng(seed, 0xCB00, 0);
        for letter in v.iter_mut() {
            *letter = sample_index(&self.p_v, &mut rng) as u8;
        }
        let mut x1 = vec![0u8; self.m1 * self.m1 * n];
        let mut rng = seeded_rng(seed, 0xCB00, 1);
        for i in 0..self.m1 {
            for w0 in 0..self.m1 {
                let at = (i * self.m1 + w0) * n;
                for k in 0..n {
                    let vv = v[w0 * n + k] as usize;
                    x1[at + k] = sample_index(&self.x1_rows[vv], &mut rng) as u8;
                }
            }
        }
        let mut u = vec![0u8; self.m2 * self.mprime * self.m1 * n];
        let mut rng = seeded_rng(seed, 0xCB00, 2);
        for j in 0..self.m2 {
            for jj in 0..self.mprime {
                for w0 in 0..self.m1 {
                    let at = ((j * self.mprime + jj) * self.m1 + w0) * n;
                    for k in 0..n {
                        let vv = v[w0 * n + k] as usize;
                        u[at + k] = sample_index(&self.u_rows[vv], &mut rng) as u8;
                    }
                }
            }
        }
        Codebook {
            n,
            m1: self.m1,
            m2: self.m2,
            mprime: self.mprime,
            v,
            x1,
            u,
        }
    }

    /// Encoder 2's bin search: the lowest refinement index `jj` whose
    /// codeword in bin `w2` is jointly typical (at `epsilon/2`) with the
    /// cooperation word and the state block. Returns `(0, true)` when no
    /// index works — including when the state block itself is atypical,
    /// which rules out every candidate.
    pub fn gp_bin_search(
        &self,
        cb: &Codebook,
        w2: usize,
        omega0_est: usize,
        states: &SymbolSeq,
    ) -> Result<(usize, bool)> {
        let v_word = cb.v_word(omega0_est);
        for jj in 0..self.mprime {
            let u_word = cb.u_word(w2, jj, omega0_est);
            if self
                .enc_tester
                .test_letters(&[v_word, states.symbols(), u_word])?
            {
                return Ok((jj, false));
            }
        }
        Ok((0, true))
    }

    /// Letterwise `x2` sampler. Strictly-causal laws draw from
    /// `p(x2|s,v,u)` and must be called with `x1 = None`: the signature is
    /// the structural guarantee that the current `x1` letter is never
    /// read. Causal laws require the observed `x1` block.
    pub fn make_x2(
        &self,
        v_word: &[u8],
        u_word: &[u8],
        states: &SymbolSeq,
        x1: Option<&[u8]>,
        rng: &mut ChaCha8Rng,
    ) -> Result<SymbolSeq> {
        let n = self.params.n;
        let mut letters = Vec::with_capacity(n);
        match (self.law.mode(), x1) {
            (CribMode::StrictlyCausal, Some(_)) => {
                return Err(CodingError::BadParams(
                    "strictly-causal encoder must not see the current x1 block".into(),
                ));
            }
            (CribMode::StrictlyCausal, None) => {
                let sampler = self.x2_sc.as_ref().expect("sc scheme has an sc sampler");
                for k in 0..n {
                    let row = sampler.row(&[
                        states.symbols()[k] as usize,
                        v_word[k] as usize,
                        u_word[k] as usize,
                    ]);
                    letters.push(sample_index(row, rng) as u8);
                }
            }
            (CribMode::Causal, None) => {
                return Err(CodingError::BadParams(
                    "causal encoder needs the observed x1 block".into(),
                ));
            }
            (CribMode::Causal, Some(x1)) => {
                let (_, p_x2) = self.law.causal_factors().expect("causal scheme");
                for k in 0..n {
                    let row = p_x2.row(&[
                        v_word[k] as usize,
                        u_word[k] as usize,
                        states.symbols()[k] as usize,
                        x1[k] as usize,
                    ]);
                    letters.push(sample_index(row, rng) as u8);
                }
            }
        }
        Ok(SymbolSeq::new(self.channel.x2().clone(), letters)?)
    }

    /// Encoder 2's crib decoder: the fresh index whose codeword is jointly
    /// typical with the cooperation word and the overheard block. Zero or
    /// multiple matches fall back to a uniformly random index from the
    /// session generator.
    pub fn crib_decode(
        &self,
        cb: &Codebook,
        omega0_est: usize,
        x1_observed: &[u8],
        rng: &mut ChaCha8Rng,
    ) -> Result<usize> {
        let v_word = cb.v_word(omega0_est);
        let mut found: Option<usize> = None;
        for cand in 0..self.m1 {
            let word = cb.x1_word(cand, omega0_est);
            if self
                .crib_tester
                .test_letters(&[v_word, word, x1_observed])?
            {
                if found.is_some() {
                    found = None;
                    break; // ambiguous: two matches already
                }
                found = Some(cand);
            }
        }
        Ok(found.unwrap_or_else(|| rng.gen_range(0..self.m1)))
    }

    /// Backward decoding over a whole session's outputs. Block `B-1`
    /// carries the fixed pair and reveals its resolution index; every
    /// earlier block is decoded jointly over (resolution, fresh bin) with
    /// the already-known fresh index of Encoder 1. Ambiguity or no match
    /// falls back to uniformly random indices.
    pub fn backward_decode(
        &self,
        cb: &Codebook,
        ys: &[SymbolSeq],
        rng: &mut ChaCha8Rng,
    ) -> Result<DecodePath> {
        let b_total = self.params.blocks;
        if ys.len() != b_total {
            return Err(CodingError::BadParams(format!(
                "got {} output blocks for a {}-block session",
                ys.len(),
                b_total
            )));
        }
        let mut omega0 = vec![0usize; b_total];
        let mut w2_dec = vec![0usize; b_total];

        // Last block: fixed messages (0, 0); recover its resolution index.
        {
            let y = ys[b_total - 1].symbols();
            let mut found: Option<usize> = None;
            'scan: for w0 in 0..self.m1 {
                let v_word = cb.v_word(w0);
                let x1_word = cb.x1_word(0, w0);
                for jj in 0..self.mprime {
                    let u_word = cb.u_word(0, jj, w0);
                    if self.rx_tester.test_letters(&[v_word, u_word, x1_word, y])? {
                        if found.is_some() {
                            found = None;
                            break 'scan;
                        }
                        found = Some(w0);
                        break; // any refinement index suffices for this w0
                    }
                }
            }
            omega0[b_total - 1] = found.unwrap_or_else(|| rng.gen_range(0..self.m1));
        }

        // Middle blocks, backward: fresh x1 index known from the block
        // after; decode (resolution, fresh bin) jointly.
        for b in (1..b_total - 1).rev() {
            let w1_known = omega0[b + 1];
            let y = ys[b].symbols();
            let mut found: Option<(usize, usize)> = None;
            'scan_mid: for w0 in 0..self.m1 {
                let v_word = cb.v_word(w0);
                let x1_word = cb.x1_word(w1_known, w0);
                for j in 0..self.m2 {
                    for jj in 0..self.mprime {
                        let u_word = cb.u_word(j, jj, w0);
                        if self.rx_tester.test_letters(&[v_word, u_word, x1_word, y])? {
                            if found.is_some() {
                                found = None;
                                break 'scan_mid;
                            }
                            found = Some((w0, j));
                            break; // next (w0, j) pair
                        }
                    }
                }
            }
            let (w0, j) =
                found.unwrap_or_else(|| (rng.gen_range(0..self.m1), rng.gen_range(0..self.m2)));
            omega0[b] = w0;
            w2_dec[b] = j;
        }

        // First block: resolution index is fixed to 0 by convention; only
        // the fresh bin remains (unless it is also the last block).
        if b_total >= 2 {
            let w1_known = omega0[1];
            let y = ys[0].symbols();
            let v_word = cb.v_word(0);
            let x1_word = cb.x1_word(w1_known, 0);
            let mut found: Option<usize> = None;
            'scan_first: for j in 0..self.m2 {
                for jj in 0..self.mprime {
                    let u_word = cb.u_word(j, jj, 0);
                    if self.rx_tester.test_letters(&[v_word, u_word, x1_word, y])? {
                        if found.is_some() {
                            found = None;
                            break 'scan_first;
                        }
                        found = Some(j);
                        break;
                    }
                }
            }
            w2_dec[0] = found.unwrap_or_else(|| rng.gen_range(0..self.m2));
        }

        let pairs: Vec<(usize, usize)> = (0..b_total - 1)
            .map(|b| (omega0[b + 1], w2_dec[b]))
            .collect();
        Ok(DecodePath { omega0, pairs })
    }

    /// Runs one full session with the given codebook: encodes `B - 1`
    /// message pairs, simulates both encoders and the channel block by
    /// block, then backward-decodes and attributes error events.
    pub fn run_session_with(
        &self,
        cb: &Codebook,
        messages: &[(usize, usize)],
        seed: u64,
    ) -> Result<SessionTranscript> {
        let b_total = self.params.blocks;
        let n = self.params.n;
        if messages.len() != b_total - 1 {
            return Err(CodingError::BadParams(format!(
                "got {} message pairs for a {}-block session (want {})",
                messages.len(),
                b_total,
                b_total - 1
            )));
        }
        for (b, &(w1, w2)) in messages.iter().enumerate() {
            if w1 >= self.m1 || w2 >= self.m2 {
                return Err(CodingError::BadParams(format!(
                    "message pair ({w1}, {w2}) in block {b} out of range ({}, {})",
                    self.m1, self.m2
                )));
            }
        }
        let mut rng = seeded_rng(seed, 0x5E55, 0);
        let mut blocks: Vec<BlockRecord> = Vec::with_capacity(b_total);
        let mut events = EventCounts::default();
        let mut omega0_est = 0usize; // Encoder 2's running estimate
        let x1_alpha = self.channel.x1().clone();

        for b in 0..b_total {
            let (w1, w2) = if b < b_total - 1 { messages[b] } else { (0, 0) };
            let omega0 = if b == 0 { 0 } else { messages[b - 1].0 };

            let states = self.channel.sample_states(n, &mut rng);
            let (jj0, encoder_error) = self.gp_bin_search(cb, w2, omega0_est, &states)?;
            if encoder_error {
                events.e2 += 1;
            }
            let v_est = cb.v_word(omega0_est);
            let u_word = cb.u_word(w2, jj0, omega0_est);
            let x1_letters = cb.x1_word(w1, omega0);
            let x1_seq = SymbolSeq::new(x1_alpha.clone(), x1_letters.to_vec())?;
            let x2_seq = match self.law.mode() {
                CribMode::StrictlyCausal => self.make_x2(v_est, u_word, &states, None, &mut rng)?,
                CribMode::Causal => {
                    self.make_x2(v_est, u_word, &states, Some(x1_letters), &mut rng)?
                }
            };
            let y = self.channel.transmit(&x1_seq, &x2_seq, &states, &mut rng)?;

            // Event attribution against the true transmitted tuple.
            let v_true = cb.v_word(omega0);
            let source_atypical =
                !self
                    .source_tester
                    .test_letters(&[v_true, states.symbols(), x1_letters])?;
            if source_atypical {
                events.e0 += 1;
            }
            let channel_atypical =
                !self
                    .rx_tester
                    .test_letters(&[v_true, u_word, x1_letters, y.symbols()])?;
            if channel_atypical {
                events.e3 += 1;
            }

            let crib_decoded = self.crib_decode(cb, omega0_est, x1_letters, &mut rng)?;
            if crib_decoded != w1 {
                events.e1 += 1;
            }

            blocks.push(BlockRecord {
                w1,
                w2,
                omega0,
                omega0_est,
                jj0,
                encoder_error,
                crib_decoded,
                states,
                x1: x1_seq,
                x2: x2_seq,
                y,
                source_atypical,
                channel_atypical,
            });
            omega0_est = crib_decoded;
        }

        let ys: Vec<SymbolSeq> = blocks.iter().map(|b| b.y.clone()).collect();
        let path = self.backward_decode(cb, &ys, &mut rng)?;
        for b in 1..b_total {
            if path.omega0[b] != blocks[b].omega0 {
                events.e4 += 1;
            }
        }
        for b in 0..b_total - 1 {
            if path.pairs[b].1 != messages[b].1 {
                events.e5 += 1;
            }
        }
        let message_error = path.pairs != messages;

        let scale = (b_total as f64 - 1.0) / b_total as f64;
        Ok(SessionTranscript {
            m1: self.m1,
            m2: self.m2,
            mprime: self.mprime,
            rprime: self.rprime,
            blocks,
            messages: messages.to_vec(),
            decoded: path.pairs,
            omega0_decoded: path.omega0,
            message_error,
            events,
            effective_r1: (self.m1 as f64).ln() / n as f64 * scale,
            effective_r2: (self.m2 as f64).ln() / n as f64 * scale,
        })
    }
}

/// Generates a codebook for `(channel, law, params)` in one call.
pub fn generate_codebook(
    c: &MacChannel,
    f: &FactorizedLaw,
    p: &CodeParams,
    seed: u64,
) -> Result<Codebook> {
    Ok(Scheme::new(c, f, p)?.generate_codebook(seed))
}

/// Runs one session end to end: a fresh codebook from `seed`'s codebook
/// stream, then encoding, transmission and backward decoding. Error
/// probabilities quoted by the simulator average over codebooks, matching
/// the random-coding argument.
pub fn run_session(
    c: &MacChannel,
    f: &FactorizedLaw,
    p: &CodeParams,
    messages: &[(usize, usize)],
    seed: u64,
) -> Result<SessionTranscript> {
    let scheme = Scheme::new(c, f, p)?;
    let cb = scheme.generate_codebook(seed);
    scheme.run_session_with(&cb, messages, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probability::Pmf;
    use crate::region::VAR_X2 as X2L;
    use approx::assert_abs_diff_eq;

    fn alphabet(label: &str, size: usize) -> Alphabet {
        Alphabet::new(label, size).unwrap()
    }

    /// Noiseless reveal channel: Y = (X1, X2), binary uniform state
    /// ignored by the output.
    fn reveal_channel() -> MacChannel {
        MacChannel::from_fn(
            alphabet(VAR_X1, 2),
            alphabet(X2L, 2),
            alphabet(VAR_S, 2),
            alphabet(VAR_Y, 4),
            vec![0.5, 0.5],
            |x1, x2, _s, y| if y == 2 * x1 + x2 { 1.0 } else { 0.0 },
        )
        .unwrap()
    }

    /// Strictly-causal law: trivial V, uniform X1, uniform U independent
    /// of S, X2 = U.
    fn uniform_relay_law() -> FactorizedLaw {
        let v = alphabet(VAR_V, 1);
        let s = alphabet(VAR_S, 2);
        let p_v = Pmf::point_mass(v.clone(), 0);
        let p_x1 = CondPmf::from_fn(vec![v.clone()], alphabet(VAR_X1, 2), |_, _| 0.5).unwrap();
        let p_ux2 = CondPmf::from_fn(vec![s, v], alphabet("UX2", 4), |_, t| {
            if t % 2 == t / 2 {
                0.5
            } else {
                0.0
            }
        })
        .unwrap();
        FactorizedLaw::strictly_causal(2, 2, p_v, p_x1, p_ux2).unwrap()
    }

    /// Strictly-causal law whose U codeword is forced to equal the state
    /// (maximal covering penalty), X2 uniform.
    fn state_copy_law() -> FactorizedLaw {
        let v = alphabet(VAR_V, 1);
        let s = alphabet(VAR_S, 2);
        let p_v = Pmf::point_mass(v.clone(), 0);
        let p_x1 = CondPmf::from_fn(vec![v.clone()], alphabet(VAR_X1, 2), |_, _| 0.5).unwrap();
        let p_ux2 = CondPmf::from_fn(vec![s, v], alphabet("UX2", 4), |g, t| {
            let (u, _x2) = (t / 2, t % 2);
            if u == g[0] {
                0.5
            } else {
                0.0
            }
        })
        .unwrap();
        FactorizedLaw::strictly_causal(2, 2, p_v, p_x1, p_ux2).unwrap()
    }

    /// Causal relay law: trivial V and U, X2 copies the current X1.
    fn causal_copy_law() -> FactorizedLaw {
        let v = alphabet(VAR_V, 1);
        let s = alphabet(VAR_S, 2);
        let u = alphabet(VAR_U, 1);
        let x1 = alphabet(VAR_X1, 2);
        let p_v = Pmf::point_mass(v.clone(), 0);
        let p_x1 = CondPmf::from_fn(vec![v.clone()], x1.clone(), |_, _| 0.5).unwrap();
        let p_u = CondPmf::from_fn(vec![s.clone(), v.clone()], u.clone(), |_, _| 1.0).unwrap();
        let p_x2 = CondPmf::from_fn(vec![v, u, s, x1], alphabet(X2L, 2), |g, x2| {
            if x2 == g[3] {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        FactorizedLaw::causal(p_v, p_x1, p_u, p_x2).unwrap()
    }

    fn random_messages(m1: usize, m2: usize, count: usize, seed: u64) -> Vec<(usize, usize)> {
        let mut rng = seeded_rng(seed, 0xAAAA, 0);
        (0..count)
            .map(|_| (rng.gen_range(0..m1), rng.gen_range(0..m2)))
            .collect()
    }

    #[test]
    fn both_layers_decode_exactly_on_the_reveal_channel() {
        let c = reveal_channel();
        let f = uniform_relay_law();
        let mut p = CodeParams::new(2000, 3, 0.002, 0.002, 0.85);
        p.rprime = Some(0.0);
        let scheme = Scheme::new(&c, &f, &p).unwrap();
        assert_eq!(scheme.m1(), 55, "ceil(e^4) codewords");
        assert_eq!(scheme.m2(), 55);
        assert_eq!(scheme.mprime(), 1);
        for trial in 0..5u64 {
            let msgs = random_messages(scheme.m1(), scheme.m2(), 2, 100 + trial);
            let t = run_session(&c, &f, &p, &msgs, 9000 + trial).unwrap();
            assert_eq!(t.decoded, msgs, "trial {trial} decoded wrong messages");
            assert!(!t.message_error);
            assert_eq!(t.events.e1, 0, "crib failed in trial {trial}");
            assert_eq!(t.events.e2, 0, "covering failed in trial {trial}");
            assert_eq!(
                t.events.e4 + t.events.e5,
                0,
                "receiver failed in trial {trial}"
            );
            assert_eq!(t.blocks.len(), 3);
            assert_eq!(t.blocks[2].w1, 0, "last block carries the fixed pair");
            assert_eq!(t.blocks[1].omega0, msgs[0].0, "block-to-block chaining");
        }
    }

    #[test]
    fn causal_relay_decodes_and_exercises_x1_conditioning() {
        let c = reveal_channel();
        let f = causal_copy_law();
        let mut p = CodeParams::new(1000, 3, 0.004, 0.0, 0.6);
        p.rprime = Some(0.0);
        let scheme = Scheme::new(&c, &f, &p).unwrap();
        assert_eq!(scheme.m1(), 55);
        assert_eq!(scheme.m2(), 1);
        for trial in 0..3u64 {
            let msgs = random_messages(scheme.m1(), 1, 2, 300 + trial);
            let t = run_session(&c, &f, &p, &msgs, 700 + trial).unwrap();
            assert_eq!(t.decoded, msgs, "trial {trial}");
            assert_eq!(t.events.e1 + t.events.e4 + t.events.e5, 0);
            for b in &t.blocks {
                assert_eq!(
                    b.x2.symbols(),
                    b.x1.symbols(),
                    "causal copy law must relay x1 exactly"
                );
            }
        }
    }

    #[test]
    fn effective_rates_follow_the_block_accounting() {
        let c = reveal_channel();
        let f = uniform_relay_law();
        let mut p = CodeParams::new(400, 5, 0.004, 0.002, 0.9);
        p.rprime = Some(0.0);
        let scheme = Scheme::new(&c, &f, &p).unwrap();
        let msgs = random_messages(scheme.m1(), scheme.m2(), 4, 1);
        let t = run_session(&c, &f, &p, &msgs, 2).unwrap();
        assert_abs_diff_eq!(
            t.effective_r1,
            (t.m1 as f64).ln() / 400.0 * 0.8,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            t.effective_r2,
            (t.m2 as f64).ln() / 400.0 * 0.8,
            epsilon = 1e-15
        );
    }

    #[test]
    fn deterministic_x1_words_collide_and_fall_back() {
        // X1 is a point mass given V, so every codeword is identical and
        // the crib decoder must resolve by random fallback; with m1 = 3
        // most sessions carry at least one crib error.
        let c = reveal_channel();
        let v = alphabet(VAR_V, 1);
        let s = alphabet(VAR_S, 2);
        let p_v = Pmf::point_mass(v.clone(), 0);
        let p_x1 = CondPmf::from_fn(vec![v.clone()], alphabet(VAR_X1, 2), |_, x1| {
            if x1 == 0 {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        let p_ux2 = CondPmf::from_fn(vec![s, v], alphabet("UX2", 4), |_, t| {
            if t % 2 == t / 2 {
                0.5
            } else {
                0.0
            }
        })
        .unwrap();
        let f = FactorizedLaw::strictly_causal(2, 2, p_v, p_x1, p_ux2).unwrap();
        let mut p = CodeParams::new(300, 3, 0.004, 0.0, 0.8);
        p.rprime = Some(0.0);
        let scheme = Scheme::new(&c, &f, &p).unwrap();
        assert_eq!(scheme.m1(), 4, "ceil(e^1.2)");
        let mut crib_errors = 0u64;
        for trial in 0..30u64 {
            let msgs = random_messages(scheme.m1(), 1, 2, 40 + trial);
            let t = run_session(&c, &f, &p, &msgs, 50 + trial).unwrap();
            crib_errors += t.events.e1;
        }
        assert!(
            crib_errors > 20,
            "identical codewords should force frequent fallback, saw {crib_errors}"
        );
    }

    #[test]
    fn covering_fails_when_bins_cannot_track_the_state() {
        // U must equal S under the law, but with rprime = 0 each bin holds
        // one state-independent codeword: the bin search almost always
        // flags a covering failure.
        let c = reveal_channel();
        let f = state_copy_law();
        let mut p = CodeParams::new(200, 4, 0.0, 0.0, 0.8);
        p.rprime = Some(0.0);
        let scheme = Scheme::new(&c, &f, &p).unwrap();
        assert_eq!((scheme.m1(), scheme.m2(), scheme.mprime()), (1, 1, 1));
        let mut flagged = 0u64;
        let mut slots = 0u64;
        for trial in 0..50u64 {
            let t = run_session(&c, &f, &p, &[(0, 0), (0, 0), (0, 0)], trial).unwrap();
            flagged += t.events.e2;
            slots += t.blocks.len() as u64;
        }
        let rate = flagged as f64 / slots as f64;
        assert!(rate > 0.9, "covering failure rate {rate} should be near 1");
    }

    #[test]
    fn rprime_defaults_to_penalty_plus_three_epsilon() {
        let c = reveal_channel();
        let f = uniform_relay_law(); // U independent of S: penalty 0
        let p = CodeParams::new(20, 2, 0.0, 0.0, 0.1);
        let scheme = Scheme::new(&c, &f, &p).unwrap();
        assert_abs_diff_eq!(scheme.rprime(), 0.3, epsilon = 1e-12);
        assert_eq!(scheme.mprime(), 404, "ceil(e^6)");
    }

    #[test]
    fn oversized_codebooks_fail_fast_with_a_size_report() {
        let c = reveal_channel();
        let f = uniform_relay_law();
        let mut p = CodeParams::new(200, 4, 0.8 * 2f64.ln(), 0.8 * 2f64.ln(), 0.5);
        p.rprime = Some(0.0);
        let err = Scheme::new(&c, &f, &p).unwrap_err();
        match err {
            CodingError::BudgetExceeded {
                required_bytes,
                budget_bytes,
            } => {
                assert!(
                    required_bytes > 1e40,
                    "expected an astronomical requirement, got {required_bytes:.3e}"
                );
                assert_eq!(budget_bytes, DEFAULT_MEMORY_BUDGET);
            }
            other => panic!("expected BudgetExceeded, got {other:?}"),
        }
    }

    #[test]
    fn sessions_replay_bit_for_bit() {
        let c = reveal_channel();
        let f = uniform_relay_law();
        let mut p = CodeParams::new(500, 3, 0.004, 0.003, 0.8);
        p.rprime = Some(0.01);
        let scheme = Scheme::new(&c, &f, &p).unwrap();
        let msgs = random_messages(scheme.m1(), scheme.m2(), 2, 8);
        let a = run_session(&c, &f, &p, &msgs, 123).unwrap();
        let b = run_session(&c, &f, &p, &msgs, 123).unwrap();
        assert_eq!(a.decoded, b.decoded);
        assert_eq!(a.events, b.events);
        for (ba, bb) in a.blocks.iter().zip(&b.blocks) {
            assert_eq!(ba.y, bb.y, "replayed outputs must match");
            assert_eq!(ba.jj0, bb.jj0);
        }
        let c2 = run_session(&c, &f, &p, &msgs, 124).unwrap();
        let same_y = a.blocks.iter().zip(&c2.blocks).all(|(x, y)| x.y == y.y);
        assert!(
            !same_y,
            "different seeds should give different transmissions"
        );
    }

    #[test]
    fn strictly_causal_x2_is_independent_of_current_x1() {
        // Chi-square audit: within every (s, u) stratum the empirical x2
        // distribution must not depend on the simultaneous x1 letter.
        // The strictly-causal sampler passes; a causal copy law, which
        // reads x1, must fail the same audit loudly.
        let c = reveal_channel();
        let v = alphabet(VAR_V, 1);
        let s = alphabet(VAR_S, 2);
        let p_v = Pmf::point_mass(v.clone(), 0);
        let p_x1 = CondPmf::from_fn(vec![v.clone()], alphabet(VAR_X1, 2), |_, _| 0.5).unwrap();
        // U uniform; x2 depends on u only: p(x2 = u) = 0.7.
        let p_ux2 = CondPmf::from_fn(vec![s, v], alphabet("UX2", 4), |_, t| {
            let (u, x2) = (t / 2, t % 2);
            if x2 == u {
                0.35
            } else {
                0.15
            }
        })
        .unwrap();
        let f = FactorizedLaw::strictly_causal(2, 2, p_v, p_x1, p_ux2).unwrap();
        let mut p = CodeParams::new(500, 4, 0.003, 0.002, 2.5);
        p.rprime = Some(0.0);

        let chi2_of = |law: &FactorizedLaw, params: &CodeParams| -> f64 {
            // counts[s][x1][x2]: u is not stored in transcripts, but x2
            // depends on x1 only through u (if at all), and u is drawn
            // independently of x1 — so within each state stratum the
            // marginal (x1, x2) table must look independent.
            let mut counts = [[[0u64; 2]; 2]; 2];
            for trial in 0..10u64 {
                let scheme = Scheme::new(&c, law, params).unwrap();
                let msgs = random_messages(scheme.m1(), scheme.m2(), 3, 600 + trial);
                let t = run_session(&c, law, params, &msgs, 700 + trial).unwrap();
                for blk in &t.blocks {
                    for k in 0..params.n {
                        let sv = blk.states.symbols()[k] as usize;
                        let x1 = blk.x1.symbols()[k] as usize;
                        let x2 = blk.x2.symbols()[k] as usize;
                        counts[sv][x1][x2] += 1;
                    }
                }
            }
            let mut chi2 = 0.0;
            for stratum in counts.iter() {
                let row: [u64; 2] = [stratum[0][0] + stratum[0][1], stratum[1][0] + stratum[1][1]];
                let col: [u64; 2] = [stratum[0][0] + stratum[1][0], stratum[0][1] + stratum[1][1]];
                let total = (row[0] + row[1]) as f64;
                if total == 0.0 {
                    continue;
                }
                for (i, &r) in row.iter().enumerate() {
                    for (j, &cl) in col.iter().enumerate() {
                        let expect = r as f64 * cl as f64 / total;
                        if expect > 0.0 {
                            let diff = stratum[i][j] as f64 - expect;
                            chi2 += diff * diff / expect;
                        }
                    }
                }
            }
            chi2
        };

        let chi2_sc = chi2_of(&f, &p);
        // 2 state strata x 1 degree of freedom; 9.210 is the 1% critical
        // value for 2 degrees of freedom.
        assert!(
            chi2_sc < 9.210,
            "strictly-causal x2 showed x1 dependence: chi-square {chi2_sc:.2}"
        );

        let copier = causal_copy_law();
        let mut pc = p.clone();
        pc.r2 = 0.0;
        let chi2_causal = chi2_of(&copier, &pc);
        assert!(
            chi2_causal > 1000.0,
            "the audit should expose a causal copier, chi-square {chi2_causal:.2}"
        );
    }

    #[test]
    fn make_x2_rejects_the_wrong_mode_arguments() {
        let c = reveal_channel();
        let f = uniform_relay_law();
        let mut p = CodeParams::new(50, 2, 0.0, 0.0, 0.5);
        p.rprime = Some(0.0);
        let scheme = Scheme::new(&c, &f, &p).unwrap();
        let cb = scheme.generate_codebook(1);
        let mut rng = seeded_rng(1, 2, 3);
        let states = c.sample_states(50, &mut rng);
        let x1 = cb.x1_word(0, 0).to_vec();
        let err = scheme
            .make_x2(
                cb.v_word(0),
                cb.u_word(0, 0, 0),
                &states,
                Some(&x1),
                &mut rng,
            )
            .unwrap_err();
        assert!(
            err.to_string().contains("must not see"),
            "strictly-causal sampler must refuse an x1 argument: {err}"
        );
    }

    #[test]
    fn message_bounds_are_validated() {
        let c = reveal_channel();
        let f = uniform_relay_law();
        let mut p = CodeParams::new(50, 3, 0.0, 0.0, 0.5);
        p.rprime = Some(0.0);
        // m1 = m2 = 1, so message index 1 is out of range.
        let err = run_session(&c, &f, &p, &[(0, 0), (1, 0)], 5).unwrap_err();
        assert!(matches!(err, CodingError::BadParams(_)));
        let err = run_session(&c, &f, &p, &[(0, 0)], 5).unwrap_err();
        assert!(matches!(err, CodingError::BadParams(_)), "wrong pair count");
    }
}
