//! Strong joint typicality: the acceptance test used by every encoder and
//! decoder step, plus the probability/cardinality bounds that make random
//! coding work.
//!
//! A tuple of aligned sequences is strongly typical for a context law when,
//! for **every** nonempty subset of the tested variables, every cell's
//! empirical frequency sits strictly within `epsilon / A` of that subset's
//! marginal probability, where `A` is the product alphabet size of the
//! context's complete variable set. Using the full-product denominator for
//! all subsets keeps the family nested: typicality of a tuple implies
//! typicality of every sub-tuple under the same context.

use thiserror::Error;

use crate::channel::SymbolSeq;
use crate::probability::{JointLaw, ProbError};
use crate::rng::seeded_rng;
use crate::stats::{wilson_interval, Z99};

/// Errors raised by typicality queries.
#[derive(Debug, Error)]
pub enum TypicalityError {
    #[error(transparent)]
    Prob(#[from] ProbError),
    #[error("epsilon must be positive, got {0}")]
    BadEpsilon(f64),
    #[error("block length must be positive")]
    BadBlockLength,
    #[error("sequence {index} has length {got}, context expects {want}")]
    LengthMismatch {
        index: usize,
        got: usize,
        want: usize,
    },
    #[error("got {got} sequences for {want} tested variables")]
    ArityMismatch { got: usize, want: usize },
    #[error("sequence for `{label}` uses alphabet of size {got}, law says {want}")]
    AlphabetMismatch {
        label: String,
        got: usize,
        want: usize,
    },
}

pub type Result<T> = std::result::Result<T, TypicalityError>;

/// A reference law, a slack parameter and a block length: everything a
/// typicality query needs.
#[derive(Debug, Clone)]
pub struct TypicalityContext {
    joint: JointLaw,
    epsilon: f64,
    n: usize,
}

impl TypicalityContext {
    pub fn new(joint: JointLaw, epsilon: f64, n: usize) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(TypicalityError::BadEpsilon(epsilon));
        }
        if n == 0 {
            return Err(TypicalityError::BadBlockLength);
        }
        Ok(Self { joint, epsilon, n })
    }

    pub fn joint(&self) -> &JointLaw {
        &self.joint
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// The per-cell acceptance threshold `epsilon / A`, with `A` the product
    /// alphabet size of the context's complete variable set.
    pub fn threshold(&self) -> f64 {
        self.epsilon / self.joint.full_alphabet_product() as f64
    }

    /// Precompiles the subset tables for testing the given variables; use
    /// this when the same test runs many times (decoder scans).
    pub fn tester(&self, vars: &[&str]) -> Result<TypicalityTester> {
        TypicalityTester::new(self, vars)
    }
}

/// Raw empirical counts of a tuple of aligned sequences over the product
/// of their alphabets (first sequence slowest, matching [`JointLaw`]).
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalType {
    sizes: Vec<usize>,
    counts: Vec<u64>,
    n: usize,
}

impl EmpiricalType {
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Empirical frequency of one joint cell.
    pub fn frequency(&self, cell: &[usize]) -> f64 {
        let mut idx = 0;
        for (&c, &s) in cell.iter().zip(&self.sizes) {
            idx = idx * s + c;
        }
        self.counts[idx] as f64 / self.n as f64
    }
}

/// Counts joint occurrences across aligned sequences. All sequences must
/// share one length; an empty tuple is rejected.
pub fn empirical_type(seqs: &[&SymbolSeq]) -> Result<EmpiricalType> {
    if seqs.is_empty() {
        return Err(TypicalityError::ArityMismatch { got: 0, want: 1 });
    }
    let n = seqs[0].len();
    if n == 0 {
        return Err(TypicalityError::BadBlockLength);
    }
    for (index, s) in seqs.iter().enumerate() {
        if s.len() != n {
            return Err(TypicalityError::LengthMismatch {
                index,
                got: s.len(),
                want: n,
            });
        }
    }
    let sizes: Vec<usize> = seqs.iter().map(|s| s.alphabet().size()).collect();
    let cells: usize = sizes.iter().product();
    let mut counts = vec![0u64; cells];
    for k in 0..n {
        let mut idx = 0;
        for (seq, &size) in seqs.iter().zip(&sizes) {
            idx = idx * size + seq.symbols()[k] as usize;
        }
        counts[idx] += 1;
    }
    Ok(EmpiricalType { sizes, counts, n })
}

/// One subset constraint: a projection from full cells to subset cells and
/// the subset's marginal probabilities.
#[derive(Debug, Clone)]
struct SubsetCheck {
    /// `proj[full_cell]` is the subset cell that the full cell collapses to.
    proj: Vec<usize>,
    expected: Vec<f64>,
}

/// A compiled strong-typicality test for a fixed tuple of context
/// variables. Testing is a single counting pass plus small table sweeps.
#[derive(Debug, Clone)]
pub struct TypicalityTester {
    /// Indices of the tested variables inside the context joint, ascending.
    var_order: Vec<usize>,
    sizes: Vec<usize>,
    threshold: f64,
    n: usize,
    subsets: Vec<SubsetCheck>,
    labels: Vec<String>,
}

impl TypicalityTester {
    fn new(ctx: &TypicalityContext, vars: &[&str]) -> Result<Self> {
        if vars.is_empty() {
            return Err(TypicalityError::ArityMismatch { got: 0, want: 1 });
        }
        // Tested variables are handled in context order so marginal tables
        // line up no matter how the caller listed them.
        let mut var_order: Vec<usize> = vars
            .iter()
            .map(|l| ctx.joint.var_index(l))
            .collect::<std::result::Result<_, _>>()?;
        var_order.sort_unstable();
        var_order.dedup();
        let ordered_labels: Vec<String> = var_order
            .iter()
            .map(|&i| ctx.joint.variables()[i].label().to_string())
            .collect();
        let label_refs: Vec<&str> = ordered_labels.iter().map(String::as_str).collect();
        let marginal = ctx.joint.marginalize(&label_refs)?;
        let sizes: Vec<usize> = marginal.variables().iter().map(|a| a.size()).collect();
        let cells: usize = sizes.iter().product();
        let k = sizes.len();

        let mut subsets = Vec::with_capacity((1usize << k) - 1);
        for mask in 1..(1usize << k) {
            let sub_labels: Vec<&str> = (0..k)
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| label_refs[i])
                .collect();
            let sub_law = marginal.marginalize(&sub_labels)?;
            // Map each full cell to its subset cell by dropping the axes
            // outside the mask.
            let mut proj = vec![0usize; cells];
            let mut tuple = vec![0usize; k];
            for cell in proj.iter_mut() {
                let mut idx = 0;
                for i in 0..k {
                    if mask & (1 << i) != 0 {
                        idx = idx * sizes[i] + tuple[i];
                    }
                }
                *cell = idx;
                crate::probability::advance_tuple(&mut tuple, &sizes);
            }
            subsets.push(SubsetCheck {
                proj,
                expected: sub_law.mass().to_vec(),
            });
        }
        Ok(Self {
            var_order,
            sizes,
            threshold: ctx.threshold(),
            n: ctx.n,
            subsets,
            labels: ordered_labels,
        })
    }

    /// Labels of the tested variables in context order — the order `test`
    /// expects its sequences in.
    pub fn labels(&self) -> Vec<&str> {
        self.labels.iter().map(String::as_str).collect()
    }

    /// Indices of the tested variables inside the context joint.
    pub fn var_order(&self) -> &[usize] {
        &self.var_order
    }

    /// Runs the compiled test on aligned sequences (one per tested
    /// variable, in context order).
    pub fn test(&self, seqs: &[&SymbolSeq]) -> Result<bool> {
        if seqs.len() != self.sizes.len() {
            return Err(TypicalityError::ArityMismatch {
                got: seqs.len(),
                want: self.sizes.len(),
            });
        }
        for (i, (seq, (&size, label))) in seqs
            .iter()
            .zip(self.sizes.iter().zip(&self.labels))
            .enumerate()
        {
            if seq.alphabet().size() != size {
                return Err(TypicalityError::AlphabetMismatch {
                    label: label.clone(),
                    got: seq.alphabet().size(),
                    want: size,
                });
            }
            if seq.len() != self.n {
                return Err(TypicalityError::LengthMismatch {
                    index: i,
                    got: seq.len(),
                    want: self.n,
                });
            }
        }
        let cells: usize = self.sizes.iter().product();
        let mut counts = vec![0u64; cells];
        for k in 0..self.n {
            let mut idx = 0;
            for (seq, &size) in seqs.iter().zip(&self.sizes) {
                idx = idx * size + seq.symbols()[k] as usize;
            }
            counts[idx] += 1;
        }
        Ok(self.test_counts(&counts))
    }

    /// The same test on raw symbol slices (sequences in context order).
    /// Lengths are validated; symbols must already lie in the tested
    /// alphabets' ranges. This is the fast path for decoder scans over
    /// flat codeword tables.
    pub fn test_letters(&self, seqs: &[&[u8]]) -> Result<bool> {
        if seqs.len() != self.sizes.len() {
            return Err(TypicalityError::ArityMismatch {
                got: seqs.len(),
                want: self.sizes.len(),
            });
        }
        for (i, seq) in seqs.iter().enumerate() {
            if seq.len() != self.n {
                return Err(TypicalityError::LengthMismatch {
                    index: i,
                    got: seq.len(),
                    want: self.n,
                });
            }
        }
        let cells: usize = self.sizes.iter().product();
        let mut counts = vec![0u64; cells];
        for k in 0..self.n {
            let mut idx = 0;
            for (seq, &size) in seqs.iter().zip(&self.sizes) {
                let sym = seq[k] as usize;
                debug_assert!(sym < size, "symbol {sym} outside alphabet of size {size}");
                idx = idx * size + sym;
            }
            counts[idx] += 1;
        }
        Ok(self.test_counts(&counts))
    }

    /// The same test on a precomputed full-joint count table.
    pub fn test_counts(&self, counts: &[u64]) -> bool {
        let n = self.n as f64;
        let mut sub = vec![0u64; self.sizes.iter().product()];
        for check in &self.subsets {
            let sub_cells = check.expected.len();
            sub[..sub_cells].fill(0);
            for (full_cell, &c) in counts.iter().enumerate() {
                sub[check.proj[full_cell]] += c;
            }
            for (cell, &p) in check.expected.iter().enumerate() {
                let dev = (sub[cell] as f64 / n - p).abs();
                if dev >= self.threshold {
                    return false;
                }
            }
        }
        true
    }
}

/// The strong-typicality test from scratch: compiles the subset tables for
/// `vars` and checks the aligned sequences in one call.
pub fn is_strongly_typical(
    ctx: &TypicalityContext,
    seqs: &[&SymbolSeq],
    vars: &[&str],
) -> Result<bool> {
    let tester = ctx.tester(vars)?;
    // The caller listed sequences in `vars` order; realign to context order.
    let mut ordered: Vec<&SymbolSeq> = Vec::with_capacity(seqs.len());
    if seqs.len() != vars.len() {
        return Err(TypicalityError::ArityMismatch {
            got: seqs.len(),
            want: vars.len(),
        });
    }
    for label in tester.labels() {
        let pos = vars
            .iter()
            .position(|v| *v == label)
            .expect("tester labels come from vars");
        ordered.push(seqs[pos]);
    }
    tester.test(&ordered)
}

/// Product probability of a tuple of aligned sequences under the marginal
/// law over `vars` (the per-letter i.i.d. probability of the whole tuple).
pub fn sequence_probability(
    ctx: &TypicalityContext,
    seqs: &[&SymbolSeq],
    vars: &[&str],
) -> Result<f64> {
    let marginal = ctx.joint.marginalize(vars)?;
    let order: Vec<usize> = marginal
        .variables()
        .iter()
        .map(|a| {
            vars.iter()
                .position(|v| *v == a.label())
                .expect("marginal keeps vars")
        })
        .collect();
    let n = seqs.first().map(|s| s.len()).unwrap_or(0);
    let mut prob = 1.0;
    let mut tuple = vec![0usize; order.len()];
    for k in 0..n {
        for (slot, &src) in order.iter().enumerate() {
            tuple[slot] = seqs[src].symbols()[k] as usize;
        }
        prob *= marginal.prob(&tuple);
    }
    Ok(prob)
}

/// Log-domain variant of [`sequence_probability`] for block lengths where
/// the product probability underflows `f64`. Returns `-inf` when any letter
/// has zero probability.
pub fn sequence_log_probability(
    ctx: &TypicalityContext,
    seqs: &[&SymbolSeq],
    vars: &[&str],
) -> Result<f64> {
    let marginal = ctx.joint.marginalize(vars)?;
    let order: Vec<usize> = marginal
        .variables()
        .iter()
        .map(|a| {
            vars.iter()
                .position(|v| *v == a.label())
                .expect("marginal keeps vars")
        })
        .collect();
    let n = seqs.first().map(|s| s.len()).unwrap_or(0);
    let mut log_prob = 0.0;
    let mut tuple = vec![0usize; order.len()];
    for k in 0..n {
        for (slot, &src) in order.iter().enumerate() {
            tuple[slot] = seqs[src].symbols()[k] as usize;
        }
        let p = marginal.prob(&tuple);
        if p <= 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        log_prob += p.ln();
    }
    Ok(log_prob)
}

/// Probability window for a typical tuple: any tuple in the typical set
/// over `vars` has product probability inside `[exp(-n(H+eps)),
/// exp(-n(H-eps))]`, with `H` the marginal entropy of `vars`.
pub fn typical_probability_bounds(ctx: &TypicalityContext, vars: &[&str]) -> Result<(f64, f64)> {
    let h = ctx.joint.marginal_entropy(vars)?;
    let n = ctx.n as f64;
    Ok((
        (-n * (h + ctx.epsilon)).exp(),
        (-n * (h - ctx.epsilon)).exp(),
    ))
}

/// The conditional variant with doubled slack: for a jointly typical tuple
/// the conditional probability of `target` given `given` lies inside
/// `[exp(-n(H+2eps)), exp(-n(H-2eps))]` with `H = H(target | given)`.
pub fn conditional_typical_probability_bounds(
    ctx: &TypicalityContext,
    target: &[&str],
    given: &[&str],
) -> Result<(f64, f64)> {
    let h = ctx.joint.conditional_entropy(target, given)?;
    let n = ctx.n as f64;
    Ok((
        (-n * (h + 2.0 * ctx.epsilon)).exp(),
        (-n * (h - 2.0 * ctx.epsilon)).exp(),
    ))
}

/// Cardinality window for the typical set over `vars`:
/// `((1-eps) exp(n(H-eps)), exp(n(H+eps)))`. The upper bound holds for all
/// `n`; the lower bound only once `n` is large enough that the set is
/// likely at all.
pub fn typical_set_size_bounds(ctx: &TypicalityContext, vars: &[&str]) -> Result<(f64, f64)> {
    let h = ctx.joint.marginal_entropy(vars)?;
    let n = ctx.n as f64;
    Ok((
        (1.0 - ctx.epsilon) * (n * (h - ctx.epsilon)).exp(),
        (n * (h + ctx.epsilon)).exp(),
    ))
}

/// Result of a cross-law typicality experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossLawReport {
    pub trials: u64,
    pub hits: u64,
    pub rate: f64,
    /// The packing bound `exp(-n (I(X;Y|Z) - eps))`.
    pub bound: f64,
    /// Wilson 99% interval on the empirical rate.
    pub wilson99: (f64, f64),
}

/// Estimates how often independently regenerated X and Y sequences still
/// look jointly typical with a shared Z.
///
/// Per trial: draw `z` i.i.d. from the Z marginal, then draw fresh `x` and
/// `y` letterwise from p(x|z) and p(y|z) — X and Y conditionally
/// independent, *not* from the joint — and test `(x, y, z)` for strong
/// typicality under the context. The rate is compared against the packing
/// bound `exp(-n [I(X;Y|Z) - eps])`.
pub fn cross_law_typicality_rate(
    ctx: &TypicalityContext,
    x: &str,
    y: &str,
    z: &str,
    trials: u64,
    seed: u64,
) -> Result<CrossLawReport> {
    let z_law = ctx.joint.marginalize(&[z])?;
    let make_rows = |a: &str| -> Result<(usize, Vec<f64>)> {
        // Conditional rows p(a | z) in z-major layout.
        let pair = ctx.joint.marginalize(&[a, z])?;
        let a_first = pair.variables()[0].label() == a;
        let (a_size, z_size) = if a_first {
            (pair.variables()[0].size(), pair.variables()[1].size())
        } else {
            (pair.variables()[1].size(), pair.variables()[0].size())
        };
        let mut rows = vec![0.0; a_size * z_size];
        for ai in 0..a_size {
            for zi in 0..z_size {
                let p = if a_first {
                    pair.prob(&[ai, zi])
                } else {
                    pair.prob(&[zi, ai])
                };
                rows[zi * a_size + ai] = p;
            }
        }
        for zi in 0..z_size {
            let mass: f64 = rows[zi * a_size..(zi + 1) * a_size].iter().sum();
            if mass > 0.0 {
                for cell in &mut rows[zi * a_size..(zi + 1) * a_size] {
                    *cell /= mass;
                }
            }
        }
        Ok((a_size, rows))
    };
    let (x_size, x_rows) = make_rows(x)?;
    let (y_size, y_rows) = make_rows(y)?;
    let x_alpha = ctx.joint.variables()[ctx.joint.var_index(x)?].clone();
    let y_alpha = ctx.joint.variables()[ctx.joint.var_index(y)?].clone();
    let z_alpha = ctx.joint.variables()[ctx.joint.var_index(z)?].clone();
    let tester = ctx.tester(&[x, y, z])?;

    let mi = ctx.joint.mutual_information(&[x], &[y], &[z])?;
    let bound = (-(ctx.n as f64) * (mi - ctx.epsilon)).exp();

    let mut hits = 0u64;
    for trial in 0..trials {
        let mut rng = seeded_rng(seed, 0xC05E, trial);
        let mut zs = Vec::with_capacity(ctx.n);
        let mut xs = Vec::with_capacity(ctx.n);
        let mut ys = Vec::with_capacity(ctx.n);
        for _ in 0..ctx.n {
            let zi = crate::channel::sample_index(z_law.mass(), &mut rng);
            let xi =
                crate::channel::sample_index(&x_rows[zi * x_size..(zi + 1) * x_size], &mut rng);
            let yi =
                crate::channel::sample_index(&y_rows[zi * y_size..(zi + 1) * y_size], &mut rng);
            zs.push(zi as u8);
            xs.push(xi as u8);
            ys.push(yi as u8);
        }
        let xs = SymbolSeq::new(x_alpha.clone(), xs).expect("alphabet fits");
        let ys = SymbolSeq::new(y_alpha.clone(), ys).expect("alphabet fits");
        let zs = SymbolSeq::new(z_alpha.clone(), zs).expect("alphabet fits");
        // Tester wants context order; find it once per call for clarity.
        let mut ordered: Vec<&SymbolSeq> = Vec::with_capacity(3);
        for label in tester.labels() {
            ordered.push(if label == x {
                &xs
            } else if label == y {
                &ys
            } else {
                &zs
            });
        }
        if tester.test(&ordered)? {
            hits += 1;
        }
    }
    let rate = hits as f64 / trials as f64;
    Ok(CrossLawReport {
        trials,
        hits,
        rate,
        bound,
        wilson99: wilson_interval(hits, trials, Z99),
    })
}
