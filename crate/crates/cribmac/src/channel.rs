//! The memoryless state-dependent multiple-access channel model.
//!
//! A [`MacChannel`] is the transition table p(y | x1, x2, s) together with
//! the i.i.d. state distribution p(s). The channel is used letter by
//! letter: an n-letter transmission draws each output independently from
//! the row selected by that letter's inputs and state.
//!
//! Sampling uses inverse-CDF draws from an explicitly seeded ChaCha stream
//! (see [`crate::rng`]), so every trajectory can be replayed exactly.

use rand::Rng;
use thiserror::Error;

use crate::probability::{Alphabet, CondPmf, Pmf, ProbError};

/// Largest alphabet a [`SymbolSeq`] can carry (symbols are stored as `u8`).
pub const MAX_SYMBOLS: usize = 256;

/// Errors specific to channel construction and use.
#[derive(Debug, Error)]
pub enum ChannelError {
    #[error(transparent)]
    Prob(#[from] ProbError),
    #[error("alphabet `{label}` has {size} symbols, above the {MAX_SYMBOLS} cap")]
    AlphabetTooLarge { label: String, size: usize },
    #[error("sequence alphabet `{got}` where `{want}` was expected")]
    AlphabetMismatch { got: String, want: String },
    #[error("input sequences have lengths {x1}, {x2}, {s}; they must match")]
    LengthMismatch { x1: usize, x2: usize, s: usize },
}

pub type Result<T> = std::result::Result<T, ChannelError>;

/// A sequence of symbols from one alphabet, stored as dense `u8` indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolSeq {
    alphabet: Alphabet,
    symbols: Vec<u8>,
}

impl SymbolSeq {
    /// Wraps raw symbols; every entry must index into `alphabet`.
    pub fn new(alphabet: Alphabet, symbols: Vec<u8>) -> Result<Self> {
        if alphabet.size() > MAX_SYMBOLS {
            return Err(ChannelError::AlphabetTooLarge {
                label: alphabet.label().to_string(),
                size: alphabet.size(),
            });
        }
        for &s in &symbols {
            assert!(
                (s as usize) < alphabet.size(),
                "symbol {} out of range for {}",
                s,
                alphabet.label()
            );
        }
        Ok(Self { alphabet, symbols })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn symbols(&self) -> &[u8] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

/// Draws one symbol from `mass` by inverting the CDF at a uniform draw.
///
/// The final positive-mass cell absorbs any floating-point shortfall so a
/// draw of exactly 1.0 cannot fall off the end.
pub(crate) fn sample_index(mass: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in mass.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last_positive = i;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

/// A discrete memoryless state-dependent MAC.
#[derive(Debug, Clone, PartialEq)]
pub struct MacChannel {
    x1: Alphabet,
    x2: Alphabet,
    s: Alphabet,
    y: Alphabet,
    /// Transition rows indexed by (x1, x2, s), each a distribution on y.
    law: CondPmf,
    /// The i.i.d. state distribution.
    state: Pmf,
}

impl MacChannel {
    /// Assembles and validates a channel. The conditional law must be
    /// given over `[x1, x2, s]` in that order with target `y`, and the
    /// state pmf over `s`.
    pub fn new(law: CondPmf, state: Pmf) -> Result<Self> {
        let given = law.given();
        assert_eq!(given.len(), 3, "channel law must condition on (x1, x2, s)");
        let x1 = given[0].clone();
        let x2 = given[1].clone();
        let s = given[2].clone();
        let y = law.target().clone();
        for a in [&x1, &x2, &s, &y] {
            if a.size() > MAX_SYMBOLS {
                return Err(ChannelError::AlphabetTooLarge {
                    label: a.label().to_string(),
                    size: a.size(),
                });
            }
        }
        if state.support() != &s {
            return Err(ChannelError::AlphabetMismatch {
                got: state.support().label().to_string(),
                want: s.label().to_string(),
            });
        }
        law.validate()?;
        state.validate()?;
        Ok(Self {
            x1,
            x2,
            s,
            y,
            law,
            state,
        })
    }

    /// Builds a channel from a transition function over index tuples.
    pub fn from_fn(
        x1: Alphabet,
        x2: Alphabet,
        s: Alphabet,
        y: Alphabet,
        state_mass: Vec<f64>,
        f: impl Fn(usize, usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let law = CondPmf::from_fn(vec![x1, x2, s.clone()], y, |g, t| f(g[0], g[1], g[2], t))?;
        let state = Pmf::new(s, state_mass)?;
        Self::new(law, state)
    }

    pub fn x1(&self) -> &Alphabet {
        &self.x1
    }

    pub fn x2(&self) -> &Alphabet {
        &self.x2
    }

    pub fn s(&self) -> &Alphabet {
        &self.s
    }

    pub fn y(&self) -> &Alphabet {
        &self.y
    }

    pub fn law(&self) -> &CondPmf {
        &self.law
    }

    pub fn state(&self) -> &Pmf {
        &self.state
    }

    /// One transition row p(· | x1, x2, s).
    pub fn row(&self, x1: usize, x2: usize, s: usize) -> &[f64] {
        self.law.row(&[x1, x2, s])
    }

    /// Re-validates all stored tables (used by file loaders).
    pub fn validate(&self) -> Result<()> {
        self.law.validate()?;
        self.state.validate()?;
        Ok(())
    }

    /// Draws an i.i.d. state sequence of length `n`.
    pub fn sample_states(&self, n: usize, rng: &mut impl Rng) -> SymbolSeq {
        let symbols = (0..n)
            .map(|_| sample_index(self.state.mass(), rng) as u8)
            .collect();
        SymbolSeq {
            alphabet: self.s.clone(),
            symbols,
        }
    }

    /// Passes aligned input and state sequences through the channel,
    /// drawing each output letter independently from its transition row.
    pub fn transmit(
        &self,
        x1: &SymbolSeq,
        x2: &SymbolSeq,
        s: &SymbolSeq,
        rng: &mut impl Rng,
    ) -> Result<SymbolSeq> {
        for (seq, want) in [(x1, &self.x1), (x2, &self.x2), (s, &self.s)] {
            if seq.alphabet() != want {
                return Err(ChannelError::AlphabetMismatch {
                    got: seq.alphabet().label().to_string(),
                    want: want.label().to_string(),
                });
            }
        }
        if x1.len() != x2.len() || x1.len() != s.len() {
            return Err(ChannelError::LengthMismatch {
                x1: x1.len(),
                x2: x2.len(),
                s: s.len(),
            });
        }
        let mut symbols = Vec::with_capacity(x1.len());
        for k in 0..x1.len() {
            let row = self.row(
                x1.symbols()[k] as usize,
                x2.symbols()[k] as usize,
                s.symbols()[k] as usize,
            );
            symbols.push(sample_index(row, rng) as u8);
        }
        Ok(SymbolSeq {
            alphabet: self.y.clone(),
            symbols,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_rng;

    fn binary(label: &str) -> Alphabet {
        Alphabet::new(label, 2).unwrap()
    }

    /// Y = X2 xor S through a crossover-`p` flip; X1 is ignored.
    fn dirty_bsc(p: f64) -> MacChannel {
        MacChannel::from_fn(
            Alphabet::new("X1", 1).unwrap(),
            binary("X2"),
            binary("S"),
            binary("Y"),
            vec![0.5, 0.5],
            |_, x2, s, y| {
                if y == (x2 ^ s) {
                    1.0 - p
                } else {
                    p
                }
            },
        )
        .unwrap()
    }

    #[test]
    fn state_frequencies_concentrate_for_long_runs() {
        let c = dirty_bsc(0.1);
        let mut rng = seeded_rng(7, 0, 0);
        let n = 100_000;
        let s = c.sample_states(n, &mut rng);
        let ones = s.symbols().iter().filter(|&&b| b == 1).count() as f64 / n as f64;
        assert!(
            (0.495..=0.505).contains(&ones),
            "uniform state frequency drifted: {ones}"
        );
    }

    #[test]
    fn transmit_output_fits_chi_square_at_one_percent() {
        // Fixed inputs (x2 = 0, s alternating) so each letter's expected row
        // is known; aggregate per-row chi-square over n = 1e5 letters.
        let c = dirty_bsc(0.1);
        let mut rng = seeded_rng(11, 0, 0);
        let n = 100_000;
        let x1 = SymbolSeq::new(Alphabet::new("X1", 1).unwrap(), vec![0; n]).unwrap();
        let x2 = SymbolSeq::new(binary("X2"), vec![0; n]).unwrap();
        let s = SymbolSeq::new(binary("S"), (0..n).map(|k| (k % 2) as u8).collect()).unwrap();
        let y = c.transmit(&x1, &x2, &s, &mut rng).unwrap();

        // Two strata (s = 0, s = 1), each binomial with success 0.1 / 0.9.
        let mut chi2 = 0.0;
        for stratum in 0..2u8 {
            let total = n / 2;
            let hits = y
                .symbols()
                .iter()
                .zip(s.symbols())
                .filter(|&(&yy, &ss)| ss == stratum && yy == 1)
                .count() as f64;
            let expect = if stratum == 0 { 0.1 } else { 0.9 } * total as f64;
            for (obs, exp) in [(hits, expect), (total as f64 - hits, total as f64 - expect)] {
                chi2 += (obs - exp).powi(2) / exp;
            }
        }
        // df = 2, critical value at significance 0.01 is 9.210.
        assert!(
            chi2 < 9.210,
            "chi-square {chi2} exceeds the 1% critical value"
        );
    }

    #[test]
    fn transmit_is_reproducible_for_equal_seeds() {
        let c = dirty_bsc(0.2);
        let x1 = SymbolSeq::new(Alphabet::new("X1", 1).unwrap(), vec![0; 64]).unwrap();
        let x2 = SymbolSeq::new(binary("X2"), vec![1; 64]).unwrap();
        let mut r1 = seeded_rng(99, 1, 2);
        let mut r2 = seeded_rng(99, 1, 2);
        let s1 = c.sample_states(64, &mut r1);
        let s2 = c.sample_states(64, &mut r2);
        assert_eq!(s1, s2);
        let y1 = c.transmit(&x1, &x2, &s1, &mut r1).unwrap();
        let y2 = c.transmit(&x1, &x2, &s2, &mut r2).unwrap();
        assert_eq!(y1, y2, "same seed must replay the same trajectory");
    }

    #[test]
    fn transmit_rejects_mismatched_lengths() {
        let c = dirty_bsc(0.1);
        let x1 = SymbolSeq::new(Alphabet::new("X1", 1).unwrap(), vec![0; 4]).unwrap();
        let x2 = SymbolSeq::new(binary("X2"), vec![0; 4]).unwrap();
        let s = SymbolSeq::new(binary("S"), vec![0; 3]).unwrap();
        let mut rng = seeded_rng(0, 0, 0);
        assert!(matches!(
            c.transmit(&x1, &x2, &s, &mut rng),
            Err(ChannelError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn transmit_rejects_wrong_alphabets() {
        let c = dirty_bsc(0.1);
        let x1 = SymbolSeq::new(binary("X2"), vec![0; 4]).unwrap();
        let x2 = SymbolSeq::new(binary("X2"), vec![0; 4]).unwrap();
        let s = SymbolSeq::new(binary("S"), vec![0; 4]).unwrap();
        let mut rng = seeded_rng(0, 0, 0);
        assert!(matches!(
            c.transmit(&x1, &x2, &s, &mut rng),
            Err(ChannelError::AlphabetMismatch { .. })
        ));
    }

    #[test]
    fn degenerate_rows_always_emit_the_forced_symbol() {
        // Noiseless reveal channel y = 2 x1 + x2: every row is a point mass.
        let c = MacChannel::from_fn(
            binary("X1"),
            binary("X2"),
            binary("S"),
            Alphabet::new("Y", 4).unwrap(),
            vec![0.5, 0.5],
            |x1, x2, _, y| if y == 2 * x1 + x2 { 1.0 } else { 0.0 },
        )
        .unwrap();
        let mut rng = seeded_rng(3, 0, 0);
        let x1 = SymbolSeq::new(binary("X1"), vec![0, 1, 1, 0]).unwrap();
        let x2 = SymbolSeq::new(binary("X2"), vec![1, 0, 1, 0]).unwrap();
        let s = c.sample_states(4, &mut rng);
        let y = c.transmit(&x1, &x2, &s, &mut rng).unwrap();
        assert_eq!(y.symbols(), &[1, 2, 3, 0]);
    }
}
