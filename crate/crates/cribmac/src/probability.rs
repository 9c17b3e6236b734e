//! Dense finite-alphabet probability tables and the information measures
//! built on them.
//!
//! Everything downstream (channel models, rate regions, typicality tests,
//! the coding simulation) works with the three table types defined here:
//!
//! * [`Pmf`] — a distribution over one alphabet,
//! * [`CondPmf`] — a row per conditioning tuple, each row a distribution,
//! * [`JointLaw`] — a dense joint table over a tuple of named variables.
//!
//! All information quantities are returned in nats (natural log); callers
//! that want bits divide by `ln 2` at display time. The convention
//! `0 ln 0 = 0` is applied throughout.

use thiserror::Error;

/// Tolerance applied to user-supplied masses when checking normalization.
pub const INPUT_TOL: f64 = 1e-9;
/// Tolerance applied to internally derived identities (marginals of
/// validated tables and the like).
pub const INTERNAL_TOL: f64 = 1e-12;
/// Mutual informations in `[-MI_CLAMP, 0)` are rounded up to zero; anything
/// more negative is reported as an internal inconsistency.
pub const MI_CLAMP: f64 = 1e-12;
/// Hard cap on dense-table size; laws beyond this are out of scope.
pub const MAX_TABLE_CELLS: usize = 1_000_000;

/// Errors raised by table construction and the information measures.
#[derive(Debug, Error, PartialEq)]
pub enum ProbError {
    #[error("mass at index {index} is negative ({value})")]
    NegativeMass { index: usize, value: f64 },
    #[error("mass sums to {sum}, off by {deviation:e} (tolerance {tol:e})")]
    NotNormalized { sum: f64, deviation: f64, tol: f64 },
    #[error("mass vector has {got} entries, alphabet product needs {want}")]
    SizeMismatch { got: usize, want: usize },
    #[error("table would hold {cells} cells, over the {MAX_TABLE_CELLS} cap")]
    TableTooLarge { cells: usize },
    #[error("unknown variable `{label}`")]
    UnknownVariable { label: String },
    #[error("variable `{label}` appears in more than one subset argument")]
    OverlappingSubsets { label: String },
    #[error("duplicate variable label `{label}` in joint law")]
    DuplicateVariable { label: String },
    #[error("alphabet must have at least one symbol")]
    EmptyAlphabet,
    #[error("internal consistency violated: {what} = {value}")]
    InternalConsistency { what: String, value: f64 },
}

/// Convenience alias used by every module in the crate.
pub type Result<T> = std::result::Result<T, ProbError>;

/// A finite alphabet: a size plus a human-readable label such as `"X1"`.
///
/// Labels identify variables inside a [`JointLaw`]; sizes are kept small
/// (dense tables) and symbols are plain `0..size` indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    label: String,
    size: usize,
}

impl Alphabet {
    /// A new alphabet; `size` must be at least one.
    pub fn new(label: &str, size: usize) -> Result<Self> {
        if size == 0 {
            return Err(ProbError::EmptyAlphabet);
        }
        Ok(Self {
            label: label.to_string(),
            size,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Same symbols under a different name; used when one generation law
    /// plays two roles inside a joint (e.g. a codeword and its observation).
    pub fn relabeled(&self, label: &str) -> Self {
        Self {
            label: label.to_string(),
            size: self.size,
        }
    }
}

fn check_mass(mass: &[f64], tol: f64) -> Result<()> {
    let mut sum = 0.0;
    for (index, &value) in mass.iter().enumerate() {
        if value < 0.0 {
            return Err(ProbError::NegativeMass { index, value });
        }
        sum += value;
    }
    let deviation = (sum - 1.0).abs();
    if deviation > tol {
        return Err(ProbError::NotNormalized {
            sum,
            deviation,
            tol,
        });
    }
    Ok(())
}

/// A probability mass function over a single [`Alphabet`].
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf {
    support: Alphabet,
    mass: Vec<f64>,
}

impl Pmf {
    /// Validates length, non-negativity and normalization (within
    /// [`INPUT_TOL`]) before accepting the mass vector.
    pub fn new(support: Alphabet, mass: Vec<f64>) -> Result<Self> {
        if mass.len() != support.size() {
            return Err(ProbError::SizeMismatch {
                got: mass.len(),
                want: support.size(),
            });
        }
        check_mass(&mass, INPUT_TOL)?;
        Ok(Self { support, mass })
    }

    /// Uniform distribution on `support`.
    pub fn uniform(support: Alphabet) -> Self {
        let n = support.size();
        Self {
            support,
            mass: vec![1.0 / n as f64; n],
        }
    }

    /// All mass on one symbol.
    pub fn point_mass(support: Alphabet, at: usize) -> Self {
        let mut mass = vec![0.0; support.size()];
        mass[at] = 1.0;
        Self { support, mass }
    }

    pub fn support(&self) -> &Alphabet {
        &self.support
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn prob(&self, symbol: usize) -> f64 {
        self.mass[symbol]
    }

    /// Re-checks the stored mass vector; exposed so loaders can audit
    /// tables after deserialization.
    pub fn validate(&self) -> Result<()> {
        check_mass(&self.mass, INPUT_TOL)
    }

    /// Entropy in nats with the `0 ln 0 = 0` convention.
    pub fn entropy(&self) -> f64 {
        neg_sum_p_ln_p(&self.mass)
    }
}

/// A conditional table: one distribution over `target` per tuple of the
/// `given` alphabets. Rows are stored row-major with the first conditioning
/// variable slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct CondPmf {
    given: Vec<Alphabet>,
    target: Alphabet,
    rows: Vec<f64>,
}

impl CondPmf {
    /// Validates every row (length, sign, normalization within
    /// [`INPUT_TOL`]).
    pub fn new(given: Vec<Alphabet>, target: Alphabet, rows: Vec<f64>) -> Result<Self> {
        let row_count: usize = given.iter().map(Alphabet::size).product();
        let want = row_count
            .checked_mul(target.size())
            .ok_or(ProbError::TableTooLarge { cells: usize::MAX })?;
        if want > MAX_TABLE_CELLS {
            return Err(ProbError::TableTooLarge { cells: want });
        }
        if rows.len() != want {
            return Err(ProbError::SizeMismatch {
                got: rows.len(),
                want,
            });
        }
        let cp = Self {
            given,
            target,
            rows,
        };
        cp.validate()?;
        Ok(cp)
    }

    /// Builds the table by evaluating `f(given_tuple, target_symbol)`.
    pub fn from_fn(
        given: Vec<Alphabet>,
        target: Alphabet,
        f: impl Fn(&[usize], usize) -> f64,
    ) -> Result<Self> {
        let sizes: Vec<usize> = given.iter().map(Alphabet::size).collect();
        let row_count: usize = sizes.iter().product();
        let mut rows = Vec::with_capacity(row_count * target.size());
        let mut tuple = vec![0usize; sizes.len()];
        for _ in 0..row_count {
            for t in 0..target.size() {
                rows.push(f(&tuple, t));
            }
            advance_tuple(&mut tuple, &sizes);
        }
        Self::new(given, target, rows)
    }

    pub fn given(&self) -> &[Alphabet] {
        &self.given
    }

    pub fn target(&self) -> &Alphabet {
        &self.target
    }

    /// The distribution over `target` for one conditioning tuple.
    pub fn row(&self, given_tuple: &[usize]) -> &[f64] {
        let idx = self.row_index(given_tuple);
        let t = self.target.size();
        &self.rows[idx * t..(idx + 1) * t]
    }

    pub fn prob(&self, given_tuple: &[usize], target_symbol: usize) -> f64 {
        self.row(given_tuple)[target_symbol]
    }

    /// The full table, rows concatenated in row-major conditioning order.
    pub fn rows(&self) -> &[f64] {
        &self.rows
    }

    fn row_index(&self, given_tuple: &[usize]) -> usize {
        assert_eq!(
            given_tuple.len(),
            self.given.len(),
            "conditioning tuple arity"
        );
        let mut idx = 0;
        for (&g, a) in given_tuple.iter().zip(&self.given) {
            assert!(g < a.size(), "symbol {} out of range for {}", g, a.label());
            idx = idx * a.size() + g;
        }
        idx
    }

    /// Re-checks every row.
    pub fn validate(&self) -> Result<()> {
        let t = self.target.size();
        for (r, row) in self.rows.chunks_exact(t).enumerate() {
            check_mass(row, INPUT_TOL).map_err(|e| match e {
                ProbError::NegativeMass { index, value } => ProbError::NegativeMass {
                    index: r * t + index,
                    value,
                },
                other => other,
            })?;
        }
        Ok(())
    }
}

/// A dense joint distribution over an ordered tuple of named variables.
///
/// Mass is stored row-major with the first variable slowest. Variables are
/// addressed by label in all the information-measure calls, so reordering
/// arguments never silently changes meaning.
#[derive(Debug, Clone, PartialEq)]
pub struct JointLaw {
    variables: Vec<Alphabet>,
    mass: Vec<f64>,
}

impl JointLaw {
    /// Validates shape, labels (must be distinct), sign and normalization.
    pub fn new(variables: Vec<Alphabet>, mass: Vec<f64>) -> Result<Self> {
        for (i, v) in variables.iter().enumerate() {
            if variables[..i].iter().any(|w| w.label() == v.label()) {
                return Err(ProbError::DuplicateVariable {
                    label: v.label().to_string(),
                });
            }
        }
        let want: usize = variables.iter().map(Alphabet::size).product();
        if want > MAX_TABLE_CELLS {
            return Err(ProbError::TableTooLarge { cells: want });
        }
        if mass.len() != want {
            return Err(ProbError::SizeMismatch {
                got: mass.len(),
                want,
            });
        }
        check_mass(&mass, INPUT_TOL)?;
        Ok(Self { variables, mass })
    }

    /// Builds the table by evaluating `f` on every index tuple.
    pub fn from_fn(variables: Vec<Alphabet>, f: impl Fn(&[usize]) -> f64) -> Result<Self> {
        let sizes: Vec<usize> = variables.iter().map(Alphabet::size).collect();
        let cells: usize = sizes.iter().product();
        let mut mass = Vec::with_capacity(cells);
        let mut tuple = vec![0usize; sizes.len()];
        for _ in 0..cells {
            mass.push(f(&tuple));
            advance_tuple(&mut tuple, &sizes);
        }
        Self::new(variables, mass)
    }

    pub fn variables(&self) -> &[Alphabet] {
        &self.variables
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// Number of cells in the dense table.
    pub fn cells(&self) -> usize {
        self.mass.len()
    }

    /// Product of all variable alphabet sizes — the denominator used by
    /// strong-typicality thresholds.
    pub fn full_alphabet_product(&self) -> usize {
        self.variables.iter().map(Alphabet::size).product()
    }

    /// Index of the variable labelled `label`.
    pub fn var_index(&self, label: &str) -> Result<usize> {
        self.variables
            .iter()
            .position(|a| a.label() == label)
            .ok_or_else(|| ProbError::UnknownVariable {
                label: label.to_string(),
            })
    }

    fn indices_for(&self, labels: &[&str]) -> Result<Vec<usize>> {
        labels.iter().map(|l| self.var_index(l)).collect()
    }

    /// Mass at one index tuple (one symbol per variable, in order).
    pub fn prob(&self, tuple: &[usize]) -> f64 {
        self.mass[self.flat_index(tuple)]
    }

    fn flat_index(&self, tuple: &[usize]) -> usize {
        assert_eq!(tuple.len(), self.variables.len(), "index tuple arity");
        let mut idx = 0;
        for (&t, a) in tuple.iter().zip(&self.variables) {
            assert!(t < a.size(), "symbol {} out of range for {}", t, a.label());
            idx = idx * a.size() + t;
        }
        idx
    }

    /// Marginal law over `keep`, preserving this law's variable order
    /// (the order of labels inside `keep` does not matter).
    pub fn marginalize(&self, keep: &[&str]) -> Result<JointLaw> {
        let keep_idx = self.indices_for(keep)?;
        let mut kept: Vec<usize> = (0..self.variables.len())
            .filter(|i| keep_idx.contains(i))
            .collect();
        kept.dedup();
        let sizes: Vec<usize> = self.variables.iter().map(Alphabet::size).collect();
        let out_vars: Vec<Alphabet> = kept.iter().map(|&i| self.variables[i].clone()).collect();
        let out_cells: usize = out_vars.iter().map(Alphabet::size).product();
        let mut out_mass = vec![0.0; out_cells];
        let mut tuple = vec![0usize; sizes.len()];
        for &m in &self.mass {
            let mut oi = 0;
            for &k in &kept {
                oi = oi * sizes[k] + tuple[k];
            }
            out_mass[oi] += m;
            advance_tuple(&mut tuple, &sizes);
        }
        // Summing a validated table can only wobble at rounding scale.
        let sum: f64 = out_mass.iter().sum();
        if (sum - 1.0).abs() > INPUT_TOL + INTERNAL_TOL {
            return Err(ProbError::InternalConsistency {
                what: "marginal mass".to_string(),
                value: sum,
            });
        }
        Ok(JointLaw {
            variables: out_vars,
            mass: out_mass,
        })
    }

    /// Joint entropy H over all variables, in nats.
    pub fn entropy(&self) -> f64 {
        neg_sum_p_ln_p(&self.mass)
    }

    /// Entropy of the marginal over `vars`, in nats.
    pub fn marginal_entropy(&self, vars: &[&str]) -> Result<f64> {
        Ok(self.marginalize(vars)?.entropy())
    }

    /// Conditional entropy H(target | given) = H(target, given) − H(given),
    /// in nats. `given` may be empty.
    pub fn conditional_entropy(&self, target: &[&str], given: &[&str]) -> Result<f64> {
        check_disjoint(target, given)?;
        let mut joint: Vec<&str> = target.to_vec();
        joint.extend_from_slice(given);
        let h_joint = self.marginal_entropy(&joint)?;
        let h_given = if given.is_empty() {
            0.0
        } else {
            self.marginal_entropy(given)?
        };
        Ok(h_joint - h_given)
    }

    /// (Conditional) mutual information I(a; b | given) in nats, computed
    /// as H(a|given) − H(a|b,given). Values in `[-1e-12, 0)` are clamped to
    /// zero; larger negatives indicate a broken table and are an error.
    pub fn mutual_information(&self, a: &[&str], b: &[&str], given: &[&str]) -> Result<f64> {
        check_disjoint(a, b)?;
        check_disjoint(a, given)?;
        check_disjoint(b, given)?;
        let mut b_given: Vec<&str> = b.to_vec();
        b_given.extend_from_slice(given);
        let mi = self.conditional_entropy(a, given)? - self.conditional_entropy(a, &b_given)?;
        if mi < -MI_CLAMP {
            return Err(ProbError::InternalConsistency {
                what: "mutual information".to_string(),
                value: mi,
            });
        }
        Ok(mi.max(0.0))
    }
}

fn check_disjoint(a: &[&str], b: &[&str]) -> Result<()> {
    for l in a {
        if b.contains(l) {
            return Err(ProbError::OverlappingSubsets {
                label: l.to_string(),
            });
        }
    }
    Ok(())
}

/// −Σ p ln p with `0 ln 0 = 0`.
fn neg_sum_p_ln_p(mass: &[f64]) -> f64 {
    let mut h = 0.0;
    for &p in mass {
        if p > 0.0 {
            h -= p * p.ln();
        }
    }
    h
}

/// Advances `tuple` through the mixed-radix counter defined by `sizes`
/// (last position fastest). Wraps to all zeros after the final tuple.
pub(crate) fn advance_tuple(tuple: &mut [usize], sizes: &[usize]) {
    for i in (0..tuple.len()).rev() {
        tuple[i] += 1;
        if tuple[i] < sizes[i] {
            return;
        }
        tuple[i] = 0;
    }
}

/// Binary entropy in nats.
pub fn binary_entropy(p: f64) -> f64 {
    neg_sum_p_ln_p(&[p, 1.0 - p])
}
