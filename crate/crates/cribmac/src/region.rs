//! Achievable-rate regions: auxiliary-law factorizations, per-law rate
//! pentagons, and the sampled union-of-pentagons search.
//!
//! A [`FactorizedLaw`] fixes the auxiliary variables `V` (the cooperation /
//! resolution layer) and `U` (the binning layer against the state) and
//! factorizes the joint distribution over `(V, S, U, X1, X2, Y)`:
//!
//! * strictly causal: `p(v) p(s) p(x1|v) p(u,x2|s,v) p(y|x1,x2,s)` —
//!   Encoder 2's input may depend on the state and the auxiliaries but not
//!   on Encoder 1's current symbol;
//! * causal: `p(v) p(s) p(x1|v) p(u|s,v) p(x2|v,u,s,x1) p(y|x1,x2,s)` —
//!   Encoder 2 may additionally condition on Encoder 1's current symbol.
//!
//! Each law yields the pentagon `{0 <= R1 <= H(X1|V), 0 <= R2 <=
//! I(U;Y|V,X1) - I(U;S|V), R1+R2 <= I(V,U,X1;Y) - I(U;S|V)}`; the region is
//! the union of pentagons over laws, reported as a convex hull with a
//! witness law per hull vertex.

use thiserror::Error;

use crate::channel::{ChannelError, MacChannel};
use crate::geometry::{self, clip_pentagon, convex_hull, Point};
use crate::probability::{Alphabet, CondPmf, JointLaw, Pmf, ProbError};
use crate::rng::seeded_rng;
use rand::Rng;

/// Whether Encoder 2 overhears Encoder 1's inputs up to the previous
/// letter (strictly causal) or including the current letter (causal).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CribMode {
    StrictlyCausal,
    Causal,
}

impl CribMode {
    /// Short token used in CLIs and file formats: `"sc"` or `"c"`.
    pub fn token(self) -> &'static str {
        match self {
            CribMode::StrictlyCausal => "sc",
            CribMode::Causal => "c",
        }
    }

    pub fn from_token(s: &str) -> Option<Self> {
        match s {
            "sc" => Some(CribMode::StrictlyCausal),
            "c" => Some(CribMode::Causal),
            _ => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum RegionError {
    #[error(transparent)]
    Prob(#[from] ProbError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("factor mismatch: {0}")]
    FactorMismatch(String),
    #[error("search budget too small: at least one sample is required")]
    BudgetTooSmall,
}

pub type Result<T> = std::result::Result<T, RegionError>;

/// Canonical variable labels for assembled joints.
pub const VAR_V: &str = "V";
pub const VAR_S: &str = "S";
pub const VAR_U: &str = "U";
pub const VAR_X1: &str = "X1";
pub const VAR_X2: &str = "X2";
pub const VAR_Y: &str = "Y";

/// Mode-specific conditional factors of a law.
#[derive(Debug, Clone, PartialEq)]
enum ModeFactors {
    /// `p(u, x2 | s, v)` with the target alphabet the composite `U x X2`
    /// (index `u * |X2| + x2`).
    Sc { p_ux2_given_sv: CondPmf },
    /// `p(u | s, v)` and `p(x2 | v, u, s, x1)`.
    C {
        p_u_given_sv: CondPmf,
        p_x2_given_vusx1: CondPmf,
    },
}

/// An auxiliary-law factorization for one crib mode.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorizedLaw {
    v: Alphabet,
    u: Alphabet,
    x1: Alphabet,
    x2: Alphabet,
    s: Alphabet,
    p_v: Pmf,
    p_x1_given_v: CondPmf,
    factors: ModeFactors,
}

impl FactorizedLaw {
    /// Builds a strictly-causal law. `p_ux2_given_sv` must condition on
    /// `[S, V]` in that order and target the composite `U x X2` alphabet
    /// (`u * |X2| + x2`).
    pub fn strictly_causal(
        u_size: usize,
        x2_size: usize,
        p_v: Pmf,
        p_x1_given_v: CondPmf,
        p_ux2_given_sv: CondPmf,
    ) -> Result<Self> {
        let v = p_v.support().clone();
        if p_x1_given_v.given() != std::slice::from_ref(&v) {
            return Err(RegionError::FactorMismatch(format!(
                "p(x1|v) must condition on exactly [{}]",
                v.label()
            )));
        }
        let given = p_ux2_given_sv.given();
        if given.len() != 2 || given[1] != v {
            return Err(RegionError::FactorMismatch(
                "p(u,x2|s,v) must condition on [S, V] with the same V".to_string(),
            ));
        }
        if p_ux2_given_sv.target().size() != u_size * x2_size {
            return Err(RegionError::FactorMismatch(format!(
                "p(u,x2|s,v) target has {} cells, want |U| * |X2| = {}",
                p_ux2_given_sv.target().size(),
                u_size * x2_size
            )));
        }
        Ok(Self {
            v,
            u: Alphabet::new(VAR_U, u_size)?,
            x1: p_x1_given_v.target().clone(),
            x2: Alphabet::new(VAR_X2, x2_size)?,
            s: given[0].clone(),
            p_v,
            p_x1_given_v,
            factors: ModeFactors::Sc { p_ux2_given_sv },
        })
    }

    /// Builds a causal law from `p(u|s,v)` (conditioning `[S, V]`) and
    /// `p(x2|v,u,s,x1)` (conditioning `[V, U, S, X1]`).
    pub fn causal(
        p_v: Pmf,
        p_x1_given_v: CondPmf,
        p_u_given_sv: CondPmf,
        p_x2_given_vusx1: CondPmf,
    ) -> Result<Self> {
        let v = p_v.support().clone();
        if p_x1_given_v.given() != std::slice::from_ref(&v) {
            return Err(RegionError::FactorMismatch(format!(
                "p(x1|v) must condition on exactly [{}]",
                v.label()
            )));
        }
        let gu = p_u_given_sv.given();
        if gu.len() != 2 || gu[1] != v {
            return Err(RegionError::FactorMismatch(
                "p(u|s,v) must condition on [S, V] with the same V".to_string(),
            ));
        }
        let u = p_u_given_sv.target().clone();
        let s = gu[0].clone();
        let x1 = p_x1_given_v.target().clone();
        let want = [v.clone(), u.clone(), s.clone(), x1.clone()];
        if p_x2_given_vusx1.given() != want {
            return Err(RegionError::FactorMismatch(
                "p(x2|v,u,s,x1) must condition on [V, U, S, X1] matching the other factors"
                    .to_string(),
            ));
        }
        Ok(Self {
            v,
            u,
            x1,
            x2: p_x2_given_vusx1.target().clone(),
            s,
            p_v,
            p_x1_given_v,
            factors: ModeFactors::C {
                p_u_given_sv,
                p_x2_given_vusx1,
            },
        })
    }

    pub fn mode(&self) -> CribMode {
        match self.factors {
            ModeFactors::Sc { .. } => CribMode::StrictlyCausal,
            ModeFactors::C { .. } => CribMode::Causal,
        }
    }

    pub fn v_size(&self) -> usize {
        self.v.size()
    }

    pub fn u_size(&self) -> usize {
        self.u.size()
    }

    pub fn x1_size(&self) -> usize {
        self.x1.size()
    }

    pub fn x2_size(&self) -> usize {
        self.x2.size()
    }

    pub fn s_size(&self) -> usize {
        self.s.size()
    }

    pub fn p_v(&self) -> &Pmf {
        &self.p_v
    }

    pub fn p_x1_given_v(&self) -> &CondPmf {
        &self.p_x1_given_v
    }

    /// The strictly-causal joint factor `p(u,x2|s,v)`, if this law is
    /// strictly causal.
    pub fn sc_factor(&self) -> Option<&CondPmf> {
        match &self.factors {
            ModeFactors::Sc { p_ux2_given_sv } => Some(p_ux2_given_sv),
            ModeFactors::C { .. } => None,
        }
    }

    /// The causal factors `(p(u|s,v), p(x2|v,u,s,x1))`, if this law is
    /// causal.
    pub fn causal_factors(&self) -> Option<(&CondPmf, &CondPmf)> {
        match &self.factors {
            ModeFactors::Sc { .. } => None,
            ModeFactors::C {
                p_u_given_sv,
                p_x2_given_vusx1,
            } => Some((p_u_given_sv, p_x2_given_vusx1)),
        }
    }

    /// `p(u,x2|s,v)` evaluated pointwise in either mode (causal laws
    /// average nothing: the product `p(u|s,v) p(x2|v,u,s,x1)` still depends
    /// on `x1`, so this accessor is only defined for strictly-causal laws).
    fn sc_prob(&self, s: usize, v: usize, u: usize, x2: usize) -> f64 {
        match &self.factors {
            ModeFactors::Sc { p_ux2_given_sv } => {
                p_ux2_given_sv.prob(&[s, v], u * self.x2.size() + x2)
            }
            ModeFactors::C { .. } => unreachable!("sc_prob called on a causal law"),
        }
    }

    /// The conditional `p(u | s, v)` rows (for strictly-causal laws, the
    /// `x2` marginal of the joint factor; for causal laws, the stored
    /// factor). Used for codeword generation.
    pub fn u_given_sv(&self) -> CondPmf {
        match &self.factors {
            ModeFactors::C { p_u_given_sv, .. } => p_u_given_sv.clone(),
            ModeFactors::Sc { .. } => {
                let xs = self.x2.size();
                CondPmf::from_fn(
                    vec![self.s.clone(), self.v.clone()],
                    self.u.clone(),
                    |g, u| (0..xs).map(|x2| self.sc_prob(g[0], g[1], u, x2)).sum(),
                )
                .expect("marginal of a valid factor is valid")
            }
        }
    }

    /// The conditional `p(x2 | s, v, u)` for strictly-causal sampling.
    /// Rows whose conditioning has zero probability default to uniform.
    pub fn x2_given_svu(&self) -> CondPmf {
        match &self.factors {
            ModeFactors::C { .. } => {
                unreachable!("strictly-causal x2 sampler requested from a causal law")
            }
            ModeFactors::Sc { .. } => {
                let xs = self.x2.size();
                CondPmf::from_fn(
                    vec![self.s.clone(), self.v.clone(), self.u.clone()],
                    self.x2.clone(),
                    |g, x2| {
                        let pu: f64 = (0..xs).map(|x| self.sc_prob(g[0], g[1], g[2], x)).sum();
                        if pu > 0.0 {
                            self.sc_prob(g[0], g[1], g[2], x2) / pu
                        } else {
                            1.0 / xs as f64
                        }
                    },
                )
                .expect("conditional of a valid factor is valid")
            }
        }
    }

    /// Re-expresses a strictly-causal law as a causal one: `p(u|s,v)` is
    /// the factor's marginal and `p(x2|v,u,s,x1)` copies `p(x2|s,v,u)`,
    /// ignoring `x1`. Assembled joints are identical up to rounding.
    pub fn to_causal(&self) -> FactorizedLaw {
        match &self.factors {
            ModeFactors::C { .. } => self.clone(),
            ModeFactors::Sc { .. } => {
                let p_u_given_sv = self.u_given_sv();
                let x2_rows = self.x2_given_svu();
                let p_x2 = CondPmf::from_fn(
                    vec![
                        self.v.clone(),
                        self.u.clone(),
                        self.s.clone(),
                        self.x1.clone(),
                    ],
                    self.x2.clone(),
                    |g, x2| x2_rows.prob(&[g[2], g[0], g[1]], x2),
                )
                .expect("row copies of a valid conditional are valid");
                FactorizedLaw {
                    v: self.v.clone(),
                    u: self.u.clone(),
                    x1: self.x1.clone(),
                    x2: self.x2.clone(),
                    s: self.s.clone(),
                    p_v: self.p_v.clone(),
                    p_x1_given_v: self.p_x1_given_v.clone(),
                    factors: ModeFactors::C {
                        p_u_given_sv,
                        p_x2_given_vusx1: p_x2,
                    },
                }
            }
        }
    }

    /// Embeds the law into larger auxiliary alphabets by appending
    /// zero-probability `V` letters and zero-probability `U` letters.
    /// Sizes below the current ones are clamped (never truncated). The
    /// assembled joint — and therefore the rate pentagon — is unchanged;
    /// the padding only widens the space a refinement step can move in.
    pub fn pad(&self, v_size: usize, u_size: usize) -> FactorizedLaw {
        let new_v = self.v.size().max(v_size);
        let new_u = self.u.size().max(u_size);
        if new_v == self.v.size() && new_u == self.u.size() {
            return self.clone();
        }
        let old_v = self.v.size();
        let old_u = self.u.size();
        let v = Alphabet::new(VAR_V, new_v).expect("positive size");
        let x1n = self.x1.size();
        let p_v = Pmf::new(
            v.clone(),
            (0..new_v)
                .map(|i| if i < old_v { self.p_v.prob(i) } else { 0.0 })
                .collect(),
        )
        .expect("zero-padded simplex row is valid");
        let p_x1 = CondPmf::from_fn(vec![v.clone()], self.x1.clone(), |g, t| {
            // Rows for the new zero-mass letters just need to be valid.
            if g[0] < old_v {
                self.p_x1_given_v.prob(&[g[0]], t)
            } else {
                1.0 / x1n as f64
            }
        })
        .expect("padded rows are valid");
        let x2n = self.x2.size();
        match &self.factors {
            ModeFactors::Sc { .. } => {
                let target = Alphabet::new("UX2", new_u * x2n).expect("positive size");
                let p_ux2 = CondPmf::from_fn(vec![self.s.clone(), v], target, |g, t| {
                    let (u, x2) = (t / x2n, t % x2n);
                    if g[1] >= old_v {
                        1.0 / (new_u * x2n) as f64
                    } else if u < old_u {
                        self.sc_prob(g[0], g[1], u, x2)
                    } else {
                        0.0
                    }
                })
                .expect("padded rows are valid");
                FactorizedLaw::strictly_causal(new_u, x2n, p_v, p_x1, p_ux2)
                    .expect("padding preserves consistency")
            }
            ModeFactors::C {
                p_u_given_sv,
                p_x2_given_vusx1,
            } => {
                let u = Alphabet::new(VAR_U, new_u).expect("positive size");
                let p_u = CondPmf::from_fn(vec![self.s.clone(), v.clone()], u.clone(), |g, t| {
                    if g[1] >= old_v {
                        1.0 / new_u as f64
                    } else if t < old_u {
                        p_u_given_sv.prob(&[g[0], g[1]], t)
                    } else {
                        0.0
                    }
                })
                .expect("padded rows are valid");
                let p_x2 = CondPmf::from_fn(
                    vec![v, u, self.s.clone(), self.x1.clone()],
                    self.x2.clone(),
                    |g, t| {
                        if g[0] < old_v && g[1] < old_u {
                            p_x2_given_vusx1.prob(&[g[0], g[1], g[2], g[3]], t)
                        } else {
                            1.0 / x2n as f64
                        }
                    },
                )
                .expect("padded rows are valid");
                FactorizedLaw::causal(p_v, p_x1, p_u, p_x2).expect("padding preserves consistency")
            }
        }
    }

    fn check_against(&self, c: &MacChannel) -> Result<()> {
        let checks = [
            ("X1", self.x1.size(), c.x1().size()),
            ("X2", self.x2.size(), c.x2().size()),
            ("S", self.s.size(), c.s().size()),
        ];
        for (what, law, chan) in checks {
            if law != chan {
                return Err(RegionError::FactorMismatch(format!(
                    "law {what} alphabet has {law} symbols, channel has {chan}"
                )));
            }
        }
        Ok(())
    }

    /// Assembles the full joint law over `(V, S, U, X1, X2, Y)` by
    /// multiplying the factors with the channel's state and transition
    /// laws.
    pub fn assemble_joint(&self, c: &MacChannel) -> Result<JointLaw> {
        self.check_against(c)?;
        let vars = vec![
            Alphabet::new(VAR_V, self.v.size())?,
            Alphabet::new(VAR_S, self.s.size())?,
            Alphabet::new(VAR_U, self.u.size())?,
            Alphabet::new(VAR_X1, self.x1.size())?,
            Alphabet::new(VAR_X2, self.x2.size())?,
            Alphabet::new(VAR_Y, c.y().size())?,
        ];
        let joint = JointLaw::from_fn(vars, |t| {
            let (v, s, u, x1, x2, y) = (t[0], t[1], t[2], t[3], t[4], t[5]);
            let base = self.p_v.prob(v)
                * c.state().prob(s)
                * self.p_x1_given_v.prob(&[v], x1)
                * c.law().prob(&[x1, x2, s], y);
            let factor = match &self.factors {
                ModeFactors::Sc { .. } => self.sc_prob(s, v, u, x2),
                ModeFactors::C {
                    p_u_given_sv,
                    p_x2_given_vusx1,
                } => p_u_given_sv.prob(&[s, v], u) * p_x2_given_vusx1.prob(&[v, u, s, x1], x2),
            };
            base * factor
        })?;
        Ok(joint)
    }
}

/// The three rate caps defining one law's pentagon (nats per channel use).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePentagon {
    pub r1_max: f64,
    pub r2_max: f64,
    pub sum_max: f64,
}

impl RatePentagon {
    /// Support value of the pentagon in direction `(1, lambda)`; `lambda =
    /// +inf` is the pure-`R2` direction.
    pub fn support(&self, lambda: f64) -> f64 {
        if lambda.is_infinite() {
            return self.r2_max.min(self.sum_max);
        }
        pentagon_to_polygon(self)
            .iter()
            .map(|&(x, y)| x + lambda * y)
            .fold(0.0_f64, f64::max)
    }
}

/// Signed bound values before clamping: the binning penalty may exceed the
/// channel gains, in which case the slacks go negative. The search keeps
/// the sign so refinement still has a gradient inside that regime.
#[derive(Debug, Clone, Copy)]
struct RawCaps {
    r1: f64,
    r2_slack: f64,
    sum_slack: f64,
}

impl RawCaps {
    fn clamp(&self) -> RatePentagon {
        // Mutual-information differences carry ~1e-15 of floating-point
        // dust; snap it so a structurally zero slack (e.g. an auxiliary
        // independent of the state) yields an exactly degenerate pentagon.
        let snap = |x: f64| if x.abs() < 1e-12 { 0.0 } else { x };
        RatePentagon {
            r1_max: self.r1,
            r2_max: snap(self.r2_slack).max(0.0),
            sum_max: snap(self.sum_slack).max(0.0),
        }
    }
}

fn raw_caps(c: &MacChannel, f: &FactorizedLaw) -> Result<RawCaps> {
    let joint = f.assemble_joint(c)?;
    let r1 = joint.conditional_entropy(&[VAR_X1], &[VAR_V])?;
    let penalty = joint.mutual_information(&[VAR_U], &[VAR_S], &[VAR_V])?;
    let gain_r2 = joint.mutual_information(&[VAR_U], &[VAR_Y], &[VAR_V, VAR_X1])?;
    let gain_sum = joint.mutual_information(&[VAR_V, VAR_U, VAR_X1], &[VAR_Y], &[])?;
    Ok(RawCaps {
        r1,
        r2_slack: gain_r2 - penalty,
        sum_slack: gain_sum - penalty,
    })
}

/// Evaluates the three bounds for a law on a channel. `r2_max` and
/// `sum_max` are clamped at zero (a law with a useless binning layer can
/// still contribute its `R1` cap).
pub fn rate_pentagon(c: &MacChannel, f: &FactorizedLaw) -> Result<RatePentagon> {
    Ok(raw_caps(c, f)?.clamp())
}

/// Counterclockwise vertices of the pentagon's rate polygon.
pub fn pentagon_to_polygon(p: &RatePentagon) -> Vec<Point> {
    clip_pentagon(p.r1_max, p.r2_max, p.sum_max)
}

/// The largest auxiliary `V` alphabet the searcher ever needs for this
/// channel (beyond it the region provably cannot grow).
pub fn v_bound(c: &MacChannel) -> usize {
    c.x1().size() * c.x2().size() * c.s().size() + 5
}

/// The largest auxiliary `U` alphabet needed once `|V|` is fixed.
pub fn u_bound(c: &MacChannel, v_size: usize) -> usize {
    c.x1().size() * c.x2().size() * c.s().size() * v_size + 2
}

/// Search configuration. `v_size`/`u_size` of `None` mean "the proven
/// bound, capped at 4 and 8 respectively" — large enough for small
/// channels, small enough for desk-scale runtime.
#[derive(Debug, Clone)]
pub struct SearchConfig {
    pub samples: usize,
    pub refine: usize,
    pub v_size: Option<usize>,
    pub u_size: Option<usize>,
    pub seed: u64,
    /// Warm starts: laws included verbatim and also refined per objective,
    /// after the random samples. Useful for continuing a search at larger
    /// auxiliary cardinalities via [`FactorizedLaw::pad`]. Each law must
    /// fit the channel; its own alphabet sizes are used as-is.
    pub starts: Vec<FactorizedLaw>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            samples: 512,
            refine: 6,
            v_size: None,
            u_size: None,
            seed: crate::rng::DEFAULT_SEED,
            starts: Vec::new(),
        }
    }
}

pub const DEFAULT_V_CAP: usize = 4;
pub const DEFAULT_U_CAP: usize = 8;

/// One boundary sample of a region: a rate point plus the index of the law
/// that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePoint {
    pub point: Point,
    pub law: usize,
}

/// A sampled union of rate pentagons: every pentagon vertex found, the
/// convex hull, and a witness law per hull vertex.
#[derive(Debug, Clone)]
pub struct RateRegion {
    points: Vec<RatePoint>,
    hull: Vec<Point>,
    hull_witness: Vec<usize>,
    laws: Vec<FactorizedLaw>,
    pentagons: Vec<RatePentagon>,
}

impl RateRegion {
    /// All recorded pentagon vertices (deduplicated), with law indices.
    pub fn points(&self) -> &[RatePoint] {
        &self.points
    }

    /// Convex hull, counterclockwise from the lexicographically smallest
    /// vertex.
    pub fn hull(&self) -> &[Point] {
        &self.hull
    }

    /// For each hull vertex, the index of its witness law (earliest law
    /// achieving that vertex).
    pub fn hull_witnesses(&self) -> &[usize] {
        &self.hull_witness
    }

    pub fn laws(&self) -> &[FactorizedLaw] {
        &self.laws
    }

    pub fn pentagons(&self) -> &[RatePentagon] {
        &self.pentagons
    }

    /// Membership with sup-norm tolerance.
    pub fn contains(&self, point: Point, tol: f64) -> bool {
        geometry::hull_contains_point(&self.hull, point, tol)
    }

    /// Largest achievable `R2` on the hull.
    pub fn max_r2(&self) -> f64 {
        self.hull.iter().map(|p| p.1).fold(0.0_f64, f64::max)
    }

    /// Largest achievable `R1` on the hull.
    pub fn max_r1(&self) -> f64 {
        self.hull.iter().map(|p| p.0).fold(0.0_f64, f64::max)
    }
}

/// Membership test with sup-norm tolerance (free-function form).
pub fn region_contains(r: &RateRegion, point: Point, tol: f64) -> bool {
    r.contains(point, tol)
}

/// Internal mutable view of a law's free parameters: every probability row
/// as an independent simplex block.
struct LawBlocks {
    mode: CribMode,
    v_size: usize,
    u_size: usize,
    x1_size: usize,
    x2_size: usize,
    s_size: usize,
    blocks: Vec<Vec<f64>>,
}

impl LawBlocks {
    fn from_law(f: &FactorizedLaw) -> Self {
        let mut blocks = vec![f.p_v.mass().to_vec()];
        for v in 0..f.v_size() {
            blocks.push(f.p_x1_given_v.row(&[v]).to_vec());
        }
        match &f.factors {
            ModeFactors::Sc { p_ux2_given_sv } => {
                for s in 0..f.s_size() {
                    for v in 0..f.v_size() {
                        blocks.push(p_ux2_given_sv.row(&[s, v]).to_vec());
                    }
                }
            }
            ModeFactors::C {
                p_u_given_sv,
                p_x2_given_vusx1,
            } => {
                for s in 0..f.s_size() {
                    for v in 0..f.v_size() {
                        blocks.push(p_u_given_sv.row(&[s, v]).to_vec());
                    }
                }
                for v in 0..f.v_size() {
                    for u in 0..f.u_size() {
                        for s in 0..f.s_size() {
                            for x1 in 0..f.x1_size() {
                                blocks.push(p_x2_given_vusx1.row(&[v, u, s, x1]).to_vec());
                            }
                        }
                    }
                }
            }
        }
        Self {
            mode: f.mode(),
            v_size: f.v_size(),
            u_size: f.u_size(),
            x1_size: f.x1_size(),
            x2_size: f.x2_size(),
            s_size: f.s_size(),
            blocks,
        }
    }

    fn to_law(&self) -> FactorizedLaw {
        let v = Alphabet::new(VAR_V, self.v_size).expect("positive size");
        let x1 = Alphabet::new(VAR_X1, self.x1_size).expect("positive size");
        let s = Alphabet::new(VAR_S, self.s_size).expect("positive size");
        let p_v = Pmf::new(v.clone(), self.blocks[0].clone()).expect("simplex block");
        let x1_rows: Vec<f64> = self.blocks[1..1 + self.v_size]
            .iter()
            .flatten()
            .copied()
            .collect();
        let p_x1_given_v =
            CondPmf::new(vec![v.clone()], x1.clone(), x1_rows).expect("simplex blocks");
        let base = 1 + self.v_size;
        match self.mode {
            CribMode::StrictlyCausal => {
                let rows: Vec<f64> = self.blocks[base..base + self.s_size * self.v_size]
                    .iter()
                    .flatten()
                    .copied()
                    .collect();
                let target = Alphabet::new("UX2", self.u_size * self.x2_size).expect("size");
                let p_ux2 = CondPmf::new(vec![s, v], target, rows).expect("simplex blocks");
                FactorizedLaw::strictly_causal(self.u_size, self.x2_size, p_v, p_x1_given_v, p_ux2)
                    .expect("block law is consistent")
            }
            CribMode::Causal => {
                let u = Alphabet::new(VAR_U, self.u_size).expect("positive size");
                let x2 = Alphabet::new(VAR_X2, self.x2_size).expect("positive size");
                let n_u_rows = self.s_size * self.v_size;
                let u_rows: Vec<f64> = self.blocks[base..base + n_u_rows]
                    .iter()
                    .flatten()
                    .copied()
                    .collect();
                let p_u = CondPmf::new(vec![s.clone(), v.clone()], u.clone(), u_rows)
                    .expect("simplex blocks");
                let x2_rows: Vec<f64> = self.blocks[base + n_u_rows..]
                    .iter()
                    .flatten()
                    .copied()
                    .collect();
                let p_x2 =
                    CondPmf::new(vec![v, u, s, x1.clone()], x2, x2_rows).expect("simplex blocks");
                // p_x1_given_v takes x1 by clone above; rebuild with the
                // original to keep alphabets shared.
                FactorizedLaw::causal(p_v, p_x1_given_v, p_u, p_x2)
                    .expect("block law is consistent")
            }
        }
    }
}

fn dirichlet_row(rng: &mut impl Rng, k: usize) -> Vec<f64> {
    // Symmetric Dirichlet(1) = uniform over the simplex, via normalized
    // exponentials.
    let mut row: Vec<f64> = (0..k)
        .map(|_| {
            let x: f64 = rng.gen::<f64>();
            -(1.0 - x).ln()
        })
        .collect();
    let sum: f64 = row.iter().sum();
    if sum <= 0.0 {
        return vec![1.0 / k as f64; k];
    }
    for r in &mut row {
        *r /= sum;
    }
    row
}

fn sample_law<R: Rng>(
    mode: CribMode,
    c: &MacChannel,
    v_size: usize,
    u_size: usize,
    rng: &mut R,
) -> FactorizedLaw {
    let v = Alphabet::new(VAR_V, v_size).expect("positive size");
    let x1 = Alphabet::new(VAR_X1, c.x1().size()).expect("positive size");
    let x2 = Alphabet::new(VAR_X2, c.x2().size()).expect("positive size");
    let s = Alphabet::new(VAR_S, c.s().size()).expect("positive size");
    let u = Alphabet::new(VAR_U, u_size).expect("positive size");
    let p_v = Pmf::new(v.clone(), dirichlet_row(rng, v_size)).expect("simplex row");
    let x1_rows: Vec<f64> = (0..v_size)
        .flat_map(|_| dirichlet_row(rng, x1.size()))
        .collect();
    let p_x1 = CondPmf::new(vec![v.clone()], x1.clone(), x1_rows).expect("simplex rows");
    // Half of the samples make the auxiliary independent of the state
    // given V, which zeroes the binning penalty. At large |U| a fully
    // random conditional almost surely has penalty above gain (an empty
    // pentagon), so the blind half supplies feasible starting points and
    // refinement reintroduces state correlation only where it pays.
    let blind = rng.gen_bool(0.5);
    let state_rows = |rng: &mut R, width: usize| -> Vec<f64> {
        if blind {
            let base: Vec<Vec<f64>> = (0..v_size).map(|_| dirichlet_row(rng, width)).collect();
            (0..c.s().size()).flat_map(|_| base.concat()).collect()
        } else {
            (0..c.s().size() * v_size)
                .flat_map(|_| dirichlet_row(rng, width))
                .collect()
        }
    };
    match mode {
        CribMode::StrictlyCausal => {
            let target = Alphabet::new("UX2", u_size * x2.size()).expect("size");
            let rows = state_rows(rng, target.size());
            let p_ux2 = CondPmf::new(vec![s, v], target, rows).expect("simplex rows");
            FactorizedLaw::strictly_causal(u_size, x2.size(), p_v, p_x1, p_ux2)
                .expect("sampled law is consistent")
        }
        CribMode::Causal => {
            let u_rows = state_rows(rng, u_size);
            let p_u =
                CondPmf::new(vec![s.clone(), v.clone()], u.clone(), u_rows).expect("simplex rows");
            let x2_rows: Vec<f64> = (0..v_size * u_size * s.size() * x1.size())
                .flat_map(|_| dirichlet_row(rng, x2.size()))
                .collect();
            let p_x2 = CondPmf::new(vec![v, u, s, x1], x2, x2_rows).expect("simplex rows");
            FactorizedLaw::causal(p_v, p_x1, p_u, p_x2).expect("sampled law is consistent")
        }
    }
}

/// Hill-climb objectives: the three raw bounds plus directional supports.
#[derive(Debug, Clone, Copy)]
enum Objective {
    R1Cap,
    R2Cap,
    SumCap,
    Support(f64),
}

const SUPPORT_LAMBDAS: [f64; 7] = [0.0, 0.25, 0.5, 1.0, 2.0, 4.0, f64::INFINITY];

impl Objective {
    fn all() -> Vec<Objective> {
        let mut v = vec![Objective::R1Cap, Objective::R2Cap, Objective::SumCap];
        v.extend(SUPPORT_LAMBDAS.iter().map(|&l| Objective::Support(l)));
        v
    }

    /// Guidance value on the signed caps. For a law whose sum slack is
    /// negative the pentagon is empty and every clamped objective is a
    /// flat zero; returning the signed slack instead keeps the climb
    /// moving toward feasibility. On feasible laws this agrees exactly
    /// with the corresponding clamped-pentagon quantity.
    fn eval(&self, raw: &RawCaps) -> f64 {
        match *self {
            Objective::R1Cap => {
                if raw.sum_slack <= 0.0 {
                    raw.sum_slack
                } else {
                    raw.r1
                }
            }
            Objective::R2Cap => raw.r2_slack,
            Objective::SumCap => raw.sum_slack,
            Objective::Support(l) => {
                if raw.sum_slack <= 0.0 {
                    raw.sum_slack
                } else {
                    raw.clamp().support(l)
                }
            }
        }
    }
}

/// Per-row move cap during hill climbing; beyond this many ordered pairs a
/// deterministic pseudorandom subset is used.
const MAX_MOVES_PER_ROW: usize = 40;

fn row_move_pairs(len: usize, seed: u64, row: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(len * (len - 1));
    for a in 0..len {
        for b in 0..len {
            if a != b {
                pairs.push((a, b));
            }
        }
    }
    if pairs.len() > MAX_MOVES_PER_ROW {
        // Deterministic subset: Fisher-Yates with a stream derived from the
        // search seed and row index only, so the choice is stable across
        // sample counts.
        let mut rng = seeded_rng(seed, 0x90B5, row as u64);
        for i in (1..pairs.len()).rev() {
            let j = rng.gen_range(0..=i);
            pairs.swap(i, j);
        }
        pairs.truncate(MAX_MOVES_PER_ROW);
    }
    pairs
}

fn hill_climb(
    c: &MacChannel,
    start: &FactorizedLaw,
    objective: Objective,
    iterations: usize,
    seed: u64,
) -> Result<FactorizedLaw> {
    let mut state = LawBlocks::from_law(start);
    let mut best_law = start.clone();
    let mut best = objective.eval(&raw_caps(c, &best_law)?);
    for iter in 0..iterations {
        let step = 0.5 / (1u64 << iter) as f64;
        for row in 0..state.blocks.len() {
            let len = state.blocks[row].len();
            if len < 2 {
                continue;
            }
            // Steepest-ascent within the row: try the allowed mass moves
            // and keep the best improving one. Moves are written from a
            // snapshot and restored by copy so rounding never leaves a
            // stray negative cell behind.
            let snapshot = state.blocks[row].clone();
            let mut row_best: Option<((usize, usize, f64), f64)> = None;
            for (a, b) in row_move_pairs(len, seed, row) {
                // Two candidate step sizes per pair: the geometric step, and
                // a full transfer that lands exactly on the boundary of the
                // simplex (optima frequently sit on faces, which partial
                // steps only approach asymptotically).
                let partial = step.min(snapshot[a]);
                for delta in [partial, snapshot[a]] {
                    if delta <= 0.0 {
                        continue;
                    }
                    state.blocks[row][a] = snapshot[a] - delta;
                    state.blocks[row][b] = snapshot[b] + delta;
                    let cand = objective.eval(&raw_caps(c, &state.to_law())?);
                    state.blocks[row].copy_from_slice(&snapshot);
                    if cand > best + 1e-12 && row_best.map_or(true, |(_, v)| cand > v) {
                        row_best = Some(((a, b, delta), cand));
                    }
                    if delta >= snapshot[a] {
                        break;
                    }
                }
            }
            if let Some(((a, b, delta), val)) = row_best {
                state.blocks[row][a] = snapshot[a] - delta;
                state.blocks[row][b] = snapshot[b] + delta;
                best = val;
                best_law = state.to_law();
            }
        }
    }
    Ok(best_law)
}

/// Searches the achievable region: Dirichlet-random laws plus hill-climb
/// refinement from the best law of each power-of-two sample prefix, per
/// objective. Deterministic given the seed, and monotone under doubling of
/// `samples`: earlier prefixes (and hence their refined laws) are reused
/// verbatim.
pub fn search_region(c: &MacChannel, mode: CribMode, cfg: &SearchConfig) -> Result<RateRegion> {
    if cfg.samples == 0 {
        return Err(RegionError::BudgetTooSmall);
    }
    let v_size = cfg
        .v_size
        .unwrap_or_else(|| v_bound(c).min(DEFAULT_V_CAP))
        .max(1);
    let u_size = cfg
        .u_size
        .unwrap_or_else(|| u_bound(c, v_size).min(DEFAULT_U_CAP))
        .max(1);

    let mut laws: Vec<FactorizedLaw> = Vec::new();
    let mut pentagons: Vec<RatePentagon> = Vec::new();
    let mut raws: Vec<RawCaps> = Vec::new();
    let push_law = |laws: &mut Vec<FactorizedLaw>,
                    pentagons: &mut Vec<RatePentagon>,
                    raws: &mut Vec<RawCaps>,
                    law: FactorizedLaw|
     -> Result<usize> {
        let raw = raw_caps(c, &law)?;
        laws.push(law);
        pentagons.push(raw.clamp());
        raws.push(raw);
        Ok(laws.len() - 1)
    };

    for i in 0..cfg.samples {
        let mut rng = seeded_rng(cfg.seed, 0x5A3B, i as u64);
        let law = sample_law(mode, c, v_size, u_size, &mut rng);
        push_law(&mut laws, &mut pentagons, &mut raws, law)?;
    }
    let sample_count = laws.len();

    if cfg.refine > 0 {
        // Power-of-two prefixes: refinement from prefix P is identical for
        // every sample budget >= P, which makes the hull monotone in
        // `samples`.
        let mut prefixes = Vec::new();
        let mut p = 64usize.min(cfg.samples);
        loop {
            prefixes.push(p);
            if p >= cfg.samples {
                break;
            }
            p = (p * 2).min(cfg.samples);
        }
        for prefix in prefixes {
            for objective in Objective::all() {
                let best_start = (0..prefix)
                    .max_by(|&a, &b| {
                        objective
                            .eval(&raws[a])
                            .total_cmp(&objective.eval(&raws[b]))
                    })
                    .expect("prefix is nonempty");
                let refined = hill_climb(c, &laws[best_start], objective, cfg.refine, cfg.seed)?;
                push_law(&mut laws, &mut pentagons, &mut raws, refined)?;
            }
        }
    }
    for start in &cfg.starts {
        push_law(&mut laws, &mut pentagons, &mut raws, start.clone())?;
        if cfg.refine > 0 {
            for objective in Objective::all() {
                let refined = hill_climb(c, start, objective, cfg.refine, cfg.seed)?;
                push_law(&mut laws, &mut pentagons, &mut raws, refined)?;
            }
        }
    }
    let _ = sample_count;

    // Collect pentagon vertices with their law indices, dedupe exactly,
    // then take the hull. Witnesses pick the earliest law per vertex.
    let mut points: Vec<RatePoint> = Vec::new();
    for (idx, pent) in pentagons.iter().enumerate() {
        for v in pentagon_to_polygon(pent) {
            points.push(RatePoint { point: v, law: idx });
        }
    }
    points.sort_by(|a, b| {
        a.point
            .0
            .total_cmp(&b.point.0)
            .then(a.point.1.total_cmp(&b.point.1))
            .then(a.law.cmp(&b.law))
    });
    points.dedup_by(|a, b| a.point == b.point);

    let hull = convex_hull(&points.iter().map(|p| p.point).collect::<Vec<_>>());
    let hull_witness: Vec<usize> = hull
        .iter()
        .map(|hv| {
            points
                .iter()
                .find(|p| p.point == *hv)
                .map(|p| p.law)
                .expect("hull vertices come from the point set")
        })
        .collect();

    Ok(RateRegion {
        points,
        hull,
        hull_witness,
        laws,
        pentagons,
    })
}
