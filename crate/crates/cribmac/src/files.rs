//! File formats: JSON channel and law descriptions, witness sidecars, CSV
//! reports, atomic writes, and the config hash embedded in report headers.
//!
//! Structured inputs are JSON; tabular outputs are CSV whose leading `#`
//! comment lines carry the tool version, a 64-bit FNV-1a hash of the run
//! configuration, and the seed, so any report can be traced back to the
//! exact invocation that produced it.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{ChannelError, MacChannel};
use crate::probability::{Alphabet, CondPmf, Pmf, ProbError};
use crate::region::{
    CribMode, FactorizedLaw, RateRegion, RegionError, VAR_S, VAR_U, VAR_V, VAR_X1, VAR_X2, VAR_Y,
};
use crate::sim::TrialReport;

pub type Result<T> = std::result::Result<T, FilesError>;

#[derive(Debug, Error)]
pub enum FilesError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    /// The wrapped `serde_json` message includes line/column positions.
    #[error("malformed JSON in {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("bad {what} in {path}: {detail}")]
    Shape {
        path: String,
        what: String,
        detail: String,
    },
    #[error(transparent)]
    Prob(#[from] ProbError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Region(#[from] RegionError),
}

fn io_err(path: &Path, source: std::io::Error) -> FilesError {
    FilesError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn shape_err(path: &str, what: &str, detail: String) -> FilesError {
    FilesError::Shape {
        path: path.to_string(),
        what: what.to_string(),
        detail,
    }
}

// ---------------------------------------------------------------------------
// Channel files
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphabetSizes {
    pub x1: usize,
    pub x2: usize,
    pub s: usize,
    pub y: usize,
}

/// On-disk channel description: alphabet sizes, the state PMF, and the
/// channel law as a nested array indexed `[x1][x2][s][y]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelFile {
    pub sizes: AlphabetSizes,
    pub state: Vec<f64>,
    pub law: Vec<Vec<Vec<Vec<f64>>>>,
}

impl ChannelFile {
    /// Canonical echo of an in-memory channel; serializing this is the
    /// normalized form the CLI prints after validating an input file.
    pub fn from_channel(c: &MacChannel) -> Self {
        let (nx1, nx2, ns, ny) = (c.x1().size(), c.x2().size(), c.s().size(), c.y().size());
        let law = (0..nx1)
            .map(|x1| {
                (0..nx2)
                    .map(|x2| (0..ns).map(|s| c.row(x1, x2, s).to_vec()).collect())
                    .collect()
            })
            .collect();
        Self {
            sizes: AlphabetSizes {
                x1: nx1,
                x2: nx2,
                s: ns,
                y: ny,
            },
            state: c.state().mass().to_vec(),
            law,
        }
    }

    /// Validates shapes and probability constraints and builds the channel.
    /// `origin` names the source (file path) for diagnostics.
    pub fn to_channel(&self, origin: &str) -> Result<MacChannel> {
        let sz = &self.sizes;
        if sz.x1 == 0 || sz.x2 == 0 || sz.s == 0 || sz.y == 0 {
            return Err(shape_err(
                origin,
                "sizes",
                "all alphabet sizes must be >= 1".into(),
            ));
        }
        if self.state.len() != sz.s {
            return Err(shape_err(
                origin,
                "state",
                format!(
                    "state PMF has {} entries, sizes.s = {}",
                    self.state.len(),
                    sz.s
                ),
            ));
        }
        if self.law.len() != sz.x1 {
            return Err(shape_err(
                origin,
                "law",
                format!("law has {} x1-slices, sizes.x1 = {}", self.law.len(), sz.x1),
            ));
        }
        for (i, bx2) in self.law.iter().enumerate() {
            if bx2.len() != sz.x2 {
                return Err(shape_err(
                    origin,
                    "law",
                    format!("law[{i}] has {} x2-slices, sizes.x2 = {}", bx2.len(), sz.x2),
                ));
            }
            for (j, bs) in bx2.iter().enumerate() {
                if bs.len() != sz.s {
                    return Err(shape_err(
                        origin,
                        "law",
                        format!(
                            "law[{i}][{j}] has {} s-slices, sizes.s = {}",
                            bs.len(),
                            sz.s
                        ),
                    ));
                }
                for (k, by) in bs.iter().enumerate() {
                    if by.len() != sz.y {
                        return Err(shape_err(
                            origin,
                            "law",
                            format!(
                                "law[{i}][{j}][{k}] has {} y-entries, sizes.y = {}",
                                by.len(),
                                sz.y
                            ),
                        ));
                    }
                }
            }
        }
        let c = MacChannel::from_fn(
            Alphabet::new(VAR_X1, sz.x1)?,
            Alphabet::new(VAR_X2, sz.x2)?,
            Alphabet::new(VAR_S, sz.s)?,
            Alphabet::new(VAR_Y, sz.y)?,
            self.state.clone(),
            |x1, x2, s, y| self.law[x1][x2][s][y],
        )?;
        Ok(c)
    }

    pub fn canonical_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("channel echo serializes");
        out.push('\n');
        out
    }
}

/// Loads and validates a channel file, returning the channel and its
/// canonical echo.
pub fn load_channel(path: &Path) -> Result<(MacChannel, ChannelFile)> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let file: ChannelFile = serde_json::from_str(&text).map_err(|e| FilesError::Json {
        path: path.display().to_string(),
        source: e,
    })?;
    let channel = file.to_channel(&path.display().to_string())?;
    let echo = ChannelFile::from_channel(&channel);
    Ok((channel, echo))
}

// ---------------------------------------------------------------------------
// Law files
// ---------------------------------------------------------------------------

/// On-disk auxiliary-law description. `mode` selects which factor fields are
/// required: `"sc"` uses `p_ux2_given_sv` (indexed `[s][v][u][x2]`), `"c"`
/// uses `p_u_given_sv` (`[s][v][u]`) and `p_x2_given_vusx1`
/// (`[v][u][s][x1][x2]`). `p_x1_given_v` is indexed `[v][x1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawFile {
    pub mode: String,
    pub v: usize,
    pub u: usize,
    pub p_v: Vec<f64>,
    pub p_x1_given_v: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_ux2_given_sv: Option<Vec<Vec<Vec<Vec<f64>>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_u_given_sv: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_x2_given_vusx1: Option<Vec<Vec<Vec<Vec<Vec<f64>>>>>>,
}

impl LawFile {
    pub fn from_law(f: &FactorizedLaw) -> Self {
        let (nv, nu, nx1, nx2, ns) = (f.v_size(), f.u_size(), f.x1_size(), f.x2_size(), f.s_size());
        let p_x1_given_v = (0..nv)
            .map(|v| f.p_x1_given_v().row(&[v]).to_vec())
            .collect::<Vec<_>>();
        let mut out = Self {
            mode: f.mode().token().to_string(),
            v: nv,
            u: nu,
            p_v: f.p_v().mass().to_vec(),
            p_x1_given_v,
            p_ux2_given_sv: None,
            p_u_given_sv: None,
            p_x2_given_vusx1: None,
        };
        match f.mode() {
            CribMode::StrictlyCausal => {
                let joint = f.sc_factor().expect("sc law has the composite factor");
                out.p_ux2_given_sv = Some(
                    (0..ns)
                        .map(|s| {
                            (0..nv)
                                .map(|v| {
                                    let row = joint.row(&[s, v]);
                                    (0..nu)
                                        .map(|u| row[u * nx2..(u + 1) * nx2].to_vec())
                                        .collect()
                                })
                                .collect()
                        })
                        .collect(),
                );
            }
            CribMode::Causal => {
                let (pu, px2) = f.causal_factors().expect("causal law has both factors");
                out.p_u_given_sv = Some(
                    (0..ns)
                        .map(|s| (0..nv).map(|v| pu.row(&[s, v]).to_vec()).collect())
                        .collect(),
                );
                out.p_x2_given_vusx1 = Some(
                    (0..nv)
                        .map(|v| {
                            (0..nu)
                                .map(|u| {
                                    (0..ns)
                                        .map(|s| {
                                            (0..nx1)
                                                .map(|x1| px2.row(&[v, u, s, x1]).to_vec())
                                                .collect()
                                        })
                                        .collect()
                                })
                                .collect()
                        })
                        .collect(),
                );
            }
        }
        out
    }

    /// Rebuilds the law against a channel's alphabets. `origin` names the
    /// source file for diagnostics.
    pub fn to_law(&self, c: &MacChannel, origin: &str) -> Result<FactorizedLaw> {
        let mode = CribMode::from_token(&self.mode).ok_or_else(|| {
            shape_err(
                origin,
                "mode",
                format!("unknown mode {:?}, expected \"sc\" or \"c\"", self.mode),
            )
        })?;
        let (nv, nu) = (self.v, self.u);
        let (nx1, nx2, ns) = (c.x1().size(), c.x2().size(), c.s().size());
        if nv == 0 || nu == 0 {
            return Err(shape_err(origin, "sizes", "v and u must be >= 1".into()));
        }
        if self.p_v.len() != nv {
            return Err(shape_err(
                origin,
                "p_v",
                format!("p_v has {} entries, v = {}", self.p_v.len(), nv),
            ));
        }
        let alpha_v = Alphabet::new(VAR_V, nv)?;
        let alpha_u = Alphabet::new(VAR_U, nu)?;
        let p_v = Pmf::new(alpha_v.clone(), self.p_v.clone())?;

        let rows = flatten2(&self.p_x1_given_v, &[nv], nx1, origin, "p_x1_given_v")?;
        let p_x1 = CondPmf::new(vec![alpha_v.clone()], c.x1().clone(), rows)?;

        match mode {
            CribMode::StrictlyCausal => {
                let nested = self.p_ux2_given_sv.as_ref().ok_or_else(|| {
                    shape_err(
                        origin,
                        "p_ux2_given_sv",
                        "required when mode = \"sc\"".into(),
                    )
                })?;
                let mut rows = Vec::with_capacity(ns * nv * nu * nx2);
                check_len(nested.len(), ns, origin, "p_ux2_given_sv (s axis)")?;
                for bs in nested {
                    check_len(bs.len(), nv, origin, "p_ux2_given_sv (v axis)")?;
                    for bv in bs {
                        check_len(bv.len(), nu, origin, "p_ux2_given_sv (u axis)")?;
                        for bu in bv {
                            check_len(bu.len(), nx2, origin, "p_ux2_given_sv (x2 axis)")?;
                            rows.extend_from_slice(bu);
                        }
                    }
                }
                let target = Alphabet::new("UX2", nu * nx2)?;
                let joint = CondPmf::new(vec![c.s().clone(), alpha_v], target, rows)?;
                Ok(FactorizedLaw::strictly_causal(nu, nx2, p_v, p_x1, joint)?)
            }
            CribMode::Causal => {
                let nested_u = self.p_u_given_sv.as_ref().ok_or_else(|| {
                    shape_err(origin, "p_u_given_sv", "required when mode = \"c\"".into())
                })?;
                let nested_x2 = self.p_x2_given_vusx1.as_ref().ok_or_else(|| {
                    shape_err(
                        origin,
                        "p_x2_given_vusx1",
                        "required when mode = \"c\"".into(),
                    )
                })?;
                let mut rows_u = Vec::with_capacity(ns * nv * nu);
                check_len(nested_u.len(), ns, origin, "p_u_given_sv (s axis)")?;
                for bs in nested_u {
                    check_len(bs.len(), nv, origin, "p_u_given_sv (v axis)")?;
                    for bv in bs {
                        check_len(bv.len(), nu, origin, "p_u_given_sv (u axis)")?;
                        rows_u.extend_from_slice(bv);
                    }
                }
                let p_u = CondPmf::new(
                    vec![c.s().clone(), alpha_v.clone()],
                    alpha_u.clone(),
                    rows_u,
                )?;
                let mut rows_x2 = Vec::with_capacity(nv * nu * ns * nx1 * nx2);
                check_len(nested_x2.len(), nv, origin, "p_x2_given_vusx1 (v axis)")?;
                for bv in nested_x2 {
                    check_len(bv.len(), nu, origin, "p_x2_given_vusx1 (u axis)")?;
                    for bu in bv {
                        check_len(bu.len(), ns, origin, "p_x2_given_vusx1 (s axis)")?;
                        for bs in bu {
                            check_len(bs.len(), nx1, origin, "p_x2_given_vusx1 (x1 axis)")?;
                            for bx1 in bs {
                                check_len(bx1.len(), nx2, origin, "p_x2_given_vusx1 (x2 axis)")?;
                                rows_x2.extend_from_slice(bx1);
                            }
                        }
                    }
                }
                let p_x2 = CondPmf::new(
                    vec![alpha_v, alpha_u, c.s().clone(), c.x1().clone()],
                    c.x2().clone(),
                    rows_x2,
                )?;
                Ok(FactorizedLaw::causal(p_v, p_x1, p_u, p_x2)?)
            }
        }
    }
}

fn check_len(got: usize, want: usize, origin: &str, what: &str) -> Result<()> {
    if got != want {
        return Err(shape_err(
            origin,
            what,
            format!("has {got} entries, expected {want}"),
        ));
    }
    Ok(())
}

fn flatten2(
    nested: &[Vec<f64>],
    outer: &[usize],
    inner: usize,
    origin: &str,
    what: &str,
) -> Result<Vec<f64>> {
    let want: usize = outer.iter().product();
    check_len(nested.len(), want, origin, what)?;
    let mut rows = Vec::with_capacity(want * inner);
    for row in nested {
        check_len(row.len(), inner, origin, what)?;
        rows.extend_from_slice(row);
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Witness sidecars and law documents
// ---------------------------------------------------------------------------

/// Sidecar JSON written next to a region CSV: the laws witnessing each hull
/// vertex, keyed by the `witness_id` column of the CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WitnessFile {
    pub tool_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub mode: String,
    pub witnesses: BTreeMap<String, LawFile>,
}

/// A law input file: either a single bare law or a witness sidecar from
/// which one entry is selected by id.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum LawDocument {
    Witnesses(WitnessFile),
    Single(LawFile),
}

impl LawDocument {
    /// Picks the law: a bare file ignores `witness_id`; a sidecar requires a
    /// matching id, defaulting to its only entry when there is exactly one.
    pub fn select(&self, witness_id: Option<&str>, origin: &str) -> Result<&LawFile> {
        match self {
            LawDocument::Single(law) => Ok(law),
            LawDocument::Witnesses(w) => {
                if let Some(id) = witness_id {
                    return w.witnesses.get(id).ok_or_else(|| {
                        shape_err(
                            origin,
                            "witness",
                            format!(
                                "no witness {:?}; available: {}",
                                id,
                                w.witnesses.keys().cloned().collect::<Vec<_>>().join(", ")
                            ),
                        )
                    });
                }
                if w.witnesses.len() == 1 {
                    return Ok(w.witnesses.values().next().expect("one entry"));
                }
                Err(shape_err(
                    origin,
                    "witness",
                    format!(
                        "sidecar holds {} witnesses; pick one with --witness ({})",
                        w.witnesses.len(),
                        w.witnesses.keys().cloned().collect::<Vec<_>>().join(", ")
                    ),
                ))
            }
        }
    }
}

pub fn load_law_document(path: &Path) -> Result<LawDocument> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| FilesError::Json {
        path: path.display().to_string(),
        source: e,
    })
}

// ---------------------------------------------------------------------------
// Report headers and CSV bodies
// ---------------------------------------------------------------------------

/// 64-bit FNV-1a, used to fingerprint run configurations in report headers.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325_u64;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Provenance stamped into every output file.
#[derive(Debug, Clone)]
pub struct ReportMeta {
    pub config_hash: u64,
    pub seed: u64,
}

impl ReportMeta {
    /// Hashes a canonical serialization of the run configuration.
    pub fn new(config_text: &str, seed: u64) -> Self {
        Self {
            config_hash: fnv1a64(config_text.as_bytes()),
            seed,
        }
    }

    pub fn header(&self) -> String {
        format!(
            "# cribmac {}\n# config_hash {:016x}\n# seed {}\n",
            env!("CARGO_PKG_VERSION"),
            self.config_hash,
            self.seed
        )
    }

    pub fn hash_hex(&self) -> String {
        format!("{:016x}", self.config_hash)
    }
}

fn fmt_rate(x: f64) -> String {
    format!("{x:.12}")
}

/// Region report: one row per recorded pentagon vertex, hull vertices
/// flagged and keyed into the witness sidecar.
pub fn region_csv(region: &RateRegion, meta: &ReportMeta) -> String {
    let mut out = meta.header();
    out.push_str("R1_nats,R2_nats,R1_bits,R2_bits,vertex_flag,witness_id\n");
    let hull = region.hull();
    let witnesses = region.hull_witnesses();
    for rp in region.points() {
        let (r1, r2) = rp.point;
        let vertex = hull.iter().position(|&q| q == rp.point);
        let (flag, id) = match vertex {
            Some(i) => (1, format!("w{}", witnesses[i])),
            None => (0, String::new()),
        };
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            fmt_rate(r1),
            fmt_rate(r2),
            fmt_rate(r1 / std::f64::consts::LN_2),
            fmt_rate(r2 / std::f64::consts::LN_2),
            flag,
            id
        ));
    }
    out
}

/// Witness sidecar for a region report.
pub fn witness_file(region: &RateRegion, meta: &ReportMeta, mode: CribMode) -> WitnessFile {
    let mut witnesses = BTreeMap::new();
    for &law_idx in region.hull_witnesses() {
        witnesses
            .entry(format!("w{law_idx}"))
            .or_insert_with(|| LawFile::from_law(&region.laws()[law_idx]));
    }
    WitnessFile {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: meta.hash_hex(),
        seed: meta.seed,
        mode: mode.token().to_string(),
        witnesses,
    }
}

pub fn witness_json(file: &WitnessFile) -> String {
    let mut out = serde_json::to_string_pretty(file).expect("witness file serializes");
    out.push('\n');
    out
}

/// Simulation report: one row per block length.
pub fn simulate_csv(reports: &[TrialReport], meta: &ReportMeta) -> String {
    let mut out = meta.header();
    out.push_str(
        "n,trials,msg_err,wilson_lo,wilson_hi,e0,e1,e2,e3,e4,e5,effective_r1,effective_r2\n",
    );
    for r in reports {
        let ev = r.events.as_array();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.n,
            r.trials,
            fmt_rate(r.message_error_rate),
            fmt_rate(r.wilson_lo),
            fmt_rate(r.wilson_hi),
            ev[0],
            ev[1],
            ev[2],
            ev[3],
            ev[4],
            ev[5],
            fmt_rate(r.effective_r1),
            fmt_rate(r.effective_r2),
        ));
    }
    out
}

// ---------------------------------------------------------------------------
// Atomic writes
// ---------------------------------------------------------------------------

/// Writes via a temp file in the destination directory plus a rename, so a
/// crash never leaves a half-written report.
pub fn atomic_write(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_err(path, e))?;
    tmp.write_all(contents).map_err(|e| io_err(path, e))?;
    tmp.persist(path).map_err(|e| io_err(path, e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::region::SearchConfig;

    fn binary_symmetric_channel() -> MacChannel {
        // Y = X1 XOR X2 XOR S through a 0.05 flip, state uniform.
        MacChannel::from_fn(
            Alphabet::new(VAR_X1, 2).unwrap(),
            Alphabet::new(VAR_X2, 2).unwrap(),
            Alphabet::new(VAR_S, 2).unwrap(),
            Alphabet::new(VAR_Y, 2).unwrap(),
            vec![0.5, 0.5],
            |x1, x2, s, y| {
                let clean = x1 ^ x2 ^ s;
                if y == clean {
                    0.95
                } else {
                    0.05
                }
            },
        )
        .unwrap()
    }

    fn sample_sc_law(c: &MacChannel) -> FactorizedLaw {
        let v = Alphabet::new(VAR_V, 2).unwrap();
        let p_v = Pmf::new(v.clone(), vec![0.3, 0.7]).unwrap();
        let p_x1 =
            CondPmf::new(vec![v.clone()], c.x1().clone(), vec![0.8, 0.2, 0.25, 0.75]).unwrap();
        let target = Alphabet::new("UX2", 4).unwrap();
        let joint = CondPmf::new(
            vec![c.s().clone(), v],
            target,
            vec![
                0.4, 0.1, 0.3, 0.2, // s=0, v=0
                0.25, 0.25, 0.25, 0.25, // s=0, v=1
                0.1, 0.2, 0.3, 0.4, // s=1, v=0
                0.05, 0.45, 0.35, 0.15, // s=1, v=1
            ],
        )
        .unwrap();
        FactorizedLaw::strictly_causal(2, 2, p_v, p_x1, joint).unwrap()
    }

    #[test]
    fn fnv1a64_matches_reference_vectors() {
        assert_eq!(fnv1a64(b""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a64(b"a"), 0xaf63_dc4c_8601_ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x8594_4171_f739_67e8);
        assert_eq!(fnv1a64(b"cribmac"), 0x62c4_3976_fdbb_68fe);
    }

    #[test]
    fn channel_file_round_trips_exactly() {
        let c = binary_symmetric_channel();
        let echo = ChannelFile::from_channel(&c);
        let text = echo.canonical_json();
        let parsed: ChannelFile = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed, echo, "JSON round trip must preserve every f64 bit");
        let rebuilt = parsed.to_channel("roundtrip").unwrap();
        assert_eq!(rebuilt.law().rows(), c.law().rows());
        assert_eq!(rebuilt.state().mass(), c.state().mass());
    }

    #[test]
    fn malformed_channel_json_reports_line_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        std::fs::write(&path, "{ \"sizes\": { \"x1\": 2,, } }").unwrap();
        let err = load_channel(&path).unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("line") && msg.contains("column"),
            "diagnostic should cite a position, got: {msg}"
        );
    }

    #[test]
    fn channel_shape_mismatch_is_caught() {
        let c = binary_symmetric_channel();
        let mut echo = ChannelFile::from_channel(&c);
        echo.law[1][0][1].pop();
        let err = echo.to_channel("shape").unwrap_err();
        assert!(matches!(err, FilesError::Shape { .. }), "got {err:?}");
        let mut echo2 = ChannelFile::from_channel(&c);
        echo2.state.push(0.0);
        assert!(echo2.to_channel("shape").is_err());
    }

    #[test]
    fn sc_law_file_round_trips_exactly() {
        let c = binary_symmetric_channel();
        let law = sample_sc_law(&c);
        let file = LawFile::from_law(&law);
        let text = serde_json::to_string_pretty(&file).unwrap();
        let parsed: LawFile = serde_json::from_str(&text).unwrap();
        let rebuilt = parsed.to_law(&c, "roundtrip").unwrap();
        let j0 = law.assemble_joint(&c).unwrap();
        let j1 = rebuilt.assemble_joint(&c).unwrap();
        assert_eq!(
            j0.mass(),
            j1.mass(),
            "round-tripped law must assemble identically"
        );
        assert!(
            parsed.p_u_given_sv.is_none(),
            "sc file carries only the composite factor"
        );
    }

    #[test]
    fn causal_law_file_round_trips_exactly() {
        let c = binary_symmetric_channel();
        let law = sample_sc_law(&c).to_causal();
        let file = LawFile::from_law(&law);
        assert_eq!(file.mode, "c");
        let text = serde_json::to_string(&file).unwrap();
        let parsed: LawFile = serde_json::from_str(&text).unwrap();
        let rebuilt = parsed.to_law(&c, "roundtrip").unwrap();
        let j0 = law.assemble_joint(&c).unwrap();
        let j1 = rebuilt.assemble_joint(&c).unwrap();
        assert_eq!(j0.mass(), j1.mass());
    }

    #[test]
    fn law_file_missing_factor_is_rejected() {
        let c = binary_symmetric_channel();
        let mut file = LawFile::from_law(&sample_sc_law(&c));
        file.mode = "c".to_string();
        let err = file.to_law(&c, "missing").unwrap_err();
        assert!(err.to_string().contains("p_u_given_sv"), "got: {err}");
        let mut file2 = LawFile::from_law(&sample_sc_law(&c));
        file2.mode = "x".to_string();
        assert!(file2.to_law(&c, "missing").is_err());
    }

    #[test]
    fn law_document_selects_bare_and_sidecar_entries() {
        let c = binary_symmetric_channel();
        let law = sample_sc_law(&c);
        let bare = serde_json::to_string(&LawFile::from_law(&law)).unwrap();
        let doc: LawDocument = serde_json::from_str(&bare).unwrap();
        assert!(matches!(doc, LawDocument::Single(_)));
        assert!(doc.select(None, "t").is_ok());

        let mut witnesses = BTreeMap::new();
        witnesses.insert("w0".to_string(), LawFile::from_law(&law));
        witnesses.insert("w3".to_string(), LawFile::from_law(&law.to_causal()));
        let sidecar = WitnessFile {
            tool_version: "0.0.0".to_string(),
            config_hash: "00".to_string(),
            seed: 1,
            mode: "sc".to_string(),
            witnesses,
        };
        let text = witness_json(&sidecar);
        let doc: LawDocument = serde_json::from_str(&text).unwrap();
        assert!(matches!(doc, LawDocument::Witnesses(_)));
        assert_eq!(doc.select(Some("w3"), "t").unwrap().mode, "c");
        let err = doc.select(None, "t").unwrap_err();
        assert!(err.to_string().contains("--witness"), "got: {err}");
        assert!(doc.select(Some("nope"), "t").is_err());
    }

    #[test]
    fn region_csv_flags_hull_vertices_and_is_deterministic() {
        let c = binary_symmetric_channel();
        let cfg = SearchConfig {
            samples: 16,
            refine: 2,
            ..SearchConfig::default()
        };
        let region = crate::region::search_region(&c, CribMode::StrictlyCausal, &cfg).unwrap();
        let meta = ReportMeta::new("demo-config", 7);
        let csv = region_csv(&region, &meta);
        let csv2 = region_csv(&region, &meta);
        assert_eq!(csv, csv2);
        let lines: Vec<&str> = csv.lines().collect();
        assert!(lines[0].starts_with("# cribmac "));
        assert!(lines[1].starts_with("# config_hash "));
        assert_eq!(lines[2], format!("# seed {}", 7));
        assert_eq!(
            lines[3],
            "R1_nats,R2_nats,R1_bits,R2_bits,vertex_flag,witness_id"
        );
        let rows = &lines[4..];
        assert_eq!(rows.len(), region.points().len());
        let flagged = rows
            .iter()
            .filter(|r| r.split(',').nth(4) == Some("1"))
            .count();
        assert_eq!(
            flagged,
            region.hull().len(),
            "every hull vertex appears flagged"
        );
        for row in rows {
            let fields: Vec<&str> = row.split(',').collect();
            assert_eq!(fields.len(), 6, "bad row: {row}");
            let nats: f64 = fields[0].parse().unwrap();
            let bits: f64 = fields[2].parse().unwrap();
            assert!((bits - nats / std::f64::consts::LN_2).abs() < 1e-9);
            if fields[4] == "1" {
                assert!(
                    fields[5].starts_with('w'),
                    "vertex rows carry witness ids: {row}"
                );
            } else {
                assert!(fields[5].is_empty());
            }
        }
        let wf = witness_file(&region, &meta, CribMode::StrictlyCausal);
        for row in rows.iter().filter(|r| r.split(',').nth(4) == Some("1")) {
            let id = row.split(',').nth(5).unwrap();
            assert!(wf.witnesses.contains_key(id), "sidecar must hold {id}");
        }
    }

    #[test]
    fn simulate_csv_has_spec_columns() {
        let report = TrialReport {
            n: 40,
            trials: 10,
            message_errors: 3,
            message_error_rate: 0.3,
            wilson_lo: 0.1,
            wilson_hi: 0.6,
            events: crate::coding::EventCounts {
                e0: 1,
                e1: 2,
                e2: 3,
                e3: 4,
                e4: 5,
                e5: 6,
            },
            block_slots: 40,
            encoder_error_rate: 3.0 / 40.0,
            m1: 2,
            m2: 2,
            mprime: 1,
            rprime: 0.0,
            effective_r1: 0.0125,
            effective_r2: 0.0125,
        };
        let meta = ReportMeta::new("sim-config", 9);
        let csv = simulate_csv(&[report], &meta);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(
            lines[3],
            "n,trials,msg_err,wilson_lo,wilson_hi,e0,e1,e2,e3,e4,e5,effective_r1,effective_r2"
        );
        let fields: Vec<&str> = lines[4].split(',').collect();
        assert_eq!(fields.len(), 13);
        assert_eq!(fields[0], "40");
        assert_eq!(fields[1], "10");
        assert_eq!(fields[5..11], ["1", "2", "3", "4", "5", "6"]);
    }

    #[test]
    fn atomic_write_creates_and_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        atomic_write(&path, b"first\n").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"first\n");
        atomic_write(&path, b"second\n").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"second\n");
        let leftovers: Vec<_> = std::fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        assert_eq!(
            leftovers.len(),
            1,
            "no temp files left behind: {leftovers:?}"
        );
    }
}
