//! Domain types shared across the crate, dataset validation and the dataset
//! CSV format.
//!
//! A dataset holds `T` probes `α_t` and, for every probe, one response
//! `β_t^i` from each of `M` agents. All vectors share the signal dimension `n`.
//! Indices are zero-based in the API and one-based in files and messages.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Formats a float with 17 significant digits; `str::parse::<f64>` recovers it
/// bit-exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Target probe `α_t`, strictly positive in every component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Probe(pub Vec<f64>);

/// Agent response `β_t^i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Response(pub Vec<f64>);

impl Probe {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Spend `α'β` of a response at this probe.
    pub fn spend(&self, beta: &Response) -> f64 {
        dot(&self.0, &beta.0)
    }
}

impl Response {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Observations `{α_t, β_t^i : t < T, i < M}`, clean or noise-corrupted.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeResponseDataset {
    probes: Vec<Probe>,
    /// `responses[t][i]`, t-major.
    responses: Vec<Vec<Response>>,
    noisy: bool,
}

impl ProbeResponseDataset {
    /// Builds a dataset after checking its shape. Value-level invariants
    /// (positivity) are reported by [`validate_dataset`] instead.
    pub fn new(probes: Vec<Probe>, responses: Vec<Vec<Response>>, noisy: bool) -> Result<Self> {
        if probes.is_empty() {
            return Err(Error::Dimension(
                "dataset needs at least one probe (T >= 1)".into(),
            ));
        }
        if probes.len() != responses.len() {
            return Err(Error::Dimension(format!(
                "{} probes but {} response rows",
                probes.len(),
                responses.len()
            )));
        }
        let n = probes[0].dim();
        if n == 0 {
            return Err(Error::Dimension("signal dimension n must be >= 1".into()));
        }
        let m = responses[0].len();
        if m == 0 {
            return Err(Error::Dimension(
                "dataset needs at least one agent (M >= 1)".into(),
            ));
        }
        for (t, (probe, row)) in probes.iter().zip(&responses).enumerate() {
            if probe.dim() != n {
                return Err(Error::Dimension(format!(
                    "probe t={} has dimension {}, expected {n}",
                    t + 1,
                    probe.dim()
                )));
            }
            if row.len() != m {
                return Err(Error::Dimension(format!(
                    "t={} has {} responses, expected {m}",
                    t + 1,
                    row.len()
                )));
            }
            for (i, beta) in row.iter().enumerate() {
                if beta.dim() != n {
                    return Err(Error::Dimension(format!(
                        "response (t={}, i={}) has dimension {}, expected {n}",
                        t + 1,
                        i + 1,
                        beta.dim()
                    )));
                }
            }
        }
        Ok(Self {
            probes,
            responses,
            noisy,
        })
    }

    pub fn t_len(&self) -> usize {
        self.probes.len()
    }

    pub fn m_len(&self) -> usize {
        self.responses[0].len()
    }

    pub fn n_dim(&self) -> usize {
        self.probes[0].dim()
    }

    pub fn noisy(&self) -> bool {
        self.noisy
    }

    pub fn probes(&self) -> &[Probe] {
        &self.probes
    }

    pub fn probe(&self, t: usize) -> &Probe {
        &self.probes[t]
    }

    pub fn response(&self, t: usize, i: usize) -> &Response {
        &self.responses[t][i]
    }

    /// All responses at slow-time step `t`.
    pub fn responses_at(&self, t: usize) -> &[Response] {
        &self.responses[t]
    }

    /// Responses of agent `i` across all `t`.
    pub fn agent_responses(&self, i: usize) -> impl Iterator<Item = &Response> + '_ {
        self.responses.iter().map(move |row| &row[i])
    }

    pub fn with_noisy(mut self, noisy: bool) -> Self {
        self.noisy = noisy;
        self
    }

    /// Returns a copy whose response components have been transformed by `f(t, i, c, value)`.
    pub fn map_responses(&self, mut f: impl FnMut(usize, usize, usize, f64) -> f64) -> Self {
        let responses = self
            .responses
            .iter()
            .enumerate()
            .map(|(t, row)| {
                row.iter()
                    .enumerate()
                    .map(|(i, beta)| {
                        Response(
                            beta.0
                                .iter()
                                .enumerate()
                                .map(|(c, &v)| f(t, i, c, v))
                                .collect(),
                        )
                    })
                    .collect()
            })
            .collect();
        Self {
            probes: self.probes.clone(),
            responses,
            noisy: self.noisy,
        }
    }

    /// Checks that `i` names an agent.
    pub fn check_agent(&self, i: usize) -> Result<()> {
        if i >= self.m_len() {
            return Err(Error::InvalidArgument(format!(
                "agent index {} out of range (M = {})",
                i + 1,
                self.m_len()
            )));
        }
        Ok(())
    }
}

/// Observation noise law. Only i.i.d. Gaussian noise is modelled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoiseModel {
    GaussianIid { sigma: f64 },
}

impl NoiseModel {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "noise sigma must be >= 0, got {sigma}"
            )));
        }
        Ok(NoiseModel::GaussianIid { sigma })
    }

    pub fn sigma(&self) -> f64 {
        match *self {
            NoiseModel::GaussianIid { sigma } => sigma,
        }
    }
}

/// Scalarization weights `μ` on the unit simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SimplexWeights(Vec<f64>);

const SIMPLEX_TOL: f64 = 1e-12;

impl SimplexWeights {
    /// Strictly positive weights summing to one.
    pub fn new(mu: Vec<f64>) -> Result<Self> {
        if let Some(bad) = mu.iter().find(|&&w| !(w > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "weights must be > 0, got {bad}"
            )));
        }
        Self::closed(mu)
    }

    /// Weights on the closed simplex: zeros allowed, still summing to one.
    pub fn closed(mu: Vec<f64>) -> Result<Self> {
        if mu.is_empty() {
            return Err(Error::InvalidArgument("weights must be nonempty".into()));
        }
        if let Some(bad) = mu.iter().find(|&&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "weights must be >= 0, got {bad}"
            )));
        }
        let total: f64 = mu.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidArgument(format!(
                "weights must sum to 1, got {total}"
            )));
        }
        Ok(Self(mu))
    }

    /// Rescales arbitrary positive weights onto the simplex.
    pub fn normalized(raw: &[f64]) -> Result<Self> {
        let total: f64 = raw.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidArgument(
                "weights must have a positive sum".into(),
            ));
        }
        Self::new(raw.iter().map(|w| w / total).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for SimplexWeights {
    type Error = Error;

    fn try_from(mu: Vec<f64>) -> Result<Self> {
        Self::closed(mu)
    }
}

impl From<SimplexWeights> for Vec<f64> {
    fn from(w: SimplexWeights) -> Self {
        w.0
    }
}

/// One affine piece `u + λ·α'(β − anchor)` of a reconstructed utility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffinePiece {
    pub offset: f64,
    pub slope_scale: f64,
    pub probe: Vec<f64>,
    pub anchor: Vec<f64>,
}

/// Agent objective: one of the closed-form generators or a reconstructed
/// piecewise-affine concave function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UtilityKind {
    /// `β₁·β₂`
    Det,
    /// `β₁ + β₂`
    Trace,
    /// `√β₁·β₂`
    SqrtProd,
    PiecewiseAffine(Vec<AffinePiece>),
}

impl UtilityKind {
    pub fn is_generator(&self) -> bool {
        !matches!(self, UtilityKind::PiecewiseAffine(_))
    }

    pub fn name(&self) -> &'static str {
        match self {
            UtilityKind::Det => "det",
            UtilityKind::Trace => "trace",
            UtilityKind::SqrtProd => "sqrt-prod",
            UtilityKind::PiecewiseAffine(_) => "piecewise-affine",
        }
    }
}

/// Total power budget `p*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct BudgetSpec(f64);

impl BudgetSpec {
    pub fn new(p_star: f64) -> Result<Self> {
        if !(p_star > 0.0) || !p_star.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "budget p* must be > 0, got {p_star}"
            )));
        }
        Ok(Self(p_star))
    }

    pub fn p_star(&self) -> f64 {
        self.0
    }
}

impl Default for BudgetSpec {
    fn default() -> Self {
        Self(1.0)
    }
}

impl TryFrom<f64> for BudgetSpec {
    type Error = Error;

    fn try_from(p: f64) -> Result<Self> {
        Self::new(p)
    }
}

impl From<BudgetSpec> for f64 {
    fn from(b: BudgetSpec) -> Self {
        b.0
    }
}

/// A violated dataset invariant. Indices are zero-based.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    ProbeNotPositive {
        t: usize,
        component: usize,
        value: f64,
    },
    ResponseNotPositive {
        t: usize,
        agent: usize,
        component: usize,
        value: f64,
    },
    NonFinite {
        t: usize,
        agent: Option<usize>,
        component: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Violation::ProbeNotPositive {
                t,
                component,
                value,
            } => write!(
                f,
                "probe component not positive at (t={}, c={}): {value}",
                t + 1,
                component + 1
            ),
            Violation::ResponseNotPositive {
                t,
                agent,
                component,
                value,
            } => write!(
                f,
                "clean response component not positive at (t={}, i={}, c={}): {value}",
                t + 1,
                agent + 1,
                component + 1
            ),
            Violation::NonFinite {
                t,
                agent,
                component,
            } => match agent {
                Some(i) => write!(
                    f,
                    "non-finite response at (t={}, i={}, c={})",
                    t + 1,
                    i + 1,
                    component + 1
                ),
                None => write!(f, "non-finite probe at (t={}, c={})", t + 1, component + 1),
            },
        }
    }
}

/// Lists every violated value invariant; empty iff the dataset is valid.
///
/// Probes must be strictly positive. Clean responses must be strictly
/// positive; noisy responses are only required to be finite.
pub fn validate_dataset(ds: &ProbeResponseDataset) -> Vec<Violation> {
    let mut out = Vec::new();
    for t in 0..ds.t_len() {
        for (c, &v) in ds.probe(t).as_slice().iter().enumerate() {
            if !v.is_finite() {
                out.push(Violation::NonFinite {
                    t,
                    agent: None,
                    component: c,
                });
            } else if v <= 0.0 {
                out.push(Violation::ProbeNotPositive {
                    t,
                    component: c,
                    value: v,
                });
            }
        }
        for i in 0..ds.m_len() {
            for (c, &v) in ds.response(t, i).as_slice().iter().enumerate() {
                if !v.is_finite() {
                    out.push(Violation::NonFinite {
                        t,
                        agent: Some(i),
                        component: c,
                    });
                } else if !ds.noisy() && v <= 0.0 {
                    out.push(Violation::ResponseNotPositive {
                        t,
                        agent: i,
                        component: c,
                        value: v,
                    });
                }
            }
        }
    }
    out
}

/// Serializes a dataset in the CSV layout read by [`parse_dataset`].
pub fn dataset_to_csv(ds: &ProbeResponseDataset) -> String {
    let mut s = format!(
        "{},{},{},{}\n",
        ds.t_len(),
        ds.m_len(),
        ds.n_dim(),
        ds.noisy()
    );
    for t in 0..ds.t_len() {
        for i in 0..ds.m_len() {
            s.push_str(&format!("{},{}", t + 1, i + 1));
            for &a in ds.probe(t).as_slice() {
                s.push(',');
                s.push_str(&fmt_f64(a));
            }
            for &b in ds.response(t, i).as_slice() {
                s.push(',');
                s.push_str(&fmt_f64(b));
            }
            s.push('\n');
        }
    }
    s
}

pub fn write_dataset(ds: &ProbeResponseDataset, path: impl AsRef<Path>) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(dataset_to_csv(ds).as_bytes())?;
    Ok(())
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<ProbeResponseDataset> {
    parse_dataset(&fs::read_to_string(path)?)
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_count(field: &str, name: &str, line: usize) -> Result<usize> {
    let v: usize = field.trim().parse().map_err(|_| {
        parse_err(
            line,
            format!("{name} must be a nonnegative integer, got {field:?}"),
        )
    })?;
    if v == 0 {
        return Err(parse_err(line, format!("{name} must be >= 1")));
    }
    Ok(v)
}

fn parse_float(field: &str, line: usize) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| parse_err(line, format!("non-numeric field {field:?}")))
}

/// Parses the dataset CSV.
///
/// Line 1 holds `T,M,n,noisy`; then `T·M` rows `t,i,α_1..α_n,β_1..β_n`
/// (one-based `t`, `i`; t-major order).
pub fn parse_dataset(text: &str) -> Result<ProbeResponseDataset> {
    let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l));
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let head: Vec<&str> = header.split(',').collect();
    if head.len() != 4 {
        return Err(parse_err(
            1,
            format!("header needs 4 fields T,M,n,noisy, got {}", head.len()),
        ));
    }
    let t_len = parse_count(head[0], "T", 1)?;
    let m_len = parse_count(head[1], "M", 1)?;
    let n = parse_count(head[2], "n", 1)?;
    let noisy = match head[3].trim() {
        "true" | "1" => true,
        "false" | "0" => false,
        other => {
            return Err(parse_err(
                1,
                format!("noisy flag must be true/false, got {other:?}"),
            ))
        }
    };

    let rows: Vec<(usize, &str)> = lines.filter(|(_, l)| !l.trim().is_empty()).collect();
    if rows.len() != t_len * m_len {
        let line = rows.last().map_or(1, |r| r.0);
        return Err(parse_err(
            line,
            format!(
                "expected T*M = {} data rows, found {}",
                t_len * m_len,
                rows.len()
            ),
        ));
    }

    let mut probes = Vec::with_capacity(t_len);
    let mut responses: Vec<Vec<Response>> = Vec::with_capacity(t_len);
    for (k, &(line, row)) in rows.iter().enumerate() {
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != 2 + 2 * n {
            return Err(parse_err(
                line,
                format!(
                    "expected {} fields for n={n}, found {}",
                    2 + 2 * n,
                    fields.len()
                ),
            ));
        }
        let (want_t, want_i) = (k / m_len + 1, k % m_len + 1);
        let t: usize = fields[0]
            .trim()
            .parse()
            .map_err(|_| parse_err(line, format!("bad t index {:?}", fields[0])))?;
        let i: usize = fields[1]
            .trim()
            .parse()
            .map_err(|_| parse_err(line, format!("bad i index {:?}", fields[1])))?;
        if (t, i) != (want_t, want_i) {
            return Err(parse_err(
                line,
                format!("row order: expected (t={want_t}, i={want_i}), found (t={t}, i={i})"),
            ));
        }
        let alpha = fields[2..2 + n]
            .iter()
            .map(|f| parse_float(f, line))
            .collect::<Result<Vec<_>>>()?;
        let beta = fields[2 + n..]
            .iter()
            .map(|f| parse_float(f, line))
            .collect::<Result<Vec<_>>>()?;
        if i == 1 {
            probes.push(Probe(alpha));
            responses.push(Vec::with_capacity(m_len));
        } else if probes[t - 1].0 != alpha {
            return Err(parse_err(
                line,
                format!("probe for t={t} differs between agents"),
            ));
        }
        responses[t - 1].push(Response(beta));
    }
    ProbeResponseDataset::new(probes, responses, noisy)
}
