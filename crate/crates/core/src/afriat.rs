//! Exact rationalizability of per-agent responses via Afriat inequalities.
//!
//! Agent `i` is consistent iff there are `u_t` and `λ_t > 0` with
//!
//! ```text
//! u_s − u_t − λ_t·α_t'(β_s − β_t) ≤ 0    for all s, t
//! ```
//!
//! The system is invariant to a common positive scaling of `(u, λ)` and to
//! adding a constant to `u`, so it is solved as an LP with `λ ≥ 1`, `u ≥ 0`
//! and the certificate is shifted afterwards to `min u = 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp;
use crate::model::{dot, AffinePiece, ProbeResponseDataset, Response, UtilityKind};

/// Certificate tolerance on the Afriat inequalities.
pub const CERT_TOL: f64 = 1e-8;
/// Relative size of an improvement treated as round-off in [`potentials`].
const ROUNDOFF: f64 = 1e-12;
/// Multiplier repairs attempted before giving up on a solver point.
const MAX_REPAIRS: usize = 256;
/// Alternations between least multipliers and levels.
const SHRINK_ROUNDS: usize = 4;

/// Multipliers witnessing the Afriat inequalities for one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AfriatCertificate {
    /// Agent index; zero-based in memory, one-based in JSON.
    #[serde(rename = "i", with = "one_based")]
    pub agent: usize,
    pub u: Vec<f64>,
    pub lambda: Vec<f64>,
}

mod one_based {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(i: &usize, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(*i as u64 + 1)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<usize, D::Error> {
        let v = u64::deserialize(d)?;
        if v == 0 {
            return Err(D::Error::custom("agent index is one-based"));
        }
        Ok(v as usize - 1)
    }
}

impl AfriatCertificate {
    /// Largest value of `u_s − u_t − λ_t·(a[t][s] + phi)` over all pairs, where
    /// `a` is the agent's Afriat matrix. Non-positive means the certificate holds.
    pub fn max_violation(&self, a: &[Vec<f64>], phi: f64) -> f64 {
        let t_len = self.u.len();
        let mut worst = f64::NEG_INFINITY;
        for t in 0..t_len {
            for s in 0..t_len {
                if s != t {
                    worst = worst.max(self.u[s] - self.u[t] - self.lambda[t] * (a[t][s] + phi));
                }
            }
        }
        worst
    }

    /// Returns the certificate with `(u, λ)` scaled by `c > 0`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            agent: self.agent,
            u: self.u.iter().map(|u| u * c).collect(),
            lambda: self.lambda.iter().map(|l| l * c).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RationalizabilityVerdict {
    pub consistent: bool,
    /// Per-agent feasibility.
    pub per_agent: Vec<bool>,
    /// One certificate per agent when `consistent`, empty otherwise.
    pub certificates: Vec<AfriatCertificate>,
}

/// `a[t][s] = α_t'(β_s^i − β_t^i)`.
pub fn afriat_matrix(ds: &ProbeResponseDataset, i: usize) -> Result<Vec<Vec<f64>>> {
    ds.check_agent(i)?;
    let t_len = ds.t_len();
    let mut a = vec![vec![0.0; t_len]; t_len];
    for (t, row) in a.iter_mut().enumerate() {
        let alpha = ds.probe(t).as_slice();
        let beta_t = ds.response(t, i).as_slice();
        for (s, v) in row.iter_mut().enumerate() {
            if s != t {
                let beta_s = ds.response(s, i).as_slice();
                *v = alpha
                    .iter()
                    .zip(beta_s.iter().zip(beta_t))
                    .map(|(a, (bs, bt))| a * (bs - bt))
                    .sum();
            }
        }
    }
    Ok(a)
}

/// Rows of the shifted system over `(u, λ)`, with `b = 0`, `u ≥ 0`, `λ ≥ 1`.
fn relaxed_rows(a: &[Vec<f64>], phi: f64) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>, Vec<f64>) {
    let t_len = a.len();
    let nvar = 2 * t_len;
    let mut rows = Vec::with_capacity(t_len * (t_len - 1));
    for t in 0..t_len {
        for s in 0..t_len {
            if s == t {
                continue;
            }
            let mut row = vec![0.0; nvar];
            row[s] += 1.0;
            row[t] -= 1.0;
            row[t_len + t] = -(a[t][s] + phi);
            rows.push(row);
        }
    }
    let b = vec![0.0; rows.len()];
    let mut lb = vec![0.0; nvar];
    for l in lb[t_len..].iter_mut() {
        *l = 1.0;
    }
    let ub = vec![f64::INFINITY; nvar];
    (rows, b, lb, ub)
}

/// Phase-1 verdict on the shifted system `u_s − u_t − λ_t·(a[t][s] + phi) ≤ 0`.
pub fn relaxed_feasible(a: &[Vec<f64>], phi: f64) -> Result<bool> {
    if a.len() == 1 {
        return Ok(true);
    }
    let (rows, b, lb, ub) = relaxed_rows(a, phi);
    Ok(lp::feasible(&rows, &b, &lb, &ub)?.feasible)
}

/// Solves the shifted system `u_s − u_t − λ_t·(a[t][s] + phi) ≤ 0`, `λ ≥ 1`,
/// returning `(u, λ)` with `min u = 1`. `None` when infeasible, or when the
/// solver's point does not check out against the system (this happens only
/// with huge multipliers, near the edge of the feasible range in `phi`).
pub fn relaxed_system(a: &[Vec<f64>], phi: f64) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
    let t_len = a.len();
    if t_len == 1 {
        return Ok(Some((vec![1.0], vec![1.0])));
    }
    let (rows, b, lb, ub) = relaxed_rows(a, phi);
    let Some(x) = lp::feasible(&rows, &b, &lb, &ub)?.witness else {
        return Ok(None);
    };
    // Only λ is taken from the solver: for fixed λ the exact potentials
    // below either exist or expose a negative cycle, so a point spoiled by
    // round-off is repaired or rejected rather than passed on.
    let lambda: Vec<f64> = x[t_len..].iter().map(|l| l.max(1.0)).collect();
    let mut found = repaired_potentials(a, phi, lambda);
    if found.is_none() {
        // Smallest multipliers are better scaled when the first point is not.
        let prog = lp::LinearProgram {
            c: vec![1.0; 2 * t_len],
            a: rows,
            b,
            lb,
            ub,
        };
        let res = lp::solve(&prog)?;
        if res.status == lp::LpStatus::Optimal {
            let lambda = res.x[t_len..].iter().map(|l| l.max(1.0)).collect();
            found = repaired_potentials(a, phi, lambda).or_else(|| {
                repaired_potentials(a, phi, least_multipliers(a, phi, &res.x[..t_len]))
            });
        }
    }
    Ok(found.and_then(|(mut lambda, mut u)| {
        // Shrink: the least multipliers for these levels, then fresh levels.
        for _ in 0..SHRINK_ROUNDS {
            let smaller = least_multipliers(a, phi, &u);
            match potentials(a, phi, &smaller) {
                Ok(v) => {
                    lambda = smaller;
                    u = v;
                }
                Err(_) => break,
            }
        }
        let min_u = u.iter().copied().fold(f64::INFINITY, f64::min);
        let u: Vec<f64> = u.iter().map(|v| v - min_u + 1.0).collect();
        certificate_fits(a, phi, &u, &lambda).then_some((u, lambda))
    }))
}

/// With `λ` fixed the system is a set of difference constraints
/// `u_s ≤ u_t + λ_t·(a[t][s] + phi)`; shortest-path distances solve it
/// without the round-off of the simplex. Cycles the solver left exactly tight
/// may come out slightly negative in floating point, so improvements below
/// round-off level are ignored. `Err` carries a negative cycle.
fn potentials(
    a: &[Vec<f64>],
    phi: f64,
    lambda: &[f64],
) -> std::result::Result<Vec<f64>, Vec<usize>> {
    let t_len = a.len();
    let mut d = vec![0.0; t_len];
    let mut pred = vec![usize::MAX; t_len];
    let mut last = usize::MAX;
    for _ in 0..=t_len {
        last = usize::MAX;
        for t in 0..t_len {
            for s in (0..t_len).filter(|&s| s != t) {
                let w = lambda[t] * (a[t][s] + phi);
                let via = d[t] + w;
                let slack = ROUNDOFF * 1f64.max(d[t].abs()).max(w.abs());
                if via < d[s] - slack {
                    d[s] = via;
                    pred[s] = t;
                    last = s;
                }
            }
        }
        if last == usize::MAX {
            return Ok(d);
        }
    }
    // Walking back `t_len` steps from a node still improving lands on the cycle.
    let mut v = last;
    for _ in 0..t_len {
        v = pred[v];
    }
    let mut cycle = vec![v];
    let mut w = pred[v];
    while w != v {
        cycle.push(w);
        w = pred[w];
    }
    Err(cycle)
}

/// Potentials for `λ`, raising multipliers on negative cycles. A cycle with
/// an edge of positive slope is balanced by raising that edge's source
/// multiplier; one without such an edge makes `phi` infeasible.
fn repaired_potentials(
    a: &[Vec<f64>],
    phi: f64,
    mut lambda: Vec<f64>,
) -> Option<(Vec<f64>, Vec<f64>)> {
    for _ in 0..MAX_REPAIRS {
        match potentials(a, phi, &lambda) {
            Ok(u) => return Some((lambda, u)),
            Err(cycle) => {
                // `cycle` lists nodes against the edge direction: pred → node.
                let edges: Vec<(usize, usize)> = (0..cycle.len())
                    .map(|k| (cycle[(k + 1) % cycle.len()], cycle[k]))
                    .collect();
                let total: f64 = edges
                    .iter()
                    .map(|&(t, s)| lambda[t] * (a[t][s] + phi))
                    .sum();
                let (t, s) = edges
                    .iter()
                    .copied()
                    .filter(|&(t, s)| a[t][s] + phi > 0.0)
                    .max_by(|&(t1, s1), &(t2, s2)| {
                        (lambda[t1] * (a[t1][s1] + phi))
                            .total_cmp(&(lambda[t2] * (a[t2][s2] + phi)))
                    })?;
                let w = lambda[t] * (a[t][s] + phi);
                lambda[t] *= 1.0 + 2.0 * (-total).max(0.0) / w + f64::EPSILON * 8.0;
            }
        }
    }
    None
}

/// Smallest `λ ≥ 1` meeting the inequalities with positive slope at `u`.
fn least_multipliers(a: &[Vec<f64>], phi: f64, u: &[f64]) -> Vec<f64> {
    let t_len = u.len();
    (0..t_len)
        .map(|t| {
            (0..t_len)
                .filter(|&s| s != t && a[t][s] + phi > 0.0)
                .map(|s| (u[s] - u[t]) / (a[t][s] + phi))
                .fold(1.0, f64::max)
        })
        .collect()
}

/// Whether `(u, λ)` satisfies the relaxed system within `CERT_TOL`, taken
/// relative to the size of the terms in each inequality once they exceed 1.
/// Just above the infimum `λ` grows like `1/(Φ − Φ̂)`, and an absolute bound
/// would ask for more digits than a double holds.
pub fn certificate_fits(a: &[Vec<f64>], phi: f64, u: &[f64], lambda: &[f64]) -> bool {
    let t_len = u.len();
    (0..t_len).all(|t| {
        (0..t_len).filter(|&s| s != t).all(|s| {
            let term = lambda[t] * (a[t][s] + phi);
            let scale = 1f64.max(u[s].abs()).max(u[t].abs()).max(term.abs());
            u[s] - u[t] - term <= CERT_TOL * scale
        })
    })
}

/// Afriat test for a single agent; `Some(certificate)` iff consistent.
pub fn test_agent(ds: &ProbeResponseDataset, i: usize) -> Result<Option<AfriatCertificate>> {
    let a = afriat_matrix(ds, i)?;
    Ok(
        relaxed_system(&a, 0.0)?.map(|(u, lambda)| AfriatCertificate {
            agent: i,
            u,
            lambda,
        }),
    )
}

/// Runs the Afriat test for every agent.
pub fn test_rationalizable(ds: &ProbeResponseDataset) -> Result<RationalizabilityVerdict> {
    let certs = (0..ds.m_len())
        .map(|i| test_agent(ds, i))
        .collect::<Result<Vec<_>>>()?;
    let per_agent: Vec<bool> = certs.iter().map(Option::is_some).collect();
    let consistent = per_agent.iter().all(|&ok| ok);
    Ok(RationalizabilityVerdict {
        consistent,
        per_agent,
        certificates: if consistent {
            certs.into_iter().flatten().collect()
        } else {
            Vec::new()
        },
    })
}

/// Revealed-preference cycle test for agent `i`: `t → s` when
/// `α_t'β_s ≤ α_t'β_t` (strict when `<`); consistent iff no cycle contains a
/// strict edge.
pub fn garp_oracle(ds: &ProbeResponseDataset, i: usize) -> Result<bool> {
    ds.check_agent(i)?;
    let t_len = ds.t_len();
    let spend = |t: usize, s: usize| dot(ds.probe(t).as_slice(), ds.response(s, i).as_slice());
    let mut reach = vec![vec![false; t_len]; t_len];
    let mut strict = vec![vec![false; t_len]; t_len];
    for t in 0..t_len {
        let own = spend(t, t);
        reach[t][t] = true;
        for s in 0..t_len {
            if s != t {
                let other = spend(t, s);
                reach[t][s] = other <= own;
                strict[t][s] = other < own;
            }
        }
    }
    for k in 0..t_len {
        for t in 0..t_len {
            if reach[t][k] {
                for s in 0..t_len {
                    if reach[k][s] {
                        reach[t][s] = true;
                    }
                }
            }
        }
    }
    let violated = (0..t_len).any(|t| (0..t_len).any(|s| strict[t][s] && reach[s][t]));
    Ok(!violated)
}

/// Builds `U(β) = min_t [u_t + λ_t·α_t'(β − β_t^i)]` from a certificate.
pub fn reconstruct_utility(
    cert: &AfriatCertificate,
    ds: &ProbeResponseDataset,
) -> Result<UtilityKind> {
    ds.check_agent(cert.agent)?;
    if cert.u.len() != ds.t_len() || cert.lambda.len() != ds.t_len() {
        return Err(Error::Dimension(format!(
            "certificate has {} / {} multipliers for a dataset with T = {}",
            cert.u.len(),
            cert.lambda.len(),
            ds.t_len()
        )));
    }
    if let Some(l) = cert.lambda.iter().find(|&&l| !(l > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "certificate slope scale must be > 0, got {l}"
        )));
    }
    let pieces = (0..ds.t_len())
        .map(|t| AffinePiece {
            offset: cert.u[t],
            slope_scale: cert.lambda[t],
            probe: ds.probe(t).0.clone(),
            anchor: ds.response(t, cert.agent).0.clone(),
        })
        .collect();
    Ok(UtilityKind::PiecewiseAffine(pieces))
}

fn require_pair(kind: &UtilityKind, beta: &[f64]) -> Result<(f64, f64)> {
    match beta {
        &[b1, b2] => Ok((b1, b2)),
        _ => Err(Error::Dimension(format!(
            "{} utility is defined on n = 2, got n = {}",
            kind.name(),
            beta.len()
        ))),
    }
}

/// Evaluates a utility at a response.
pub fn eval_utility(utility: &UtilityKind, beta: &Response) -> Result<f64> {
    let b = beta.as_slice();
    match utility {
        UtilityKind::Det => require_pair(utility, b).map(|(x, y)| x * y),
        UtilityKind::Trace => require_pair(utility, b).map(|(x, y)| x + y),
        UtilityKind::SqrtProd => {
            let (x, y) = require_pair(utility, b)?;
            if x < 0.0 {
                return Err(Error::Domain(format!(
                    "sqrt-prod utility needs beta_1 >= 0, got {x}"
                )));
            }
            Ok(x.sqrt() * y)
        }
        UtilityKind::PiecewiseAffine(pieces) => {
            if pieces.is_empty() {
                return Err(Error::InvalidArgument(
                    "piecewise-affine utility has no pieces".into(),
                ));
            }
            let mut best = f64::INFINITY;
            for p in pieces {
                if p.probe.len() != b.len() || p.anchor.len() != b.len() {
                    return Err(Error::Dimension(format!(
                        "piece has dimension {}, response has {}",
                        p.probe.len(),
                        b.len()
                    )));
                }
                let shift: f64 = p
                    .probe
                    .iter()
                    .zip(b.iter().zip(&p.anchor))
                    .map(|(a, (x, y))| a * (x - y))
                    .sum();
                best = best.min(p.offset + p.slope_scale * shift);
            }
            Ok(best)
        }
    }
}
