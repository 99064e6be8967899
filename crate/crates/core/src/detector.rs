//! Noise-calibrated coordination test.
//!
//! For each agent the statistic `Φ̂ⁱ` is the smallest shift `Φ` for which
//!
//! ```text
//! u_s − u_t − λ_t·(α_t'(β̃_s − β̃_t) + Φ) ≤ 0,   λ_t > 0
//! ```
//!
//! is feasible, and `Φ* = maxᵢ Φ̂ⁱ`. Feasibility is monotone in `Φ` because
//! `λ_t > 0`, so `Φ̂ⁱ` is found by bisection over LP feasibility checks. The
//! reference law is that of `Ψ = maxᵢ max_{t≠s} α_t'(εᵢ_t − εᵢ_s)` under the
//! assumed noise, estimated by Monte Carlo for the observed probes. The test
//! accepts coordination (H0) iff `1 − F̂_Ψ(Φ*) > γ`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::afriat::{afriat_matrix, relaxed_feasible, relaxed_system, AfriatCertificate};
use crate::error::{Error, Result};
use crate::forward::{
    add_noise, generate_coordinated, generate_noncoordinated, sample_noise, GenerationConfig,
    NoiseDraws,
};
use crate::model::{dot, NoiseModel, Probe, ProbeResponseDataset};
use crate::rng::{child_seed, substream};

/// Default absolute bisection tolerance on `Φ`.
pub const DEFAULT_TOL: f64 = 1e-9;
/// Lower limit of the bracket search.
pub const PHI_FLOOR: f64 = -1e6;
/// Default number of Monte-Carlo draws of `Ψ`.
pub const DEFAULT_L: usize = 500;

/// Substream for observation noise in a trial.
pub const NOISE_STREAM: u64 = 1 << 40;
/// Substream for the `Ψ` Monte-Carlo sample.
pub const PSI_STREAM: u64 = 1 << 41;

/// `Φ̂ⁱ` together with multipliers feasible at that value.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiHat {
    pub value: f64,
    pub certificate: AfriatCertificate,
    /// Set when no finite minimizer exists (e.g. `T = 1`); `value` then
    /// follows the convention `0` (T = 1) or [`PHI_FLOOR`].
    pub degenerate: bool,
    /// LP feasibility checks performed.
    pub lp_solves: usize,
}

/// Minimal feasible shift for agent `i`, to within `tol` above the infimum.
pub fn phi_hat(ds: &ProbeResponseDataset, i: usize, tol: f64) -> Result<PhiHat> {
    let a = afriat_matrix(ds, i)?;
    phi_hat_from_matrix(&a, i, tol)
}

pub fn phi_hat_from_matrix(a: &[Vec<f64>], agent: usize, tol: f64) -> Result<PhiHat> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "bisection tolerance must be > 0, got {tol}"
        )));
    }
    let t_len = a.len();
    let cert = |(u, lambda): (Vec<f64>, Vec<f64>)| AfriatCertificate { agent, u, lambda };
    if t_len == 1 {
        return Ok(PhiHat {
            value: 0.0,
            certificate: cert((vec![1.0], vec![1.0])),
            degenerate: true,
            lp_solves: 0,
        });
    }

    // u ≡ 1, λ ≡ 1 is feasible at the upper end.
    let mut hi = 0.0_f64;
    for (t, row) in a.iter().enumerate() {
        for (s, &v) in row.iter().enumerate() {
            if s != t {
                hi = hi.max(-v);
            }
        }
    }
    let top = hi;
    let mut solves = 0;

    let mut lo = -hi - 1.0;
    loop {
        solves += 1;
        if !relaxed_feasible(a, lo)? {
            break;
        }
        hi = lo;
        if lo <= PHI_FLOOR {
            solves += 1;
            let c = relaxed_system(a, PHI_FLOOR)?.unwrap_or((vec![1.0; t_len], vec![1.0; t_len]));
            return Ok(PhiHat {
                value: PHI_FLOOR,
                certificate: cert(c),
                degenerate: true,
                lp_solves: solves,
            });
        }
        lo = (2.0 * lo).max(PHI_FLOOR);
    }

    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        solves += 1;
        if relaxed_feasible(a, mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }

    // Just above the infimum the multipliers grow like 1/(Φ − Φ̂) and the
    // solver's point may not check out. Step up until one does, then close
    // the gap again with checked points only.
    solves += 1;
    if let Some(c) = relaxed_system(a, hi)? {
        return Ok(PhiHat {
            value: hi,
            certificate: cert(c),
            degenerate: false,
            lp_solves: solves,
        });
    }
    let (mut bad, mut step) = (hi, tol);
    let (mut good, mut best) = loop {
        let phi = hi + step;
        if phi >= top {
            break (top, (vec![1.0; t_len], vec![1.0; t_len]));
        }
        solves += 1;
        match relaxed_system(a, phi)? {
            Some(c) => break (phi, c),
            None => bad = phi,
        }
        step *= 2.0;
    };
    while good - bad > tol {
        let mid = 0.5 * (bad + good);
        solves += 1;
        match relaxed_system(a, mid)? {
            Some(c) => {
                good = mid;
                best = c;
            }
            None => bad = mid,
        }
    }
    Ok(PhiHat {
        value: good,
        certificate: cert(best),
        degenerate: false,
        lp_solves: solves,
    })
}

/// Per-agent statistics and the network statistic `Φ* = maxᵢ Φ̂ⁱ`.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedStatistic {
    pub per_radar: Vec<f64>,
    pub phi_star: f64,
    pub certificates: Vec<AfriatCertificate>,
    pub degenerate: bool,
}

impl RelaxedStatistic {
    pub fn from_parts(parts: Vec<PhiHat>) -> Self {
        let per_radar: Vec<f64> = parts.iter().map(|p| p.value).collect();
        let phi_star = per_radar.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self {
            per_radar,
            phi_star,
            degenerate: parts.iter().any(|p| p.degenerate),
            certificates: parts.into_iter().map(|p| p.certificate).collect(),
        }
    }
}

pub fn phi_star(ds: &ProbeResponseDataset, tol: f64) -> Result<RelaxedStatistic> {
    let parts = (0..ds.m_len())
        .into_par_iter()
        .map(|i| phi_hat(ds, i, tol))
        .collect::<Result<Vec<_>>>()?;
    Ok(RelaxedStatistic::from_parts(parts))
}

/// `(Ψⁱ for each agent, Ψ)` for one realization of the noise. With `T = 1`
/// there are no pairs and every `Ψⁱ` is taken as `0`.
pub fn psi_from_draws(probes: &[Probe], draws: &NoiseDraws) -> (Vec<f64>, f64) {
    let t_len = probes.len();
    let m_len = draws.first().map_or(0, Vec::len);
    let per: Vec<f64> = (0..m_len)
        .map(|i| {
            if t_len < 2 {
                return 0.0;
            }
            let mut best = f64::NEG_INFINITY;
            for (t, alpha) in probes.iter().enumerate() {
                let own = dot(alpha.as_slice(), &draws[t][i]);
                for s in (0..t_len).filter(|&s| s != t) {
                    best = best.max(own - dot(alpha.as_slice(), &draws[s][i]));
                }
            }
            best
        })
        .collect();
    let psi = per.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (per, psi)
}

/// Sorted Monte-Carlo samples defining the step function `F̂`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    samples: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument(
                "empirical CDF needs at least one sample".into(),
            ));
        }
        if samples.iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidArgument("NaN sample".into()));
        }
        samples.sort_by(f64::total_cmp);
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Fraction of samples `≤ x`.
    pub fn value(&self, x: f64) -> f64 {
        self.samples.partition_point(|&s| s <= x) as f64 / self.samples.len() as f64
    }
}

pub fn cdf_value(cdf: &EmpiricalCdf, x: f64) -> f64 {
    cdf.value(x)
}

/// `L` draws of `Ψ` for the given probes under `noise`.
pub fn sample_psi<R: Rng + ?Sized>(
    probes: &[Probe],
    m_len: usize,
    noise: &NoiseModel,
    l: usize,
    rng: &mut R,
) -> Result<EmpiricalCdf> {
    if probes.is_empty() || m_len == 0 {
        return Err(Error::InvalidArgument(
            "need at least one probe and one agent".into(),
        ));
    }
    let n = probes[0].dim();
    let samples = (0..l)
        .map(|_| {
            sample_noise(probes.len(), m_len, n, noise, rng).map(|d| psi_from_draws(probes, &d).1)
        })
        .collect::<Result<Vec<_>>>()?;
    EmpiricalCdf::new(samples)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Hypothesis {
    /// The data are consistent with coordination.
    H0,
    H1,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorDecision {
    /// `1 − F̂_Ψ(Φ*)`
    pub statistic: f64,
    pub gamma: f64,
    pub hypothesis: Hypothesis,
    pub relaxed: RelaxedStatistic,
}

/// `1 − F̂_Ψ(x)`; nonincreasing in `x`.
pub fn tail_statistic(cdf: &EmpiricalCdf, x: f64) -> f64 {
    1.0 - cdf.value(x)
}

pub fn decide(statistic: f64, gamma: f64) -> Hypothesis {
    if statistic > gamma {
        Hypothesis::H0
    } else {
        Hypothesis::H1
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "gamma must lie in (0, 1), got {gamma}"
        )));
    }
    Ok(())
}

pub fn detect(
    ds: &ProbeResponseDataset,
    cdf: &EmpiricalCdf,
    gamma: f64,
    tol: f64,
) -> Result<DetectorDecision> {
    check_gamma(gamma)?;
    let relaxed = phi_star(ds, tol)?;
    let statistic = tail_statistic(cdf, relaxed.phi_star);
    Ok(DetectorDecision {
        statistic,
        gamma,
        hypothesis: decide(statistic, gamma),
        relaxed,
    })
}

/// Serialized detector output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorReport {
    pub phi_per_radar: Vec<f64>,
    pub phi_star: f64,
    pub statistic: f64,
    pub gamma: f64,
    pub hypothesis: Hypothesis,
    #[serde(rename = "L")]
    pub l: usize,
    pub seed: u64,
    pub sigma_assumed: f64,
    pub certificates: Vec<AfriatCertificate>,
}

/// Full detection pass on one dataset: `Ψ` law for its probes under the
/// assumed noise, then the decision.
pub fn run_detector(
    ds: &ProbeResponseDataset,
    assumed: &NoiseModel,
    gamma: f64,
    l: usize,
    seed: u64,
    tol: f64,
) -> Result<DetectorReport> {
    check_gamma(gamma)?;
    let cdf = sample_psi(
        ds.probes(),
        ds.m_len(),
        assumed,
        l,
        &mut substream(seed, PSI_STREAM),
    )?;
    let d = detect(ds, &cdf, gamma, tol)?;
    Ok(DetectorReport {
        phi_per_radar: d.relaxed.per_radar,
        phi_star: d.relaxed.phi_star,
        statistic: d.statistic,
        gamma,
        hypothesis: d.hypothesis,
        l,
        seed,
        sigma_assumed: assumed.sigma(),
        certificates: d.relaxed.certificates,
    })
}

/// Data-generating regime of a Monte-Carlo trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Coordinated,
    Noncoordinated,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::Coordinated => "coordinated",
            Regime::Noncoordinated => "noncoordinated",
        }
    }
}

/// Noise-free data for `regime` with the shape of `gen`, drawn from `seed`.
pub fn generate_clean(
    regime: Regime,
    gen: &GenerationConfig,
    seed: u64,
) -> Result<ProbeResponseDataset> {
    match regime {
        Regime::Coordinated => generate_coordinated(&GenerationConfig {
            seed,
            ..gen.clone()
        }),
        Regime::Noncoordinated => {
            generate_noncoordinated(gen.t_len, gen.m_len, gen.n, &mut substream(seed, 0))
        }
    }
}

/// One Monte-Carlo trial: generate data in `regime` with the shape of `gen`,
/// add `noise`, and run the detector with `noise` as the assumed law. Every
/// random draw comes from `seed`.
pub fn run_trial(
    regime: Regime,
    gen: &GenerationConfig,
    noise: &NoiseModel,
    gamma: f64,
    l: usize,
    seed: u64,
    tol: f64,
) -> Result<DetectorDecision> {
    let clean = generate_clean(regime, gen, seed)?;
    let noisy = add_noise(&clean, noise, &mut substream(seed, NOISE_STREAM))?;
    let cdf = sample_psi(
        noisy.probes(),
        noisy.m_len(),
        noise,
        l,
        &mut substream(seed, PSI_STREAM),
    )?;
    detect(&noisy, &cdf, gamma, tol)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Type1Report {
    /// Fraction of coordinated trials rejected (H1).
    pub rate: f64,
    pub rejections: usize,
    pub trials: usize,
    pub statistics: Vec<f64>,
}

/// Empirical false-alarm rate over `trials` coordinated noisy datasets.
pub fn type1_mc(
    gen: &GenerationConfig,
    noise: &NoiseModel,
    gamma: f64,
    trials: usize,
    l: usize,
    seed: u64,
) -> Result<Type1Report> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be >= 1".into()));
    }
    let decisions = (0..trials)
        .into_par_iter()
        .map(|k| {
            run_trial(
                Regime::Coordinated,
                gen,
                noise,
                gamma,
                l,
                child_seed(seed, k as u64),
                DEFAULT_TOL,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let rejections = decisions
        .iter()
        .filter(|d| d.hypothesis == Hypothesis::H1)
        .count();
    Ok(Type1Report {
        rate: rejections as f64 / trials as f64,
        rejections,
        trials,
        statistics: decisions.iter().map(|d| d.statistic).collect(),
    })
}
