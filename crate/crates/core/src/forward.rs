//! Data generation: probe sampling, coordinated responses under a joint
//! budget `α_t'(Σ_i β_t^i) ≤ p*`, non-coordinated responses, and observation
//! noise.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::afriat::eval_utility;
use crate::error::{Error, Result};
use crate::model::{
    dot, BudgetSpec, NoiseModel, Probe, ProbeResponseDataset, Response, SimplexWeights, UtilityKind,
};
use crate::rng::substream;

/// Components of two probes closer than this count as tied minima.
const TIE_TOL: f64 = 1e-12;

/// Per-component probe law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum ProbeLaw {
    Uniform { low: f64, high: f64 },
}

impl Default for ProbeLaw {
    fn default() -> Self {
        ProbeLaw::Uniform {
            low: 0.1,
            high: 1.1,
        }
    }
}

impl ProbeLaw {
    pub fn sample<R: Rng + ?Sized>(&self, t_len: usize, n: usize, rng: &mut R) -> Vec<Probe> {
        let ProbeLaw::Uniform { low, high } = *self;
        (0..t_len)
            .map(|_| Probe((0..n).map(|_| rng.random_range(low..=high)).collect()))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum GenerationMode {
    /// Split the budget by weight and solve each agent in closed form.
    #[default]
    BudgetShare,
    /// Multi-start projected-gradient ascent on the scalarized joint program.
    JointAscent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationConfig {
    #[serde(rename = "T")]
    pub t_len: usize,
    #[serde(rename = "M")]
    pub m_len: usize,
    pub n: usize,
    pub probe_law: ProbeLaw,
    pub utilities: Vec<UtilityKind>,
    pub weights: SimplexWeights,
    pub budget: BudgetSpec,
    pub mode: GenerationMode,
    pub seed: u64,
}

impl GenerationConfig {
    /// Three agents with det, trace and sqrt-prod objectives, weights
    /// proportional to (0.4, 0.4, 0.3), `T = 10`, `n = 2`, `p* = 1`.
    pub fn reference(seed: u64) -> Self {
        Self {
            t_len: 10,
            m_len: 3,
            n: 2,
            probe_law: ProbeLaw::default(),
            utilities: vec![UtilityKind::Det, UtilityKind::Trace, UtilityKind::SqrtProd],
            weights: SimplexWeights::normalized(&[0.4, 0.4, 0.3]).expect("positive weights"),
            budget: BudgetSpec::default(),
            mode: GenerationMode::BudgetShare,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_len == 0 || self.m_len == 0 || self.n == 0 {
            return Err(Error::InvalidArgument("T, M and n must all be >= 1".into()));
        }
        if self.utilities.len() != self.m_len || self.weights.len() != self.m_len {
            return Err(Error::InvalidArgument(format!(
                "M = {} but {} utilities and {} weights",
                self.m_len,
                self.utilities.len(),
                self.weights.len()
            )));
        }
        if let Some(u) = self.utilities.iter().find(|u| !u.is_generator()) {
            return Err(Error::Unsupported(format!(
                "{} cannot generate data",
                u.name()
            )));
        }
        if self.n != 2 {
            return Err(Error::Unsupported(format!(
                "generator utilities need n = 2, got {}",
                self.n
            )));
        }
        let ProbeLaw::Uniform { low, high } = self.probe_law;
        if !(low > 0.0 && high >= low && high.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "probe law needs 0 < low <= high, got [{low}, {high}]"
            )));
        }
        Ok(())
    }
}

/// `T` probes with i.i.d. U[0.1, 1.1] components.
pub fn sample_probes<R: Rng + ?Sized>(t_len: usize, n: usize, rng: &mut R) -> Vec<Probe> {
    ProbeLaw::default().sample(t_len, n, rng)
}

/// Maximizer of a generator utility over `{β ≥ 0 : α'β ≤ budget}`.
pub fn solve_radar_budget(utility: &UtilityKind, alpha: &Probe, budget: f64) -> Result<Response> {
    let a = alpha.as_slice();
    if a.len() != 2 {
        return Err(Error::Dimension(format!(
            "generator utilities need n = 2, got {}",
            a.len()
        )));
    }
    if a.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "probe must be positive, got {a:?}"
        )));
    }
    if !(budget > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "budget must be positive, got {budget}"
        )));
    }
    let beta = match utility {
        // Equal budget shares.
        UtilityKind::Det => vec![budget / (2.0 * a[0]), budget / (2.0 * a[1])],
        // Cobb-Douglas with exponents (1/2, 1): shares (1/3, 2/3).
        UtilityKind::SqrtProd => vec![budget / (3.0 * a[0]), 2.0 * budget / (3.0 * a[1])],
        // Linear: everything on the cheapest components, split equally on ties.
        UtilityKind::Trace => {
            let min = a.iter().copied().fold(f64::INFINITY, f64::min);
            let cheapest: Vec<bool> = a.iter().map(|&v| v - min <= TIE_TOL).collect();
            let k = cheapest.iter().filter(|&&c| c).count() as f64;
            a.iter()
                .zip(&cheapest)
                .map(|(&v, &c)| if c { budget / (k * v) } else { 0.0 })
                .collect()
        }
        UtilityKind::PiecewiseAffine(_) => {
            return Err(Error::Unsupported(
                "piecewise-affine reconstructions are not generators".into(),
            ))
        }
    };
    Ok(Response(beta))
}

/// Coordinated responses for every probe.
pub fn generate_coordinated(cfg: &GenerationConfig) -> Result<ProbeResponseDataset> {
    cfg.validate()?;
    let probes = cfg
        .probe_law
        .sample(cfg.t_len, cfg.n, &mut substream(cfg.seed, 0));
    let p_star = cfg.budget.p_star();
    let responses = match cfg.mode {
        GenerationMode::BudgetShare => probes
            .iter()
            .map(|alpha| {
                cfg.utilities
                    .iter()
                    .zip(cfg.weights.as_slice())
                    .map(|(u, &mu)| solve_radar_budget(u, alpha, mu * p_star))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?,
        GenerationMode::JointAscent => probes
            .par_iter()
            .enumerate()
            .map(|(t, alpha)| {
                let mut rng = substream(cfg.seed, t as u64 + 1);
                joint_ascent(
                    &cfg.utilities,
                    cfg.weights.as_slice(),
                    alpha,
                    p_star,
                    &AscentSettings::default(),
                    &mut rng,
                )
                .map_err(|residual| Error::NotConverged { t: t + 1, residual })
            })
            .collect::<Result<Vec<_>>>()?,
    };
    ProbeResponseDataset::new(probes, responses, false)
}

/// Probes from [`sample_probes`] and i.i.d. U[0, 1] response components.
pub fn generate_noncoordinated<R: Rng + ?Sized>(
    t_len: usize,
    m_len: usize,
    n: usize,
    rng: &mut R,
) -> Result<ProbeResponseDataset> {
    let probes = sample_probes(t_len, n, rng);
    let responses = (0..t_len)
        .map(|_| {
            (0..m_len)
                .map(|_| Response((0..n).map(|_| rng.random::<f64>()).collect()))
                .collect()
        })
        .collect();
    ProbeResponseDataset::new(probes, responses, false)
}

/// Additive noise draws `ε[t][i][c]`.
pub type NoiseDraws = Vec<Vec<Vec<f64>>>;

pub fn sample_noise<R: Rng + ?Sized>(
    t_len: usize,
    m_len: usize,
    n: usize,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<NoiseDraws> {
    let normal =
        Normal::new(0.0, noise.sigma()).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok((0..t_len)
        .map(|_| {
            (0..m_len)
                .map(|_| (0..n).map(|_| normal.sample(rng)).collect())
                .collect()
        })
        .collect())
}

/// Adds recorded draws to a clean dataset's responses.
pub fn apply_noise(ds: &ProbeResponseDataset, draws: &NoiseDraws) -> Result<ProbeResponseDataset> {
    if ds.noisy() {
        return Err(Error::InvalidArgument("dataset is already noisy".into()));
    }
    let shape_ok = draws.len() == ds.t_len()
        && draws
            .iter()
            .all(|row| row.len() == ds.m_len() && row.iter().all(|e| e.len() == ds.n_dim()));
    if !shape_ok {
        return Err(Error::Dimension(
            "noise draws do not match the dataset shape".into(),
        ));
    }
    Ok(ds
        .map_responses(|t, i, c, v| v + draws[t][i][c])
        .with_noisy(true))
}

/// `β̃_t^i = β_t^i + ε_t^i` with i.i.d. Gaussian `ε`.
pub fn add_noise<R: Rng + ?Sized>(
    ds: &ProbeResponseDataset,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<ProbeResponseDataset> {
    let draws = sample_noise(ds.t_len(), ds.m_len(), ds.n_dim(), noise, rng)?;
    apply_noise(ds, &draws)
}

#[derive(Debug, Clone, Copy)]
pub struct AscentSettings {
    pub restarts: usize,
    pub max_iter: usize,
    /// Convergence threshold on the unit-step gradient-map norm.
    pub tol: f64,
}

impl Default for AscentSettings {
    fn default() -> Self {
        Self {
            restarts: 20,
            max_iter: 10_000,
            tol: 1e-6,
        }
    }
}

fn objective(utilities: &[UtilityKind], mu: &[f64], x: &[f64], n: usize) -> f64 {
    utilities
        .iter()
        .zip(mu)
        .zip(x.chunks(n))
        .map(|((u, &w), beta)| {
            if w == 0.0 {
                0.0
            } else {
                w * eval_utility(u, &Response(beta.to_vec())).unwrap_or(f64::NEG_INFINITY)
            }
        })
        .sum()
}

/// Smallest `β₁` used when differentiating `√β₁·β₂`.
const SQRT_FLOOR: f64 = 1e-12;

fn gradient(utilities: &[UtilityKind], mu: &[f64], x: &[f64], n: usize) -> Vec<f64> {
    let mut g = Vec::with_capacity(x.len());
    for ((u, &w), beta) in utilities.iter().zip(mu).zip(x.chunks(n)) {
        let (b1, b2) = (beta[0], beta[1]);
        let d = match u {
            UtilityKind::Det => [b2, b1],
            UtilityKind::Trace => [1.0, 1.0],
            UtilityKind::SqrtProd => {
                let r = b1.max(SQRT_FLOOR).sqrt();
                [b2 / (2.0 * r), r]
            }
            UtilityKind::PiecewiseAffine(_) => unreachable!("validated generator utilities"),
        };
        g.extend(d.iter().map(|v| w * v));
    }
    g
}

/// Euclidean projection onto `{x ≥ 0 : w'x ≤ cap}` for `w > 0`.
pub fn project_budget(y: &[f64], w: &[f64], cap: f64) -> Vec<f64> {
    let clipped: Vec<f64> = y.iter().map(|v| v.max(0.0)).collect();
    if dot(&clipped, w) <= cap {
        return clipped;
    }
    // Find τ > 0 with Σ w_j·max(y_j − τ w_j, 0) = cap; breakpoints at y_j / w_j.
    let mut order: Vec<usize> = (0..y.len()).filter(|&j| y[j] > 0.0).collect();
    order.sort_by(|&p, &q| (y[q] / w[q]).total_cmp(&(y[p] / w[p])));
    let (mut wy, mut ww) = (0.0, 0.0);
    let mut tau = 0.0;
    for (k, &j) in order.iter().enumerate() {
        wy += w[j] * y[j];
        ww += w[j] * w[j];
        tau = (wy - cap) / ww;
        let next = order.get(k + 1).map_or(f64::NEG_INFINITY, |&q| y[q] / w[q]);
        if tau >= next {
            break;
        }
    }
    y.iter()
        .zip(w)
        .map(|(v, wj)| (v - tau * wj).max(0.0))
        .collect()
}

fn norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Multi-start projected-gradient ascent on `Σ μ_i f_i(β^i)` subject to
/// `α'(Σ β^i) ≤ p*`, `β ≥ 0`. Steps are chosen by backtracking on the
/// quadratic lower model. Returns the best point whose gradient-map norm
/// fell below `settings.tol`, or the smallest residual seen on failure.
pub fn joint_ascent<R: Rng + ?Sized>(
    utilities: &[UtilityKind],
    mu: &[f64],
    alpha: &Probe,
    p_star: f64,
    settings: &AscentSettings,
    rng: &mut R,
) -> std::result::Result<Vec<Response>, f64> {
    let n = alpha.dim();
    let m = utilities.len();
    let w: Vec<f64> = (0..m)
        .flat_map(|_| alpha.as_slice().iter().copied())
        .collect();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut best_residual = f64::INFINITY;

    for _ in 0..settings.restarts {
        let r: Vec<f64> = (0..w.len()).map(|_| rng.random::<f64>() + 1e-3).collect();
        let total: f64 = r.iter().sum();
        let mut x: Vec<f64> = r
            .iter()
            .zip(&w)
            .map(|(ri, wi)| ri / total * p_star / wi)
            .collect();
        let mut fx = objective(utilities, mu, &x, n);
        let mut step = 1.0;
        for _ in 0..settings.max_iter {
            let g = gradient(utilities, mu, &x, n);
            let ahead: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a + b).collect();
            let residual = norm_diff(&x, &project_budget(&ahead, &w, p_star));
            best_residual = best_residual.min(residual);
            if residual <= settings.tol {
                if best.as_ref().is_none_or(|(fb, _)| fx > *fb) {
                    best = Some((fx, x.clone()));
                }
                break;
            }
            loop {
                let trial: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a + step * b).collect();
                let xn = project_budget(&trial, &w, p_star);
                let d: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
                let fxn = objective(utilities, mu, &xn, n);
                let model = fx + dot(&g, &d) - dot(&d, &d) / (2.0 * step);
                if fxn >= model || step < 1e-16 {
                    x = xn;
                    fx = fxn;
                    step = (step * 2.0).min(1e6);
                    break;
                }
                step *= 0.5;
            }
        }
    }
    best.map(|(_, x)| x.chunks(n).map(|c| Response(c.to_vec())).collect())
        .ok_or(best_residual)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn closed_form_budget_solutions() {
        let one = Probe(vec![1.0, 1.0]);
        let det = solve_radar_budget(&UtilityKind::Det, &one, 1.0).unwrap();
        assert!(close(&det.0, &[0.5, 0.5], 1e-15));
        let sp = solve_radar_budget(&UtilityKind::SqrtProd, &one, 1.0).unwrap();
        assert!(close(&sp.0, &[1.0 / 3.0, 2.0 / 3.0], 1e-15));
        let tr = solve_radar_budget(&UtilityKind::Trace, &Probe(vec![0.5, 1.0]), 1.0).unwrap();
        assert!(close(&tr.0, &[2.0, 0.0], 1e-15));
        let tie = solve_radar_budget(&UtilityKind::Trace, &one, 1.0).unwrap();
        assert!(close(&tie.0, &[0.5, 0.5], 1e-15));
    }

    #[test]
    fn closed_forms_beat_a_fine_budget_line_search() {
        let alpha = Probe(vec![0.7, 0.3]);
        for u in [UtilityKind::Det, UtilityKind::Trace, UtilityKind::SqrtProd] {
            let best = solve_radar_budget(&u, &alpha, 0.8).unwrap();
            assert!((alpha.spend(&best) - 0.8).abs() < 1e-12);
            let fbest = eval_utility(&u, &best).unwrap();
            for k in 0..=10_000 {
                let share = k as f64 / 10_000.0;
                let b = Response(vec![share * 0.8 / 0.7, (1.0 - share) * 0.8 / 0.3]);
                assert!(
                    eval_utility(&u, &b).unwrap() <= fbest + 1e-12,
                    "{u:?} at {share}"
                );
            }
        }
    }

    #[test]
    fn reconstructions_are_not_generators() {
        let r = solve_radar_budget(
            &UtilityKind::PiecewiseAffine(vec![]),
            &Probe(vec![1.0, 1.0]),
            1.0,
        );
        assert!(matches!(r, Err(Error::Unsupported(_))));
    }

    #[test]
    fn budget_share_reference_shares() {
        // Weights proportional to (0.4, 0.4, 0.3) with p* = 1.1 give budgets (0.4, 0.4, 0.3).
        let mut cfg = GenerationConfig::reference(3);
        cfg.t_len = 1;
        cfg.budget = BudgetSpec::new(1.1).unwrap();
        cfg.probe_law = ProbeLaw::Uniform {
            low: 1.0,
            high: 1.0,
        };
        let ds = generate_coordinated(&cfg).unwrap();
        assert!(close(ds.response(0, 0).as_slice(), &[0.2, 0.2], 1e-15));
        assert!(close(ds.response(0, 1).as_slice(), &[0.2, 0.2], 1e-15));
        assert!(close(ds.response(0, 2).as_slice(), &[0.1, 0.2], 1e-15));
    }

    #[test]
    fn probes_lie_in_the_law_support() {
        let probes = sample_probes(1000, 2, &mut substream(1, 0));
        assert!(probes
            .iter()
            .flat_map(|p| p.0.iter())
            .all(|&c| (0.1..=1.1).contains(&c)));
        assert_eq!(probes, sample_probes(1000, 2, &mut substream(1, 0)));
    }

    #[test]
    fn probe_mean() {
        let probes = sample_probes(50_000, 2, &mut substream(11, 0));
        let mean = probes.iter().flat_map(|p| p.0.iter()).sum::<f64>() / 100_000.0;
        assert!((mean - 0.6).abs() < 0.01, "{mean}");
    }

    #[test]
    fn noncoordinated_law() {
        let ds = generate_noncoordinated(50_000, 1, 2, &mut substream(5, 0)).unwrap();
        let vals: Vec<f64> = (0..ds.t_len())
            .flat_map(|t| ds.response(t, 0).0.clone())
            .collect();
        assert!(vals.iter().all(|&v| (0.0..=1.0).contains(&v)));
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        assert!((mean - 0.5).abs() < 0.01, "{mean}");
        assert_eq!(
            ds,
            generate_noncoordinated(50_000, 1, 2, &mut substream(5, 0)).unwrap()
        );
    }

    #[test]
    fn zero_noise_only_flips_the_flag() {
        let ds = generate_coordinated(&GenerationConfig::reference(2)).unwrap();
        let noisy = add_noise(
            &ds,
            &NoiseModel::gaussian(0.0).unwrap(),
            &mut substream(2, 9),
        )
        .unwrap();
        assert!(noisy.noisy());
        assert_eq!(noisy.with_noisy(false), ds);
    }

    #[test]
    fn noise_std_and_untouched_probes() {
        let ds = generate_noncoordinated(25_000, 2, 2, &mut substream(8, 0)).unwrap();
        let noisy = add_noise(
            &ds,
            &NoiseModel::gaussian(0.1).unwrap(),
            &mut substream(8, 1),
        )
        .unwrap();
        assert_eq!(noisy.probes(), ds.probes());
        let dev: Vec<f64> = (0..ds.t_len())
            .flat_map(|t| (0..2).flat_map(move |i| (0..2).map(move |c| (t, i, c))))
            .map(|(t, i, c)| noisy.response(t, i).0[c] - ds.response(t, i).0[c])
            .collect();
        let mean = dev.iter().sum::<f64>() / dev.len() as f64;
        let sd =
            (dev.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (dev.len() - 1) as f64).sqrt();
        assert!((sd - 0.1).abs() < 0.002, "{sd}");
        assert!(add_noise(
            &noisy,
            &NoiseModel::gaussian(0.1).unwrap(),
            &mut substream(8, 2)
        )
        .is_err());
    }

    #[test]
    fn projection_hits_the_budget_face() {
        let w = [0.5, 1.0, 2.0];
        let x = project_budget(&[3.0, -1.0, 2.0], &w, 1.0);
        assert!((dot(&x, &w) - 1.0).abs() < 1e-12);
        assert_eq!(x[1], 0.0);
        // Already feasible points only get clipped.
        assert_eq!(
            project_budget(&[0.1, -0.2, 0.1], &w, 1.0),
            vec![0.1, 0.0, 0.1]
        );
    }

    #[test]
    fn projection_is_nearest_on_a_grid() {
        let w = [0.8, 0.4];
        let y = [1.5, 0.9];
        let p = project_budget(&y, &w, 1.0);
        let dp = norm_diff(&p, &y);
        for i in 0..=400 {
            for j in 0..=400 {
                let q = [i as f64 / 400.0 * 1.25, j as f64 / 400.0 * 2.5];
                if dot(&q, &w) <= 1.0 {
                    assert!(norm_diff(&q, &y) >= dp - 1e-12);
                }
            }
        }
    }

    #[test]
    fn joint_ascent_single_agent_matches_closed_form() {
        let alpha = Probe(vec![0.6, 0.9]);
        for u in [UtilityKind::Det, UtilityKind::SqrtProd, UtilityKind::Trace] {
            let got = joint_ascent(
                std::slice::from_ref(&u),
                &[1.0],
                &alpha,
                1.0,
                &AscentSettings::default(),
                &mut substream(4, 0),
            )
            .unwrap();
            let want = solve_radar_budget(&u, &alpha, 1.0).unwrap();
            assert!(
                close(&got[0].0, &want.0, 1e-5),
                "{u:?}: {got:?} vs {want:?}"
            );
        }
    }

    #[test]
    fn joint_ascent_saturates_and_zero_weight_gets_nothing() {
        let mut cfg = GenerationConfig::reference(21);
        cfg.mode = GenerationMode::JointAscent;
        cfg.weights = SimplexWeights::closed(vec![0.5, 0.5, 0.0]).unwrap();
        let ds = generate_coordinated(&cfg).unwrap();
        for t in 0..ds.t_len() {
            let spend: f64 = ds
                .responses_at(t)
                .iter()
                .map(|b| ds.probe(t).spend(b))
                .sum();
            assert!((spend - 1.0).abs() < 1e-9, "t={t}: {spend}");
            assert!(
                ds.response(t, 2).0.iter().all(|&v| v.abs() <= 1e-6),
                "{:?}",
                ds.response(t, 2)
            );
        }
    }

    #[test]
    fn generation_config_json() {
        let cfg = GenerationConfig::reference(7);
        let j = serde_json::to_value(&cfg).unwrap();
        let keys: Vec<&str> = j.as_object().unwrap().keys().map(String::as_str).collect();
        for k in [
            "T",
            "M",
            "n",
            "probe_law",
            "utilities",
            "weights",
            "budget",
            "mode",
            "seed",
        ] {
            assert!(keys.contains(&k), "{k}");
        }
        assert_eq!(keys.len(), 9);
        let back: GenerationConfig = serde_json::from_value(j).unwrap();
        assert_eq!(back, cfg);
        let bad = r#"{"T":1,"M":1,"n":2,"probe_law":{"kind":"uniform","low":0.1,"high":1.1},
            "utilities":["det"],"weights":[0.5],"budget":1.0,"mode":"budget-share","seed":1}"#;
        assert!(serde_json::from_str::<GenerationConfig>(bad).is_err());
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = GenerationConfig::reference(1);
        cfg.m_len = 2;
        assert!(generate_coordinated(&cfg).is_err());
        let mut cfg = GenerationConfig::reference(1);
        cfg.n = 3;
        assert!(matches!(
            generate_coordinated(&cfg),
            Err(Error::Unsupported(_))
        ));
    }
}
