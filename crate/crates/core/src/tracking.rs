//! Linear-Gaussian target model tracked by per-radar Kalman filters.
//!
//! The probe `α` is the spectrum of the state-noise covariance,
//! `Q(α) = diag(α)`, and a radar's response `β` is the spectrum of its inverse
//! measurement-noise covariance, `R(β) = diag(β)⁻¹`. The asymptotic predicted
//! covariance solves the algebraic Riccati equation
//!
//! ```text
//! Σ = A(Σ − ΣC'(CΣC' + R)⁻¹CΣ)A' + Q
//! ```
//!
//! and its inverse (the asymptotic precision) increases with `β`, which is
//! what lets a precision cap be stated as a linear budget on `β`.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Symmetry tolerance for covariance matrices.
pub const SYM_TOL: f64 = 1e-12;
pub const ARE_TOL: f64 = 1e-12;
pub const ARE_MAX_ITER: usize = 100_000;
/// Required bound on `‖𝒜(α, β, Σ*)‖_∞` at the returned fixed point.
pub const ARE_RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelFile {
    name: String,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    c: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackingModel {
    pub name: String,
    pub a: DMatrix<f64>,
    /// One measurement matrix per radar.
    pub c: Vec<DMatrix<f64>>,
}

fn to_matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 || rows.iter().any(|row| row.len() != c) {
        return Err(Error::Dimension(format!(
            "{what} must be a nonempty rectangular matrix"
        )));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

static SHIPPED: [&str; 3] = [
    include_str!("../models/scalar.json"),
    include_str!("../models/constant_velocity.json"),
    include_str!("../models/damped_oscillator.json"),
];

/// The example models under `models/`.
pub fn shipped_models() -> Vec<TrackingModel> {
    SHIPPED
        .iter()
        .map(|s| TrackingModel::from_json(s).expect("shipped model is valid"))
        .collect()
}

impl TrackingModel {
    pub fn new(name: impl Into<String>, a: DMatrix<f64>, c: Vec<DMatrix<f64>>) -> Result<Self> {
        let name = name.into();
        if !a.is_square() || a.nrows() == 0 {
            return Err(Error::Dimension(format!(
                "{name}: state matrix must be square"
            )));
        }
        if c.is_empty() {
            return Err(Error::Dimension(format!(
                "{name}: need at least one measurement matrix"
            )));
        }
        if let Some(ci) = c
            .iter()
            .find(|ci| ci.ncols() != a.nrows() || ci.nrows() == 0)
        {
            return Err(Error::Dimension(format!(
                "{name}: measurement matrix is {}x{}, state dimension is {}",
                ci.nrows(),
                ci.ncols(),
                a.nrows()
            )));
        }
        Ok(Self { name, a, c })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: ModelFile = serde_json::from_str(text)?;
        let a = to_matrix(&f.a, "A")?;
        let c =
            f.c.iter()
                .map(|ci| to_matrix(ci, "C"))
                .collect::<Result<Vec<_>>>()?;
        Self::new(f.name, a, c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn radars(&self) -> usize {
        self.c.len()
    }

    pub fn meas_dim(&self, i: usize) -> usize {
        self.c[i].nrows()
    }

    fn radar(&self, i: usize) -> Result<&DMatrix<f64>> {
        self.c.get(i).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "{}: radar {} out of range ({} radars)",
                self.name,
                i + 1,
                self.c.len()
            ))
        })
    }

    /// `Q(α) = diag(α)`.
    pub fn q(&self, alpha: &[f64]) -> Result<DMatrix<f64>> {
        if alpha.len() != self.state_dim() {
            return Err(Error::Dimension(format!(
                "probe has {} components, state dimension is {}",
                alpha.len(),
                self.state_dim()
            )));
        }
        if alpha.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "state-noise spectrum must be >= 0: {alpha:?}"
            )));
        }
        Ok(DMatrix::from_diagonal(&DVector::from_column_slice(alpha)))
    }

    /// `R(β) = diag(β)⁻¹`.
    pub fn r(&self, i: usize, beta: &[f64]) -> Result<DMatrix<f64>> {
        let y = self.radar(i)?.nrows();
        if beta.len() != y {
            return Err(Error::Dimension(format!(
                "response has {} components, radar {} measures {y}",
                beta.len(),
                i + 1
            )));
        }
        if beta.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "inverse measurement spectrum must be > 0: {beta:?}"
            )));
        }
        Ok(DMatrix::from_diagonal(&DVector::from_iterator(
            y,
            beta.iter().map(|b| 1.0 / b),
        )))
    }

    /// Sufficient detectability test for `[A, C_i]`: `A` Schur stable or
    /// `(A, C_i)` observable. `[A, √Q(α)]` is stabilizable for any `α > 0`.
    pub fn is_detectable(&self, i: usize) -> Result<bool> {
        let c = self.radar(i)?;
        let x = self.state_dim();
        let radius = self
            .a
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if radius < 1.0 {
            return Ok(true);
        }
        let mut obs = DMatrix::zeros(c.nrows() * x, x);
        let mut block = c.clone();
        for k in 0..x {
            obs.rows_mut(k * c.nrows(), c.nrows()).copy_from(&block);
            block = &block * &self.a;
        }
        let sv = obs.singular_values();
        let scale = sv.max().max(1.0);
        Ok(sv.iter().filter(|&&s| s > 1e-9 * scale).count() == x)
    }

    /// One step of the Riccati map: predicted covariance to the next predicted covariance.
    pub fn riccati_map(
        &self,
        i: usize,
        alpha: &[f64],
        beta: &[f64],
        sigma: &DMatrix<f64>,
    ) -> Result<DMatrix<f64>> {
        let c = self.radar(i)?;
        let q = self.q(alpha)?;
        let r = self.r(i, beta)?;
        let posterior = posterior_cov(sigma, c, &r)?;
        Ok(symmetrize(&(&self.a * posterior * self.a.transpose() + q)))
    }

    /// `𝒜(α, β, Σ) = −Σ + A(Σ − ΣC'(CΣC' + R)⁻¹CΣ)A' + Q`, max-abs norm.
    pub fn are_residual(
        &self,
        i: usize,
        alpha: &[f64],
        beta: &[f64],
        sigma: &DMatrix<f64>,
    ) -> Result<f64> {
        let next = self.riccati_map(i, alpha, beta, sigma)?;
        Ok((next - sigma).amax())
    }
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// `P − PC'(CPC' + R)⁻¹CP`
fn posterior_cov(
    predicted: &DMatrix<f64>,
    c: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let innovation = c * predicted * c.transpose() + r;
    let chol = innovation
        .cholesky()
        .ok_or_else(|| Error::Numerical("innovation covariance is not positive definite".into()))?;
    let gain_t = chol.solve(&(c * predicted));
    Ok(symmetrize(
        &(predicted - predicted * c.transpose() * gain_t),
    ))
}

/// Gaussian tracker belief `𝒩(mean, cov)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackerState {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl TrackerState {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if !cov.is_square() || cov.nrows() != mean.len() {
            return Err(Error::Dimension(
                "covariance must be square and match the mean".into(),
            ));
        }
        if (&cov - cov.transpose()).amax() > SYM_TOL {
            return Err(Error::InvalidArgument("covariance is not symmetric".into()));
        }
        Ok(Self { mean, cov })
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.cov.symmetric_eigenvalues().min()
    }
}

/// Time update: `x̂ ← A x̂`, `Σ ← AΣA' + Q(α)`.
pub fn kalman_predict(
    model: &TrackingModel,
    state: &TrackerState,
    alpha: &[f64],
) -> Result<TrackerState> {
    if state.mean.len() != model.state_dim() {
        return Err(Error::Dimension("state does not match the model".into()));
    }
    let q = model.q(alpha)?;
    Ok(TrackerState {
        mean: &model.a * &state.mean,
        cov: symmetrize(&(&model.a * &state.cov * model.a.transpose() + q)),
    })
}

/// Measurement update of a predicted belief with radar `i`'s observation `y`.
pub fn kalman_update(
    model: &TrackingModel,
    i: usize,
    predicted: &TrackerState,
    beta: &[f64],
    y: &DVector<f64>,
) -> Result<TrackerState> {
    let c = model.radar(i)?;
    if predicted.mean.len() != model.state_dim() || y.len() != c.nrows() {
        return Err(Error::Dimension(
            "state or measurement does not match the model".into(),
        ));
    }
    let r = model.r(i, beta)?;
    let p = &predicted.cov;
    let innovation = c * p * c.transpose() + r;
    let chol = innovation
        .cholesky()
        .ok_or_else(|| Error::Numerical("innovation covariance is not positive definite".into()))?;
    let residual = y - c * &predicted.mean;
    let mean = &predicted.mean + p * c.transpose() * chol.solve(&residual);
    let cov = symmetrize(&(p - p * c.transpose() * chol.solve(&(c * p))));
    Ok(TrackerState { mean, cov })
}

/// Predict with `Q(α)`, then update with radar `i`'s measurement under `R(β)`.
pub fn kalman_step(
    model: &TrackingModel,
    i: usize,
    state: &TrackerState,
    alpha: &[f64],
    beta: &[f64],
    y: &DVector<f64>,
) -> Result<TrackerState> {
    let predicted = kalman_predict(model, state, alpha)?;
    kalman_update(model, i, &predicted, beta, y)
}

/// Asymptotic predicted covariance by fixed-point iteration of the Riccati map.
pub fn solve_are(
    model: &TrackingModel,
    i: usize,
    alpha: &[f64],
    beta: &[f64],
    tol: f64,
) -> Result<DMatrix<f64>> {
    let mut sigma = model.q(alpha)?;
    for _ in 0..ARE_MAX_ITER {
        let next = model.riccati_map(i, alpha, beta, &sigma)?;
        let step = (&next - &sigma).amax();
        sigma = next;
        if step < tol {
            let residual = model.are_residual(i, alpha, beta, &sigma)?;
            if residual < ARE_RESIDUAL_TOL {
                return Ok(sigma);
            }
        }
    }
    Err(Error::Numerical(format!(
        "Riccati iteration for model {:?}, radar {} did not converge in {ARE_MAX_ITER} steps",
        model.name,
        i + 1
    )))
}

/// Whether the asymptotic precision at `beta_high` dominates the one at
/// `beta_low` in the Loewner order (up to `1e-10·I`).
pub fn precision_monotone_check(
    model: &TrackingModel,
    i: usize,
    alpha: &[f64],
    beta_low: &[f64],
    beta_high: &[f64],
) -> Result<bool> {
    if beta_low.len() != beta_high.len() || beta_low.iter().zip(beta_high).any(|(l, h)| l > h) {
        return Err(Error::InvalidArgument(
            "need beta_low <= beta_high componentwise".into(),
        ));
    }
    let low = solve_are(model, i, alpha, beta_low, ARE_TOL)?;
    let high = solve_are(model, i, alpha, beta_high, ARE_TOL)?;
    let inv = |m: DMatrix<f64>| {
        m.cholesky()
            .map(|c| c.inverse())
            .ok_or_else(|| Error::Numerical("asymptotic covariance is singular".into()))
    };
    let diff = symmetrize(&(inv(high)? - inv(low)?));
    Ok(diff.symmetric_eigenvalues().min() >= -1e-10)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(a: f64) -> TrackingModel {
        TrackingModel::new(
            "scalar",
            DMatrix::from_element(1, 1, a),
            vec![DMatrix::from_element(1, 1, 1.0)],
        )
        .unwrap()
    }

    #[test]
    fn golden_ratio_fixed_point() {
        let s = solve_are(&scalar(1.0), 0, &[1.0], &[1.0], ARE_TOL).unwrap();
        assert!((s[(0, 0)] - (1.0 + 5f64.sqrt()) / 2.0).abs() < 1e-10);
    }

    #[test]
    fn no_process_noise_gives_zero() {
        let s = solve_are(&scalar(0.5), 0, &[0.0], &[3.0], ARE_TOL).unwrap();
        assert_eq!(s[(0, 0)], 0.0);
    }

    #[test]
    fn scalar_update_then_predict() {
        let m = scalar(0.9);
        let prior = TrackerState::new(
            DVector::from_element(1, 0.0),
            DMatrix::from_element(1, 1, 1.0),
        )
        .unwrap();
        let post = kalman_update(&m, 0, &prior, &[1.0], &DVector::from_element(1, 1.0)).unwrap();
        assert!((post.mean[0] - 0.5).abs() < 1e-15);
        assert!((post.cov[(0, 0)] - 0.5).abs() < 1e-15);
        let next = kalman_predict(&m, &post, &[1.0]).unwrap();
        assert!((next.mean[0] - 0.45).abs() < 1e-15);
        assert!((next.cov[(0, 0)] - 1.405).abs() < 1e-15);
        // Full step from the same belief: P = 1.81, gain 1.81/2.81.
        let full = kalman_step(
            &m,
            0,
            &prior,
            &[1.0],
            &[1.0],
            &DVector::from_element(1, 1.0),
        )
        .unwrap();
        assert!((full.mean[0] - 1.81 / 2.81).abs() < 1e-15);
        assert!((full.cov[(0, 0)] - 1.81 / 2.81).abs() < 1e-15);
    }

    #[test]
    fn uninformative_measurement_keeps_the_prior() {
        let m = TrackingModel::new("id", DMatrix::identity(2, 2), vec![DMatrix::identity(2, 2)])
            .unwrap();
        let prior = TrackerState::new(
            DVector::from_vec(vec![1.0, -2.0]),
            DMatrix::identity(2, 2) * 0.7,
        )
        .unwrap();
        let post = kalman_step(
            &m,
            0,
            &prior,
            &[0.0, 0.0],
            &[1e-12, 1e-12],
            &DVector::from_vec(vec![50.0, 50.0]),
        )
        .unwrap();
        assert!((&post.mean - &prior.mean).amax() < 1e-9);
        assert!((&post.cov - &prior.cov).amax() < 1e-9);
    }

    #[test]
    fn monotone_in_beta_scalar() {
        assert!(precision_monotone_check(&scalar(1.0), 0, &[1.0], &[1.0], &[2.0]).unwrap());
        assert!(precision_monotone_check(&scalar(1.0), 0, &[1.0], &[1.5], &[1.5]).unwrap());
        assert!(precision_monotone_check(&scalar(1.0), 0, &[1.0], &[2.0], &[1.0]).is_err());
    }

    #[test]
    fn shipped_models_are_detectable() {
        for m in shipped_models() {
            for i in 0..m.radars() {
                assert!(m.is_detectable(i).unwrap(), "{} radar {}", m.name, i + 1);
            }
        }
    }

    #[test]
    fn undetectable_model_is_reported() {
        // Unstable mode in the second coordinate, measured only in the first.
        let m = TrackingModel::new(
            "blind",
            DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 1.2]),
            vec![DMatrix::from_row_slice(1, 2, &[1.0, 0.0])],
        )
        .unwrap();
        assert!(!m.is_detectable(0).unwrap());
        assert!(solve_are(&m, 0, &[1.0, 1.0], &[1.0], ARE_TOL).is_err());
    }

    #[test]
    fn dimension_errors() {
        let m = scalar(1.0);
        assert!(m.q(&[1.0, 1.0]).is_err());
        assert!(m.r(0, &[0.0]).is_err());
        assert!(m.r(1, &[1.0]).is_err());
        assert!(TrackingModel::from_json(r#"{"name":"x","A":[[1,0]],"C":[[[1]]]}"#).is_err());
    }
}
