//! Monte-Carlo integration of the linear SDE `dx = A(t)·x dt + B dW`, with
//! `B·Bᵀ = D`, and ensemble estimates of the symmetric second moments.
//!
//! Time-independent models are propagated exactly over each step: the
//! transition matrix `e^{A·dt}` and step covariance come from a single
//! Van Loan block exponential, so the only error is statistical.
//! Periodically driven models use Euler–Maruyama.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lyapunov::{serialize_matrix, CovarianceMatrix};
use crate::model::{stability, LinearModel};

const MAX_DIM: usize = 6;

/// Threshold on `dt·‖A‖` above which a step-size warning is recorded.
pub const DT_WARN: f64 = 0.1;

/// Entries with `|z|` above this fail validation.
pub const Z_THRESHOLD: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Exact propagation for static drift, Euler–Maruyama otherwise.
    #[default]
    Auto,
    Exact,
    EulerMaruyama,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationConfig {
    pub dt: f64,
    pub burn_in: f64,
    pub sample_duration: f64,
    pub n_trajectories: usize,
    pub seed: u64,
    pub scheme: Scheme,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            dt: 0.01,
            burn_in: 20.0,
            sample_duration: 200.0,
            n_trajectories: 100,
            seed: 1,
            scheme: Scheme::Auto,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::validation("dt", format!("must be > 0, got {}", self.dt)));
        }
        if !(self.burn_in.is_finite() && self.burn_in >= 0.0) {
            return Err(Error::validation("burn_in", format!("must be >= 0, got {}", self.burn_in)));
        }
        if !(self.sample_duration.is_finite() && self.sample_duration >= self.dt) {
            return Err(Error::validation(
                "sample_duration",
                format!("must cover at least one step, got {}", self.sample_duration),
            ));
        }
        if self.n_trajectories == 0 {
            return Err(Error::validation("n_trajectories", "must be >= 1"));
        }
        Ok(())
    }

    fn burn_in_steps(&self) -> usize {
        (self.burn_in / self.dt).ceil() as usize
    }

    fn sample_steps(&self) -> usize {
        ((self.sample_duration / self.dt).round() as usize).max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleEstimate {
    pub covariance: CovarianceMatrix,
    #[serde(serialize_with = "serialize_matrix")]
    pub standard_errors: DMatrix<f64>,
    /// Trajectories × sampled time points.
    pub effective_samples: usize,
    pub n_trajectories: usize,
    pub scheme: Scheme,
    pub insufficient_statistics: bool,
    pub warnings: Vec<String>,
}

/// Returns `B` with `B·Bᵀ = D` (symmetric square root).
pub fn noise_matrix(model: &LinearModel) -> Result<DMatrix<f64>> {
    psd_sqrt(&model.diffusion)
        .ok_or_else(|| Error::InvalidModel("diffusion matrix is not positive semidefinite".into()))
}

fn psd_sqrt(d: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let norm = d.norm();
    if norm == 0.0 {
        return Some(DMatrix::zeros(d.nrows(), d.ncols()));
    }
    let sym = (d + d.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    if eig.eigenvalues.min() < -1e-12 * norm {
        return None;
    }
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let q = &eig.eigenvectors;
    Some(q * DMatrix::from_diagonal(&roots) * q.transpose())
}

/// Stepper state in flat row-major form for dimensions up to six.
struct Kernel {
    n: usize,
    /// Per-step deterministic map (exact) or base drift (Euler–Maruyama).
    map: [f64; MAX_DIM * MAX_DIM],
    /// Step noise factor.
    noise: [f64; MAX_DIM * MAX_DIM],
    periodic: Option<(f64, [f64; MAX_DIM * MAX_DIM], [f64; MAX_DIM * MAX_DIM])>,
    exact: bool,
    dt: f64,
}

fn flatten(m: &DMatrix<f64>) -> [f64; MAX_DIM * MAX_DIM] {
    let mut out = [0.0; MAX_DIM * MAX_DIM];
    let n = m.nrows();
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = m[(i, j)];
        }
    }
    out
}

/// `(e^{A·dt}, ∫₀^dt e^{As} D e^{Aᵀs} ds)` from one block exponential.
fn exact_step(a: &DMatrix<f64>, d: &DMatrix<f64>, dt: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut block = DMatrix::zeros(2 * n, 2 * n);
    block.view_mut((0, 0), (n, n)).copy_from(&(-a * dt));
    block.view_mut((0, n), (n, n)).copy_from(&(d * dt));
    block.view_mut((n, n), (n, n)).copy_from(&(a.transpose() * dt));
    let e = block.exp();
    let phi = e.view((n, n), (n, n)).transpose();
    let q = &phi * e.view((0, n), (n, n));
    let q = (&q + q.transpose()) * 0.5;
    (phi, q)
}

impl Kernel {
    fn run(&self, seed: u64, stream: u64, burn: usize, samples: usize) -> Vec<f64> {
        let n = self.n;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let mut x = [0.0; MAX_DIM];
        let mut next = [0.0; MAX_DIM];
        let mut xi = [0.0; MAX_DIM];
        let mut acc = vec![0.0; n * (n + 1) / 2];
        let sqrt_dt = self.dt.sqrt();
        let mut t = 0.0;

        for step in 0..burn + samples {
            for v in xi.iter_mut().take(n) {
                *v = StandardNormal.sample(&mut rng);
            }
            if self.exact {
                for i in 0..n {
                    let row = &self.map[i * n..i * n + n];
                    let nrow = &self.noise[i * n..i * n + n];
                    let mut s = 0.0;
                    for k in 0..n {
                        s += row[k] * x[k] + nrow[k] * xi[k];
                    }
                    next[i] = s;
                }
            } else {
                let (c, s) = match &self.periodic {
                    Some((w, _, _)) => {
                        let (s, c) = (w * t).sin_cos();
                        (c, s)
                    }
                    None => (0.0, 0.0),
                };
                for i in 0..n {
                    let mut drift = 0.0;
                    let mut kick = 0.0;
                    for k in 0..n {
                        let mut a = self.map[i * n + k];
                        if let Some((_, pc, ps)) = &self.periodic {
                            a += c * pc[i * n + k] + s * ps[i * n + k];
                        }
                        drift += a * x[k];
                        kick += self.noise[i * n + k] * xi[k];
                    }
                    next[i] = x[i] + drift * self.dt + kick * sqrt_dt;
                }
            }
            x[..n].copy_from_slice(&next[..n]);
            t += self.dt;

            if step >= burn {
                let mut idx = 0;
                for i in 0..n {
                    for j in i..n {
                        acc[idx] += x[i] * x[j];
                        idx += 1;
                    }
                }
            }
        }
        let inv = 1.0 / samples as f64;
        acc.iter_mut().for_each(|v| *v *= inv);
        acc
    }
}

/// Integrates `n_trajectories` independent trajectories from `x(0) = 0` and
/// averages `x·xᵀ` over the sampling window.
///
/// Trajectory `k` draws from stream `k` of a ChaCha8 generator seeded with
/// `config.seed`, and per-trajectory moments are reduced in index order, so
/// results are bitwise reproducible regardless of thread count.
pub fn simulate(model: &LinearModel, config: &SimulationConfig) -> Result<EnsembleEstimate> {
    config.validate()?;
    let n = model.dim();
    if n == 0 || n > MAX_DIM {
        return Err(Error::UnsupportedInput(format!("model dimension {n} not in 1..={MAX_DIM}")));
    }
    let static_part = LinearModel { periodic_drift: None, ..model.clone() };
    let st = stability(&static_part)?;
    if !st.stable {
        return Err(Error::Unstable { max_real_eigenvalue: st.max_real_eigenvalue });
    }

    let scheme = match (config.scheme, model.is_periodic()) {
        (Scheme::Exact, true) => {
            return Err(Error::UnsupportedInput("exact propagation needs a time-independent drift".into()))
        }
        (Scheme::Auto, false) => Scheme::Exact,
        (Scheme::Auto, true) => Scheme::EulerMaruyama,
        (s, _) => s,
    };

    let mut warnings = Vec::new();
    let mut drift_scale = model.drift.norm();
    if let Some(p) = &model.periodic_drift {
        drift_scale = drift_scale.max(p.cos.norm() + p.sin.norm()).max(p.frequency);
    }
    if config.dt * drift_scale > DT_WARN {
        warnings.push(format!("dt·‖A‖ = {:.3} exceeds {DT_WARN}", config.dt * drift_scale));
    }
    let relax = 5.0 / st.max_real_eigenvalue.abs();
    if config.burn_in < relax {
        warnings.push(format!("burn_in {} is shorter than five relaxation times ({relax:.3})", config.burn_in));
    }

    let kernel = match scheme {
        Scheme::Exact => {
            let (phi, q) = exact_step(&model.drift, &model.diffusion, config.dt);
            let chol =
                psd_sqrt(&q).ok_or_else(|| Error::Numerical("step covariance is not positive semidefinite".into()))?;
            Kernel { n, map: flatten(&phi), noise: flatten(&chol), periodic: None, exact: true, dt: config.dt }
        }
        _ => {
            let b = noise_matrix(model)?;
            Kernel {
                n,
                map: flatten(&model.drift),
                noise: flatten(&b),
                periodic: model.periodic_drift.as_ref().map(|p| (p.frequency, flatten(&p.cos), flatten(&p.sin))),
                exact: false,
                dt: config.dt,
            }
        }
    };

    let burn = config.burn_in_steps();
    let samples = config.sample_steps();
    let per_traj: Vec<Vec<f64>> =
        (0..config.n_trajectories).into_par_iter().map(|k| kernel.run(config.seed, k as u64, burn, samples)).collect();

    let m = per_traj.len() as f64;
    let packed = n * (n + 1) / 2;
    let mut mean = vec![0.0; packed];
    for t in &per_traj {
        for (acc, v) in mean.iter_mut().zip(t) {
            *acc += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= m);
    let mut sq = vec![0.0; packed];
    for t in &per_traj {
        for ((acc, v), mu) in sq.iter_mut().zip(t).zip(&mean) {
            *acc += (v - mu) * (v - mu);
        }
    }
    let insufficient = config.n_trajectories < 2;
    let se: Vec<f64> = if insufficient {
        vec![f64::INFINITY; packed]
    } else {
        sq.iter().map(|s| (s / (m - 1.0) / m).sqrt()).collect()
    };
    if insufficient {
        warnings.push("a single trajectory gives no standard error".into());
    }

    let mut cov = DMatrix::zeros(n, n);
    let mut err = DMatrix::zeros(n, n);
    let mut idx = 0;
    for i in 0..n {
        for j in i..n {
            cov[(i, j)] = mean[idx];
            cov[(j, i)] = mean[idx];
            err[(i, j)] = se[idx];
            err[(j, i)] = se[idx];
            idx += 1;
        }
    }

    Ok(EnsembleEstimate {
        covariance: CovarianceMatrix::new(model.mode_labels.clone(), cov)?,
        standard_errors: err,
        effective_samples: config.n_trajectories * samples,
        n_trajectories: config.n_trajectories,
        scheme,
        insufficient_statistics: insufficient,
        warnings,
    })
}

/// Monte-Carlo estimate compared against a reference covariance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub estimate: EnsembleEstimate,
    pub reference: CovarianceMatrix,
    /// `(estimate − reference)/SE`, entrywise.
    #[serde(serialize_with = "serialize_matrix")]
    pub z_scores: DMatrix<f64>,
    pub max_abs_z: f64,
    pub z_threshold: f64,
    pub insufficient_statistics: bool,
    pub pass: bool,
}

pub fn z_scores(estimate: &EnsembleEstimate, reference: &CovarianceMatrix) -> Result<DMatrix<f64>> {
    let n = estimate.covariance.dim();
    if reference.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, found: reference.dim() });
    }
    Ok(DMatrix::from_fn(n, n, |i, j| {
        let diff = estimate.covariance.values[(i, j)] - reference.values[(i, j)];
        let se = estimate.standard_errors[(i, j)];
        if diff == 0.0 {
            0.0
        } else if se == 0.0 {
            f64::INFINITY
        } else {
            diff / se
        }
    }))
}

/// Simulates `model` and checks every entry against `reference` within `Z_THRESHOLD` standard errors.
pub fn validate(
    model: &LinearModel,
    reference: &CovarianceMatrix,
    config: &SimulationConfig,
) -> Result<ValidationReport> {
    let estimate = simulate(model, config)?;
    let z = z_scores(&estimate, reference)?;
    let max_abs_z = z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let insufficient = estimate.insufficient_statistics;
    Ok(ValidationReport {
        pass: !insufficient && max_abs_z <= Z_THRESHOLD,
        reference: reference.clone(),
        z_scores: z,
        max_abs_z,
        z_threshold: Z_THRESHOLD,
        insufficient_statistics: insufficient,
        estimate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lyapunov::steady_state;
    use crate::model::{build_reduced_a, build_reduced_b, Mode, SystemParams};
    use approx::assert_abs_diff_eq;

    fn single_mode(gamma: f64, n: f64) -> LinearModel {
        LinearModel {
            mode_labels: vec![Mode::A],
            drift: DMatrix::identity(2, 2) * -gamma,
            diffusion: DMatrix::identity(2, 2) * (2.0 * gamma * (n + 0.5)),
            periodic_drift: None,
        }
    }

    #[test]
    fn noise_factor_examples() {
        let m = single_mode(2.0, 0.5);
        let b = noise_matrix(&m).unwrap();
        assert_abs_diff_eq!(b, DMatrix::identity(2, 2) * 2.0, epsilon = 1e-14);

        let p = SystemParams { g_m: 0.5, g_a: 1.0, n: 0.3, ..Default::default() };
        let m = build_reduced_b(&p).unwrap();
        let b = noise_matrix(&m).unwrap();
        let bbt = &b * b.transpose();
        assert!((&bbt - &m.diffusion).norm() <= 1e-12 * m.diffusion.norm());
        // G = 0.25, G_a = 1
        assert_abs_diff_eq!(bbt[(0, 2)], -2.0 * 0.5 * 0.8, epsilon = 1e-13);

        let zero = LinearModel { diffusion: DMatrix::zeros(2, 2), ..single_mode(1.0, 0.0) };
        assert_eq!(noise_matrix(&zero).unwrap(), DMatrix::zeros(2, 2));

        let bad = LinearModel { diffusion: DMatrix::identity(2, 2) * -1.0, ..single_mode(1.0, 0.0) };
        assert!(matches!(noise_matrix(&bad), Err(Error::InvalidModel(_))));
    }

    #[test]
    fn exact_step_matches_scalar_ou() {
        let m = single_mode(1.5, 0.2);
        let dt = 0.3;
        let (phi, q) = exact_step(&m.drift, &m.diffusion, dt);
        let decay = (-1.5f64 * dt).exp();
        assert_abs_diff_eq!(phi, DMatrix::identity(2, 2) * decay, epsilon = 1e-14);
        // (n+½)(1 − e^{−2γdt})
        assert_abs_diff_eq!(q, DMatrix::identity(2, 2) * (0.7 * (1.0 - decay * decay)), epsilon = 1e-14);
    }

    #[test]
    fn vacuum_single_mode() {
        let config = SimulationConfig {
            dt: 1e-3,
            burn_in: 10.0,
            sample_duration: 100.0,
            n_trajectories: 200,
            seed: 11,
            scheme: Scheme::Auto,
        };
        let est = simulate(&single_mode(1.0, 0.0), &config).unwrap();
        assert_eq!(est.scheme, Scheme::Exact);
        let reference = CovarianceMatrix::new(vec![Mode::A], DMatrix::identity(2, 2) * 0.5).unwrap();
        let z = z_scores(&est, &reference).unwrap();
        assert!(z.iter().all(|v| v.abs() <= 3.0), "z = {z}");
    }

    #[test]
    fn reproducible_under_fixed_seed() {
        let m = build_reduced_a(&SystemParams { g_m: 0.5, g_a: 1.0, ..Default::default() }).unwrap();
        let config = SimulationConfig { n_trajectories: 8, sample_duration: 20.0, ..Default::default() };
        let a = simulate(&m, &config).unwrap();
        let b = simulate(&m, &config).unwrap();
        assert_eq!(a, b);
        let c = simulate(&m, &SimulationConfig { seed: 2, ..config }).unwrap();
        assert_ne!(a.covariance, c.covariance);
    }

    #[test]
    fn single_trajectory_is_flagged() {
        let m = single_mode(1.0, 0.0);
        let config = SimulationConfig { n_trajectories: 1, ..Default::default() };
        let reference = steady_state(&m).unwrap();
        let report = validate(&m, &reference, &config).unwrap();
        assert!(report.insufficient_statistics);
        assert!(!report.pass);
        assert!(report.estimate.standard_errors.iter().all(|&s| s >= 0.0));
    }

    #[test]
    fn rejects_bad_inputs() {
        let unstable = build_reduced_a(&SystemParams { g_m: 2.0, ..Default::default() }).unwrap();
        assert!(matches!(simulate(&unstable, &SimulationConfig::default()), Err(Error::Unstable { .. })));
        let m = single_mode(1.0, 0.0);
        let bad = SimulationConfig { dt: 0.0, ..Default::default() };
        assert!(matches!(simulate(&m, &bad), Err(Error::Validation { field: "dt", .. })));
        let bad = SimulationConfig { n_trajectories: 0, ..Default::default() };
        assert!(simulate(&m, &bad).is_err());
    }

    #[test]
    fn large_step_is_warned() {
        let m = single_mode(1.0, 0.0);
        let config =
            SimulationConfig { dt: 0.5, burn_in: 1.0, sample_duration: 10.0, n_trajectories: 2, ..Default::default() };
        let est = simulate(&m, &config).unwrap();
        assert_eq!(est.warnings.len(), 2, "{:?}", est.warnings);
    }
}
