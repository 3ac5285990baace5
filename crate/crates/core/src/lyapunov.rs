//! Steady-state covariance of a stable linear model from `A·V + V·Aᵀ + D = 0`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{pq, stability, xq, LinearModel, Mode};

/// Relative residual accepted from the steady-state solve.
pub const RESIDUAL_TOL: f64 = 1e-10;

/// Models whose slowest eigenvalue lies above this are refused as near-marginal.
pub const MARGINAL_EIGENVALUE: f64 = -1e-8;

/// Slack on the ½ lower bound of symplectic eigenvalues.
pub const PHYSICALITY_TOL: f64 = 1e-9;

/// Symmetric second-moment matrix, `V_ij = ⟨O_i O_j + O_j O_i⟩/2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovarianceMatrix {
    pub labels: Vec<Mode>,
    #[serde(serialize_with = "serialize_matrix")]
    pub values: DMatrix<f64>,
}

pub(crate) fn serialize_matrix<S: serde::Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(m.nrows()))?;
    for row in m.row_iter() {
        seq.serialize_element(&row.iter().copied().collect::<Vec<f64>>())?;
    }
    seq.end()
}

impl CovarianceMatrix {
    pub fn new(labels: Vec<Mode>, values: DMatrix<f64>) -> Result<Self> {
        let dim = 2 * labels.len();
        if values.nrows() != dim || values.ncols() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: values.nrows().max(values.ncols()) });
        }
        Ok(CovarianceMatrix { labels, values })
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    pub fn index_of(&self, mode: Mode) -> Result<usize> {
        self.labels
            .iter()
            .position(|&m| m == mode)
            .ok_or_else(|| Error::UnsupportedInput(format!("covariance does not contain mode {mode}")))
    }

    /// Entry addressed by quadrature: `x_i` selects X (true) or P (false).
    pub fn get(&self, i: usize, x_i: bool, j: usize, x_j: bool) -> f64 {
        let r = if x_i { xq(i) } else { pq(i) };
        let c = if x_j { xq(j) } else { pq(j) };
        self.values[(r, c)]
    }

    /// Two-mode reduction ordered `(X_i, P_i, X_j, P_j)`.
    pub fn restrict(&self, i: Mode, j: Mode) -> Result<CovarianceMatrix> {
        let (ki, kj) = (self.index_of(i)?, self.index_of(j)?);
        if ki == kj {
            return Err(Error::UnsupportedInput("a mode pair needs two distinct modes".into()));
        }
        let idx = [xq(ki), pq(ki), xq(kj), pq(kj)];
        let values = DMatrix::from_fn(4, 4, |r, c| self.values[(idx[r], idx[c])]);
        Ok(CovarianceMatrix { labels: vec![i, j], values })
    }

    /// Single-mode 2×2 block.
    pub fn mode_block(&self, mode: Mode) -> Result<DMatrix<f64>> {
        let k = self.index_of(mode)?;
        Ok(self.values.view((xq(k), xq(k)), (2, 2)).into_owned())
    }

    pub fn symplectic_eigenvalues(&self) -> Vec<f64> {
        symplectic_eigenvalues(&self.values)
    }

    pub fn min_symplectic_eigenvalue(&self) -> f64 {
        self.symplectic_eigenvalues().into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Uncertainty relation in the ½-vacuum convention.
    pub fn is_physical(&self) -> bool {
        self.min_symplectic_eigenvalue() >= 0.5 - PHYSICALITY_TOL
    }

    pub fn asymmetry(&self) -> f64 {
        (&self.values - self.values.transpose()).norm()
    }
}

/// Standard symplectic form for `(X₁, P₁, …, X_N, P_N)`.
pub fn symplectic_form(modes: usize) -> DMatrix<f64> {
    let mut omega = DMatrix::zeros(2 * modes, 2 * modes);
    for k in 0..modes {
        omega[(xq(k), pq(k))] = 1.0;
        omega[(pq(k), xq(k))] = -1.0;
    }
    omega
}

/// Symplectic eigenvalues: moduli of the spectrum of `i·Ω·V`, one per mode, ascending.
pub fn symplectic_eigenvalues(v: &DMatrix<f64>) -> Vec<f64> {
    let modes = v.nrows() / 2;
    let ov = symplectic_form(modes) * v;
    let mut moduli: Vec<f64> = ov.complex_eigenvalues().iter().map(|z| z.norm()).collect();
    moduli.sort_by(|a, b| a.total_cmp(b));
    // eigenvalues come in ±iν pairs
    moduli.chunks(2).map(|pair| 0.5 * (pair[0] + pair[1])).collect()
}

/// `‖A·V + V·Aᵀ + D‖_F`.
pub fn residual(model: &LinearModel, v: &CovarianceMatrix) -> Result<f64> {
    let n = model.dim();
    if v.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, found: v.dim() });
    }
    Ok(lyapunov_residual(&model.drift, &model.diffusion, &v.values))
}

pub(crate) fn lyapunov_residual(a: &DMatrix<f64>, d: &DMatrix<f64>, v: &DMatrix<f64>) -> f64 {
    (a * v + v * a.transpose() + d).norm()
}

/// Solves `A·V + V·Aᵀ = −D` through the vectorised `(I⊗A + A⊗I)·vec(V) = −vec(D)`.
pub(crate) fn solve_continuous_lyapunov(a: &DMatrix<f64>, d: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let system = eye.kronecker(a) + a.kronecker(&eye);
    let rhs = -DMatrix::from_column_slice(n * n, 1, d.as_slice());
    let sol = system.lu().solve(&rhs).ok_or_else(|| Error::Numerical("singular Lyapunov system".into()))?;
    let v = DMatrix::from_column_slice(n, n, sol.as_slice());
    Ok((&v + v.transpose()) * 0.5)
}

/// Steady-state covariance of a stable, time-independent model.
pub fn steady_state(model: &LinearModel) -> Result<CovarianceMatrix> {
    let st = stability(model)?;
    if !st.stable {
        return Err(Error::Unstable { max_real_eigenvalue: st.max_real_eigenvalue });
    }
    if st.max_real_eigenvalue > MARGINAL_EIGENVALUE {
        return Err(Error::Numerical(format!(
            "model is marginally stable (max real eigenvalue {:.3e})",
            st.max_real_eigenvalue
        )));
    }
    let v = solve_continuous_lyapunov(&model.drift, &model.diffusion)?;
    let res = lyapunov_residual(&model.drift, &model.diffusion, &v);
    let scale = model.drift.norm() * v.norm() + model.diffusion.norm();
    if !(res <= RESIDUAL_TOL * scale) {
        return Err(Error::Numerical(format!("Lyapunov residual {res:.3e} exceeds tolerance (scale {scale:.3e})")));
    }
    CovarianceMatrix::new(model.mode_labels.clone(), v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_full_rwa, build_reduced_a, build_reduced_b, SystemParams};
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
    fn detailed_balance_single_mode() {
        let v = steady_state(&single_mode(2.5, 1.5)).unwrap();
        assert_abs_diff_eq!(v.values, DMatrix::identity(2, 2) * 2.0, epsilon = 1e-14);
    }

    #[test]
    fn residual_of_zero_guess_is_diffusion_norm() {
        let m = build_reduced_b(&SystemParams { g_m: 0.5, g_a: 1.0, ..Default::default() }).unwrap();
        let zero = CovarianceMatrix::new(m.mode_labels.clone(), DMatrix::zeros(4, 4)).unwrap();
        assert_abs_diff_eq!(residual(&m, &zero).unwrap(), m.diffusion.norm(), epsilon = 1e-14);
    }

    #[test]
    fn residual_grows_linearly_under_identity_shift() {
        let m = build_reduced_a(&SystemParams { g_m: 0.5, g_a: 1.0, ..Default::default() }).unwrap();
        let v = steady_state(&m).unwrap();
        // residual(V + eps I) = eps * ||A + A^T||_F exactly
        let slope = (&m.drift + m.drift.transpose()).norm();
        for eps in [1e-3, 1e-2, 1e-1] {
            let shifted = CovarianceMatrix::new(v.labels.clone(), &v.values + DMatrix::identity(4, 4) * eps).unwrap();
            let r = residual(&m, &shifted).unwrap();
            assert!((r - eps * slope).abs() <= 1e-12 + 1e-9 * eps * slope, "eps={eps}: {r} vs {}", eps * slope);
        }
    }

    #[test]
    fn residual_dimension_mismatch() {
        let m = build_reduced_a(&SystemParams::default()).unwrap();
        let v = CovarianceMatrix::new(vec![Mode::A], DMatrix::identity(2, 2)).unwrap();
        assert!(matches!(residual(&m, &v), Err(Error::DimensionMismatch { expected: 4, found: 2 })));
    }

    #[test]
    fn unstable_and_marginal_models_are_rejected() {
        let p = SystemParams { g_m: 1.5, ..Default::default() };
        match steady_state(&build_reduced_a(&p).unwrap()) {
            Err(Error::Unstable { max_real_eigenvalue }) => assert!(max_real_eigenvalue > 0.0),
            other => panic!("expected instability, got {other:?}"),
        }
        // slowest eigenvalue about -1e-10
        let p = SystemParams { g_m: (1.0f64 - 1e-10).sqrt(), ..Default::default() };
        assert!(steady_state(&build_reduced_a(&p).unwrap()).is_err());
    }

    #[test]
    fn vacuum_symplectic_spectrum() {
        let v = DMatrix::identity(6, 6) * 0.5;
        let nu = symplectic_eigenvalues(&v);
        assert_eq!(nu.len(), 3);
        for x in nu {
            assert_abs_diff_eq!(x, 0.5, epsilon = 1e-14);
        }
    }

    #[test]
    fn two_mode_squeezed_vacuum_is_pure() {
        let r: f64 = 0.7;
        let (c, s) = (r.cosh() * 0.5, r.sinh() * 0.5);
        let v = DMatrix::from_row_slice(4, 4, &[c, 0.0, s, 0.0, 0.0, c, 0.0, -s, s, 0.0, c, 0.0, 0.0, -s, 0.0, c]);
        for x in symplectic_eigenvalues(&v) {
            assert_abs_diff_eq!(x, 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn full_model_solution_is_symmetric_and_physical() {
        let p = SystemParams { g_m: 0.4, g_a: 0.8, gamma_a: 3.0, n: 0.2, n0: 1.0, ..Default::default() };
        let v = steady_state(&build_full_rwa(&p).unwrap()).unwrap();
        assert!(v.asymmetry() <= 1e-12 * v.values.norm());
        assert!(v.is_physical());
        let r = v.restrict(Mode::C, Mode::A).unwrap();
        assert_eq!(r.values[(0, 0)], v.values[(4, 4)]);
        assert_eq!(r.values[(1, 2)], v.values[(5, 0)]);
    }
}
