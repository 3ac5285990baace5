//! System parameters and linear drift/diffusion models.
//!
//! Every model uses the quadrature ordering `(X₁, P₁, X₂, P₂, …)` with the
//! vacuum variance normalised to ½. Mode `a` is the cavity, `b` the mirror and
//! `c` the collective atomic mode. All rates are in units of a reference
//! damping rate.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bosonic mode identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Cavity field.
    A,
    /// Mechanical mirror.
    B,
    /// Collective atomic mode.
    C,
}

impl Mode {
    pub fn label(self) -> char {
        match self {
            Mode::A => 'a',
            Mode::B => 'b',
            Mode::C => 'c',
        }
    }

    pub fn from_label(s: &str) -> Option<Mode> {
        match s {
            "a" | "A" => Some(Mode::A),
            "b" | "B" => Some(Mode::B),
            "c" | "C" => Some(Mode::C),
            _ => None,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())
    }
}

/// Index of the X quadrature of the `k`-th mode.
#[inline]
pub fn xq(k: usize) -> usize {
    2 * k
}

/// Index of the P quadrature of the `k`-th mode.
#[inline]
pub fn pq(k: usize) -> usize {
    2 * k + 1
}

/// Physical rates, couplings and bath occupations of the three-mode system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SystemParams {
    /// Cavity damping κ.
    pub kappa: f64,
    /// Mirror damping γ_m.
    pub gamma_m: f64,
    /// Atomic damping γ_a.
    pub gamma_a: f64,
    /// Effective cavity–mirror parametric coupling g_m.
    pub g_m: f64,
    /// Collective atom–cavity coupling g_a.
    pub g_a: f64,
    /// Thermal occupation of the cavity and atomic baths.
    pub n: f64,
    /// Thermal occupation of the mirror bath.
    pub n0: f64,
    /// Mechanical frequency ω_m, only needed for the non-RWA model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_m: Option<f64>,
}

impl Default for SystemParams {
    fn default() -> Self {
        SystemParams { kappa: 1.0, gamma_m: 1.0, gamma_a: 1.0, g_m: 0.0, g_a: 0.0, n: 0.0, n0: 0.0, omega_m: None }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [("kappa", self.kappa), ("gamma_m", self.gamma_m), ("gamma_a", self.gamma_a)];
        for (field, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(field, format!("must be finite and > 0, got {v}")));
            }
        }
        let non_negative = [("g_m", self.g_m), ("g_a", self.g_a), ("n", self.n), ("n0", self.n0)];
        for (field, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::validation(field, format!("must be finite and >= 0, got {v}")));
            }
        }
        if let Some(w) = self.omega_m {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::validation("omega_m", format!("must be finite and > 0, got {w}")));
            }
        }
        Ok(())
    }

    /// C_a = g_a²/γ_a.
    pub fn c_a(&self) -> f64 {
        self.g_a * self.g_a / self.gamma_a
    }

    /// G = g_m²/κ.
    pub fn big_g(&self) -> f64 {
        self.g_m * self.g_m / self.kappa
    }

    /// G_a = g_a²/κ.
    pub fn big_g_a(&self) -> f64 {
        self.g_a * self.g_a / self.kappa
    }

    /// γ_G = γ − (G − G_a) for a common damping rate `gamma` of the reduced model.
    pub fn gamma_g(&self, gamma: f64) -> f64 {
        gamma - (self.big_g() - self.big_g_a())
    }
}

/// Drift modulation at angular frequency `frequency`: the total drift at time
/// `t` is `drift + cos(ωt)·cos + sin(ωt)·sin`.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicDrift {
    pub frequency: f64,
    pub cos: DMatrix<f64>,
    pub sin: DMatrix<f64>,
}

/// Linear Langevin model `dx = A(t)·x dt + noise` with diffusion `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub mode_labels: Vec<Mode>,
    pub drift: DMatrix<f64>,
    pub diffusion: DMatrix<f64>,
    pub periodic_drift: Option<PeriodicDrift>,
}

impl LinearModel {
    pub fn dim(&self) -> usize {
        self.drift.nrows()
    }

    pub fn num_modes(&self) -> usize {
        self.mode_labels.len()
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic_drift.is_some()
    }

    pub fn mode_index(&self, mode: Mode) -> Option<usize> {
        self.mode_labels.iter().position(|&m| m == mode)
    }

    /// Drift matrix at time `t`, including any periodic part.
    pub fn drift_at(&self, t: f64) -> DMatrix<f64> {
        match &self.periodic_drift {
            None => self.drift.clone(),
            Some(p) => {
                let (s, c) = (p.frequency * t).sin_cos();
                &self.drift + &p.cos * c + &p.sin * s
            }
        }
    }
}

/// Which model family to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    FullRwa,
    ReducedA,
    ReducedB,
}

impl ModelKind {
    pub fn build(self, params: &SystemParams) -> Result<LinearModel> {
        match self {
            ModelKind::FullRwa => build_full_rwa(params),
            ModelKind::ReducedA => build_reduced_a(params),
            ModelKind::ReducedB => build_reduced_b(params),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::FullRwa => "full_rwa",
            ModelKind::ReducedA => "reduced_a",
            ModelKind::ReducedB => "reduced_b",
        }
    }

    /// Ordered pair `(steered, steering)` the model is primarily about.
    pub fn primary_pair(self) -> (Mode, Mode) {
        match self {
            ModelKind::FullRwa | ModelKind::ReducedA => (Mode::A, Mode::B),
            ModelKind::ReducedB => (Mode::C, Mode::B),
        }
    }

    /// Damping rate of the eliminated (or, for the full model, the auxiliary) mode.
    pub fn fast_rate(self, p: &SystemParams) -> f64 {
        match self {
            ModelKind::FullRwa | ModelKind::ReducedA => p.gamma_a,
            ModelKind::ReducedB => p.kappa,
        }
    }

    /// Largest rate other than the fast one that the elimination assumes small.
    pub fn largest_slow_rate(self, p: &SystemParams) -> f64 {
        let slow = match self {
            ModelKind::FullRwa | ModelKind::ReducedA => [p.kappa, p.gamma_m, p.g_a, p.g_m],
            ModelKind::ReducedB => [p.gamma_a, p.gamma_m, p.g_a, p.g_m],
        };
        slow.into_iter().fold(0.0, f64::max)
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full_rwa" => Ok(ModelKind::FullRwa),
            "reduced_a" => Ok(ModelKind::ReducedA),
            "reduced_b" => Ok(ModelKind::ReducedB),
            other => Err(Error::validation("model", format!("unknown model kind `{other}`"))),
        }
    }
}

fn thermal(n: f64) -> f64 {
    n + 0.5
}

fn set_isotropic(d: &mut DMatrix<f64>, k: usize, value: f64) {
    d[(xq(k), xq(k))] = value;
    d[(pq(k), pq(k))] = value;
}

fn set_damping(a: &mut DMatrix<f64>, k: usize, rate: f64) {
    a[(xq(k), xq(k))] = -rate;
    a[(pq(k), pq(k))] = -rate;
}

/// Three-mode model in the rotating-wave approximation, ordering `(a, b, c)`.
pub fn build_full_rwa(params: &SystemParams) -> Result<LinearModel> {
    params.validate()?;
    let (a, b, c) = (0, 1, 2);
    let SystemParams { kappa, gamma_m, gamma_a, g_m, g_a, n, n0, .. } = *params;

    let mut drift = DMatrix::zeros(6, 6);
    set_damping(&mut drift, a, kappa);
    set_damping(&mut drift, b, gamma_m);
    set_damping(&mut drift, c, gamma_a);

    // -i g_a c - i g_m b† in the cavity equation
    drift[(xq(a), pq(c))] = g_a;
    drift[(pq(a), xq(c))] = -g_a;
    drift[(xq(a), pq(b))] = -g_m;
    drift[(pq(a), xq(b))] = -g_m;
    // -i g_m a† in the mirror equation
    drift[(xq(b), pq(a))] = -g_m;
    drift[(pq(b), xq(a))] = -g_m;
    // -i g_a a in the atomic equation
    drift[(xq(c), pq(a))] = g_a;
    drift[(pq(c), xq(a))] = -g_a;

    let mut diffusion = DMatrix::zeros(6, 6);
    set_isotropic(&mut diffusion, a, 2.0 * kappa * thermal(n));
    set_isotropic(&mut diffusion, b, 2.0 * gamma_m * thermal(n0));
    set_isotropic(&mut diffusion, c, 2.0 * gamma_a * thermal(n));

    Ok(LinearModel { mode_labels: vec![Mode::A, Mode::B, Mode::C], drift, diffusion, periodic_drift: None })
}

/// Cavity–mirror model after eliminating the fast atomic mode, ordering `(a, b)`.
///
/// The filtered atomic noise is taken in its white-noise limit, which adds
/// `2·C_a·(n+½)` to the cavity diffusion.
pub fn build_reduced_a(params: &SystemParams) -> Result<LinearModel> {
    params.validate()?;
    let (a, b) = (0, 1);
    let gamma_eff = params.kappa + params.c_a();
    let g_m = params.g_m;

    let mut drift = DMatrix::zeros(4, 4);
    set_damping(&mut drift, a, gamma_eff);
    set_damping(&mut drift, b, params.gamma_m);
    drift[(xq(a), pq(b))] = -g_m;
    drift[(pq(a), xq(b))] = -g_m;
    drift[(xq(b), pq(a))] = -g_m;
    drift[(pq(b), xq(a))] = -g_m;

    let mut diffusion = DMatrix::zeros(4, 4);
    set_isotropic(&mut diffusion, a, 2.0 * gamma_eff * thermal(params.n));
    set_isotropic(&mut diffusion, b, 2.0 * params.gamma_m * thermal(params.n0));

    Ok(LinearModel { mode_labels: vec![Mode::A, Mode::B], drift, diffusion, periodic_drift: None })
}

/// Mirror–atom model after eliminating the fast cavity mode, ordering `(b, c)`.
///
/// Both effective noises come from the same filtered cavity input, so the
/// diffusion carries a cross-block: `(X_b, X_c) = −2√(G·G_a)(n+½)` and
/// `(P_b, P_c) = +2√(G·G_a)(n+½)`.
pub fn build_reduced_b(params: &SystemParams) -> Result<LinearModel> {
    params.validate()?;
    let (b, c) = (0, 1);
    let big_g = params.big_g();
    let big_g_a = params.big_g_a();
    let s = (big_g * big_g_a).sqrt();
    let nth = thermal(params.n);

    let mut drift = DMatrix::zeros(4, 4);
    set_damping(&mut drift, b, params.gamma_m - big_g);
    set_damping(&mut drift, c, params.gamma_a + big_g_a);
    drift[(xq(b), xq(c))] = s;
    drift[(pq(b), pq(c))] = -s;
    drift[(xq(c), xq(b))] = -s;
    drift[(pq(c), pq(b))] = s;

    let mut diffusion = DMatrix::zeros(4, 4);
    set_isotropic(&mut diffusion, b, 2.0 * (params.gamma_m * thermal(params.n0) + big_g * nth));
    set_isotropic(&mut diffusion, c, 2.0 * (params.gamma_a + big_g_a) * nth);
    let cross = 2.0 * s * nth;
    diffusion[(xq(b), xq(c))] = -cross;
    diffusion[(xq(c), xq(b))] = -cross;
    diffusion[(pq(b), pq(c))] = cross;
    diffusion[(pq(c), pq(b))] = cross;

    Ok(LinearModel { mode_labels: vec![Mode::B, Mode::C], drift, diffusion, periodic_drift: None })
}

/// Full three-mode model keeping the terms that oscillate at `2ω_m`.
///
/// The static part is the RWA model. The cavity–mirror coupling picks up
/// `−i g_m δa e^{2iω_m t}` in the mirror equation and `−i g_m δb e^{−2iω_m t}`
/// in the cavity equation.
pub fn build_full_nonrwa(params: &SystemParams) -> Result<LinearModel> {
    let omega_m = params.omega_m.ok_or_else(|| Error::Config("the non-RWA model requires omega_m".into()))?;
    let mut model = build_full_rwa(params)?;
    let (a, b) = (0, 1);
    let g = params.g_m;

    let mut cos = DMatrix::zeros(6, 6);
    let mut sin = DMatrix::zeros(6, 6);
    // mirror rows
    cos[(xq(b), pq(a))] = g;
    cos[(pq(b), xq(a))] = -g;
    sin[(xq(b), xq(a))] = g;
    sin[(pq(b), pq(a))] = g;
    // cavity rows
    cos[(xq(a), pq(b))] = g;
    cos[(pq(a), xq(b))] = -g;
    sin[(xq(a), xq(b))] = -g;
    sin[(pq(a), pq(b))] = -g;

    model.periodic_drift = Some(PeriodicDrift { frequency: 2.0 * omega_m, cos, sin });
    Ok(model)
}

/// Outcome of a drift-spectrum stability check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stability {
    pub stable: bool,
    pub max_real_eigenvalue: f64,
}

impl Stability {
    /// Stability margin, `−max Re λ`.
    pub fn margin(&self) -> f64 {
        -self.max_real_eigenvalue
    }
}

/// Eigenvalues with real part within this fraction of `‖A‖_F` of zero are
/// treated as marginal, hence not stable.
pub const STABILITY_RELATIVE_TOL: f64 = 1e-12;

pub fn max_real_eigenvalue(a: &DMatrix<f64>) -> f64 {
    a.complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

pub fn stability(model: &LinearModel) -> Result<Stability> {
    if model.is_periodic() {
        return Err(Error::UnsupportedInput(
            "stability of a periodically driven model is not defined by its drift spectrum".into(),
        ));
    }
    let max_re = max_real_eigenvalue(&model.drift);
    let tol = STABILITY_RELATIVE_TOL * model.drift.norm().max(f64::MIN_POSITIVE);
    Ok(Stability { stable: max_re < -tol, max_real_eigenvalue: max_re })
}
