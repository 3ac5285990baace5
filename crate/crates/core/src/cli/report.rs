//! JSON documents for the steady-state, stability and validation commands.

use std::collections::BTreeMap;

use serde::Serialize;

use super::sweep::adiabatic_regime_warning;
use crate::analytic;
use crate::criteria::{self, CorrelationThresholds, EntanglementReport, SteeringReport};
use crate::error::{Error, Result};
use crate::langevin::{self, SimulationConfig, ValidationReport};
use crate::lyapunov::{steady_state, CovarianceMatrix};
use crate::model::{build_full_nonrwa, stability, Mode, ModelKind, SystemParams};

#[derive(Debug, Clone, Serialize)]
pub struct PairReport {
    pub i: Mode,
    pub j: Mode,
    pub steering: SteeringReport,
    pub entanglement: EntanglementReport,
    /// Thresholds for `i` steered by `j`.
    pub thresholds_ij: CorrelationThresholds,
    /// Thresholds for `j` steered by `i`.
    pub thresholds_ji: CorrelationThresholds,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct AnalyticSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub case1_moments: Option<analytic::Case1Moments>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub case1_steering: Option<analytic::Case1Steering>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub case1_thresholds: Option<analytic::Thresholds>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub case2_moments: Option<analytic::Case2Moments>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub case2_steering: Option<analytic::Case2Steering>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub case2_two_way_discriminant: Option<f64>,
    /// Why parts of the closed form are unavailable.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub tool_version: &'static str,
    pub model_kind: ModelKind,
    pub params: SystemParams,
    pub stable: bool,
    pub max_real_eigenvalue: f64,
    pub stability_margin: f64,
    pub gamma_ref: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SteadyStateReport {
    pub tool_version: &'static str,
    pub model_kind: ModelKind,
    pub params: SystemParams,
    pub covariance: CovarianceMatrix,
    pub symplectic_eigenvalues: Vec<f64>,
    pub physical: bool,
    pub max_real_eigenvalue: f64,
    pub stability_margin: f64,
    pub pairs: Vec<PairReport>,
    /// `E_ij` for every ordered pair, keyed like `E_ab` (a steered by b).
    pub steering_parameters: BTreeMap<String, f64>,
    pub analytic: AnalyticSection,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidateReport {
    pub tool_version: &'static str,
    pub model_kind: ModelKind,
    pub params: SystemParams,
    /// Whether the trajectories kept the counter-rotating terms.
    pub counter_rotating: bool,
    pub simulation: SimulationConfig,
    #[serde(flatten)]
    pub result: ValidationReport,
}

pub fn stability_report(kind: ModelKind, p: &SystemParams, gamma_ref: f64) -> Result<StabilityReport> {
    p.validate()?;
    let st = stability(&kind.build(p)?)?;
    Ok(StabilityReport {
        tool_version: env!("CARGO_PKG_VERSION"),
        model_kind: kind,
        params: *p,
        stable: st.stable,
        max_real_eigenvalue: st.max_real_eigenvalue * gamma_ref,
        stability_margin: st.margin() * gamma_ref,
        gamma_ref,
    })
}

pub fn pair_report(v: &CovarianceMatrix, i: Mode, j: Mode) -> Result<PairReport> {
    Ok(PairReport {
        i,
        j,
        steering: criteria::reid_steering(v, i, j)?,
        entanglement: criteria::entanglement(v, i, j)?,
        thresholds_ij: criteria::correlation_thresholds(v, i, j)?,
        thresholds_ji: criteria::correlation_thresholds(v, j, i)?,
    })
}

fn analytic_section(kind: ModelKind, p: &SystemParams) -> AnalyticSection {
    let mut s = AnalyticSection::default();
    let mut notes = Vec::new();
    match kind {
        ModelKind::ReducedA => {
            s.case1_moments = keep(analytic::case1_moments(p), &mut notes);
            s.case1_steering = keep(analytic::steering_case1(p), &mut notes);
            s.case1_thresholds = keep(analytic::thresholds_case1(p), &mut notes);
        }
        ModelKind::ReducedB => {
            s.case2_moments = keep(analytic::case2_moments(p), &mut notes);
            s.case2_steering = keep(analytic::steering_case2(p), &mut notes);
            s.case2_two_way_discriminant = Some(analytic::case2_two_way_discriminant(p));
        }
        ModelKind::FullRwa => notes.push("no closed form for the full three-mode model".into()),
    }
    notes.dedup();
    s.notes = notes;
    s
}

fn keep<T>(r: Result<T>, notes: &mut Vec<String>) -> Option<T> {
    r.map_err(|e| notes.push(e.to_string())).ok()
}

pub fn steady_state_report(kind: ModelKind, p: &SystemParams, gamma_ref: f64) -> Result<SteadyStateReport> {
    p.validate()?;
    let model = kind.build(p)?;
    let st = stability(&model)?;
    if !st.stable {
        return Err(Error::Unstable { max_real_eigenvalue: st.max_real_eigenvalue * gamma_ref });
    }
    let v = steady_state(&model)?;

    let labels = v.labels.clone();
    let mut pairs = Vec::new();
    let mut steering_parameters = BTreeMap::new();
    for (k, &i) in labels.iter().enumerate() {
        for &j in &labels[k + 1..] {
            let r = pair_report(&v, i, j)?;
            steering_parameters.insert(format!("E_{i}{j}"), r.steering.e_ij);
            steering_parameters.insert(format!("E_{j}{i}"), r.steering.e_ji);
            pairs.push(r);
        }
    }
    let warnings = adiabatic_regime_warning(kind, p).into_iter().collect();

    Ok(SteadyStateReport {
        tool_version: env!("CARGO_PKG_VERSION"),
        model_kind: kind,
        params: *p,
        symplectic_eigenvalues: v.symplectic_eigenvalues(),
        physical: v.is_physical(),
        covariance: v,
        max_real_eigenvalue: st.max_real_eigenvalue * gamma_ref,
        stability_margin: st.margin() * gamma_ref,
        pairs,
        steering_parameters,
        analytic: analytic_section(kind, p),
        warnings,
    })
}

/// Simulates the model against its own Lyapunov covariance. For the full
/// model with `omega_m` set, the trajectories keep the counter-rotating
/// terms while the reference stays the rotating-wave solution.
pub fn validate_report(kind: ModelKind, p: &SystemParams, config: &SimulationConfig) -> Result<ValidateReport> {
    p.validate()?;
    config.validate()?;
    let reference_model = kind.build(p)?;
    let reference = steady_state(&reference_model)?;
    let counter_rotating = kind == ModelKind::FullRwa && p.omega_m.is_some();
    let simulated = if counter_rotating { build_full_nonrwa(p)? } else { reference_model };
    let result = langevin::validate(&simulated, &reference, config)?;
    Ok(ValidateReport {
        tool_version: env!("CARGO_PKG_VERSION"),
        model_kind: kind,
        params: *p,
        counter_rotating,
        simulation: *config,
        result,
    })
}
