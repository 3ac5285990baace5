//! One-parameter sweeps evaluated on the Lyapunov path and, where a closed
//! form exists, on the analytic path.

use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::csv::{Cell, Table};
use crate::analytic;
use crate::criteria;
use crate::error::{Error, Result};
use crate::lyapunov::{steady_state, CovarianceMatrix};
use crate::model::{stability, Mode, ModelKind, SystemParams};

/// Parameter on the sweep axis: a `SystemParams` field or a derived rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweptParameter {
    #[serde(rename = "kappa")]
    Kappa,
    #[serde(rename = "gamma_m")]
    GammaM,
    #[serde(rename = "gamma_a")]
    GammaA,
    #[serde(rename = "g_m")]
    GM,
    #[serde(rename = "g_a")]
    GA,
    #[serde(rename = "n")]
    N,
    #[serde(rename = "n0")]
    N0,
    #[serde(rename = "omega_m")]
    OmegaM,
    /// C_a = g_a²/γ_a, realised through g_a.
    #[serde(rename = "C_a")]
    CA,
    /// G = g_m²/κ, realised through g_m.
    #[serde(rename = "G")]
    BigG,
    /// G_a = g_a²/κ, realised through g_a.
    #[serde(rename = "G_a")]
    BigGA,
}

impl SweptParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweptParameter::Kappa => "kappa",
            SweptParameter::GammaM => "gamma_m",
            SweptParameter::GammaA => "gamma_a",
            SweptParameter::GM => "g_m",
            SweptParameter::GA => "g_a",
            SweptParameter::N => "n",
            SweptParameter::N0 => "n0",
            SweptParameter::OmegaM => "omega_m",
            SweptParameter::CA => "C_a",
            SweptParameter::BigG => "G",
            SweptParameter::BigGA => "G_a",
        }
    }

    /// Whether the value carries units of rate.
    pub fn is_rate(self) -> bool {
        !matches!(self, SweptParameter::N | SweptParameter::N0)
    }

    pub fn apply(self, base: &SystemParams, value: f64) -> SystemParams {
        let mut p = *base;
        match self {
            SweptParameter::Kappa => p.kappa = value,
            SweptParameter::GammaM => p.gamma_m = value,
            SweptParameter::GammaA => p.gamma_a = value,
            SweptParameter::GM => p.g_m = value,
            SweptParameter::GA => p.g_a = value,
            SweptParameter::N => p.n = value,
            SweptParameter::N0 => p.n0 = value,
            SweptParameter::OmegaM => p.omega_m = Some(value),
            SweptParameter::CA => p.g_a = (value * p.gamma_a).sqrt(),
            SweptParameter::BigG => p.g_m = (value * p.kappa).sqrt(),
            SweptParameter::BigGA => p.g_a = (value * p.kappa).sqrt(),
        }
        p
    }
}

impl FromStr for SweptParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::validation("sweep", format!("cannot resolve parameter `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRange {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
    #[serde(default)]
    pub spacing: Spacing,
}

impl SweepRange {
    pub fn linear(start: f64, stop: f64, count: usize) -> Self {
        SweepRange { start, stop, count, spacing: Spacing::Linear }
    }

    pub fn validate(&self) -> Result<()> {
        if self.count < 2 {
            return Err(Error::validation("count", format!("must be >= 2, got {}", self.count)));
        }
        if !(self.start < self.stop) {
            return Err(Error::validation(
                "start",
                format!("start ({}) must be below stop ({})", self.start, self.stop),
            ));
        }
        if self.spacing == Spacing::Log && !(self.start > 0.0) {
            return Err(Error::validation("start", "log spacing needs start > 0"));
        }
        Ok(())
    }

    pub fn grid(&self) -> Vec<f64> {
        let last = (self.count - 1) as f64;
        (0..self.count)
            .map(|k| {
                let f = k as f64 / last;
                match self.spacing {
                    Spacing::Linear => self.start + f * (self.stop - self.start),
                    Spacing::Log => (self.start.ln() + f * (self.stop.ln() - self.start.ln())).exp(),
                }
            })
            .collect()
    }
}

/// Groups of output columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Variances,
    Correlations,
    Steering,
    DuanSimon,
    LogNegativity,
    Thresholds,
    StabilityMargin,
}

impl Quantity {
    pub const ALL: [Quantity; 7] = [
        Quantity::Variances,
        Quantity::Correlations,
        Quantity::Steering,
        Quantity::DuanSimon,
        Quantity::LogNegativity,
        Quantity::Thresholds,
        Quantity::StabilityMargin,
    ];

    pub fn parse_list(s: &str) -> Result<Vec<Quantity>> {
        let mut out: Vec<Quantity> = Vec::new();
        for name in s.split(',').map(str::trim).filter(|n| !n.is_empty()) {
            let group = if name == "all" { Quantity::ALL.to_vec() } else { vec![name.parse()?] };
            for q in group {
                if !out.contains(&q) {
                    out.push(q);
                }
            }
        }
        Ok(out)
    }
}

impl FromStr for Quantity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "variances" | "variance" => Quantity::Variances,
            "correlations" | "correlation" | "corr" => Quantity::Correlations,
            "steering" | "E" => Quantity::Steering,
            name if name.starts_with("E_") => Quantity::Steering,
            "duan_simon" => Quantity::DuanSimon,
            "log_negativity" | "lambda" => Quantity::LogNegativity,
            "thresholds" => Quantity::Thresholds,
            "stability_margin" | "stability" => Quantity::StabilityMargin,
            other => return Err(Error::validation("outputs", format!("unknown quantity `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub model_kind: ModelKind,
    pub swept_parameter: SweptParameter,
    pub range: SweepRange,
    pub fixed: SystemParams,
    pub outputs: Vec<Quantity>,
}

/// One output column's value from both computation paths.
struct Value {
    numeric: f64,
    analytic: Option<f64>,
    has_analytic: bool,
}

fn v(numeric: f64, analytic: Option<f64>, has_analytic: bool) -> Value {
    Value { numeric, analytic, has_analytic }
}

/// Whether a quantity has a closed-form counterpart for this model kind.
fn analytic_family(kind: ModelKind, q: Quantity) -> bool {
    match q {
        Quantity::Variances | Quantity::Correlations | Quantity::Steering => kind != ModelKind::FullRwa,
        Quantity::Thresholds => kind == ModelKind::ReducedA,
        _ => false,
    }
}

struct Closed {
    var_i: f64,
    var_j: f64,
    corr: f64,
    e_ij: Option<f64>,
    e_ji: Option<f64>,
    thresholds: Option<analytic::Thresholds>,
}

fn closed_form(kind: ModelKind, p: &SystemParams) -> Option<Closed> {
    match kind {
        ModelKind::ReducedA => {
            let m = analytic::case1_moments(p).ok()?;
            let e = analytic::steering_case1(p).ok();
            Some(Closed {
                var_i: m.var_xa,
                var_j: m.var_xb,
                corr: m.corr_xa_pb,
                e_ij: e.map(|e| e.e_ab),
                e_ji: e.map(|e| e.e_ba),
                thresholds: analytic::thresholds_case1(p).ok(),
            })
        }
        ModelKind::ReducedB => {
            let m = analytic::case2_moments(p).ok()?;
            let e = analytic::steering_case2(p).ok();
            Some(Closed {
                var_i: m.var_xc,
                var_j: m.var_xb,
                corr: m.corr_xb_xc,
                e_ij: e.map(|e| e.e_cb),
                e_ji: e.map(|e| e.e_bc),
                thresholds: None,
            })
        }
        ModelKind::FullRwa => None,
    }
}

fn column_names(kind: ModelKind, q: Quantity) -> Vec<String> {
    let (i, j) = kind.primary_pair();
    match q {
        Quantity::Variances => vec![format!("var_X{i}"), format!("var_P{i}"), format!("var_X{j}"), format!("var_P{j}")],
        Quantity::Correlations => vec!["corr".into()],
        Quantity::Steering => vec![format!("E_{i}{j}"), format!("E_{j}{i}")],
        Quantity::DuanSimon => vec!["duan_simon".into(), "h_opt".into()],
        Quantity::LogNegativity => vec!["lambda".into(), "log_negativity".into()],
        Quantity::Thresholds => vec![
            "corr_abs".into(),
            "steer_threshold".into(),
            "ent_threshold".into(),
            "corr_minus_steer_threshold".into(),
        ],
        Quantity::StabilityMargin => vec!["stability_margin".into()],
    }
}

fn evaluate(
    kind: ModelKind,
    q: Quantity,
    v_num: &CovarianceMatrix,
    closed: Option<&Closed>,
    margin: f64,
) -> Result<Vec<Value>> {
    let (i, j) = kind.primary_pair();
    let has = analytic_family(kind, q);
    let var = |m: Mode, x: bool| -> Result<f64> {
        let k = v_num.index_of(m)?;
        Ok(v_num.get(k, x, k, x))
    };
    Ok(match q {
        Quantity::Variances => vec![
            v(var(i, true)?, closed.map(|c| c.var_i), has),
            v(var(i, false)?, closed.map(|c| c.var_i), has),
            v(var(j, true)?, closed.map(|c| c.var_j), has),
            v(var(j, false)?, closed.map(|c| c.var_j), has),
        ],
        Quantity::Correlations => {
            let t = criteria::correlation_thresholds(v_num, i, j)?;
            vec![v(t.corr, closed.map(|c| c.corr), has)]
        }
        Quantity::Steering => {
            let r = criteria::reid_steering(v_num, i, j)?;
            vec![v(r.e_ij, closed.and_then(|c| c.e_ij), has), v(r.e_ji, closed.and_then(|c| c.e_ji), has)]
        }
        Quantity::DuanSimon => {
            let d = criteria::duan_simon(v_num, i, j)?;
            vec![v(d.value, None, false), v(d.h_opt, None, false)]
        }
        Quantity::LogNegativity => {
            let l = criteria::log_negativity(v_num, i, j)?;
            vec![v(l.lambda, None, false), v(l.log_negativity, None, false)]
        }
        Quantity::Thresholds => {
            let t = criteria::correlation_thresholds(v_num, i, j)?;
            let a = closed.and_then(|c| c.thresholds);
            vec![
                v(t.corr.abs(), a.map(|a| a.corr), has),
                v(t.steer_threshold, a.map(|a| a.steer_threshold), has),
                v(t.ent_threshold, a.map(|a| a.ent_threshold), has),
                v(t.corr.abs() - t.steer_threshold, a.map(|a| a.corr - a.steer_threshold), has),
            ]
        }
        Quantity::StabilityMargin => vec![v(margin, None, false)],
    })
}

pub fn header(spec: &SweepSpec) -> Vec<String> {
    let mut h = vec![spec.swept_parameter.name().to_string(), "stable".to_string()];
    for &q in &spec.outputs {
        let has = analytic_family(spec.model_kind, q);
        for name in column_names(spec.model_kind, q) {
            if q == Quantity::StabilityMargin {
                h.push(name);
                continue;
            }
            if has {
                h.push(format!("{name}_analytic"));
                h.push(format!("{name}_absdiff"));
            }
            h.insert(h.len() - if has { 2 } else { 0 }, name);
        }
    }
    h
}

fn row(spec: &SweepSpec, x: f64, gamma_ref: f64) -> Result<Vec<Cell>> {
    let p = spec.swept_parameter.apply(&spec.fixed, x);
    let model = spec.model_kind.build(&p)?;
    let st = stability(&model)?;
    let x_out = if spec.swept_parameter.is_rate() { x * gamma_ref } else { x };
    let mut cells = vec![Cell::Num(x_out)];

    let solved = if st.stable { steady_state(&model).ok() } else { None };
    cells.push(Cell::Text(solved.is_some().to_string()));
    let closed = solved.as_ref().and_then(|_| closed_form(spec.model_kind, &p));

    for &q in &spec.outputs {
        let has = analytic_family(spec.model_kind, q);
        let width = column_names(spec.model_kind, q).len();
        let per_column = if has && q != Quantity::StabilityMargin { 3 } else { 1 };
        match &solved {
            None if q == Quantity::StabilityMargin => cells.push(Cell::Num(st.margin() * gamma_ref)),
            None => cells.extend(std::iter::repeat_n(Cell::Empty, width * per_column)),
            Some(v_num) => {
                for val in evaluate(spec.model_kind, q, v_num, closed.as_ref(), st.margin())? {
                    let numeric = if q == Quantity::StabilityMargin { val.numeric * gamma_ref } else { val.numeric };
                    cells.push(Cell::Num(numeric));
                    if val.has_analytic {
                        cells.push(val.analytic.into());
                        cells.push(val.analytic.map(|a| (a - val.numeric).abs()).into());
                    }
                }
            }
        }
    }
    Ok(cells)
}

/// Evaluates every grid point; unstable points keep only the stability margin.
pub fn run_sweep(spec: &SweepSpec) -> Result<Table> {
    run_sweep_scaled(spec, 1.0)
}

pub fn run_sweep_scaled(spec: &SweepSpec, gamma_ref: f64) -> Result<Table> {
    spec.range.validate()?;
    spec.fixed.validate()?;
    if spec.outputs.is_empty() {
        return Err(Error::validation("outputs", "at least one quantity is required"));
    }
    let grid = spec.range.grid();
    let rows = grid.par_iter().map(|&x| row(spec, x, gamma_ref)).collect::<Result<Vec<_>>>()?;
    Ok(Table { metadata: Vec::new(), header: header(spec), rows })
}

/// Rough check of the adiabatic-elimination regime over a sweep.
pub fn adiabatic_warning(spec: &SweepSpec) -> Option<String> {
    if spec.model_kind == ModelKind::FullRwa {
        return None;
    }
    spec.range.grid().into_iter().find_map(|x| {
        let p = spec.swept_parameter.apply(&spec.fixed, x);
        adiabatic_regime_warning(spec.model_kind, &p)
    })
}

pub fn adiabatic_regime_warning(kind: ModelKind, p: &SystemParams) -> Option<String> {
    if kind == ModelKind::FullRwa {
        return None;
    }
    let fast = kind.fast_rate(p);
    let slow = kind.largest_slow_rate(p);
    (fast < 10.0 * slow).then(|| {
        format!(
            "{}: eliminated-mode damping {fast} is less than 10x the largest other rate {slow}; \
             the reduced model may be inaccurate",
            kind.name()
        )
    })
}
