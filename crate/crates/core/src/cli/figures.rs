//! Sweep grids behind each reproduced figure.

use std::str::FromStr;

use rayon::prelude::*;

use super::csv::{Cell, Table};
use super::sweep::{run_sweep_scaled, Quantity, SweepRange, SweepSpec, SweptParameter};
use crate::error::{Error, Result};
use crate::model::{ModelKind, SystemParams};

/// Points per curve.
pub const GRID_POINTS: usize = 200;

/// Fraction of the stability bound on `g_m` covered by coupling sweeps.
pub const COUPLING_FRACTION: f64 = 0.95;

/// Damping of the eliminated mode, in units of the common damping.
pub const FAST_DAMPING: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FigureId {
    Fig2aA,
    Fig2aB,
    Fig2A,
    Fig2B,
    Fig3A,
    Fig3B,
    Fig4,
    Fig5,
    Fig6,
}

impl FigureId {
    pub const ALL: [FigureId; 9] = [
        FigureId::Fig2aA,
        FigureId::Fig2aB,
        FigureId::Fig2A,
        FigureId::Fig2B,
        FigureId::Fig3A,
        FigureId::Fig3B,
        FigureId::Fig4,
        FigureId::Fig5,
        FigureId::Fig6,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FigureId::Fig2aA => "2a_a",
            FigureId::Fig2aB => "2a_b",
            FigureId::Fig2A => "2_a",
            FigureId::Fig2B => "2_b",
            FigureId::Fig3A => "3_a",
            FigureId::Fig3B => "3_b",
            FigureId::Fig4 => "4",
            FigureId::Fig5 => "5",
            FigureId::Fig6 => "6",
        }
    }

    fn description(self) -> &'static str {
        match self {
            FigureId::Fig2aA => "correlation and thresholds vs g_m at C_a = 0",
            FigureId::Fig2aB => "correlation and thresholds vs C_a at g_m = 0.5",
            FigureId::Fig2A => "E_ab vs C_a for several g_m",
            FigureId::Fig2B => "E_ab vs C_a for several mirror occupations n0 at g_m = 1",
            FigureId::Fig3A => "Duan-Simon parameter vs C_a for several g_m",
            FigureId::Fig3B => "Duan-Simon parameter vs C_a for several n0 at g_m = 1",
            FigureId::Fig4 => "E_cb and E_bc vs G_a for weak G",
            FigureId::Fig5 => "E_cb and E_bc vs G_a for strong G",
            FigureId::Fig6 => "E_cb and E_bc vs G_a at G = 1 for asymmetric thermal occupations",
        }
    }
}

impl FromStr for FigureId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FigureId::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::validation("figure", format!("unknown figure id `{s}`")))
    }
}

/// One curve of a figure.
#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub spec: SweepSpec,
}

/// Mirror–cavity reduction: `κ = γ_m = 1`, fast atoms.
pub fn case1_base() -> SystemParams {
    SystemParams { gamma_a: FAST_DAMPING, ..Default::default() }
}

/// Mirror–atom reduction: `γ_m = γ_a = 1`, fast cavity.
pub fn case2_base() -> SystemParams {
    SystemParams { kappa: FAST_DAMPING, ..Default::default() }
}

/// `g_m` realising `G = g_m²/κ`.
pub fn g_m_for(big_g: f64, kappa: f64) -> f64 {
    (big_g * kappa).sqrt()
}

fn c_a_sweep(fixed: SystemParams, outputs: Vec<Quantity>) -> SweepSpec {
    SweepSpec {
        model_kind: ModelKind::ReducedA,
        swept_parameter: SweptParameter::CA,
        range: SweepRange::linear(0.0, 10.0, GRID_POINTS),
        fixed,
        outputs,
    }
}

fn g_a_sweep(fixed: SystemParams, stop: f64) -> SweepSpec {
    SweepSpec {
        model_kind: ModelKind::ReducedB,
        swept_parameter: SweptParameter::BigGA,
        range: SweepRange::linear(0.0, stop, GRID_POINTS),
        fixed,
        outputs: vec![Quantity::Steering, Quantity::Variances],
    }
}

pub fn series(id: FigureId) -> Vec<Series> {
    let base1 = case1_base();
    let base2 = case2_base();
    let with_g_m = |g_m: f64| SystemParams { g_m, ..base1 };
    let with_n0 = |n0: f64| SystemParams { g_m: 1.0, n0, ..base1 };
    let with_big_g = |g: f64| SystemParams { g_m: g_m_for(g, base2.kappa), ..base2 };
    let labelled = |label: String, spec: SweepSpec| Series { label, spec };
    match id {
        FigureId::Fig2aA => {
            // stability requires g_m² < κγ_m at C_a = 0
            let stop = COUPLING_FRACTION * (base1.kappa * base1.gamma_m).sqrt();
            let spec = SweepSpec {
                model_kind: ModelKind::ReducedA,
                swept_parameter: SweptParameter::GM,
                range: SweepRange::linear(stop / GRID_POINTS as f64, stop, GRID_POINTS),
                fixed: base1,
                outputs: vec![Quantity::Thresholds],
            };
            vec![labelled("C_a=0".into(), spec)]
        }
        FigureId::Fig2aB => vec![labelled("g_m=0.5".into(), c_a_sweep(with_g_m(0.5), vec![Quantity::Thresholds]))],
        FigureId::Fig2A => [0.25, 0.5, 1.0]
            .into_iter()
            .map(|g| labelled(format!("g_m={g}"), c_a_sweep(with_g_m(g), vec![Quantity::Steering])))
            .collect(),
        FigureId::Fig2B => [0.0, 1.0, 1.5]
            .into_iter()
            .map(|n0| labelled(format!("n0={n0}"), c_a_sweep(with_n0(n0), vec![Quantity::Steering])))
            .collect(),
        FigureId::Fig3A => [0.25, 0.5, 1.0]
            .into_iter()
            .map(|g| {
                let outputs = vec![Quantity::DuanSimon, Quantity::LogNegativity];
                labelled(format!("g_m={g}"), c_a_sweep(with_g_m(g), outputs))
            })
            .collect(),
        FigureId::Fig3B => [0.0, 1.0, 1.5]
            .into_iter()
            .map(|n0| {
                let outputs = vec![Quantity::DuanSimon, Quantity::LogNegativity];
                labelled(format!("n0={n0}"), c_a_sweep(with_n0(n0), outputs))
            })
            .collect(),
        FigureId::Fig4 => {
            [0.25, 0.5, 1.0].into_iter().map(|g| labelled(format!("G={g}"), g_a_sweep(with_big_g(g), 10.0))).collect()
        }
        FigureId::Fig5 => {
            [5.0, 10.0, 25.0].into_iter().map(|g| labelled(format!("G={g}"), g_a_sweep(with_big_g(g), 60.0))).collect()
        }
        FigureId::Fig6 => [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0)]
            .into_iter()
            .map(|(n, n0)| {
                let fixed = SystemParams { n, n0, ..with_big_g(1.0) };
                labelled(format!("n={n} n0={n0}"), g_a_sweep(fixed, 10.0))
            })
            .collect(),
    }
}

/// Concatenates the figure's curves into one table with a leading `series` column.
pub fn reproduce_figure(id: FigureId, gamma_ref: f64) -> Result<Table> {
    let all = series(id);
    let tables = all.par_iter().map(|s| run_sweep_scaled(&s.spec, gamma_ref)).collect::<Result<Vec<_>>>()?;

    let first = &all[0].spec;
    let mut metadata = vec![
        format!("cvsteer {}", env!("CARGO_PKG_VERSION")),
        format!("figure {}: {}", id.name(), id.description()),
        format!("model {}", first.model_kind.name()),
        format!(
            "sweep {} linear from {} to {} with {} points",
            first.swept_parameter.name(),
            first.range.start,
            first.range.stop,
            first.range.count
        ),
        format!("rates in units of the common damping, gamma_ref = {gamma_ref}"),
    ];
    for s in &all {
        metadata.push(format!("series {}: {}", s.label, serde_json::to_string(&s.spec.fixed)?));
    }

    let mut header = vec!["series".to_string()];
    header.extend(tables[0].header.iter().cloned());
    let rows = all
        .iter()
        .zip(tables)
        .flat_map(|(s, t)| {
            t.rows.into_iter().map(move |r| {
                let mut row = vec![Cell::Text(s.label.clone())];
                row.extend(r);
                row
            })
        })
        .collect();
    Ok(Table { metadata, header, rows })
}
