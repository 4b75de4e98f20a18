//! Parameter sweeps over the closed forms, with a numeric cross-check where a
//! coefficient vector can be built.

use rayon::prelude::*;

use crate::error::Result;
use crate::states::{GhzSpec, WSpec};
use crate::ted::{
    closed_form_success, fidelity_from_aggregates, overall_success, post_selected_state,
    ProtocolConfig,
};

/// Column names, in output order.
pub const COLUMNS: [&str; 13] = [
    "family",
    "d",
    "p",
    "q",
    "s",
    "n",
    "alpha0_or_pu",
    "coeff_gap",
    "ps_per_copy",
    "ps_overall",
    "fidelity_closed",
    "fidelity_numeric",
    "feasible",
];

const FEASIBILITY_TOL: f64 = 1e-12;

/// How the coefficients of each grid point are chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepMode {
    /// GHZ with fixed `α₀` and `gap = d − (Σα)²`. The tail is one distinct
    /// coefficient plus `d − 2` equal ones.
    GhzGap { alpha0s: Vec<f64>, gaps: Vec<f64> },
    /// GHZ with fixed `α₀` and `d − 1` equal tail coefficients.
    GhzEqualTail { alpha0s: Vec<f64> },
    /// W with `β_0 = … = β_{P−2}` given and `β_{P−1}` fixed by normalization.
    WEqualTail { betas: Vec<f64> },
    /// W driven directly by the per-copy success and the gap `P − (Σβ)²`.
    WSuccess { pus: Vec<f64>, gaps: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    /// Local dimensions; ignored by W modes.
    pub ds: Vec<usize>,
    /// Party counts.
    pub ps: Vec<usize>,
    /// GHZ participant count; W always uses `P − 1`.
    pub q: usize,
    pub ns: Vec<usize>,
    pub mode: SweepMode,
}

impl SweepGrid {
    /// Named grids reproducing the published figures.
    pub fn preset(name: &str) -> Option<SweepGrid> {
        let ns = |hi: usize| (2..=hi).collect::<Vec<_>>();
        let inv_sqrt = |x: f64| 1.0 / x.sqrt();
        Some(match name {
            "fig2-ghz" => SweepGrid {
                ds: (2..=10).collect(),
                ps: vec![3],
                q: 1,
                ns: ns(20),
                mode: SweepMode::GhzGap {
                    alpha0s: vec![inv_sqrt(10.0)],
                    gaps: vec![0.5],
                },
            },
            "fig2-w" => SweepGrid {
                ds: vec![2],
                ps: (3..=10).collect(),
                q: 0,
                ns: ns(20),
                mode: SweepMode::WSuccess {
                    pus: vec![0.3],
                    gaps: vec![0.5],
                },
            },
            "s1" => SweepGrid {
                ds: vec![3],
                ps: vec![3],
                q: 1,
                ns: ns(50),
                mode: SweepMode::GhzEqualTail {
                    alpha0s: vec![inv_sqrt(8.0), inv_sqrt(9.0), inv_sqrt(10.0)],
                },
            },
            "s2" => SweepGrid {
                ds: (2..=10).collect(),
                ps: vec![3],
                q: 1,
                ns: vec![2, 3, 5, 10],
                mode: SweepMode::GhzGap {
                    alpha0s: vec![inv_sqrt(10.0)],
                    gaps: vec![0.5],
                },
            },
            "s3" => SweepGrid {
                ds: vec![2],
                ps: vec![3],
                q: 0,
                ns: ns(20),
                mode: SweepMode::WEqualTail {
                    betas: vec![0.3, 0.4, 0.5],
                },
            },
            _ => return None,
        })
    }

    pub const PRESETS: [&'static str; 5] = ["fig2-ghz", "fig2-w", "s1", "s2", "s3"];

    /// Grid points in output order: local dimension, party count, mode
    /// parameters, then copy count.
    /// Coefficient cells in output order; copy counts vary inside a cell.
    fn cells(&self) -> Vec<Cell> {
        let is_w = matches!(
            self.mode,
            SweepMode::WEqualTail { .. } | SweepMode::WSuccess { .. }
        );
        let ds: &[usize] = if is_w { &[2] } else { &self.ds };
        let params: Vec<(f64, Option<f64>)> = match &self.mode {
            SweepMode::GhzGap { alpha0s, gaps } => cross(alpha0s, gaps),
            SweepMode::WSuccess { pus, gaps } => cross(pus, gaps),
            SweepMode::GhzEqualTail { alpha0s } => alpha0s.iter().map(|&a| (a, None)).collect(),
            SweepMode::WEqualTail { betas } => betas.iter().map(|&b| (b, None)).collect(),
        };
        let mut out = Vec::new();
        for &d in ds {
            for &p in &self.ps {
                for &(value, gap) in &params {
                    out.push(Cell { d, p, value, gap });
                }
            }
        }
        out
    }
}

fn cross(a: &[f64], b: &[f64]) -> Vec<(f64, Option<f64>)> {
    a.iter()
        .flat_map(|&x| b.iter().map(move |&y| (x, Some(y))))
        .collect()
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    d: usize,
    p: usize,
    value: f64,
    gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub family: &'static str,
    pub d: usize,
    pub p: usize,
    pub q: usize,
    pub s: usize,
    pub n: usize,
    pub alpha0_or_pu: f64,
    pub coeff_gap: f64,
    pub ps_per_copy: f64,
    pub ps_overall: f64,
    pub fidelity_closed: f64,
    pub fidelity_numeric: Option<f64>,
    pub feasible: bool,
}

impl SweepRow {
    /// Row fields as text, reals with 12 significant digits.
    pub fn fields(&self) -> Vec<String> {
        vec![
            self.family.to_string(),
            self.d.to_string(),
            self.p.to_string(),
            self.q.to_string(),
            self.s.to_string(),
            self.n.to_string(),
            format_g12(self.alpha0_or_pu),
            format_g12(self.coeff_gap),
            format_g12(self.ps_per_copy),
            format_g12(self.ps_overall),
            format_g12(self.fidelity_closed),
            self.fidelity_numeric.map(format_g12).unwrap_or_default(),
            self.feasible.to_string(),
        ]
    }
}

/// Formats like C's `%.12g`.
pub fn format_g12(x: f64) -> String {
    const PREC: i32 = 12;
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.*e}", (PREC - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..PREC).contains(&exp) {
        format!("{}e{exp}", trim_zeros(mantissa))
    } else {
        trim_zeros(&format!("{:.*}", (PREC - 1 - exp) as usize, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// GHZ coefficients with `α₀` fixed, unit norm and `(Σα)² = d − gap`, where
/// the tail is one distinct coefficient followed by `d − 2` equal ones and
/// `α₀` stays minimal. `None` if no such vector exists.
pub fn ghz_coefficients_for_gap(d: usize, alpha0: f64, gap: f64) -> Option<Vec<f64>> {
    if d < 2
        || alpha0.is_nan()
        || alpha0 <= 0.0
        || alpha0 * alpha0 * d as f64 > 1.0 + FEASIBILITY_TOL
    {
        return None;
    }
    let target = d as f64 - gap;
    if target <= 0.0 {
        return None;
    }
    let tail_sum = target.sqrt() - alpha0;
    let tail_sq = 1.0 - alpha0 * alpha0;
    let m = (d - 2) as f64;
    let candidates: Vec<(f64, f64)> = if d == 2 {
        vec![(tail_sum, 0.0)]
    } else {
        // t + m r = S, t² + m r² = R
        let disc = ((m + 1.0) * tail_sq - tail_sum * tail_sum) / m;
        if disc < -FEASIBILITY_TOL {
            return None;
        }
        let root = disc.max(0.0).sqrt();
        [root, -root]
            .iter()
            .map(|&sgn| {
                let r = (tail_sum + sgn) / (m + 1.0);
                (tail_sum - m * r, r)
            })
            .collect()
    };
    for (t, r) in candidates {
        let mut coeffs = vec![alpha0, t];
        coeffs.extend(std::iter::repeat_n(r, d - 2));
        let norm: f64 = coeffs.iter().map(|c| c * c).sum();
        let sum: f64 = coeffs.iter().sum();
        let ok = coeffs[1..].iter().all(|&c| c >= alpha0 - FEASIBILITY_TOL)
            && (norm - 1.0).abs() < 1e-9
            && (sum * sum - target).abs() < 1e-9;
        if ok {
            return Some(coeffs.into_iter().map(|c| c.max(alpha0)).collect());
        }
    }
    None
}

/// Fidelity of the distilled mixture with the perfect state, as a function
/// of the copy count. Both overlaps are computed once per coefficient vector.
struct NumericFidelity {
    p_u: f64,
    filtered: f64,
    initial: f64,
}

impl NumericFidelity {
    fn new(cfg: &ProtocolConfig) -> Result<Self> {
        let (filtered, p_u) = post_selected_state(cfg)?;
        let target = cfg.perfect_state()?;
        Ok(NumericFidelity {
            p_u,
            filtered: target.inner(&filtered)?.norm_sqr(),
            initial: target.inner(&cfg.initial_state()?)?.norm_sqr(),
        })
    }

    fn at(&self, n: usize) -> f64 {
        let ps = overall_success(self.p_u, n);
        ps * self.filtered + (1.0 - ps) * self.initial
    }
}

fn ghz_rows(grid: &SweepGrid, cell: Cell, coeffs: Option<Vec<f64>>, gap: f64) -> Vec<SweepRow> {
    let Cell {
        d,
        p,
        value: alpha0,
        ..
    } = cell;
    let pu = d as f64 * alpha0 * alpha0;
    let numeric = coeffs.and_then(|c| {
        GhzSpec::new(c, p)
            .and_then(|spec| ProtocolConfig::ghz(spec, 2, grid.q))
            .and_then(|cfg| NumericFidelity::new(&cfg))
            .ok()
    });
    grid.ns
        .iter()
        .map(|&n| SweepRow {
            family: "ghz",
            d,
            p,
            q: grid.q,
            s: 0,
            n,
            alpha0_or_pu: alpha0,
            coeff_gap: gap,
            ps_per_copy: pu,
            ps_overall: overall_success(pu, n),
            fidelity_closed: fidelity_from_aggregates(d, pu, n, gap),
            fidelity_numeric: numeric.as_ref().map(|f| f.at(n)),
            feasible: numeric.is_some(),
        })
        .collect()
}

fn w_row(p: usize, n: usize, value: f64, pu: f64, gap: f64) -> SweepRow {
    SweepRow {
        family: "w",
        d: 2,
        p,
        q: p - 1,
        s: 0,
        n,
        alpha0_or_pu: value,
        coeff_gap: gap,
        ps_per_copy: pu,
        ps_overall: overall_success(pu, n),
        fidelity_closed: fidelity_from_aggregates(p, pu, n, gap),
        fidelity_numeric: None,
        feasible: false,
    }
}

fn evaluate(grid: &SweepGrid, cell: Cell) -> Vec<SweepRow> {
    let Cell { d, p, value, gap } = cell;
    match grid.mode {
        SweepMode::GhzGap { .. } => {
            let gap = gap.expect("gap mode");
            ghz_rows(grid, cell, ghz_coefficients_for_gap(d, value, gap), gap)
        }
        SweepMode::GhzEqualTail { .. } => {
            let tail = ((1.0 - value * value) / (d - 1) as f64).sqrt();
            let feasible = value > 0.0 && value <= tail + FEASIBILITY_TOL;
            let coeffs: Vec<f64> = std::iter::once(value)
                .chain(std::iter::repeat_n(tail, d - 1))
                .collect();
            let sum: f64 = coeffs.iter().sum();
            let gap = d as f64 - sum * sum;
            ghz_rows(grid, cell, feasible.then_some(coeffs), gap)
        }
        SweepMode::WEqualTail { .. } => {
            let pivot = (1.0 - (p - 1) as f64 * value * value).max(0.0).sqrt();
            let mut betas = vec![value; p - 1];
            betas.push(pivot);
            let sum: f64 = betas.iter().sum();
            let feasible = value > 0.0 && value <= pivot + FEASIBILITY_TOL;
            let spec = WSpec::new(betas);
            let pu = spec
                .as_ref()
                .map_or(0.0, |s| closed_form_success(&s.clone().into()));
            let numeric = spec.ok().filter(|_| feasible).and_then(|s| {
                ProtocolConfig::w(s, 2)
                    .and_then(|cfg| NumericFidelity::new(&cfg))
                    .ok()
            });
            grid.ns
                .iter()
                .map(|&n| {
                    let mut row = w_row(p, n, value, pu, p as f64 - sum * sum);
                    row.fidelity_numeric = numeric.as_ref().map(|f| f.at(n));
                    row.feasible = numeric.is_some();
                    row
                })
                .collect()
        }
        SweepMode::WSuccess { .. } => {
            let gap = gap.expect("gap mode");
            let ok = value > 0.0 && value <= 1.0 && (0.0..=(p - 1) as f64).contains(&gap);
            grid.ns
                .iter()
                .map(|&n| {
                    let mut row = w_row(p, n, value, value, gap);
                    row.feasible = ok;
                    row
                })
                .collect()
        }
    }
}

/// Evaluates every grid point; rows come back in grid order.
pub fn run_sweep(grid: &SweepGrid) -> Vec<SweepRow> {
    grid.cells()
        .into_par_iter()
        .flat_map_iter(|cell| evaluate(grid, cell))
        .collect()
}
