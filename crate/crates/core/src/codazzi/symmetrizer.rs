//! Exponential weights `Ū = e^{-λ}U` that make the symmetrized zeroth-order
//! matrix `(𝓑 + 𝓑*)/2` positive definite, and their certificates.

use serde::{Deserialize, Serialize};

use super::{principal_derivatives, system_matrices, LocalState, Mat2, SystemField};
use crate::error::{Error, Result};
use crate::numeric::{fd4, sym2_eigen};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SymmetrizerKind {
    /// `λ = log N + ½∫₀ˣ b + λ̄t` near a parabolic boundary curve.
    Boundary,
    /// `λ = ¼ log det I + ελ₂ + λ₀t` near a closed asymptotic curve.
    ClosedCurve,
    /// `λ = ¼ log det I + λ₂ + λ₀t` with `2Mλ₂ₓ - (3/2)L_t = (3/2)Mf`.
    ClosedCurveF,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchControls {
    pub lambda_bar_start: f64,
    pub doublings: usize,
    pub epsilons: Vec<f64>,
    pub lambda0s: Vec<f64>,
    /// Rows `t_0 .. t_{rows-1}` of the field form the domain; halved on failure.
    pub rows: Option<usize>,
    pub min_rows: usize,
    pub threshold: f64,
    /// Concentration of the bump that lets `λ₂` close up periodically.
    pub concentration: f64,
}

impl Default for SearchControls {
    fn default() -> Self {
        Self {
            lambda_bar_start: 0.125,
            doublings: 40,
            epsilons: (0..12).map(|k| 0.5f64.powi(k)).collect(),
            lambda0s: std::iter::once(0.0).chain((0..18).map(|k| 2f64.powi(k))).collect(),
            rows: None,
            min_rows: 3,
            threshold: 1e-9,
            concentration: 8.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchStep {
    pub rows: usize,
    pub lambda_bar: Option<f64>,
    pub epsilon: Option<f64>,
    pub lambda0: Option<f64>,
    pub min_eig: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxCheck {
    pub side: String,
    pub min_value: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositivityReport {
    pub min_eig: f64,
    pub at: [f64; 2],
    pub node: (usize, usize),
    /// `min λ_min / (t - t₀)^e` over the domain, the constant of the weighted bound.
    pub q: f64,
    pub exponent: i32,
    pub fluxes: Vec<FluxCheck>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Symmetrizer {
    pub kind: SymmetrizerKind,
    /// Global multiplier of the system; `-1` on the branch with `N < 0`.
    pub sign: f64,
    pub rows: usize,
    /// Total weight on the field grid.
    pub lambda: Vec<f64>,
    pub lambda_bar: Option<f64>,
    pub lambda0: Option<f64>,
    pub epsilon: Option<f64>,
    /// `λ₂` on the field grid (closed-curve kinds).
    pub lambda2: Option<Vec<f64>>,
    /// `f` per row (f-kind).
    pub f: Option<Vec<f64>>,
    /// `x` where `∂_t L` is most negative on the curve (closed-curve kinds).
    pub focus_x: Option<f64>,
    /// Vanishing orders `(r, k)` of `N` and `LN` (boundary kind).
    pub orders: Option<(u32, u32)>,
    pub search: Vec<SearchStep>,
    pub report: PositivityReport,
}

impl Symmetrizer {
    /// The trivial weight `λ = 0` with the system sign `sign`.
    pub fn none(field: &SystemField, sign: f64) -> Self {
        Self {
            kind: SymmetrizerKind::Boundary,
            sign,
            rows: field.grid.nt,
            lambda: vec![0.0; field.grid.len()],
            lambda_bar: None,
            lambda0: None,
            epsilon: None,
            lambda2: None,
            f: None,
            focus_x: None,
            orders: None,
            search: Vec::new(),
            report: PositivityReport {
                min_eig: f64::NAN,
                at: [f64::NAN; 2],
                node: (0, 0),
                q: f64::NAN,
                exponent: 0,
                fluxes: Vec::new(),
                passed: false,
            },
        }
    }

    /// The same symmetrizer with `λ` shifted by a constant.
    pub fn shifted(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.lambda.iter_mut().for_each(|l| *l += c);
        out
    }

    /// `(λ, λ_x, λ_t)` at a point.
    pub fn weight(&self, field: &SystemField, x: f64, t: f64) -> Result<[f64; 3]> {
        field.interp_scalar(&self.lambda, x, t)
    }

    fn exponent(&self) -> i32 {
        match self.orders {
            Some((r, k)) => k as i32 - r as i32 - 1,
            None => 0,
        }
    }
}

fn sym(m: &Mat2) -> Mat2 {
    let o = 0.5 * (m[0][1] + m[1][0]);
    [[m[0][0], o], [o, m[1][1]]]
}

/// `𝓑 = B + λ_x A¹ + λ_t A² - ½A¹_x - ½A²_t` at node `(i, j)` and zero state.
fn weighted_matrix(field: &SystemField, lambda: &[f64], sign: f64, i: usize, j: usize, threshold: f64) -> Result<Mat2> {
    let g = &field.grid;
    let p = field.node(i, j);
    let (x, t) = (g.x(i), g.t(j));
    let m = system_matrices(p, &LocalState::at_rest(), sign, threshold, (x, t))?;
    let fx = |k: isize| lambda[g.index(k.rem_euclid(g.nx as isize) as usize, j)];
    let ft = |k: isize| lambda[g.index(i, k as usize)];
    let l_x = fd4(&fx, i, g.nx, g.hx, g.x_periodic);
    let l_t = fd4(&ft, j, g.nt, g.ht, false);
    Ok(calligraphic_b(&m.b, &m.a1, &m.a2, &principal_derivatives(p, sign), l_x, l_t))
}

pub(crate) fn calligraphic_b(b: &Mat2, a1: &Mat2, a2: &Mat2, da: &(Mat2, Mat2), l_x: f64, l_t: f64) -> Mat2 {
    std::array::from_fn(|r| std::array::from_fn(|c| b[r][c] + l_x * a1[r][c] + l_t * a2[r][c] - 0.5 * da.0[r][c] - 0.5 * da.1[r][c]))
}

fn first_row(field: &SystemField, threshold: f64) -> usize {
    let g = &field.grid;
    let degenerate = (0..g.nx).any(|i| field.node(i, 0).forms[5].abs() < threshold);
    usize::from(degenerate)
}

/// Positivity of `(𝓑 + 𝓑*)/2` at zero state over rows `..symm.rows`, with
/// the boundary flux signs the energy argument needs.
pub fn positivity_certificate(field: &SystemField, symm: &Symmetrizer, threshold: f64) -> Result<PositivityReport> {
    let g = &field.grid;
    let j0 = first_row(field, threshold);
    let rows = symm.rows.min(g.nt);
    let e = symm.exponent();
    let (mut min_eig, mut at, mut node, mut q) = (f64::INFINITY, [0.0; 2], (0, 0), f64::INFINITY);
    for i in 0..g.nx {
        for j in j0..rows {
            let b = weighted_matrix(field, &symm.lambda, symm.sign, i, j, threshold)?;
            let eig = sym2_eigen(sym(&b))[0];
            if eig < min_eig {
                (min_eig, at, node) = (eig, [g.x(i), g.t(j)], (i, j));
            }
            let dt = g.t(j) - g.t0;
            if e == 0 {
                q = q.min(eig);
            } else if dt > 0.0 {
                q = q.min(eig / dt.powi(e));
            }
        }
    }
    let mut fluxes = Vec::new();
    let signed = |i: usize, j: usize, c: usize| symm.sign * field.node(i, j).forms[c];
    match symm.kind {
        SymmetrizerKind::Boundary => {
            let mut worst = f64::INFINITY;
            for i in 0..g.nx {
                for j in j0.max(1)..rows {
                    worst = worst.min(signed(i, j, 5)).min(-signed(i, j, 3));
                }
            }
            fluxes.push(FluxCheck { side: "characteristic sides".into(), min_value: worst, passed: worst >= 0.0 });
        }
        _ => {
            let top = rows - 1;
            let worst = (0..g.nx).map(|i| signed(i, top, 5).min(-signed(i, top, 3))).fold(f64::INFINITY, f64::min);
            fluxes.push(FluxCheck { side: format!("t = {}", g.t(top)), min_value: worst, passed: worst >= 0.0 });
        }
    }
    let passed = min_eig > 0.0 && fluxes.iter().all(|f| f.passed);
    Ok(PositivityReport { min_eig, at, node, q, exponent: e, fluxes, passed })
}

/// Cumulative trapezoid of `d` along `x` on row `j`, starting from node `i0`.
fn integrate_x(field: &SystemField, d: &dyn Fn(usize) -> f64, i0: usize) -> Vec<f64> {
    let g = &field.grid;
    let mut out = vec![0.0; g.nx];
    for i in i0 + 1..g.nx {
        out[i] = out[i - 1] + 0.5 * g.hx * (d(i - 1) + d(i));
    }
    for i in (0..i0).rev() {
        out[i] = out[i + 1] - 0.5 * g.hx * (d(i) + d(i + 1));
    }
    out
}

fn order(a: f64, b: f64) -> u32 {
    // values at t and 2t
    if a.abs() < 1e-300 {
        return 0;
    }
    (b / a).abs().log2().round().max(0.0) as u32
}

pub fn build_symmetrizer(field: &SystemField, kind: SymmetrizerKind, controls: &SearchControls) -> Result<Symmetrizer> {
    match kind {
        SymmetrizerKind::Boundary => boundary(field, controls),
        _ => closed(field, kind, controls),
    }
}

fn boundary(field: &SystemField, c: &SearchControls) -> Result<Symmetrizer> {
    let g = &field.grid;
    let thr = c.threshold;
    if field.relative_m() > 1e-10 {
        return Err(Error::Precondition("the boundary symmetrizer needs a chart with M = 0".into()));
    }
    let sign = field.node(g.nx / 2, 1).forms[5].signum();
    for i in 0..g.nx {
        for j in 1..g.nt {
            let p = field.node(i, j);
            if sign * p.forms[5] <= 0.0 || sign * p.forms[3] >= 0.0 {
                return Err(Error::Precondition(format!(
                    "sign pattern N > 0 > L fails at ({}, {})",
                    g.x(i),
                    g.t(j)
                )));
            }
        }
    }
    let mid = field.node(g.nx / 2, 1);
    let mid2 = field.node(g.nx / 2, 2);
    let r = order(mid.forms[5], mid2.forms[5]);
    let k = r + order(mid.forms[3], mid2.forms[3]);

    let j0 = first_row(field, thr);
    let i_ref = if g.x0 <= 0.0 && 0.0 <= g.x(g.nx - 1) && !g.x_periodic {
        ((-g.x0) / g.hx).round() as usize
    } else {
        0
    };
    let mut base = vec![f64::NAN; g.len()];
    for j in j0..g.nt {
        let half_b = integrate_x(field, &|i| 0.5 * field.node(i, j).coeffs.b, i_ref);
        for i in 0..g.nx {
            base[g.index(i, j)] = (sign * field.node(i, j).forms[5]).ln() + half_b[i];
        }
    }
    if j0 == 1 {
        // log N is singular on a degenerate base row; extend linearly so the
        // stencil stays finite, the row itself is excluded from certificates
        for i in 0..g.nx {
            base[g.index(i, 0)] = 2.0 * base[g.index(i, 1)] - base[g.index(i, 2)];
        }
    }
    let rows = c.rows.unwrap_or(g.nt).min(g.nt);
    let mut search = Vec::new();
    let mut lambda_bar = c.lambda_bar_start;
    let mut best: Option<PositivityReport> = None;
    for _ in 0..=c.doublings {
        let lambda: Vec<f64> = (0..g.len()).map(|k| base[k] + lambda_bar * (g.t(k % g.nt) - g.t0)).collect();
        let mut symm = Symmetrizer {
            kind: SymmetrizerKind::Boundary,
            sign,
            rows,
            lambda,
            lambda_bar: Some(lambda_bar),
            orders: Some((r, k)),
            ..Symmetrizer::none(field, sign)
        };
        let report = positivity_certificate(field, &symm, thr)?;
        search.push(SearchStep { rows, lambda_bar: Some(lambda_bar), epsilon: None, lambda0: None, min_eig: report.min_eig });
        if report.passed {
            symm.search = search;
            symm.report = report;
            return Ok(symm);
        }
        if best.as_ref().map_or(true, |b| report.min_eig > b.min_eig) {
            best = Some(report);
        }
        lambda_bar = if lambda_bar <= 0.0 { 0.125 } else { 2.0 * lambda_bar };
    }
    let b = best.expect("at least one attempt");
    Err(Error::SearchExhausted { x: b.at[0], t: b.at[1], eigenvalue: b.min_eig })
}

fn closed(field: &SystemField, kind: SymmetrizerKind, c: &SearchControls) -> Result<Symmetrizer> {
    let g = &field.grid;
    let thr = c.threshold;
    let Some(period) = g.x_period() else {
        return Err(Error::Precondition("closed-curve symmetrizers need a periodic x axis".into()));
    };
    // the branch with N < 0 is handled by multiplying the system by -1
    let sign = field.node(0, 0).forms[5].signum();
    let m_sign = (sign * field.node(0, 0).forms[4]).signum();
    for i in 0..g.nx {
        let p = field.node(i, 0);
        let scale = p.forms[3].abs().max(p.forms[4].abs()).max(p.forms[5].abs());
        if p.forms[3].abs() > 1e-8 * scale {
            return Err(Error::Precondition(format!("L does not vanish on t = {} at x = {}", g.t0, g.x(i))));
        }
        if sign * p.forms[5] <= 0.0 {
            return Err(Error::Precondition("N changes sign along the curve".into()));
        }
    }
    for p in &field.nodes {
        if (sign * p.forms[4]).signum() != m_sign || p.forms[4] == 0.0 {
            return Err(Error::Precondition("M vanishes or changes sign".into()));
        }
    }
    let lt0: Vec<f64> = (0..g.nx).map(|i| sign * field.node(i, 0).derivs[3]).collect();
    let (focus_i, min_lt) = lt0.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
    let focus_x = g.x(focus_i);
    let lambda1: Vec<f64> = field.nodes.iter().map(|p| 0.25 * p.det_i().ln()).collect();

    let (lambda2, f, epsilons): (Vec<f64>, Option<Vec<f64>>, Vec<f64>) = match kind {
        SymmetrizerKind::ClosedCurve => {
            if min_lt >= 0.0 {
                return Err(Error::Precondition("∂_t L is nowhere negative on the curve".into()));
            }
            let bump: Vec<f64> = (0..g.nx)
                .map(|i| {
                    let phase = 2.0 * std::f64::consts::PI * (g.x(i) - focus_x) / period;
                    (c.concentration * (phase.cos() - 1.0)).exp()
                })
                .collect();
            let mean = bump.iter().sum::<f64>() / g.nx as f64;
            let d = |i: usize| m_sign * (1.0 - bump[i] / mean);
            let row = integrate_x(field, &d, 0);
            let l2 = (0..g.len()).map(|k| row[k / g.nt]).collect();
            (l2, None, c.epsilons.clone())
        }
        _ => {
            let mut l2 = vec![0.0; g.len()];
            let mut fs = Vec::with_capacity(g.nt);
            for j in 0..g.nt {
                let ratio: Vec<f64> = (0..g.nx)
                    .map(|i| {
                        let p = field.node(i, j);
                        p.derivs[3] / p.forms[4]
                    })
                    .collect();
                let f = -ratio.iter().sum::<f64>() / g.nx as f64;
                if f * m_sign <= 0.0 && j == 0 {
                    return Err(Error::Precondition(format!(
                        "no admissible f: mean of ∂_t L / M is {:e} on the curve",
                        -f
                    )));
                }
                fs.push(f);
                let row = integrate_x(field, &|i| 0.75 * (ratio[i] + f), 0);
                for i in 0..g.nx {
                    l2[g.index(i, j)] = row[i];
                }
            }
            (l2, Some(fs), vec![1.0])
        }
    };

    let mut rows = c.rows.unwrap_or(g.nt).min(g.nt);
    let mut search = Vec::new();
    let mut best: Option<PositivityReport> = None;
    loop {
        for &eps in &epsilons {
            for &l0 in &c.lambda0s {
                let lambda: Vec<f64> = (0..g.len())
                    .map(|k| lambda1[k] + eps * lambda2[k] + l0 * (g.t(k % g.nt) - g.t0))
                    .collect();
                let mut symm = Symmetrizer {
                    kind,
                    sign,
                    rows,
                    lambda,
                    lambda0: Some(l0),
                    epsilon: (kind == SymmetrizerKind::ClosedCurve).then_some(eps),
                    lambda2: Some(lambda2.clone()),
                    f: f.clone(),
                    focus_x: Some(focus_x),
                    ..Symmetrizer::none(field, sign)
                };
                let report = positivity_certificate(field, &symm, thr)?;
                search.push(SearchStep {
                    rows,
                    lambda_bar: None,
                    epsilon: symm.epsilon,
                    lambda0: Some(l0),
                    min_eig: report.min_eig,
                });
                if report.passed {
                    symm.search = search;
                    symm.report = report;
                    return Ok(symm);
                }
                if best.as_ref().map_or(true, |b| report.min_eig > b.min_eig) {
                    best = Some(report);
                }
            }
        }
        if rows / 2 < c.min_rows {
            break;
        }
        rows /= 2;
    }
    let b = best.expect("at least one attempt");
    Err(Error::SearchExhausted { x: b.at[0], t: b.at[1], eigenvalue: b.min_eig })
}
