//! Coordinate charts near parabolic curves, stored as node tables together
//! with the forms they induce, plus independent certificates for them.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{bracket_root, fd4};
use crate::surface::{FormSource, FundamentalData, Orientation, ParamPoint};

/// Which native parameter runs along the base curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Along {
    U,
    V,
}

impl Along {
    pub fn point(self, along: f64, across: f64) -> ParamPoint {
        match self {
            Along::U => ParamPoint::new(along, across),
            Along::V => ParamPoint::new(across, along),
        }
    }

    pub fn vector(self, along: f64, across: f64) -> [f64; 2] {
        match self {
            Along::U => [along, across],
            Along::V => [across, along],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BaseCurve {
    /// `across = const`.
    CoordinateLine { along: Along, across: f64 },
    /// The level `K = 0` followed from the first root near `guess`.
    ParabolicLevel { along: Along, guess: f64 },
}

impl BaseCurve {
    pub fn along(&self) -> Along {
        match *self {
            BaseCurve::CoordinateLine { along, .. } | BaseCurve::ParabolicLevel { along, .. } => along,
        }
    }

    /// `across` value of the curve at `al` and its slope, continuing from `guess`.
    pub fn locate<S: FormSource + ?Sized>(&self, s: &S, al: f64, guess: f64) -> Result<(f64, f64)> {
        match *self {
            BaseCurve::CoordinateLine { across, .. } => Ok((across, 0.0)),
            BaseCurve::ParabolicLevel { along, .. } => {
                let k = |a: f64, c: f64| s.forms(along.point(a, c)).map(|fd| fd.k);
                let k0 = k(al, guess)?;
                let c = if k0 == 0.0 {
                    guess
                } else {
                    let mut step = 1e-3;
                    let mut found = None;
                    while step < 4.0 {
                        for side in [1.0, -1.0] {
                            let c1 = guess + side * step;
                            if let Ok(k1) = k(al, c1) {
                                if k1.signum() != k0.signum() {
                                    found = Some((c1, k1));
                                    break;
                                }
                            }
                        }
                        if found.is_some() {
                            break;
                        }
                        step *= 2.0;
                    }
                    let (c1, k1) = found.ok_or_else(|| {
                        Error::Precondition(format!("no parabolic point near across = {guess} at along = {al}"))
                    })?;
                    bracket_root(|c| k(al, c), guess, c1, k0, k1, 1e-15)?
                };
                let h = 1e-6;
                let k_al = (k(al + h, c)? - k(al - h, c)?) / (2.0 * h);
                let k_ac = (k(al, c + h)? - k(al, c - h)?) / (2.0 * h);
                if k_ac == 0.0 {
                    return Err(Error::Chart("parabolic level is tangent to the across direction".into()));
                }
                Ok((c, -k_al / k_ac))
            }
        }
    }

    fn start_guess(&self) -> f64 {
        match *self {
            BaseCurve::CoordinateLine { across, .. } => across,
            BaseCurve::ParabolicLevel { guess, .. } => guess,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AdaptedCase {
    /// `N > 0`, `L(x, 0) = 0`, `L < 0` for `t > 0`, `∂_t L(0, 0) < 0`.
    NormalPositive,
    /// The mirror image: `N < 0`, `L > 0` for `t > 0`, `∂_t L(0, 0) > 0`.
    NormalNegative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ChartKind {
    /// `M = 0` throughout; the base curve is `t = 0`.
    MZero { base: BaseCurve },
    /// Built around a closed asymptotic curve `t = 0`.
    Adapted { case: AdaptedCase },
}

/// Node table of a chart. Index `i * nt + j` holds the node `(x[i], t[j])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chart {
    pub kind: ChartKind,
    pub x: Vec<f64>,
    pub t: Vec<f64>,
    /// Period of `x` when the chart closes up around a circle.
    pub x_period: Option<f64>,
    pub nodes: Vec<ParamPoint>,
    /// `[[u_x, u_t], [v_x, v_t]]` at each node.
    pub jacobian: Vec<[[f64; 2]; 2]>,
    /// `[E, F, G, L, M, N]` in chart coordinates.
    pub forms: Vec<[f64; 6]>,
    pub orientation: Orientation,
    /// Per-level parameter of the adapted construction (empty otherwise).
    pub level_sigma: Vec<f64>,
    pub x_flipped: bool,
    pub t_reversed: bool,
}

impl Chart {
    pub fn nx(&self) -> usize {
        self.x.len()
    }

    pub fn nt(&self) -> usize {
        self.t.len()
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.t.len() + j
    }

    pub fn form(&self, i: usize, j: usize) -> [f64; 6] {
        self.forms[self.index(i, j)]
    }

    /// Column of the `x` grid closest to `x = 0`.
    pub fn origin_column(&self) -> usize {
        (0..self.nx())
            .min_by(|&a, &b| self.x[a].abs().total_cmp(&self.x[b].abs()))
            .unwrap_or(0)
    }

    /// Row of the `t` grid closest to `t = 0`.
    pub fn origin_row(&self) -> usize {
        (0..self.nt())
            .min_by(|&a, &b| self.t[a].abs().total_cmp(&self.t[b].abs()))
            .unwrap_or(0)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,t,u,v,E,F,G,L,M,N\n");
        for i in 0..self.nx() {
            for j in 0..self.nt() {
                let k = self.index(i, j);
                let p = self.nodes[k];
                let f = self.forms[k];
                let _ = writeln!(
                    out,
                    "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                    self.x[i], self.t[j], p.u, p.v, f[0], f[1], f[2], f[3], f[4], f[5]
                );
            }
        }
        out
    }
}

/// Forms of the frame `(a, b)` given in native parameter components.
pub(crate) fn pulled_back(fd: &FundamentalData, a: [f64; 2], b: [f64; 2]) -> [f64; 6] {
    [
        fd.first_form(a, a),
        fd.first_form(a, b),
        fd.first_form(b, b),
        fd.second_form(a, a),
        fd.second_form(a, b),
        fd.second_form(b, b),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StripSpec {
    /// `along` coordinate of `x = 0`.
    pub center: f64,
    pub half_length: f64,
    /// Initial strip width, halved until the chart is non-degenerate.
    pub width: f64,
    /// Odd, so that `x = 0` is a node.
    pub nx: usize,
    pub nt: usize,
    /// Integration steps per grid cell along `x`.
    pub substeps: usize,
}

impl Default for StripSpec {
    fn default() -> Self {
        Self { center: 0.0, half_length: 0.5, width: 0.2, nx: 41, nt: 21, substeps: 8 }
    }
}

/// Preliminary frame at `(sigma, n)`: `∂σ = e_along + c' e_across`,
/// `∂n = e_across`, based at the point `across = c(along) + n`.
struct Preliminary {
    fd: FundamentalData,
    point: ParamPoint,
    e_sigma: [f64; 2],
    e_n: [f64; 2],
    m: f64,
    n: f64,
}

fn preliminary<S: FormSource + ?Sized>(s: &S, along: Along, al: f64, c: f64, dc: f64, n: f64) -> Result<Preliminary> {
    let point = s.domain().reduce(along.point(al, c + n))?;
    let fd = s.forms(point)?;
    let e_sigma = along.vector(1.0, dc);
    let e_n = along.vector(0.0, 1.0);
    Ok(Preliminary { m: fd.second_form(e_sigma, e_n), n: fd.second_form(e_n, e_n), fd, point, e_sigma, e_n })
}

/// `M'/N'`, continued by zero where `M'` vanishes to rounding.
fn char_ratio(p: &Preliminary) -> Result<f64> {
    let scale = p.fd.l.abs().max(p.fd.m.abs()).max(p.fd.n.abs());
    if p.m.abs() <= 1e-12 * scale {
        return Ok(0.0);
    }
    if p.n.abs() <= 1e-12 * scale {
        return Err(Error::Chart(format!(
            "M/N not continuable at ({}, {}): N = {:e}",
            p.point.u, p.point.v, p.n
        )));
    }
    Ok(p.m / p.n)
}

/// Chart with `M = 0` around a base curve: the `x` lines are the
/// characteristics `dn/dσ = -M'/N'`, labelled by where they cross `σ = 0`.
pub fn m_zero_chart<S: FormSource + ?Sized>(s: &S, base: BaseCurve, spec: &StripSpec) -> Result<Chart> {
    let mut width = spec.width;
    let mut last_err = None;
    for _ in 0..8 {
        match build_m_zero(s, base, spec, width) {
            Ok(chart) => return Ok(chart),
            Err(e @ (Error::Chart(_) | Error::OutsideDomain { .. } | Error::DegenerateMetric { .. })) => {
                last_err = Some(e);
                width *= 0.5;
            }
            Err(e) => return Err(e),
        }
    }
    Err(last_err.unwrap_or_else(|| Error::Chart("strip collapsed".into())))
}

fn build_m_zero<S: FormSource + ?Sized>(s: &S, base: BaseCurve, spec: &StripSpec, width: f64) -> Result<Chart> {
    let nx = spec.nx.max(5) | 1;
    let nt = spec.nt.max(5);
    let along = base.along();
    let half = (nx - 1) / 2;
    let dx = spec.half_length / half as f64;
    let sub = spec.substeps.max(1);
    let h = dx / sub as f64;
    let half_steps = 2 * sub * half;

    // base curve at every half step of the integrator, continued outwards
    let mut table = vec![(0.0, 0.0); 2 * half_steps + 1];
    table[half_steps] = base.locate(s, spec.center, base.start_guess())?;
    for dirn in [1isize, -1] {
        for k in 1..=half_steps as isize {
            let idx = (half_steps as isize + dirn * k) as usize;
            let prev = (half_steps as isize + dirn * (k - 1)) as usize;
            let al = spec.center + dirn as f64 * k as f64 * 0.5 * h;
            table[idx] = base.locate(s, al, table[prev].0)?;
        }
    }
    let base_at = |k: isize| table[(half_steps as isize + k) as usize];

    let ratio = |k: isize, n: f64| -> Result<f64> {
        let (c, dc) = base_at(k);
        char_ratio(&preliminary(s, along, spec.center + k as f64 * 0.5 * h, c, dc, n)?)
    };
    // state (n, n_t) with n_t' = -∂n(M'/N') n_t
    let rhs = |k: isize, y: [f64; 2]| -> Result<[f64; 2]> {
        let d = 1e-6;
        let q = ratio(k, y[0])?;
        let qn = (ratio(k, y[0] + d)? - ratio(k, y[0] - d)?) / (2.0 * d);
        Ok([-q, -qn * y[1]])
    };

    let ts: Vec<f64> = (0..nt).map(|j| -0.5 * width + width * j as f64 / (nt - 1) as f64).collect();
    let xs: Vec<f64> = (0..nx).map(|i| (i as f64 - half as f64) * dx).collect();
    let mut states = vec![[0.0; 2]; nx * nt];
    for (j, &t) in ts.iter().enumerate() {
        states[half * nt + j] = [t, 1.0];
        for dirn in [1isize, -1] {
            let mut y = [t, 1.0];
            let hs = dirn as f64 * h;
            for step in 0..(sub * half) as isize {
                let k0 = dirn * 2 * step;
                let k1 = rhs(k0, y)?;
                let k2 = rhs(k0 + dirn, [y[0] + 0.5 * hs * k1[0], y[1] + 0.5 * hs * k1[1]])?;
                let k3 = rhs(k0 + dirn, [y[0] + 0.5 * hs * k2[0], y[1] + 0.5 * hs * k2[1]])?;
                let k4 = rhs(k0 + 2 * dirn, [y[0] + hs * k3[0], y[1] + hs * k3[1]])?;
                for c in 0..2 {
                    y[c] += hs / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
                }
                if (step + 1) % sub as isize == 0 {
                    let cell = (step + 1) / sub as isize;
                    let i = (half as isize + dirn * cell) as usize;
                    states[i * nt + j] = y;
                }
            }
        }
    }

    let mut nodes = Vec::with_capacity(nx * nt);
    let mut jacobian = Vec::with_capacity(nx * nt);
    let mut forms = Vec::with_capacity(nx * nt);
    let mut det_sign = 0.0;
    for i in 0..nx {
        let k = 2 * sub as isize * (i as isize - half as isize);
        let (c, dc) = base_at(k);
        for j in 0..nt {
            let [n, n_t] = states[i * nt + j];
            if n_t <= 0.0 {
                return Err(Error::Chart("characteristics cross".into()));
            }
            let p = preliminary(s, along, spec.center + xs[i], c, dc, n)?;
            let q = char_ratio(&p)?;
            let ex = [p.e_sigma[0] - q * p.e_n[0], p.e_sigma[1] - q * p.e_n[1]];
            let et = [n_t * p.e_n[0], n_t * p.e_n[1]];
            let det = ex[0] * et[1] - ex[1] * et[0];
            if det == 0.0 || (det_sign != 0.0 && det.signum() != det_sign) {
                return Err(Error::Chart("chart Jacobian degenerates".into()));
            }
            det_sign = det.signum();
            nodes.push(p.point);
            jacobian.push([[ex[0], et[0]], [ex[1], et[1]]]);
            forms.push(pulled_back(&p.fd, ex, et));
        }
    }
    Ok(Chart {
        kind: ChartKind::MZero { base },
        x: xs,
        t: ts,
        x_period: None,
        nodes,
        jacobian,
        forms,
        orientation: s.orientation(),
        level_sigma: Vec::new(),
        x_flipped: false,
        t_reversed: false,
    })
}

/// Orders of vanishing in the transverse direction at a parabolic base
/// point; `None` means the quantity vanishes to rounding at both probes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VanishingOrders {
    /// Order of `K`.
    pub b: Option<u32>,
    /// Order of `N`.
    pub r: Option<u32>,
    /// Order of `L` in the `M = 0` frame.
    pub l: Option<u32>,
    /// `l >= r + 1` and `r < b`.
    pub consistent: bool,
}

fn order_from(g1: f64, g2: f64, floor: f64) -> Option<u32> {
    if g1.abs() <= floor && g2.abs() <= floor {
        return None;
    }
    Some((g2.abs() / g1.abs()).log2().round().max(0.0) as u32)
}

/// Orders along the `t` column at `x = 0` of the `M = 0` frame, where
/// `∂t = e_across` and `∂x = ∂σ - (M'/N') ∂n`, from the ratio of values at
/// `t = h` and `t = 2h`.
pub fn vanishing_order<S: FormSource + ?Sized>(s: &S, base: BaseCurve, center: f64) -> Result<VanishingOrders> {
    let along = base.along();
    let (c, dc) = base.locate(s, center, base.start_guess())?;
    let fd0 = s.forms(along.point(center, c))?;
    let h = 1e-3;
    // the base itself may be planar, so the scale comes from the probes
    let mut scale = 0.0f64;
    for t in [h, 2.0 * h] {
        let fd = s.forms(along.point(center, c + t))?;
        scale = scale.max(fd.l.abs().max(fd.m.abs()).max(fd.n.abs()) / fd.e.max(fd.g));
    }
    if scale == 0.0 {
        return Err(Error::Precondition("second fundamental form vanishes".into()));
    }
    if fd0.k.abs() > 1e-8 * scale * scale {
        return Err(Error::Precondition(format!("base point is not parabolic: K = {:e}", fd0.k)));
    }
    let probe = |t: f64| -> Result<[f64; 3]> {
        let p = preliminary(s, along, center, c, dc, t)?;
        let q = if p.m.abs() <= 1e-12 * scale { 0.0 } else { p.m / p.n };
        let ex = [p.e_sigma[0] - q * p.e_n[0], p.e_sigma[1] - q * p.e_n[1]];
        Ok([p.fd.k, p.n, p.fd.second_form(ex, ex)])
    };
    let (a, b2) = (probe(h)?, probe(2.0 * h)?);
    let floor = 1e-16 * scale.max(scale * scale);
    let b = order_from(a[0], b2[0], floor);
    let r = order_from(a[1], b2[1], floor);
    let l = order_from(a[2], b2[2], floor);
    let consistent = match (b, r, l) {
        (Some(b), Some(r), Some(l)) => l >= r + 1 && r < b,
        (Some(b), Some(r), None) => r < b,
        _ => false,
    };
    Ok(VanishingOrders { b, r, l, consistent })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub name: String,
    pub value: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartCertificate {
    /// Largest difference between stored and node-table Jacobians.
    pub jacobian_error: f64,
    /// Largest difference between stored forms and forms recomputed from
    /// the source with the node-table Jacobian.
    pub forms_mismatch: f64,
    pub min_abs_det: f64,
    pub conditions: Vec<Condition>,
    pub tolerance: f64,
    pub passed: bool,
}

/// `∂_t` of a stored form component at node `(i, j)`.
pub fn chart_t_derivative(chart: &Chart, component: usize, i: usize, j: usize) -> f64 {
    let ht = chart.t[1] - chart.t[0];
    let f = |k: isize| chart.forms[chart.index(i, k as usize)][component];
    fd4(&f, j, chart.nt(), ht, false)
}

/// Rebuilds the Jacobian from the node table alone, re-evaluates the forms
/// and checks the defining conditions of the chart.
pub fn chart_certificate<S: FormSource + ?Sized>(s: &S, chart: &Chart, tolerance: f64) -> Result<ChartCertificate> {
    let (nx, nt) = (chart.nx(), chart.nt());
    if nx < 5 || nt < 5 {
        return Err(Error::Precondition("certificates need at least 5 nodes per axis".into()));
    }
    let domain = s.domain();
    let hx = chart.x[1] - chart.x[0];
    let ht = chart.t[1] - chart.t[0];
    let periodic = chart.x_period.is_some();
    let (mut jacobian_error, mut forms_mismatch, mut min_abs_det) = (0.0f64, 0.0f64, f64::INFINITY);
    for i in 0..nx {
        for j in 0..nt {
            let k = chart.index(i, j);
            let p = chart.nodes[k];
            // offsets of neighbouring nodes measured through periodic wraps
            let off_x = |c: usize| {
                move |m: isize| {
                    let q = chart.nodes[chart.index(m.rem_euclid(nx as isize) as usize, j)];
                    if c == 0 { domain.u.delta(p.u, q.u) } else { domain.v.delta(p.v, q.v) }
                }
            };
            let off_t = |c: usize| {
                move |m: isize| {
                    let q = chart.nodes[chart.index(i, m as usize)];
                    if c == 0 { domain.u.delta(p.u, q.u) } else { domain.v.delta(p.v, q.v) }
                }
            };
            let mut jac = [[0.0; 2]; 2];
            for c in 0..2 {
                jac[c][0] = fd4(&off_x(c), i, nx, hx, periodic);
                jac[c][1] = fd4(&off_t(c), j, nt, ht, false);
            }
            let stored = chart.jacobian[k];
            for r in 0..2 {
                for c in 0..2 {
                    jacobian_error = jacobian_error.max((jac[r][c] - stored[r][c]).abs() / stored[r][c].abs().max(1.0));
                }
            }
            let fd = s.forms(p)?;
            let recomputed = pulled_back(&fd, [jac[0][0], jac[1][0]], [jac[0][1], jac[1][1]]);
            for (a, b) in recomputed.iter().zip(&chart.forms[k]) {
                forms_mismatch = forms_mismatch.max((a - b).abs() / b.abs().max(1.0));
            }
            let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
            min_abs_det = min_abs_det.min(det.abs());
        }
    }

    let mut conditions = Vec::new();
    let mut push = |name: &str, value: f64, passed: bool| {
        conditions.push(Condition { name: name.to_string(), value, passed })
    };
    push("non-degenerate Jacobian", min_abs_det, min_abs_det > 0.0);
    let zero_row = chart.origin_row();
    let all = (0..nx).flat_map(|i| (0..nt).map(move |j| (i, j)));
    match chart.kind {
        ChartKind::MZero { .. } => {
            let max_m = all.clone().map(|(i, j)| chart.form(i, j)[4].abs()).fold(0.0, f64::max);
            let min_n = (0..nx).map(|i| chart.form(i, zero_row)[5].abs()).fold(f64::INFINITY, f64::min);
            push("M = 0", max_m, max_m <= tolerance);
            push("N != 0 on t = 0", min_n, min_n > tolerance);
        }
        ChartKind::Adapted { case } => {
            let sgn = match case {
                AdaptedCase::NormalPositive => 1.0,
                AdaptedCase::NormalNegative => -1.0,
            };
            let min_n = all.clone().map(|(i, j)| sgn * chart.form(i, j)[5]).fold(f64::INFINITY, f64::min);
            let min_m = all.clone().map(|(i, j)| chart.form(i, j)[4].abs()).fold(f64::INFINITY, f64::min);
            let max_l0 = (0..nx).map(|i| chart.form(i, 0)[3].abs()).fold(0.0, f64::max);
            let max_l = all
                .clone()
                .filter(|&(_, j)| j > 0)
                .map(|(i, j)| sgn * chart.form(i, j)[3])
                .fold(f64::NEG_INFINITY, f64::max);
            let i0 = chart.origin_column();
            let lt = sgn * chart_t_derivative(chart, 3, i0, 0);
            push("sign(N) constant", min_n, min_n > 0.0);
            push("M != 0", min_m, min_m > 0.0);
            push("L(x, 0) = 0", max_l0, max_l0 <= tolerance);
            push("L strictly signed for t > 0", max_l, max_l < 0.0);
            push("d/dt L(0, 0) signed", lt, lt < 0.0);
        }
    }
    let passed = conditions.iter().all(|c| c.passed) && jacobian_error <= tolerance && forms_mismatch <= tolerance;
    Ok(ChartCertificate { jacobian_error, forms_mismatch, min_abs_det, conditions, tolerance, passed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::Surface;
    use std::f64::consts::PI;

    #[test]
    fn torus_chart_is_a_relabelling() {
        let s = Surface::torus(2.0, 1.0).unwrap();
        let base = BaseCurve::ParabolicLevel { along: Along::V, guess: 1.5 };
        let chart = m_zero_chart(&s, base, &StripSpec::default()).unwrap();
        for i in 0..chart.nx() {
            for j in 0..chart.nt() {
                let p = chart.nodes[chart.index(i, j)];
                assert!((p.v - chart.x[i].rem_euclid(2.0 * PI)).abs() < 1e-12);
                assert!((p.u - PI / 2.0 - chart.t[j]).abs() < 1e-12);
            }
        }
        let cert = chart_certificate(&s, &chart, 1e-6).unwrap();
        assert!(cert.passed, "{cert:?}");
    }

    #[test]
    fn torus_orders() {
        let s = Surface::torus(2.0, 1.0).unwrap();
        let o = vanishing_order(&s, BaseCurve::CoordinateLine { along: Along::V, across: PI / 2.0 }, 0.3).unwrap();
        assert_eq!((o.b, o.r, o.l), (Some(1), Some(0), Some(1)));
        assert!(o.consistent);
    }

    #[test]
    fn sphere_has_no_parabolic_base() {
        let s = Surface::sphere(1.0).unwrap();
        let r = vanishing_order(&s, BaseCurve::ParabolicLevel { along: Along::V, guess: 0.3 }, 0.0);
        assert!(matches!(r, Err(Error::Precondition(_))));
    }
}
