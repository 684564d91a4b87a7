//! Massau-type integration of the system on a grid of characteristics,
//! which are the asymptotic curves `L dx² + 2M dx dt + N dt² = 0`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{gauss_defect, principal, reconstruct_u, system_matrices, LocalState, Mat2, PointData, SystemField};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Coupling {
    /// `B` frozen at the base state `U = 0`.
    Linearized,
    /// `B` re-evaluated from the current `U` at every new point.
    Quasilinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveControls {
    pub coupling: Coupling,
    pub threshold: f64,
    /// Characteristics slower than this in `|dt/dx|` stop the solve.
    pub speed_floor: f64,
    /// Picard sweeps per new point in the quasilinear mode.
    pub sweeps: usize,
    pub intersection_iterations: usize,
}

impl Default for SolveControls {
    fn default() -> Self {
        Self {
            coupling: Coupling::Quasilinear,
            threshold: 1e-9,
            speed_floor: 1e-4,
            sweeps: 2,
            intersection_iterations: 4,
        }
    }
}

pub type Profile = Box<dyn Fn(f64) -> [f64; 2] + Send + Sync>;

pub enum DataSpec {
    /// `U(x, t0)` for `x` in `[x.0, x.1]`, `n` intervals.
    Cauchy { t0: f64, x: (f64, f64), n: usize, data: Profile },
    /// `U` on the two characteristics leaving `corner` upwards, sampled
    /// every `h` in `x`; `right` is the one with `dt/dx > 0`.
    Goursat { corner: [f64; 2], h: f64, n_right: usize, n_left: usize, right: Profile, left: Profile },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CharPoint {
    pub x: f64,
    pub t: f64,
    pub u: [f64; 2],
    pub u_x: [f64; 2],
    pub u_t: [f64; 2],
    /// `L̄ - L` reconstructed from the Gauss equation.
    pub recon: f64,
    pub gauss_defect: f64,
}

impl CharPoint {
    pub fn state(&self) -> LocalState {
        LocalState { v: self.u[0], w: self.u[1], v_x: self.u_x[0], v_t: self.u_t[0], w_x: self.u_x[1], w_t: self.u_t[1] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub goursat: bool,
    /// Cauchy: levels of shrinking length. Goursat: rows `G[i][j]`.
    pub points: Vec<Vec<CharPoint>>,
    pub coupling: Coupling,
    pub complete: bool,
    pub stopped: Option<String>,
    pub max_abs_u: f64,
    pub max_gauss_defect: f64,
    pub t_max: f64,
}

pub(crate) type Node = (usize, usize);

impl Solution {
    pub fn point(&self, n: Node) -> &CharPoint {
        &self.points[n.0][n.1]
    }

    pub fn triangles(&self) -> Vec<[Node; 3]> {
        let mut out = Vec::new();
        if self.goursat {
            for i in 0..self.points.len().saturating_sub(1) {
                for j in 0..self.points[i].len().min(self.points[i + 1].len()).saturating_sub(1) {
                    out.push([(i, j), (i + 1, j), (i + 1, j + 1)]);
                    out.push([(i, j), (i + 1, j + 1), (i, j + 1)]);
                }
            }
        } else {
            for k in 0..self.points.len().saturating_sub(1) {
                let above = self.points[k + 1].len();
                for i in 0..above {
                    out.push([(k, i), (k, i + 1), (k + 1, i)]);
                    if i + 1 < above {
                        out.push([(k + 1, i), (k, i + 1), (k + 1, i + 1)]);
                    }
                }
            }
        }
        out
    }

    /// Boundary pieces in counter-clockwise order.
    pub fn boundary(&self) -> Vec<(String, Vec<Node>)> {
        let last = self.points.len() - 1;
        if self.goursat {
            let m = self.points[0].len() - 1;
            vec![
                ("data, right-going".into(), (0..=last).map(|i| (i, 0)).collect()),
                ("far, left-going".into(), (0..=m).map(|j| (last, j)).collect()),
                ("far, right-going".into(), (0..=last).rev().map(|i| (i, m)).collect()),
                ("data, left-going".into(), (0..=m).rev().map(|j| (0, j)).collect()),
            ]
        } else {
            let mut pieces = vec![
                ("data line".to_string(), (0..self.points[0].len()).map(|i| (0, i)).collect::<Vec<_>>()),
                ("right characteristic".into(), (0..=last).map(|k| (k, self.points[k].len() - 1)).collect()),
            ];
            if self.points[last].len() > 1 {
                pieces.push(("top".into(), (0..self.points[last].len()).rev().map(|i| (last, i)).collect()));
            }
            pieces.push(("left characteristic".into(), (0..=last).rev().map(|k| (k, 0)).collect()));
            pieces
        }
    }

    /// Piecewise-linear value at `(x, t)` if the point is covered.
    pub fn sample(&self, x: f64, t: f64) -> Option<[f64; 2]> {
        for tri in self.triangles() {
            let [a, b, c] = tri.map(|n| self.point(n));
            let (minx, maxx) = (a.x.min(b.x).min(c.x), a.x.max(b.x).max(c.x));
            let (mint, maxt) = (a.t.min(b.t).min(c.t), a.t.max(b.t).max(c.t));
            if x < minx - 1e-12 || x > maxx + 1e-12 || t < mint - 1e-12 || t > maxt + 1e-12 {
                continue;
            }
            let det = (b.x - a.x) * (c.t - a.t) - (c.x - a.x) * (b.t - a.t);
            let l1 = ((x - a.x) * (c.t - a.t) - (c.x - a.x) * (t - a.t)) / det;
            let l2 = ((b.x - a.x) * (t - a.t) - (x - a.x) * (b.t - a.t)) / det;
            let l0 = 1.0 - l1 - l2;
            if l0 >= -1e-12 && l1 >= -1e-12 && l2 >= -1e-12 {
                return Some(std::array::from_fn(|q| l0 * a.u[q] + l1 * b.u[q] + l2 * c.u[q]));
            }
        }
        None
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,t,v,w,u\n");
        for row in &self.points {
            for p in row {
                out.push_str(&format!("{},{},{},{},{}\n", p.x, p.t, p.u[0], p.u[1], p.recon));
            }
        }
        out
    }
}

/// Slopes `dt/dx` of the two characteristic families, right-going first.
fn speeds(p: &PointData, floor: f64, at: (f64, f64)) -> Result<[f64; 2]> {
    let [l, m, n] = p.lmn();
    let disc = m * m - l * n;
    if disc <= 0.0 || n.abs() < 1e-300 {
        return Err(Error::GridCollapse(format!("no real characteristics at ({}, {})", at.0, at.1)));
    }
    let r = disc.sqrt();
    let (a, b) = ((-m + r) / n, (-m - r) / n);
    let (right, left) = if a > b { (a, b) } else { (b, a) };
    if !(right > 0.0 && left < 0.0) {
        return Err(Error::GridCollapse(format!("t = const is not space-like at ({}, {})", at.0, at.1)));
    }
    if right.min(-left) < floor {
        return Err(Error::GridCollapse(format!("characteristic speed below floor at ({}, {})", at.0, at.1)));
    }
    Ok([right, left])
}

/// Left null vector `ℓ` of `A¹τ - A²` and `r = A¹ℓ`.
fn compatibility(p: &PointData, tau: f64) -> ([f64; 2], [f64; 2]) {
    let (a1, a2) = principal(p, 1.0);
    let c: Mat2 = std::array::from_fn(|r| std::array::from_fn(|q| a1[r][q] * tau - a2[r][q]));
    let cand1 = [c[1][0], -c[0][0]];
    let cand2 = [c[1][1], -c[0][1]];
    let l = if cand1[0].hypot(cand1[1]) >= cand2[0].hypot(cand2[1]) { cand1 } else { cand2 };
    let s = l[0].hypot(l[1]);
    let l = [l[0] / s, l[1] / s];
    (l, [a1[0][0] * l[0] + a1[0][1] * l[1], a1[1][0] * l[0] + a1[1][1] * l[1]])
}

fn mat_vec(m: &Mat2, u: [f64; 2]) -> [f64; 2] {
    [m[0][0] * u[0] + m[0][1] * u[1], m[1][0] * u[0] + m[1][1] * u[1]]
}

fn solve2(m: Mat2, r: [f64; 2]) -> Option<[f64; 2]> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let scale = m.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
    if det.abs() <= 1e-14 * scale * scale {
        return None;
    }
    Some([(r[0] * m[1][1] - m[0][1] * r[1]) / det, (m[0][0] * r[1] - r[0] * m[1][0]) / det])
}

struct Stepper<'a> {
    field: &'a SystemField,
    c: SolveControls,
}

impl Stepper<'_> {
    fn b(&self, p: &PointData, s: &LocalState, at: (f64, f64)) -> Result<Mat2> {
        let state = match self.c.coupling {
            Coupling::Linearized => LocalState::at_rest(),
            Coupling::Quasilinear => *s,
        };
        Ok(system_matrices(p, &state, 1.0, self.c.threshold, at)?.b)
    }

    fn finish(&self, p: &PointData, x: f64, t: f64, u: [f64; 2], u_x: [f64; 2], u_t: [f64; 2]) -> Result<CharPoint> {
        let n = p.forms[5];
        if u[1].abs() >= 0.5 * n.abs() {
            return Err(Error::Threshold { x, t, value: n + u[1], threshold: 0.5 * n.abs() });
        }
        let recon = reconstruct_u(p.lmn(), u[0], u[1], self.c.threshold)?;
        Ok(CharPoint { x, t, u, u_x, u_t, recon, gauss_defect: gauss_defect(p.lmn(), recon, u[0], u[1]) })
    }

    /// A point of the data line with `U_t` taken from the system itself.
    fn data_point(&self, x: f64, t: f64, u: [f64; 2], u_x: [f64; 2]) -> Result<CharPoint> {
        let p = self.field.eval(x, t)?;
        let (a1, _) = principal(&p, 1.0);
        let [l, _, n] = p.lmn();
        let mut u_t = [0.0; 2];
        for _ in 0..=self.c.sweeps {
            let s = LocalState { v: u[0], w: u[1], v_x: u_x[0], v_t: u_t[0], w_x: u_x[1], w_t: u_t[1] };
            let b = self.b(&p, &s, (x, t))?;
            let rhs = mat_vec(&a1, u_x);
            let bu = mat_vec(&b, u);
            u_t = [-(rhs[0] + bu[0]) / n, if l.abs() > 1e-300 { (rhs[1] + bu[1]) / l } else { 0.0 }];
        }
        self.finish(&p, x, t, u, u_x, u_t)
    }

    /// The point where the right-going characteristic through `a` meets the
    /// left-going one through `b`.
    fn step(&self, a: &CharPoint, b: &CharPoint) -> Result<CharPoint> {
        let floor = self.c.speed_floor;
        let pa = self.field.eval(a.x, a.t)?;
        let pb = self.field.eval(b.x, b.t)?;
        let sa = speeds(&pa, floor, (a.x, a.t))?[0];
        let sb = speeds(&pb, floor, (b.x, b.t))?[1];
        let (mut ma, mut mb) = (sa, sb);
        let (mut x, mut t) = (0.0, 0.0);
        for it in 0..=self.c.intersection_iterations {
            x = (b.t - a.t + ma * a.x - mb * b.x) / (ma - mb);
            t = a.t + ma * (x - a.x);
            if it < self.c.intersection_iterations {
                let q = self.field.eval(x, t)?;
                let s = speeds(&q, floor, (x, t))?;
                // midpoint slopes keep the characteristic chords second order
                let mid_a = self.field.eval(0.5 * (a.x + x), 0.5 * (a.t + t))?;
                let mid_b = self.field.eval(0.5 * (b.x + x), 0.5 * (b.t + t))?;
                let sma = speeds(&mid_a, floor, (x, t))?[0];
                let smb = speeds(&mid_b, floor, (x, t))?[1];
                ma = (sa + 4.0 * sma + s[0]) / 6.0;
                mb = (sb + 4.0 * smb + s[1]) / 6.0;
            }
        }
        let q = self.field.eval(x, t)?;
        let mid_a = self.field.eval(0.5 * (a.x + x), 0.5 * (a.t + t))?;
        let mid_b = self.field.eval(0.5 * (b.x + x), 0.5 * (b.t + t))?;
        let (la, ra) = compatibility(&mid_a, speeds(&mid_a, floor, (x, t))?[0]);
        let (lb, rb) = compatibility(&mid_b, speeds(&mid_b, floor, (x, t))?[1]);
        let (dxa, dxb) = (x - a.x, x - b.x);
        let ba = self.b(&pa, &a.state(), (a.x, a.t))?;
        let bb = self.b(&pb, &b.state(), (b.x, b.t))?;
        let dot = |p: [f64; 2], q: [f64; 2]| p[0] * q[0] + p[1] * q[1];
        let rhs = [
            dot(ra, a.u) - 0.5 * dxa * dot(la, mat_vec(&ba, a.u)),
            dot(rb, b.u) - 0.5 * dxb * dot(lb, mat_vec(&bb, b.u)),
        ];
        let mut u = [0.5 * (a.u[0] + b.u[0]), 0.5 * (a.u[1] + b.u[1])];
        let mut u_x = [0.5 * (a.u_x[0] + b.u_x[0]), 0.5 * (a.u_x[1] + b.u_x[1])];
        let mut u_t = [0.5 * (a.u_t[0] + b.u_t[0]), 0.5 * (a.u_t[1] + b.u_t[1])];
        let sweeps = match self.c.coupling {
            Coupling::Linearized => 1,
            Coupling::Quasilinear => self.c.sweeps.max(1),
        };
        let geometry = [[a.x - x, a.t - t], [b.x - x, b.t - t]];
        for _ in 0..sweeps {
            let s = LocalState { v: u[0], w: u[1], v_x: u_x[0], v_t: u_t[0], w_x: u_x[1], w_t: u_t[1] };
            let bq = self.b(&q, &s, (x, t))?;
            // ℓᵀ B_Q U_Q = (B_Qᵀ ℓ) · U_Q
            let bt = |l: [f64; 2]| [bq[0][0] * l[0] + bq[1][0] * l[1], bq[0][1] * l[0] + bq[1][1] * l[1]];
            let (ta, tb) = (bt(la), bt(lb));
            let m = [
                [ra[0] + 0.5 * dxa * ta[0], ra[1] + 0.5 * dxa * ta[1]],
                [rb[0] + 0.5 * dxb * tb[0], rb[1] + 0.5 * dxb * tb[1]],
            ];
            u = solve2(m, rhs).ok_or_else(|| Error::GridCollapse(format!("characteristics merge at ({x}, {t})")))?;
            for c in 0..2 {
                let d = solve2(geometry, [a.u[c] - u[c], b.u[c] - u[c]]).unwrap_or([0.0; 2]);
                u_x[c] = d[0];
                u_t[c] = d[1];
            }
        }
        self.finish(&q, x, t, u, u_x, u_t)
    }

    /// Heun steps along one family from `start`, `n` steps of `dx`.
    fn data_curve(&self, start: [f64; 2], dx: f64, n: usize, right: bool, data: &Profile) -> Result<Vec<CharPoint>> {
        let family = usize::from(!right);
        let slope = |x: f64, t: f64| -> Result<f64> { Ok(speeds(&self.field.eval(x, t)?, self.c.speed_floor, (x, t))?[family]) };
        let (mut x, mut t) = (start[0], start[1]);
        let mut out = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let p = self.field.eval(x, t)?;
            out.push(self.finish(&p, x, t, data(x), [0.0; 2], [0.0; 2])?);
            if k < n {
                let k1 = slope(x, t)?;
                let k2 = slope(x + dx, t + dx * k1)?;
                t += 0.5 * dx * (k1 + k2);
                x += dx;
            }
        }
        Ok(out)
    }
}

fn stop_reason(e: &Error) -> Option<String> {
    match e {
        Error::GridCollapse(m) => Some(m.clone()),
        Error::OutsideDomain { u, v } => Some(format!("left the field at ({u}, {v})")),
        _ => None,
    }
}

pub fn solve(field: &SystemField, data: &DataSpec, controls: &SolveControls) -> Result<Solution> {
    let st = Stepper { field, c: *controls };
    let mut stopped = None;
    let (goursat, points) = match data {
        DataSpec::Cauchy { t0, x, n, data } => {
            let h = (x.1 - x.0) / *n as f64;
            let d = 1e-6 * (1.0 + x.0.abs().max(x.1.abs()));
            let first: Result<Vec<CharPoint>> = (0..=*n)
                .into_par_iter()
                .map(|i| {
                    let xi = x.0 + i as f64 * h;
                    let (p, m) = (data(xi + d), data(xi - d));
                    let u_x = [(p[0] - m[0]) / (2.0 * d), (p[1] - m[1]) / (2.0 * d)];
                    st.data_point(xi, *t0, data(xi), u_x)
                })
                .collect();
            let first = first.map_err(|e| match stop_reason(&e) {
                Some(m) => Error::GridCollapse(m),
                None => e,
            })?;
            let mut levels = vec![first];
            while levels.last().map_or(0, |l| l.len()) > 1 {
                let prev = levels.last().expect("non-empty");
                let next: Result<Vec<CharPoint>> =
                    prev.par_windows(2).map(|w| st.step(&w[0], &w[1])).collect();
                match next {
                    Ok(level) => levels.push(level),
                    Err(e) => match stop_reason(&e) {
                        Some(m) => {
                            stopped = Some(m);
                            break;
                        }
                        None => return Err(e),
                    },
                }
            }
            (false, levels)
        }
        DataSpec::Goursat { corner, h, n_right, n_left, right, left } => {
            let r = st.data_curve(*corner, *h, *n_right, true, right)?;
            let l = st.data_curve(*corner, -*h, *n_left, false, left)?;
            let mut rows: Vec<Vec<CharPoint>> = Vec::with_capacity(n_right + 1);
            rows.push(l);
            'outer: for i in 1..=*n_right {
                let mut row = vec![r[i]];
                for j in 1..=*n_left {
                    match st.step(&rows[i - 1][j], &row[j - 1]) {
                        Ok(p) => row.push(p),
                        Err(e) => match stop_reason(&e) {
                            Some(m) => {
                                stopped = Some(m);
                                break 'outer;
                            }
                            None => return Err(e),
                        },
                    }
                }
                rows.push(row);
            }
            (true, rows)
        }
    };
    let all = points.iter().flatten();
    let max_abs_u = all.clone().map(|p| p.u[0].abs().max(p.u[1].abs())).fold(0.0, f64::max);
    let max_gauss_defect = all.clone().map(|p| p.gauss_defect.abs()).fold(0.0, f64::max);
    let t_max = all.map(|p| p.t).fold(f64::NEG_INFINITY, f64::max);
    Ok(Solution {
        goursat,
        points,
        coupling: controls.coupling,
        complete: stopped.is_none(),
        stopped,
        max_abs_u,
        max_gauss_defect,
        t_max,
    })
}
