//! The linearized Gauss-Codazzi system `A¹U_x + A²U_t + BU = 0` for the
//! differences `U = (v, w)` of two second fundamental forms sharing a metric,
//! its exponential-weight symmetrizers, a characteristic-grid solver and the
//! discrete energy identity.

mod energy;
mod solver;
mod symmetrizer;

pub use energy::{energy_audit, EnergyLedger, WeightedNorm};
pub use solver::{solve, CharPoint, Coupling, DataSpec, Solution, SolveControls};
pub use symmetrizer::{
    build_symmetrizer, positivity_certificate, FluxCheck, PositivityReport, SearchControls, SearchStep,
    Symmetrizer, SymmetrizerKind,
};

use serde::{Deserialize, Serialize};

use crate::charts::Chart;
use crate::error::{Error, Result};
use crate::numeric::fd4;
use crate::prescribed::christoffels_from_values;
use crate::surface::{CodazziCoeffs, FormSource, ParamPoint};

pub type Mat2 = [[f64; 2]; 2];

/// Structured `(x, t)` grid. Periodic `x` axes hold `nx` nodes per period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldGrid {
    pub x0: f64,
    pub hx: f64,
    pub nx: usize,
    pub x_periodic: bool,
    pub t0: f64,
    pub ht: f64,
    pub nt: usize,
}

impl FieldGrid {
    /// Bounded grid with nodes on both ends of each range.
    pub fn bounded(x: (f64, f64), nx: usize, t: (f64, f64), nt: usize) -> Self {
        Self {
            x0: x.0,
            hx: (x.1 - x.0) / (nx - 1) as f64,
            nx,
            x_periodic: false,
            t0: t.0,
            ht: (t.1 - t.0) / (nt - 1) as f64,
            nt,
        }
    }

    pub fn periodic(x: (f64, f64), nx: usize, t: (f64, f64), nt: usize) -> Self {
        Self { hx: (x.1 - x.0) / nx as f64, x_periodic: true, ..Self::bounded(x, nx.max(2), t, nt) }
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.hx
    }

    pub fn t(&self, j: usize) -> f64 {
        self.t0 + j as f64 * self.ht
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.nt + j
    }

    pub fn len(&self) -> usize {
        self.nx * self.nt
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn x_period(&self) -> Option<f64> {
        self.x_periodic.then(|| self.hx * self.nx as f64)
    }
}

/// Base data at a point: `[E, F, G, L, M, N]`, the Codazzi coefficients and
/// `[L_x, M_x, N_x, L_t, M_t, N_t]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PointData {
    pub forms: [f64; 6],
    pub coeffs: CodazziCoeffs,
    pub derivs: [f64; 6],
}

impl PointData {
    pub fn lmn(&self) -> [f64; 3] {
        [self.forms[3], self.forms[4], self.forms[5]]
    }

    pub fn det_i(&self) -> f64 {
        self.forms[0] * self.forms[2] - self.forms[1] * self.forms[1]
    }
}

/// `U` and its first derivatives at a point.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LocalState {
    pub v: f64,
    pub w: f64,
    pub v_x: f64,
    pub v_t: f64,
    pub w_x: f64,
    pub w_t: f64,
}

impl LocalState {
    pub fn at_rest() -> Self {
        Self::default()
    }

    pub fn u(&self) -> [f64; 2] {
        [self.v, self.w]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemMatrices {
    pub a1: Mat2,
    pub a2: Mat2,
    pub b: Mat2,
}

/// `A¹` and `A²` of the symmetric principal part, multiplied by `sign`.
pub fn principal(p: &PointData, sign: f64) -> (Mat2, Mat2) {
    let [l, m, n] = p.lmn();
    (
        [[0.0, -sign * n], [-sign * n, 2.0 * sign * m]],
        [[sign * n, 0.0], [0.0, -sign * l]],
    )
}

/// `A¹_x` and `A²_t`, multiplied by `sign`.
pub fn principal_derivatives(p: &PointData, sign: f64) -> (Mat2, Mat2) {
    let [_, m_x, n_x, l_t, _, n_t] = p.derivs;
    (
        [[0.0, -sign * n_x], [-sign * n_x, 2.0 * sign * m_x]],
        [[sign * n_t, 0.0], [0.0, -sign * l_t]],
    )
}

/// Checks `N + w` against the threshold: same sign as `N` and at least
/// `threshold` in size.
pub fn denominator(p: &PointData, w: f64, threshold: f64, x: f64, t: f64) -> Result<f64> {
    let n = p.forms[5];
    let d = n + w;
    if d.abs() < threshold || d * n <= 0.0 {
        return Err(Error::Threshold { x, t, value: d, threshold });
    }
    Ok(d)
}

/// The matrices of the symmetric system at a point and state, multiplied by
/// `sign` (`-1` for the branch with `N < 0`).
pub fn system_matrices(p: &PointData, s: &LocalState, sign: f64, threshold: f64, at: (f64, f64)) -> Result<SystemMatrices> {
    let [l, m, _] = p.lmn();
    let k = &p.coeffs;
    let [_, _, _, l_t, m_t, n_t] = p.derivs;
    let d = denominator(p, s.w, threshold, at.0, at.1)?;
    let d_t = n_t + s.w_t;
    let md_t = m_t / d - m * d_t / (d * d);
    let ld_t = l_t / d - l * d_t / (d * d);
    let b11 = k.beta + k.alpha * s.v / d + 2.0 * k.alpha * m / d;
    let b12 = k.gamma - k.alpha * l / d;
    let b21 = k.b + 2.0 * s.v_t / d - d_t * s.v / (d * d) + 2.0 * md_t + 2.0 * k.a * m / d + k.a * s.v / d;
    let b22 = k.c - ld_t - k.a * l / d;
    let b = [
        [sign * d * b11, sign * (d * b12 + s.v_t - s.w_x)],
        [sign * (-2.0 * m * b11 + d * b21), sign * (-2.0 * m * b12 + d * b22 - s.v_x)],
    ];
    let (a1, a2) = principal(p, sign);
    Ok(SystemMatrices { a1, a2, b })
}

/// `u = L̄ - L` from the Gauss equation.
pub fn reconstruct_u(lmn: [f64; 3], v: f64, w: f64, threshold: f64) -> Result<f64> {
    let [l, m, n] = lmn;
    let d = n + w;
    if d.abs() < threshold || d * n <= 0.0 {
        return Err(Error::Threshold { x: f64::NAN, t: f64::NAN, value: d, threshold });
    }
    Ok((-l * w + 2.0 * m * v + v * v) / d)
}

/// `(L + u)(N + w) - (M + v)² - (LN - M²)`.
pub fn gauss_defect(lmn: [f64; 3], u: f64, v: f64, w: f64) -> f64 {
    let [l, m, n] = lmn;
    (l + u) * (n + w) - (m + v) * (m + v) - (l * n - m * m)
}

/// Boundary integrand `½ Uᵀ(A¹ν₁ + A²ν₂)U`.
pub fn boundary_flux(a1: &Mat2, a2: &Mat2, nu: [f64; 2], u: [f64; 2]) -> f64 {
    let q = |m: &Mat2| u[0] * (m[0][0] * u[0] + m[0][1] * u[1]) + u[1] * (m[1][0] * u[0] + m[1][1] * u[1]);
    0.5 * (nu[0] * q(a1) + nu[1] * q(a2))
}

/// Base data and coefficients on a structured grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemField {
    pub provenance: String,
    pub grid: FieldGrid,
    pub nodes: Vec<PointData>,
}

const STENCIL: usize = 4;

fn lagrange_weights(offset: f64) -> [f64; STENCIL] {
    // nodes at -1, 0, 1, 2 relative to the cell start
    let xs = [-1.0, 0.0, 1.0, 2.0];
    let mut w = [1.0; STENCIL];
    for a in 0..STENCIL {
        for b in 0..STENCIL {
            if a != b {
                w[a] *= (offset - xs[b]) / (xs[a] - xs[b]);
            }
        }
    }
    w
}

impl SystemField {
    /// Field from forms and coefficients given pointwise; derivatives are
    /// taken by differences on the grid.
    pub fn from_fn(
        provenance: impl Into<String>,
        grid: FieldGrid,
        f: impl Fn(f64, f64) -> Result<([f64; 6], CodazziCoeffs)> + Sync,
    ) -> Result<Self> {
        use rayon::prelude::*;
        let nodes: Result<Vec<PointData>> = (0..grid.len())
            .into_par_iter()
            .map(|k| {
                let (i, j) = (k / grid.nt, k % grid.nt);
                let (forms, coeffs) = f(grid.x(i), grid.t(j))?;
                Ok(PointData { forms, coeffs, derivs: [0.0; 6] })
            })
            .collect();
        let mut field = Self { provenance: provenance.into(), grid, nodes: nodes? };
        field.differentiate()?;
        Ok(field)
    }

    /// Field sampled from a form source, reading `(x, t)` as its `(u, v)`.
    pub fn from_source<S: FormSource + ?Sized>(s: &S, provenance: impl Into<String>, grid: FieldGrid) -> Result<Self> {
        Self::from_fn(provenance, grid, |x, t| {
            let fd = s.forms(ParamPoint::new(x, t))?;
            Ok(([fd.e, fd.f, fd.g, fd.l, fd.m, fd.n], fd.coeffs))
        })
    }

    /// Field on the nodes of a chart; Christoffel symbols come from
    /// differences of the chart's first form.
    pub fn from_chart(chart: &Chart) -> Result<Self> {
        let (nx, nt) = (chart.nx(), chart.nt());
        if nx < 5 || nt < 5 {
            return Err(Error::Precondition("charts need at least 5 nodes per axis".into()));
        }
        let grid = FieldGrid {
            x0: chart.x[0],
            hx: chart.x[1] - chart.x[0],
            nx,
            x_periodic: chart.x_period.is_some(),
            t0: chart.t[0],
            ht: chart.t[1] - chart.t[0],
            nt,
        };
        let mut nodes: Vec<PointData> = chart
            .forms
            .iter()
            .map(|&forms| PointData { forms, coeffs: CodazziCoeffs::default(), derivs: [0.0; 6] })
            .collect();
        for i in 0..nx {
            for j in 0..nt {
                let k = grid.index(i, j);
                let d = |c: usize| {
                    let fx = |m: isize| chart.forms[grid.index(m.rem_euclid(nx as isize) as usize, j)][c];
                    let ft = |m: isize| chart.forms[grid.index(i, m as usize)][c];
                    [fd4(&fx, i, nx, grid.hx, grid.x_periodic), fd4(&ft, j, nt, grid.ht, false)]
                };
                let f = chart.forms[k];
                let chr = christoffels_from_values([f[0], f[1], f[2]], [d(0), d(1), d(2)]);
                nodes[k].coeffs = CodazziCoeffs::from_christoffels(&chr);
            }
        }
        let provenance = format!("chart:{:?}", chart.kind);
        let mut field = Self { provenance, grid, nodes };
        field.differentiate()?;
        Ok(field)
    }

    fn differentiate(&mut self) -> Result<()> {
        let g = self.grid;
        if g.nx < 5 || g.nt < 5 {
            return Err(Error::Precondition("fields need at least 5 nodes per axis".into()));
        }
        let mut derivs = vec![[0.0; 6]; g.len()];
        for i in 0..g.nx {
            for j in 0..g.nt {
                let out = &mut derivs[g.index(i, j)];
                for c in 0..3 {
                    let fx = |m: isize| self.nodes[g.index(m.rem_euclid(g.nx as isize) as usize, j)].forms[3 + c];
                    let ft = |m: isize| self.nodes[g.index(i, m as usize)].forms[3 + c];
                    out[c] = fd4(&fx, i, g.nx, g.hx, g.x_periodic);
                    out[3 + c] = fd4(&ft, j, g.nt, g.ht, false);
                }
            }
        }
        for (node, d) in self.nodes.iter_mut().zip(derivs) {
            node.derivs = d;
        }
        Ok(())
    }

    pub fn node(&self, i: usize, j: usize) -> &PointData {
        &self.nodes[self.grid.index(i, j)]
    }

    /// Whether `(x, t)` lies in the grid (up to a periodic `x`).
    pub fn contains(&self, x: f64, t: f64) -> bool {
        let g = &self.grid;
        let t_ok = t >= g.t0 - 1e-12 && t <= g.t(g.nt - 1) + 1e-12;
        let x_ok = g.x_periodic || (x >= g.x0 - 1e-12 && x <= g.x(g.nx - 1) + 1e-12);
        t_ok && x_ok
    }

    /// Cubic interpolation of every stored quantity.
    pub fn eval(&self, x: f64, t: f64) -> Result<PointData> {
        if !self.contains(x, t) {
            return Err(Error::OutsideDomain { u: x, v: t });
        }
        let g = &self.grid;
        let (ix, wx) = axis_stencil((x - g.x0) / g.hx, g.nx, g.x_periodic);
        let (it, wt) = axis_stencil((t - g.t0) / g.ht, g.nt, false);
        let mut out = PointData::default();
        let mut coeffs = [0.0; 6];
        for a in 0..STENCIL {
            for b in 0..STENCIL {
                let w = wx[a] * wt[b];
                let p = &self.nodes[g.index(ix[a], it[b])];
                let k = &p.coeffs;
                let c = [k.a, k.b, k.c, k.alpha, k.beta, k.gamma];
                for q in 0..6 {
                    out.forms[q] += w * p.forms[q];
                    out.derivs[q] += w * p.derivs[q];
                    coeffs[q] += w * c[q];
                }
            }
        }
        out.coeffs = CodazziCoeffs {
            a: coeffs[0],
            b: coeffs[1],
            c: coeffs[2],
            alpha: coeffs[3],
            beta: coeffs[4],
            gamma: coeffs[5],
        };
        Ok(out)
    }

    /// Cubic interpolation of a scalar array stored on the grid, with its
    /// `x` and `t` derivatives.
    pub fn interp_scalar(&self, values: &[f64], x: f64, t: f64) -> Result<[f64; 3]> {
        if !self.contains(x, t) {
            return Err(Error::OutsideDomain { u: x, v: t });
        }
        let g = &self.grid;
        let (ix, wx) = axis_stencil((x - g.x0) / g.hx, g.nx, g.x_periodic);
        let (it, wt) = axis_stencil((t - g.t0) / g.ht, g.nt, false);
        let (dx, dt) = (axis_dweights((x - g.x0) / g.hx, g.nx, g.x_periodic), axis_dweights((t - g.t0) / g.ht, g.nt, false));
        let mut out = [0.0; 3];
        for a in 0..STENCIL {
            for b in 0..STENCIL {
                let v = values[g.index(ix[a], it[b])];
                out[0] += wx[a] * wt[b] * v;
                out[1] += dx[a] * wt[b] * v / g.hx;
                out[2] += wx[a] * dt[b] * v / g.ht;
            }
        }
        Ok(out)
    }

    /// Largest `|M|` relative to `max(|L|, |N|)`.
    pub fn relative_m(&self) -> f64 {
        let (mut m, mut scale) = (0.0f64, 0.0f64);
        for p in &self.nodes {
            m = m.max(p.forms[4].abs());
            scale = scale.max(p.forms[3].abs()).max(p.forms[5].abs());
        }
        m / scale.max(1e-300)
    }
}

/// Stencil start and clamped position for cubic interpolation at grid
/// coordinate `r`.
fn stencil_base(r: f64, n: usize, periodic: bool) -> (isize, f64) {
    let cell = r.floor();
    let mut base = cell as isize - 1;
    if !periodic {
        base = base.clamp(0, n as isize - STENCIL as isize);
    }
    (base, r - base as f64 - 1.0)
}

fn axis_stencil(r: f64, n: usize, periodic: bool) -> ([usize; STENCIL], [f64; STENCIL]) {
    let (base, offset) = stencil_base(r, n, periodic);
    let idx = std::array::from_fn(|a| (base + a as isize).rem_euclid(n as isize) as usize);
    (idx, lagrange_weights(offset))
}

fn axis_dweights(r: f64, n: usize, periodic: bool) -> [f64; STENCIL] {
    let (_, offset) = stencil_base(r, n, periodic);
    let h = 1e-6;
    let (p, m) = (lagrange_weights(offset + h), lagrange_weights(offset - h));
    std::array::from_fn(|a| (p[a] - m[a]) / (2.0 * h))
}

/// The wave field `L = -1, M = 0, N = 1` with vanishing coefficients, on
/// which the system reduces to `v_t = w_x, w_t = v_x`.
pub fn wave_field(grid: FieldGrid) -> Result<SystemField> {
    SystemField::from_fn("wave", grid, |_, _| Ok(([1.0, 0.0, 1.0, -1.0, 0.0, 1.0], CodazziCoeffs::default())))
}

/// Parabolic-boundary model `N = 1, M = 0, L = -t` (`r = 0`, `k = 1`), with
/// `c = 1` so that the first Codazzi equation holds and all other
/// coefficients zero.
pub fn collar_model(grid: FieldGrid) -> Result<SystemField> {
    SystemField::from_fn("collar-model", grid, |_, t| {
        Ok(([1.0, 0.0, 1.0, -t, 0.0, 1.0], CodazziCoeffs { c: 1.0, ..CodazziCoeffs::default() }))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn wave_matrices() {
        let f = wave_field(FieldGrid::bounded((0.0, 1.0), 9, (0.0, 1.0), 9)).unwrap();
        let m = system_matrices(f.node(3, 3), &LocalState::at_rest(), 1.0, 1e-9, (0.0, 0.0)).unwrap();
        assert_eq!(m.a1, [[0.0, -1.0], [-1.0, 0.0]]);
        assert_eq!(m.a2, [[1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(m.b, [[0.0; 2]; 2]);
    }

    #[test]
    fn reconstruction_formula() {
        assert_eq!(reconstruct_u([-1.0, 0.0, 1.0], 0.0, 0.0, 1e-9).unwrap(), 0.0);
        assert_eq!(reconstruct_u([-1.0, 0.0, 1.0], 1.0, 1.0, 1e-9).unwrap(), 1.0);
        assert!(reconstruct_u([-1.0, 0.0, 1.0], 0.0, -1.0, 1e-9).is_err());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10_000 {
            let lmn = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(0.5..2.0)];
            let (v, w) = (rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3));
            let u = reconstruct_u(lmn, v, w, 1e-9).unwrap();
            assert!(gauss_defect(lmn, u, v, w).abs() < 1e-12);
        }
    }

    #[test]
    fn interpolation_reproduces_cubics() {
        let g = FieldGrid::bounded((-1.0, 1.0), 11, (0.0, 2.0), 13);
        let f = SystemField::from_fn("cubic", g, |x, t| {
            Ok(([1.0, 0.0, 1.0, x * x * t - t * t * t, x, 2.0 + x * t], CodazziCoeffs::default()))
        })
        .unwrap();
        for &(x, t) in &[(0.13, 0.7), (-0.99, 1.95), (0.5, 0.01)] {
            let p = f.eval(x, t).unwrap();
            assert!((p.forms[3] - (x * x * t - t * t * t)).abs() < 1e-12);
            assert!((p.derivs[3] - (x * x - 3.0 * t * t)).abs() < 1e-10);
            assert!((p.derivs[2] - t).abs() < 1e-12);
        }
    }

    #[test]
    fn flux_vanishes_on_null_combination() {
        let (l, n) = (-0.7, 1.3);
        let p = PointData { forms: [1.0, 0.0, 1.0, l, 0.0, n], ..PointData::default() };
        let (a1, a2) = principal(&p, 1.0);
        let c = (-l / n).sqrt();
        let norm = (1.0 - l / n).sqrt();
        for side in [1.0, -1.0] {
            let nu = [side * c / norm, 1.0 / norm];
            let w = 0.4;
            let null = [side * c * w, w];
            assert!(boundary_flux(&a1, &a2, nu, null).abs() < 1e-15);
            let u = [0.3, -0.2];
            let square = 0.5 * (u[0] - side * c * u[1]).powi(2) * n * nu[1];
            assert!((boundary_flux(&a1, &a2, nu, u) - square).abs() < 1e-14);
        }
    }
}
