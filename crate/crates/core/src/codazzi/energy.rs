//! Discrete form of the energy identity
//! `∬ Ū*((𝓑+𝓑*)/2)Ū + ∮ ½Ū*(A¹ν₁ + A²ν₂)Ū = 0` on a solved mesh.

use serde::{Deserialize, Serialize};

use super::solver::{Node, Solution};
use super::symmetrizer::calligraphic_b;
use super::{boundary_flux, principal_derivatives, system_matrices, Coupling, LocalState, Mat2, Symmetrizer, SystemField};
use crate::error::Result;

/// The weighted norm `∬ q (t - t_ref)^e |Ū|²` bounded by the interior term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedNorm {
    pub q: f64,
    pub exponent: i32,
    pub t_ref: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub interior: f64,
    pub boundary: Vec<(String, f64)>,
    pub residual: f64,
    /// `|interior| + Σ|boundary pieces|`, the size the residual is judged against.
    pub scale: f64,
    pub mesh_size: f64,
    pub bound: f64,
    pub min_eig: f64,
    pub weighted: Option<f64>,
    pub margin: Option<f64>,
    pub passed: bool,
}

struct Vertex {
    ubar: [f64; 2],
    a1: Mat2,
    a2: Mat2,
    density: f64,
    min_eig: f64,
}

fn quad(m: &Mat2, u: [f64; 2]) -> f64 {
    u[0] * (m[0][0] * u[0] + m[0][1] * u[1]) + u[1] * (m[1][0] * u[0] + m[1][1] * u[1])
}

/// Audits the identity on the mesh of `sol` with weight `symm`; the residual
/// must stay below `bound_constant · h² · scale`.
pub fn energy_audit(
    field: &SystemField,
    symm: &Symmetrizer,
    sol: &Solution,
    weighted: Option<WeightedNorm>,
    bound_constant: f64,
    threshold: f64,
) -> Result<EnergyLedger> {
    let mut verts: Vec<Vec<Vertex>> = Vec::with_capacity(sol.points.len());
    for row in &sol.points {
        let mut out = Vec::with_capacity(row.len());
        for p in row {
            let data = field.eval(p.x, p.t)?;
            let [lam, l_x, l_t] = symm.weight(field, p.x, p.t)?;
            let state = match sol.coupling {
                Coupling::Linearized => LocalState::at_rest(),
                Coupling::Quasilinear => p.state(),
            };
            let m = system_matrices(&data, &state, symm.sign, threshold, (p.x, p.t))?;
            let cb = calligraphic_b(&m.b, &m.a1, &m.a2, &principal_derivatives(&data, symm.sign), l_x, l_t);
            let e = (-lam).exp();
            let ubar = [e * p.u[0], e * p.u[1]];
            let sym = [[cb[0][0], 0.5 * (cb[0][1] + cb[1][0])], [0.5 * (cb[0][1] + cb[1][0]), cb[1][1]]];
            out.push(Vertex {
                ubar,
                a1: m.a1,
                a2: m.a2,
                density: quad(&sym, ubar),
                min_eig: crate::numeric::sym2_eigen(sym)[0],
            });
        }
        verts.push(out);
    }
    let v = |n: Node| &verts[n.0][n.1];

    let (mut interior, mut weighted_sum, mut mesh_size) = (0.0, 0.0, 0.0f64);
    for tri in sol.triangles() {
        let p = tri.map(|n| sol.point(n));
        let area = 0.5 * ((p[1].x - p[0].x) * (p[2].t - p[0].t) - (p[2].x - p[0].x) * (p[1].t - p[0].t)).abs();
        interior += area * tri.iter().map(|&n| v(n).density).sum::<f64>() / 3.0;
        if let Some(w) = weighted {
            let f = |k: usize| {
                let u = v(tri[k]).ubar;
                w.q * (p[k].t - w.t_ref).max(0.0).powi(w.exponent) * (u[0] * u[0] + u[1] * u[1])
            };
            weighted_sum += area * (f(0) + f(1) + f(2)) / 3.0;
        }
        for k in 0..3 {
            let (a, b) = (p[k], p[(k + 1) % 3]);
            mesh_size = mesh_size.max((b.x - a.x).hypot(b.t - a.t));
        }
    }

    let mut boundary = Vec::new();
    for (name, nodes) in sol.boundary() {
        let mut total = 0.0;
        for pair in nodes.windows(2) {
            let (a, b) = (sol.point(pair[0]), sol.point(pair[1]));
            // outward normal times length for counter-clockwise traversal
            let nu = [b.t - a.t, -(b.x - a.x)];
            let f = |n: Node| {
                let x = v(n);
                boundary_flux(&x.a1, &x.a2, nu, x.ubar)
            };
            total += 0.5 * (f(pair[0]) + f(pair[1]));
        }
        boundary.push((name, total));
    }
    let residual = interior + boundary.iter().map(|b| b.1).sum::<f64>();
    let scale = interior.abs() + boundary.iter().map(|b| b.1.abs()).sum::<f64>();
    let bound = bound_constant * mesh_size * mesh_size * scale;
    let min_eig = verts.iter().flatten().map(|x| x.min_eig).fold(f64::INFINITY, f64::min);
    Ok(EnergyLedger {
        interior,
        boundary,
        residual,
        scale,
        mesh_size,
        bound,
        min_eig,
        weighted: weighted.map(|_| weighted_sum),
        margin: weighted.map(|_| interior - weighted_sum),
        passed: residual.abs() <= bound,
    })
}
