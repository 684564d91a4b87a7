//! Immersions given as a table of sampled positions.
//!
//! Text format: a header line
//! `# grid nu=<n> nv=<n> periodic_u=<0|1> periodic_v=<0|1> [chi=<int>]`
//! followed by `nu * nv` rows `u v x y z`, `u` being the slow index.
//! Jets come from tensor-product Lagrange interpolation on an 8x8 node window,
//! differentiated exactly, so third derivatives stay well above stencil noise.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::surface::{eval_jet, Axis, Domain, Jet, ParamPoint, Surface, Vec3};

const WINDOW: usize = 8;

#[derive(Debug, Clone)]
pub struct SampledGrid {
    pub nu: usize,
    pub nv: usize,
    pub u_axis: Axis,
    pub v_axis: Axis,
    pub euler_characteristic: Option<i32>,
    nodes: Vec<Vec3>,
}

fn spacing(axis: &Axis, n: usize) -> f64 {
    if axis.periodic {
        axis.length() / n as f64
    } else {
        axis.length() / (n - 1) as f64
    }
}

impl SampledGrid {
    pub fn new(
        u_axis: Axis,
        v_axis: Axis,
        nu: usize,
        nv: usize,
        euler_characteristic: Option<i32>,
        nodes: Vec<Vec3>,
    ) -> Result<Self> {
        if nu < WINDOW || nv < WINDOW {
            return Err(Error::GridTooCoarse(format!(
                "need at least {WINDOW} nodes per axis for third derivatives, got {nu}x{nv}"
            )));
        }
        if nodes.len() != nu * nv {
            return Err(Error::Parse(format!(
                "expected {} grid rows, found {}",
                nu * nv,
                nodes.len()
            )));
        }
        Ok(Self { nu, nv, u_axis, v_axis, euler_characteristic, nodes })
    }

    /// Samples an analytic surface at the nodes of a regular grid over its domain.
    pub fn sample(s: &Surface, nu: usize, nv: usize) -> Result<Self> {
        let (ua, va) = (s.domain.u, s.domain.v);
        let (du, dv) = (spacing(&ua, nu), spacing(&va, nv));
        let mut nodes = Vec::with_capacity(nu * nv);
        for i in 0..nu {
            for j in 0..nv {
                let p = ParamPoint::new(ua.min + i as f64 * du, va.min + j as f64 * dv);
                nodes.push(eval_jet(s, p)?.position);
            }
        }
        Self::new(ua, va, nu, nv, s.euler_characteristic, nodes)
    }

    pub fn domain(&self) -> Domain {
        Domain { u: self.u_axis, v: self.v_axis }
    }

    pub fn node(&self, i: usize, j: usize) -> Vec3 {
        self.nodes[i * self.nv + j]
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "# grid nu={} nv={} periodic_u={} periodic_v={}",
            self.nu, self.nv, self.u_axis.periodic as u8, self.v_axis.periodic as u8
        );
        if let Some(chi) = self.euler_characteristic {
            let _ = write!(out, " chi={chi}");
        }
        out.push('\n');
        let (du, dv) = (spacing(&self.u_axis, self.nu), spacing(&self.v_axis, self.nv));
        for i in 0..self.nu {
            for j in 0..self.nv {
                let x = self.node(i, j);
                let _ = writeln!(
                    out,
                    "{:.17e} {:.17e} {:.17e} {:.17e} {:.17e}",
                    self.u_axis.min + i as f64 * du,
                    self.v_axis.min + j as f64 * dv,
                    x[0],
                    x[1],
                    x[2]
                );
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::Parse("empty grid file".into()))?;
        let header = header
            .trim()
            .strip_prefix('#')
            .map(str::trim)
            .and_then(|h| h.strip_prefix("grid"))
            .ok_or_else(|| Error::Parse("grid header must start with `# grid`".into()))?;

        let (mut nu, mut nv, mut pu, mut pv, mut chi) = (None, None, None, None, None);
        for token in header.split_whitespace() {
            let (key, value) = token
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("bad header token `{token}`")))?;
            let bad = || Error::Parse(format!("bad value in header token `{token}`"));
            match key {
                "nu" => nu = Some(value.parse::<usize>().map_err(|_| bad())?),
                "nv" => nv = Some(value.parse::<usize>().map_err(|_| bad())?),
                "periodic_u" => pu = Some(value == "1"),
                "periodic_v" => pv = Some(value == "1"),
                "chi" => chi = Some(value.parse::<i32>().map_err(|_| bad())?),
                _ => return Err(Error::Parse(format!("unknown header key `{key}`"))),
            }
        }
        let missing = |k: &str| Error::Parse(format!("grid header lacks `{k}`"));
        let nu = nu.ok_or_else(|| missing("nu"))?;
        let nv = nv.ok_or_else(|| missing("nv"))?;
        let pu = pu.ok_or_else(|| missing("periodic_u"))?;
        let pv = pv.ok_or_else(|| missing("periodic_v"))?;

        let mut params = Vec::with_capacity(nu * nv);
        let mut nodes = Vec::with_capacity(nu * nv);
        for (lineno, line) in lines {
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Parse(format!("line {}: non-numeric entry", lineno + 1)))?;
            if vals.len() != 5 {
                return Err(Error::Parse(format!(
                    "line {}: expected `u v x y z`, found {} columns",
                    lineno + 1,
                    vals.len()
                )));
            }
            params.push((vals[0], vals[1]));
            nodes.push([vals[2], vals[3], vals[4]]);
        }
        if nodes.len() != nu * nv {
            return Err(Error::Parse(format!(
                "header declares {} nodes, file has {}",
                nu * nv,
                nodes.len()
            )));
        }
        if nu < 2 || nv < 2 {
            return Err(Error::GridTooCoarse(format!("{nu}x{nv} grid")));
        }
        let du = params[nv].0 - params[0].0;
        let dv = params[1].1 - params[0].1;
        if !(du > 0.0 && dv > 0.0) {
            return Err(Error::Parse("grid parameters must increase along rows".into()));
        }
        for (k, &(u, v)) in params.iter().enumerate() {
            let (i, j) = (k / nv, k % nv);
            let (eu, ev) = (params[0].0 + i as f64 * du, params[0].1 + j as f64 * dv);
            if (u - eu).abs() > 1e-9 * (1.0 + eu.abs()) || (v - ev).abs() > 1e-9 * (1.0 + ev.abs()) {
                return Err(Error::Parse(format!("node ({i}, {j}) is off the regular lattice")));
            }
        }
        let axis = |start: f64, step: f64, n: usize, periodic: bool| {
            if periodic {
                Axis::periodic(start, start + step * n as f64)
            } else {
                Axis::bounded(start, start + step * (n - 1) as f64)
            }
        };
        Self::new(
            axis(params[0].0, du, nu, pu),
            axis(params[0].1, dv, nv, pv),
            nu,
            nv,
            chi,
            nodes,
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Window indices and derivative weights (orders 0..=3) along one axis.
    fn stencil(axis: &Axis, n: usize, x: f64) -> ([usize; WINDOW], [[f64; WINDOW]; 4]) {
        let h = spacing(axis, n);
        let z = (x - axis.min) / h;
        let base = z.floor() as i64;
        let start = if axis.periodic {
            base - 3
        } else {
            (base - 3).clamp(0, (n - WINDOW) as i64)
        };
        let mut idx = [0usize; WINDOW];
        let mut offs = [0f64; WINDOW];
        for k in 0..WINDOW {
            let raw = start + k as i64;
            idx[k] = raw.rem_euclid(n as i64) as usize;
            offs[k] = raw as f64 - z;
        }
        (idx, lagrange_weights(&offs, h))
    }

    pub(crate) fn jet(&self, p: ParamPoint) -> Result<Jet> {
        let (iu, wu) = Self::stencil(&self.u_axis, self.nu, p.u);
        let (iv, wv) = Self::stencil(&self.v_axis, self.nv, p.v);
        let mix = |du: usize, dv: usize| {
            let mut acc = [0.0; 3];
            for (a, &i) in iu.iter().enumerate() {
                let mut row = [0.0; 3];
                for (b, &j) in iv.iter().enumerate() {
                    let x = self.node(i, j);
                    let w = wv[dv][b];
                    row[0] += w * x[0];
                    row[1] += w * x[1];
                    row[2] += w * x[2];
                }
                let w = wu[du][a];
                acc[0] += w * row[0];
                acc[1] += w * row[1];
                acc[2] += w * row[2];
            }
            acc
        };
        Ok(Jet {
            position: mix(0, 0),
            d1: [mix(1, 0), mix(0, 1)],
            d2: [mix(2, 0), mix(1, 1), mix(0, 2)],
            d3: [mix(3, 0), mix(2, 1), mix(1, 2), mix(0, 3)],
        })
    }
}

/// Derivatives of the Lagrange basis at the evaluation point. `offs[k]` is the
/// position of node `k` relative to that point, in units of `h`.
fn lagrange_weights(offs: &[f64; WINDOW], h: f64) -> [[f64; WINDOW]; 4] {
    let mut out = [[0.0; WINDOW]; 4];
    for a in 0..WINDOW {
        // polynomial in s (truncated at degree 3): prod_{b != a} (s - offs[b]) / (offs[a] - offs[b])
        let mut poly = [1.0, 0.0, 0.0, 0.0];
        let mut denom = 1.0;
        for b in (0..WINDOW).filter(|&b| b != a) {
            let c = -offs[b];
            for d in (0..4).rev() {
                poly[d] = poly[d] * c + if d > 0 { poly[d - 1] } else { 0.0 };
            }
            denom *= offs[a] - offs[b];
        }
        let mut fact = 1.0;
        let mut hp = 1.0;
        for d in 0..4 {
            if d > 0 {
                fact *= d as f64;
                hp *= h;
            }
            out[d][a] = poly[d] * fact / (denom * hp);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_reproduce_cubic() {
        let offs = [-3.3, -2.3, -1.3, -0.3, 0.7, 1.7, 2.7, 3.7];
        let h = 0.1;
        let w = lagrange_weights(&offs, h);
        // f(x) = x^3 with x measured from the evaluation point 0.5
        let x0 = 0.5;
        let f: Vec<f64> = offs.iter().map(|o| (x0 + o * h).powi(3)).collect();
        let apply = |d: usize| (0..WINDOW).map(|k| w[d][k] * f[k]).sum::<f64>();
        assert!((apply(0) - x0.powi(3)).abs() < 1e-12);
        assert!((apply(1) - 3.0 * x0 * x0).abs() < 1e-10);
        assert!((apply(2) - 6.0 * x0).abs() < 1e-8);
        assert!((apply(3) - 6.0).abs() < 1e-6);
    }

    #[test]
    fn too_coarse_grid_is_rejected() {
        let s = Surface::torus(2.0, 1.0).unwrap();
        assert!(matches!(SampledGrid::sample(&s, 6, 32), Err(Error::GridTooCoarse(_))));
    }

    #[test]
    fn text_round_trip() {
        let s = Surface::torus(2.0, 1.0).unwrap();
        let g = SampledGrid::sample(&s, 12, 10).unwrap();
        let back = SampledGrid::parse(&g.to_text()).unwrap();
        assert_eq!(back.nu, 12);
        assert_eq!(back.euler_characteristic, Some(0));
        assert!(back.u_axis.periodic && back.v_axis.periodic);
        assert!((back.u_axis.length() - 2.0 * std::f64::consts::PI).abs() < 1e-12);
        assert_eq!(back.node(3, 4), g.node(3, 4));
    }

    #[test]
    fn header_errors_are_reported() {
        assert!(SampledGrid::parse("u v x y z\n").is_err());
        assert!(SampledGrid::parse("# grid nu=2 nv=2 periodic_u=0\n").is_err());
    }
}
