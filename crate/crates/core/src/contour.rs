//! Splitting the domain into `S+`, `S-` and the parabolic curves between them.

use std::collections::HashMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::{Termination, TracedCurve};
use crate::error::{Error, Result};
use crate::numeric::bracket_root;
use crate::surface::{Axis, FormSource, ParamPoint};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecompositionSpec {
    pub nu: usize,
    pub nv: usize,
    /// Transverse probe half-width in grid steps.
    pub collar_steps: f64,
    /// Probe samples on each side of the curve.
    pub probe_samples: usize,
    /// Probes per curve (evenly strided over the samples).
    pub probes_per_curve: usize,
}

impl Default for DecompositionSpec {
    fn default() -> Self {
        Self { nu: 256, nv: 256, collar_steps: 10.0, probe_samples: 20, probes_per_curve: 64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParabolicCurve {
    pub id: usize,
    /// The `S-` component this curve bounds.
    pub component: Option<usize>,
    pub curve: TracedCurve,
    pub min_abs_h: f64,
    /// Every transverse probe sees exactly one sign change of `K`.
    pub monotone: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegativeComponent {
    pub id: usize,
    pub boundary_curves: Vec<usize>,
    pub area: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionDecomposition {
    pub parabolic_curves: Vec<ParabolicCurve>,
    pub negative_components: Vec<NegativeComponent>,
    pub positive_area: f64,
    pub negative_area: f64,
    pub euler_characteristic: Option<i32>,
    pub nu: usize,
    pub nv: usize,
    /// Curves that could not be closed at this resolution.
    pub unclosed: Vec<usize>,
}

impl RegionDecomposition {
    /// `component,curve,u,v` rows for every parabolic curve sample.
    pub fn curves_csv(&self) -> String {
        let mut out = String::from("component,curve,u,v\n");
        for c in &self.parabolic_curves {
            let comp = c.component.map_or(String::from("-1"), |x| x.to_string());
            for s in &c.curve.samples {
                let _ = writeln!(out, "{comp},{},{:.12e},{:.12e}", c.id, s.point.u, s.point.v);
            }
        }
        out
    }
}

/// Node lattice over one axis: periodic axes use `n` nodes, bounded axes
/// `n + 1` with the end nodes nudged inside.
struct Lattice {
    axis: Axis,
    n: usize,
    h: f64,
}

impl Lattice {
    fn new(axis: Axis, n: usize) -> Self {
        Self { axis, n, h: axis.length() / n as f64 }
    }

    fn count(&self) -> usize {
        if self.axis.periodic {
            self.n
        } else {
            self.n + 1
        }
    }

    fn coord(&self, i: usize) -> f64 {
        let x = self.axis.min + i as f64 * self.h;
        if self.axis.periodic {
            x
        } else if i == 0 {
            x + 1e-3 * self.h
        } else if i == self.n {
            x - 1e-3 * self.h
        } else {
            x
        }
    }

    fn cells(&self) -> usize {
        self.n
    }

    fn next(&self, i: usize) -> usize {
        if self.axis.periodic {
            (i + 1) % self.n
        } else {
            i + 1
        }
    }

    /// Coordinate of `next(i)` continued past the period, for edge interpolation.
    fn next_coord(&self, i: usize) -> f64 {
        if self.axis.periodic {
            self.coord(i) + self.h
        } else {
            self.coord(i + 1)
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
enum Edge {
    /// From node (i, j) to (i + 1, j).
    AlongU(usize, usize),
    /// From node (i, j) to (i, j + 1).
    AlongV(usize, usize),
}

pub fn decompose_regions<S: FormSource + ?Sized>(
    s: &S,
    euler_characteristic: Option<i32>,
    spec: &DecompositionSpec,
) -> Result<RegionDecomposition> {
    if spec.nu < 16 || spec.nv < 16 {
        return Err(Error::Precondition("decomposition resolution must be at least 16".into()));
    }
    let domain = s.domain();
    let lu = Lattice::new(domain.u, spec.nu);
    let lv = Lattice::new(domain.v, spec.nv);
    let (mu, mv) = (lu.count(), lv.count());

    let rows: Vec<Result<Vec<(f64, f64)>>> = (0..mu)
        .into_par_iter()
        .map(|i| {
            (0..mv)
                .map(|j| {
                    let fd = s.forms(ParamPoint::new(lu.coord(i), lv.coord(j)))?;
                    Ok((fd.k, fd.det_i.sqrt()))
                })
                .collect()
        })
        .collect();
    let mut k = vec![0.0; mu * mv];
    let mut area_el = vec![0.0; mu * mv];
    for (i, row) in rows.into_iter().enumerate() {
        for (j, (kv, a)) in row?.into_iter().enumerate() {
            k[i * mv + j] = kv;
            area_el[i * mv + j] = a;
        }
    }
    let neg = |i: usize, j: usize| k[i * mv + j] < 0.0;

    // Areas by node weights (half weights on bounded end nodes).
    let weight = |l: &Lattice, i: usize| {
        if !l.axis.periodic && (i == 0 || i == l.n) {
            0.5 * l.h
        } else {
            l.h
        }
    };
    let (mut positive_area, mut negative_area) = (0.0, 0.0);
    for i in 0..mu {
        for j in 0..mv {
            let a = area_el[i * mv + j] * weight(&lu, i) * weight(&lv, j);
            if neg(i, j) {
                negative_area += a;
            } else {
                positive_area += a;
            }
        }
    }

    // Flood fill of S- nodes with periodic 4-neighbourhoods.
    let mut label = vec![usize::MAX; mu * mv];
    let mut components: Vec<NegativeComponent> = Vec::new();
    for start in 0..mu * mv {
        if label[start] != usize::MAX || !neg(start / mv, start % mv) {
            continue;
        }
        let id = components.len();
        let mut stack = vec![start];
        label[start] = id;
        let mut area = 0.0;
        while let Some(node) = stack.pop() {
            let (i, j) = (node / mv, node % mv);
            area += area_el[node] * weight(&lu, i) * weight(&lv, j);
            let mut nbrs = Vec::with_capacity(4);
            if lu.axis.periodic || i + 1 < mu {
                nbrs.push(((i + 1) % mu, j));
            }
            if lu.axis.periodic || i > 0 {
                nbrs.push(((i + mu - 1) % mu, j));
            }
            if lv.axis.periodic || j + 1 < mv {
                nbrs.push((i, (j + 1) % mv));
            }
            if lv.axis.periodic || j > 0 {
                nbrs.push((i, (j + mv - 1) % mv));
            }
            for (a, b) in nbrs {
                let idx = a * mv + b;
                if label[idx] == usize::MAX && neg(a, b) {
                    label[idx] = id;
                    stack.push(idx);
                }
            }
        }
        components.push(NegativeComponent { id, boundary_curves: Vec::new(), area });
    }

    // Crossing points on sign-changing edges.
    let edge_nodes = |e: Edge| match e {
        Edge::AlongU(i, j) => ((i, j), (lu.next(i), j)),
        Edge::AlongV(i, j) => ((i, j), (i, lv.next(j))),
    };
    let crossing = |e: Edge| -> Result<ParamPoint> {
        let ((i0, j0), (i1, j1)) = edge_nodes(e);
        let (k0, k1) = (k[i0 * mv + j0], k[i1 * mv + j1]);
        match e {
            Edge::AlongU(i, j) => {
                let v = lv.coord(j);
                let f = |u: f64| s.forms(ParamPoint::new(u, v)).map(|fd| fd.k);
                let u = bracket_root(f, lu.coord(i), lu.next_coord(i), k0, k1, 1e-14)?;
                domain.reduce(ParamPoint::new(u, v))
            }
            Edge::AlongV(i, j) => {
                let u = lu.coord(i);
                let f = |v: f64| s.forms(ParamPoint::new(u, v)).map(|fd| fd.k);
                let v = bracket_root(f, lv.coord(j), lv.next_coord(j), k0, k1, 1e-14)?;
                domain.reduce(ParamPoint::new(u, v))
            }
        }
    };
    let crosses = |e: Edge| {
        let ((i0, j0), (i1, j1)) = edge_nodes(e);
        neg(i0, j0) != neg(i1, j1)
    };

    // Marching squares: link crossed edges within each cell.
    let mut links: HashMap<Edge, Vec<Edge>> = HashMap::new();
    let mut link = |a: Edge, b: Edge| {
        links.entry(a).or_default().push(b);
        links.entry(b).or_default().push(a);
    };
    for i in 0..lu.cells() {
        for j in 0..lv.cells() {
            let e = [
                Edge::AlongU(i, j),
                Edge::AlongV(lu.next(i), j),
                Edge::AlongU(i, lv.next(j)),
                Edge::AlongV(i, j),
            ];
            let crossed: Vec<usize> = (0..4).filter(|&q| crosses(e[q])).collect();
            match crossed.len() {
                2 => link(e[crossed[0]], e[crossed[1]]),
                4 => {
                    let cu = lu.coord(i) + 0.5 * lu.h;
                    let cv = lv.coord(j) + 0.5 * lv.h;
                    let centre_neg = s.forms(ParamPoint::new(cu, cv))?.k < 0.0;
                    if centre_neg == neg(i, j) {
                        link(e[0], e[1]);
                        link(e[2], e[3]);
                    } else {
                        link(e[0], e[3]);
                        link(e[1], e[2]);
                    }
                }
                _ => {}
            }
        }
    }

    // Walk the link graph into polylines, open chains first.
    let mut edges: Vec<Edge> = links.keys().copied().collect();
    edges.sort_by_key(|e| match *e {
        Edge::AlongU(i, j) => (0, i, j),
        Edge::AlongV(i, j) => (1, i, j),
    });
    edges.sort_by_key(|e| links[e].len());
    let mut visited: HashMap<Edge, bool> = HashMap::new();
    let mut chains: Vec<(Vec<Edge>, bool)> = Vec::new();
    for &start in &edges {
        if visited.contains_key(&start) {
            continue;
        }
        let mut chain = vec![start];
        visited.insert(start, true);
        let mut prev: Option<Edge> = None;
        let mut cur = start;
        let closed;
        loop {
            let next = links[&cur]
                .iter()
                .copied()
                .find(|n| Some(*n) != prev && !visited.contains_key(n));
            match next {
                Some(n) => {
                    visited.insert(n, true);
                    chain.push(n);
                    prev = Some(cur);
                    cur = n;
                }
                None => {
                    closed = chain.len() > 2 && links[&cur].contains(&start);
                    break;
                }
            }
        }
        chains.push((chain, closed));
    }

    let collar = spec.collar_steps * lu.h.max(lv.h);
    let mut curves = Vec::with_capacity(chains.len());
    let mut unclosed = Vec::new();
    for (id, (chain, closed)) in chains.into_iter().enumerate() {
        let points = chain.iter().map(|&e| crossing(e)).collect::<Result<Vec<_>>>()?;
        let curve = TracedCurve::from_points(s, &points, closed, 0, Termination::Contour);

        let mut votes: HashMap<usize, usize> = HashMap::new();
        for &e in &chain {
            let ((i0, j0), (i1, j1)) = edge_nodes(e);
            let n = if neg(i0, j0) { i0 * mv + j0 } else { i1 * mv + j1 };
            *votes.entry(label[n]).or_default() += 1;
        }
        let component = votes.into_iter().max_by_key(|&(c, n)| (n, usize::MAX - c)).map(|(c, _)| c);
        if let Some(c) = component {
            components[c].boundary_curves.push(id);
        }

        let mut min_abs_h = f64::INFINITY;
        for smp in &curve.samples {
            min_abs_h = min_abs_h.min(s.forms(smp.point)?.h.abs());
        }
        let stride = (curve.len() / spec.probes_per_curve.max(1)).max(1);
        let monotone = curve
            .samples
            .iter()
            .step_by(stride)
            .map(|smp| probe_sign_changes(s, smp.point, smp.tangent, collar, spec.probe_samples))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .all(|n| n == 1);
        if !closed {
            unclosed.push(id);
        }
        curves.push(ParabolicCurve { id, component, curve, min_abs_h, monotone });
    }

    Ok(RegionDecomposition {
        parabolic_curves: curves,
        negative_components: components,
        positive_area,
        negative_area,
        euler_characteristic,
        nu: spec.nu,
        nv: spec.nv,
        unclosed,
    })
}

/// Sign changes of `K` along the parameter-space normal of a curve through `p`.
fn probe_sign_changes<S: FormSource + ?Sized>(
    s: &S,
    p: ParamPoint,
    tangent: [f64; 2],
    collar: f64,
    samples: usize,
) -> Result<usize> {
    let len = tangent[0].hypot(tangent[1]);
    let normal = [-tangent[1] / len, tangent[0] / len];
    let domain = s.domain();
    let mut changes = 0;
    let mut last: Option<bool> = None;
    for q in 0..=2 * samples {
        let tau = collar * (q as f64 / samples as f64 - 1.0);
        let pt = ParamPoint::new(p.u + tau * normal[0], p.v + tau * normal[1]);
        if !domain.contains(pt) {
            continue;
        }
        let negative = s.forms(pt)?.k < 0.0;
        if let Some(prev) = last {
            if prev != negative {
                changes += 1;
            }
        }
        last = Some(negative);
    }
    Ok(changes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::Surface;
    use std::f64::consts::PI;

    #[test]
    fn sphere_has_no_negative_region() {
        let s = Surface::sphere(1.0).unwrap();
        let d = decompose_regions(&s, Some(2), &DecompositionSpec { nu: 32, nv: 32, ..Default::default() })
            .unwrap();
        assert!(d.negative_components.is_empty());
        assert!(d.parabolic_curves.is_empty());
    }

    #[test]
    fn torus_has_one_band_with_two_circles() {
        let s = Surface::torus(2.0, 1.0).unwrap();
        let d = decompose_regions(&s, Some(0), &DecompositionSpec { nu: 64, nv: 64, ..Default::default() })
            .unwrap();
        assert_eq!(d.negative_components.len(), 1);
        assert_eq!(d.negative_components[0].boundary_curves.len(), 2);
        assert_eq!(d.parabolic_curves.len(), 2);
        for c in &d.parabolic_curves {
            assert!(c.curve.closed);
            assert_eq!(c.curve.winding, [0, 1]);
            assert!(c.monotone);
            assert!((c.min_abs_h - 0.5).abs() < 1e-9, "{}", c.min_abs_h);
            for smp in &c.curve.samples {
                let off = (smp.point.u - PI / 2.0).abs().min((smp.point.u - 3.0 * PI / 2.0).abs());
                assert!(off < 1e-12);
            }
        }
        assert!(d.unclosed.is_empty());
    }
}
