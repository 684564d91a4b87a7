//! Surface integrals over the parameter domain and the tightness report.
//!
//! The inner `u` axis is integrated cell by cell with Gauss-Legendre; a cell
//! whose end values of `K` differ in sign is split at the located root so the
//! sign-restricted integrands stay smooth on each piece. The outer `v` axis
//! uses the trapezoid rule when periodic and Gauss-Legendre otherwise. Lines
//! are evaluated in parallel and summed in index order.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{bracket_root, gauss_legendre};
use crate::surface::{Axis, FormSource, FundamentalData, ParamPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    Whole,
    /// `K > 0`
    Positive,
    /// `K < 0`
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InterfacePolicy {
    /// Split straddling cells at the located zero of `K`.
    RootSplit,
    /// Bisect straddling cells `levels` times, assigning sub-cells by their
    /// midpoint sign.
    Subdivide { levels: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub nu: usize,
    pub nv: usize,
    /// Gauss points per cell (or per split piece).
    pub order: usize,
    pub interface: InterfacePolicy,
    pub tolerance: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            nu: 256,
            nv: 256,
            order: 4,
            interface: InterfacePolicy::RootSplit,
            tolerance: 1e-6,
        }
    }
}

impl QuadratureSpec {
    pub fn with_resolution(n: usize) -> Self {
        Self { nu: n, nv: n, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nu < 16 || self.nv < 16 {
            return Err(Error::Precondition(format!(
                "quadrature resolution must be at least 16 per axis, got {}x{}",
                self.nu, self.nv
            )));
        }
        if self.order == 0 {
            return Err(Error::Precondition("quadrature order must be positive".into()));
        }
        Ok(())
    }

    fn halved(&self) -> Self {
        Self { nu: (self.nu / 2).max(1), nv: (self.nv / 2).max(1), ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quadrature {
    pub value: f64,
    /// `|I(n) - I(n/2)|`
    pub error_estimate: f64,
    pub nu: usize,
    pub nv: usize,
}

/// Integrals of one integrand split by the sign of `K`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Split {
    positive: f64,
    negative: f64,
    zero: f64,
}

impl Split {
    fn region(&self, r: Region) -> f64 {
        match r {
            Region::Whole => self.positive + self.negative + self.zero,
            Region::Positive => self.positive,
            Region::Negative => self.negative,
        }
    }

    fn add(&mut self, sign: f64, v: f64) {
        if sign > 0.0 {
            self.positive += v;
        } else if sign < 0.0 {
            self.negative += v;
        } else {
            self.zero += v;
        }
    }
}

type Integrand<'a> = dyn Fn(&FundamentalData) -> f64 + Sync + 'a;

fn spacing(axis: &Axis, n: usize) -> f64 {
    axis.length() / n as f64
}

/// `K` at a node, nudged into the cell when the node itself is degenerate
/// (the poles of a sphere chart, for instance).
fn node_curvature<S: FormSource + ?Sized>(s: &S, u: f64, v: f64, inward: f64) -> Result<f64> {
    match s.forms(ParamPoint::new(u, v)) {
        Ok(fd) => Ok(fd.k),
        Err(Error::DegenerateMetric { .. }) => Ok(s.forms(ParamPoint::new(u + inward, v))?.k),
        Err(e) => Err(e),
    }
}

struct LineRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl LineRule {
    fn new(order: usize) -> Self {
        let (nodes, weights) = gauss_legendre(order);
        Self { nodes, weights }
    }

    fn integrate<S: FormSource + ?Sized>(
        &self,
        s: &S,
        f: &Integrand<'_>,
        v: f64,
        a: f64,
        b: f64,
        sign: f64,
        acc: &mut Split,
    ) -> Result<()> {
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            let fd = s.forms(ParamPoint::new(mid + half * x, v))?;
            acc.add(sign, w * half * f(&fd) * fd.det_i.sqrt());
        }
        Ok(())
    }
}

fn integrate_line<S: FormSource + ?Sized>(
    s: &S,
    f: &Integrand<'_>,
    v: f64,
    spec: &QuadratureSpec,
    rule: &LineRule,
    split_sign: bool,
) -> Result<Split> {
    let axis = s.domain().u;
    let h = spacing(&axis, spec.nu);
    let mut acc = Split::default();
    if !split_sign {
        for i in 0..spec.nu {
            let a = axis.min + i as f64 * h;
            rule.integrate(s, f, v, a, a + h, 1.0, &mut acc)?;
        }
        return Ok(acc);
    }
    let inward = 1e-3 * h;
    let mut ks = Vec::with_capacity(spec.nu + 1);
    for i in 0..=spec.nu {
        let u = axis.min + i as f64 * h;
        let nudge = if i == 0 { inward } else if i == spec.nu { -inward } else { 0.0 };
        ks.push(node_curvature(s, u, v, nudge)?);
    }
    for i in 0..spec.nu {
        let a = axis.min + i as f64 * h;
        let b = a + h;
        let (ka, kb) = (ks[i], ks[i + 1]);
        if ka.signum() == kb.signum() || ka == 0.0 || kb == 0.0 {
            let sign = if ka != 0.0 { ka.signum() } else { kb.signum() };
            rule.integrate(s, f, v, a, b, sign, &mut acc)?;
            continue;
        }
        match spec.interface {
            InterfacePolicy::RootSplit => {
                let k_at = |u: f64| s.forms(ParamPoint::new(u, v)).map(|fd| fd.k);
                let root = bracket_root(k_at, a, b, ka, kb, 1e-15 * (1.0 + b.abs()))?;
                rule.integrate(s, f, v, a, root, ka.signum(), &mut acc)?;
                rule.integrate(s, f, v, root, b, kb.signum(), &mut acc)?;
            }
            InterfacePolicy::Subdivide { levels } => {
                let pieces = 1usize << levels;
                let hp = h / pieces as f64;
                for k in 0..pieces {
                    let (pa, pb) = (a + k as f64 * hp, a + (k + 1) as f64 * hp);
                    let km = s.forms(ParamPoint::new(0.5 * (pa + pb), v))?.k;
                    rule.integrate(s, f, v, pa, pb, km.signum(), &mut acc)?;
                }
            }
        }
    }
    Ok(acc)
}

fn integrate_split<S: FormSource + ?Sized>(
    s: &S,
    f: &Integrand<'_>,
    spec: &QuadratureSpec,
    split_sign: bool,
) -> Result<Split> {
    let vaxis = s.domain().v;
    let rule = LineRule::new(spec.order);
    let hv = spacing(&vaxis, spec.nv);
    let lines: Vec<(f64, f64)> = if vaxis.periodic {
        (0..spec.nv).map(|j| (vaxis.min + j as f64 * hv, hv)).collect()
    } else {
        (0..spec.nv)
            .flat_map(|j| {
                let mid = vaxis.min + (j as f64 + 0.5) * hv;
                rule.nodes
                    .iter()
                    .zip(&rule.weights)
                    .map(move |(x, w)| (mid + 0.5 * hv * x, 0.5 * hv * w))
                    .collect::<Vec<_>>()
            })
            .collect()
    };
    let per_line: Vec<Result<Split>> = lines
        .par_iter()
        .map(|&(v, _)| integrate_line(s, f, v, spec, &rule, split_sign))
        .collect();
    let mut total = Split::default();
    for ((_, w), line) in lines.iter().zip(per_line) {
        let line = line?;
        total.positive += w * line.positive;
        total.negative += w * line.negative;
        total.zero += w * line.zero;
    }
    Ok(total)
}

/// `∫ f dA` over `region`, with an error estimate from the half-resolution rule.
pub fn surface_integral<S: FormSource + ?Sized>(
    s: &S,
    integrand: &Integrand<'_>,
    region: Region,
    spec: &QuadratureSpec,
) -> Result<Quadrature> {
    spec.validate()?;
    let split = region != Region::Whole;
    let fine = integrate_split(s, integrand, spec, split)?.region(region);
    let coarse = integrate_split(s, integrand, &spec.halved(), split)?.region(region);
    let estimate = (fine - coarse).abs();
    if !fine.is_finite() {
        return Err(Error::NonConvergence { estimate: f64::INFINITY, tolerance: spec.tolerance });
    }
    Ok(Quadrature { value: fine, error_estimate: estimate, nu: spec.nu, nv: spec.nv })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TightnessReport {
    pub tight: bool,
    /// `∫_{S+} K dA`
    pub positive_curvature: f64,
    /// `∫ |K| dA`
    pub total_absolute: f64,
    /// `∫ K dA`
    pub total_curvature: f64,
    pub euler_characteristic: Option<i32>,
    /// `∫ K dA - 2πχ`, when `χ` is known.
    pub gauss_bonnet_defect: Option<f64>,
    /// `2π(4 - χ)`, the lower bound for total absolute curvature.
    pub absolute_bound: Option<f64>,
    pub error_estimates: [f64; 3],
    pub tolerance: f64,
    pub nu: usize,
    pub nv: usize,
}

pub fn tightness_report<S: FormSource + ?Sized>(
    s: &S,
    euler_characteristic: Option<i32>,
    spec: &QuadratureSpec,
) -> Result<TightnessReport> {
    spec.validate()?;
    let k = |fd: &FundamentalData| fd.k;
    let fine = integrate_split(s, &k, spec, true)?;
    let coarse = integrate_split(s, &k, &spec.halved(), true)?;
    let absolute = |x: &Split| x.positive - x.negative + x.zero.abs();
    let positive = fine.region(Region::Positive);
    let total = fine.region(Region::Whole);
    let total_absolute = absolute(&fine);
    let error_estimates = [
        (positive - coarse.region(Region::Positive)).abs(),
        (total_absolute - absolute(&coarse)).abs(),
        (total - coarse.region(Region::Whole)).abs(),
    ];
    if !(positive.is_finite() && total_absolute.is_finite()) {
        return Err(Error::NonConvergence { estimate: f64::INFINITY, tolerance: spec.tolerance });
    }
    Ok(TightnessReport {
        tight: (positive - 4.0 * PI).abs() < spec.tolerance,
        positive_curvature: positive,
        total_absolute,
        total_curvature: total,
        euler_characteristic,
        gauss_bonnet_defect: euler_characteristic.map(|chi| total - 2.0 * PI * chi as f64),
        absolute_bound: euler_characteristic.map(|chi| 2.0 * PI * (4 - chi) as f64),
        error_estimates,
        tolerance: spec.tolerance,
        nu: spec.nu,
        nv: spec.nv,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::Surface;

    #[test]
    fn sphere_total_curvature_is_four_pi() {
        let s = Surface::sphere(1.0).unwrap();
        let q = surface_integral(&s, &|fd: &FundamentalData| fd.k, Region::Whole, &QuadratureSpec::with_resolution(32))
            .unwrap();
        assert!((q.value - 4.0 * PI).abs() < 1e-8, "{}", q.value);
    }

    #[test]
    fn torus_area_matches_closed_form() {
        let s = Surface::torus(2.0, 1.0).unwrap();
        let q = surface_integral(&s, &|_: &FundamentalData| 1.0, Region::Whole, &QuadratureSpec::with_resolution(32))
            .unwrap();
        assert!((q.value - 4.0 * PI * PI * 2.0).abs() < 1e-10);
    }

    #[test]
    fn coarse_resolution_is_rejected() {
        let s = Surface::torus(2.0, 1.0).unwrap();
        let spec = QuadratureSpec::with_resolution(8);
        assert!(tightness_report(&s, Some(0), &spec).is_err());
    }

    #[test]
    fn torus_negative_part_is_minus_four_pi() {
        let s = Surface::torus(2.0, 1.0).unwrap();
        let q = surface_integral(&s, &|fd: &FundamentalData| fd.k, Region::Negative, &QuadratureSpec::with_resolution(64))
            .unwrap();
        assert!((q.value + 4.0 * PI).abs() < 1e-9, "{}", q.value);
    }
}
