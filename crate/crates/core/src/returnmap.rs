//! First-return maps of an asymptotic family on an annular chart, their
//! fixed points (closed asymptotic curves) and the induced decomposition of
//! the annulus.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotic::{family_vector, is_parabolic};

/// Relative size of `M^2 - LN` at which a returning curve counts as having
/// reached the parabolic boundary. Curves arrive there tangentially, so the
/// last stretch is otherwise integrated with ever shrinking steps.
const EXIT_BAND: f64 = 1e-10;

fn near_parabolic(fd: &FundamentalData) -> bool {
    let big = fd.l.abs().max(fd.m.abs()).max(fd.n.abs());
    fd.m * fd.m - fd.l * fd.n <= EXIT_BAND * big * big
}
use crate::error::{Error, Result};
use crate::numeric::bracket_root;
use crate::surface::{
    Christoffels, CodazziCoeffs, Domain, FormSource, FundamentalData, Orientation, ParamPoint,
};

/// The same surface with the roles of the two parameters exchanged. Turns a
/// surface whose circles of interest run along `v` into an annular chart with
/// periodic first coordinate.
#[derive(Debug, Clone)]
pub struct Swapped<S>(pub S);

impl<S: FormSource> FormSource for Swapped<S> {
    fn forms(&self, p: ParamPoint) -> Result<FundamentalData> {
        let fd = self.0.forms(ParamPoint::new(p.v, p.u))?;
        let c = fd.christoffels;
        let g = Christoffels {
            g111: c.g222,
            g112: c.g212,
            g122: c.g211,
            g211: c.g122,
            g212: c.g112,
            g222: c.g111,
        };
        Ok(FundamentalData {
            e: fd.g,
            g: fd.e,
            l: fd.n,
            n: fd.l,
            christoffels: g,
            coeffs: CodazziCoeffs::from_christoffels(&g),
            ..fd
        })
    }

    fn domain(&self) -> Domain {
        let d = self.0.domain();
        Domain { u: d.v, v: d.u }
    }

    fn orientation(&self) -> Orientation {
        self.0.orientation().flipped()
    }
}

/// `dt/dx` of the family-`sigma` line, when it exists and is transverse to
/// the `x = const` lines.
pub fn family_slope(fd: &FundamentalData, sigma: f64) -> Option<f64> {
    if fd.k >= 0.0 || is_parabolic(fd) {
        return None;
    }
    let d = family_vector(fd, sigma)?;
    if d[0].abs() <= 1e-12 * d[1].abs() {
        return None;
    }
    Some(d[1] / d[0])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReturnControls {
    pub tolerance: f64,
    pub initial_step: f64,
    pub max_step: f64,
    pub min_step: f64,
    pub max_steps: usize,
}

impl Default for ReturnControls {
    fn default() -> Self {
        Self { tolerance: 1e-11, initial_step: 1e-2, max_step: 0.1, min_step: 1e-12, max_steps: 100_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReturnSample {
    pub t_in: f64,
    /// `None` when the curve left `S-` or the chart before returning.
    pub t_out: Option<f64>,
}

impl ReturnSample {
    pub fn displacement(&self) -> Option<f64> {
        self.t_out.map(|t| t - self.t_in)
    }
}

/// Follows the family-`sigma` curve from `(x0, t_in)` once around the
/// periodic `x` axis, with `x` as the independent variable.
pub fn first_return<S: FormSource + ?Sized>(
    s: &S,
    x0: f64,
    t_in: f64,
    sigma: f64,
    controls: &ReturnControls,
) -> Result<ReturnSample> {
    let domain = s.domain();
    if !domain.u.periodic {
        return Err(Error::Precondition("return maps need a periodic first coordinate".into()));
    }
    let slope = |x: f64, t: f64| -> Result<Option<f64>> {
        let p = match domain.reduce(ParamPoint::new(x, t)) {
            Ok(p) => p,
            Err(_) => return Ok(None),
        };
        match s.forms(p) {
            Ok(fd) => Ok(family_slope(&fd, sigma)),
            Err(Error::OutsideDomain { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    };
    let rk4 = |x: f64, t: f64, h: f64| -> Result<Option<f64>> {
        let Some(k1) = slope(x, t)? else { return Ok(None) };
        let Some(k2) = slope(x + 0.5 * h, t + 0.5 * h * k1)? else { return Ok(None) };
        let Some(k3) = slope(x + 0.5 * h, t + 0.5 * h * k2)? else { return Ok(None) };
        let Some(k4) = slope(x + h, t + h * k3)? else { return Ok(None) };
        Ok(Some(t + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)))
    };
    let end = x0 + domain.u.length();
    let (mut x, mut t, mut h) = (x0, t_in, controls.initial_step);
    let exited = ReturnSample { t_in, t_out: None };
    for _ in 0..controls.max_steps {
        if x >= end {
            return Ok(ReturnSample { t_in, t_out: Some(t) });
        }
        let h_try = h.min(end - x);
        let last = h_try == end - x;
        let full = rk4(x, t, h_try)?;
        let half = match rk4(x, t, 0.5 * h_try)? {
            Some(m) => rk4(x + 0.5 * h_try, m, 0.5 * h_try)?,
            None => None,
        };
        match (full, half) {
            (Some(a), Some(b)) => {
                let err = (a - b).abs();
                if err <= controls.tolerance || h_try <= controls.min_step {
                    x = if last { end } else { x + h_try };
                    t = b + (b - a) / 15.0;
                    let here = domain.reduce(ParamPoint::new(x, t)).and_then(|p| s.forms(p));
                    if here.map_or(true, |fd| near_parabolic(&fd)) {
                        return Ok(exited);
                    }
                    let grow = if err > 0.0 { 0.9 * (controls.tolerance / err).powf(0.2) } else { 2.0 };
                    h = (h_try * grow.clamp(0.2, 2.0)).clamp(controls.min_step, controls.max_step);
                } else {
                    let shrink = 0.9 * (controls.tolerance / err).powf(0.2);
                    h = (h_try * shrink.clamp(0.1, 0.9)).max(controls.min_step);
                }
            }
            _ => {
                if h_try <= controls.min_step {
                    return Ok(exited);
                }
                h = (0.5 * h_try).max(controls.min_step);
            }
        }
    }
    Err(Error::BudgetExhausted { steps: controls.max_steps })
}

pub fn return_map<S: FormSource + ?Sized>(
    s: &S,
    x0: f64,
    sigma: f64,
    t_samples: &[f64],
    controls: &ReturnControls,
) -> Result<Vec<ReturnSample>> {
    t_samples.par_iter().map(|&t| first_return(s, x0, t, sigma, controls)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stability {
    Attracting,
    Repelling,
    /// Multiplier within `1e-6` of one.
    Neutral,
}

/// A closed asymptotic curve `t = t*` found as a fixed point of the map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub t: f64,
    pub residual: f64,
    /// Derivative of the return map at `t`.
    pub multiplier: f64,
    pub stability: Stability,
}

/// Region between consecutive closed curves (or the chart edges).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Subannulus {
    pub t_lo: f64,
    pub t_hi: f64,
    /// Sign of `P(t) - t` inside the region; `0` if its curves leave `S-`.
    pub drift: i8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CylinderDecomposition {
    pub family: i8,
    pub transversal: f64,
    pub samples: Vec<ReturnSample>,
    pub closed_curves: Vec<FixedPoint>,
    pub regions: Vec<Subannulus>,
    /// Every sampled curve returned to its own start.
    pub degenerate: bool,
    /// Two fixed points closer than the root tolerance.
    pub unresolved: bool,
}

impl CylinderDecomposition {
    pub fn exited(&self) -> usize {
        self.samples.iter().filter(|s| s.t_out.is_none()).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecompositionControls {
    pub samples: usize,
    /// Displacement below which a sample counts as returning to itself.
    pub identity_tol: f64,
    pub root_tol: f64,
    pub returns: ReturnControls,
}

impl Default for DecompositionControls {
    fn default() -> Self {
        Self { samples: 64, identity_tol: 1e-10, root_tol: 1e-13, returns: ReturnControls::default() }
    }
}

/// Samples the return map across the `t` range of the chart, refines each
/// sign change of `P(t) - t` to a fixed point and splits the annulus there.
pub fn cylinder_decomposition<S: FormSource + ?Sized>(
    s: &S,
    x0: f64,
    family: i8,
    t_range: (f64, f64),
    controls: &DecompositionControls,
) -> Result<CylinderDecomposition> {
    let sigma = family as f64;
    let n = controls.samples.max(2);
    let (lo, hi) = t_range;
    if hi <= lo {
        return Err(Error::Precondition("empty transversal range".into()));
    }
    let ts: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * (i as f64 + 0.5) / n as f64).collect();
    let samples = return_map(s, x0, sigma, &ts, &controls.returns)?;

    let returned: Vec<&ReturnSample> = samples.iter().filter(|s| s.t_out.is_some()).collect();
    let degenerate = returned.len() == samples.len()
        && returned.iter().all(|s| s.displacement().unwrap().abs() <= controls.identity_tol);
    let mut decomposition = CylinderDecomposition {
        family,
        transversal: x0,
        samples: samples.clone(),
        closed_curves: Vec::new(),
        regions: Vec::new(),
        degenerate,
        unresolved: false,
    };
    if degenerate {
        return Ok(decomposition);
    }

    let residual = |t: f64| -> Result<f64> {
        first_return(s, x0, t, sigma, &controls.returns)?
            .displacement()
            .ok_or_else(|| Error::Precondition("fixed-point search left S-".into()))
    };
    let mut roots = Vec::new();
    for w in samples.windows(2) {
        let (Some(ra), Some(rb)) = (w[0].displacement(), w[1].displacement()) else {
            continue;
        };
        if ra == 0.0 {
            roots.push(w[0].t_in);
        } else if ra.signum() != rb.signum() && rb != 0.0 {
            roots.push(bracket_root(residual, w[0].t_in, w[1].t_in, ra, rb, controls.root_tol)?);
        }
    }
    if let Some(last) = samples.last() {
        if last.displacement() == Some(0.0) {
            roots.push(last.t_in);
        }
    }
    roots.sort_by(f64::total_cmp);
    decomposition.unresolved = roots.windows(2).any(|w| w[1] - w[0] <= 10.0 * controls.root_tol);

    for &t in &roots {
        let d = 1e-5 * (hi - lo);
        let up = first_return(s, x0, t + d, sigma, &controls.returns)?.t_out;
        let down = first_return(s, x0, t - d, sigma, &controls.returns)?.t_out;
        let multiplier = match (up, down) {
            (Some(a), Some(b)) => (a - b) / (2.0 * d),
            _ => f64::NAN,
        };
        let stability = if (multiplier - 1.0).abs() <= 1e-6 || multiplier.is_nan() {
            Stability::Neutral
        } else if multiplier.abs() < 1.0 {
            Stability::Attracting
        } else {
            Stability::Repelling
        };
        let r = residual(t).unwrap_or(f64::NAN);
        decomposition.closed_curves.push(FixedPoint { t, residual: r, multiplier, stability });
    }

    let mut edges = vec![lo];
    edges.extend(roots.iter().copied());
    edges.push(hi);
    for w in edges.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let drift = match first_return(s, x0, mid, sigma, &controls.returns)?.displacement() {
            Some(d) if d > 0.0 => 1,
            Some(d) if d < 0.0 => -1,
            _ => 0,
        };
        decomposition.regions.push(Subannulus { t_lo: w[0], t_hi: w[1], drift });
    }
    Ok(decomposition)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prescribed::PrescribedForms;
    use crate::surface::{fundamental_data, Surface};
    use std::f64::consts::PI;

    #[test]
    fn swapped_torus_keeps_curvature() {
        let s = Surface::torus(2.0, 1.0).unwrap();
        let w = Swapped(s.clone());
        let a = fundamental_data(&s, ParamPoint::new(2.0, 0.3)).unwrap();
        let b = w.forms(ParamPoint::new(0.3, 2.0)).unwrap();
        assert!((a.k - b.k).abs() < 1e-15);
        assert_eq!((a.e, a.l), (b.g, b.n));
        assert!(w.domain().u.periodic);
    }

    #[test]
    fn linear_contraction_return_is_exponential() {
        let (kappa, t_star) = (0.1, 0.05);
        let f = PrescribedForms::limit_cycle(kappa, t_star);
        let r = first_return(&f, 0.0, 0.25, -1.0, &ReturnControls::default()).unwrap();
        let expected = t_star + (0.25 - t_star) * (-2.0 * PI * kappa).exp();
        assert!((r.t_out.unwrap() - expected).abs() < 1e-11);
    }

    #[test]
    fn identity_field_is_degenerate() {
        let f = PrescribedForms::identity_field();
        let d = cylinder_decomposition(&f, 0.0, -1, (-0.3, 0.3), &DecompositionControls::default()).unwrap();
        assert!(d.degenerate);
        assert!(d.closed_curves.is_empty());
    }

    #[test]
    fn two_cycles_split_annulus_in_three() {
        let f = PrescribedForms::two_cycles(0.5, -0.15, 0.1);
        let d = cylinder_decomposition(&f, 0.0, -1, (-0.27, 0.22), &DecompositionControls::default()).unwrap();
        assert_eq!(d.closed_curves.len(), 2);
        assert!((d.closed_curves[0].t + 0.15).abs() < 1e-10);
        assert!((d.closed_curves[1].t - 0.1).abs() < 1e-10);
        assert_eq!(d.regions.len(), 3);
    }
}
