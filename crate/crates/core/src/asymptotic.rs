//! Asymptotic directions and adaptive tracing of asymptotic curves.

use serde::{Deserialize, Serialize};

use crate::curve::{CurveSample, Termination, TracedCurve};
use crate::error::{Error, Result};
use crate::surface::{FormSource, FundamentalData, ParamPoint};

/// Unoriented null directions of the second fundamental form, each unit in
/// the first fundamental form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AsymptoticLines {
    None,
    /// Parabolic point: the single null line of a rank-one form.
    One([f64; 2]),
    /// Saddle point: family `+1` then family `-1`.
    Two([f64; 2], [f64; 2]),
}

/// Relative size of `|M^2 - LN|` below which a point counts as parabolic.
pub const PARABOLIC_TOL: f64 = 1e-13;

fn second_form_scale(fd: &FundamentalData) -> f64 {
    let ii = fd.l.abs().max(fd.m.abs()).max(fd.n.abs());
    let i = fd.e.abs().max(fd.g.abs());
    ii / i
}

/// Representative of the family-`sigma` line. Two algebraically equivalent
/// forms are available; the one with the larger components is used so the
/// line stays well defined where either form degenerates.
pub fn family_vector(fd: &FundamentalData, sigma: f64) -> Option<[f64; 2]> {
    let disc = fd.m * fd.m - fd.l * fd.n;
    if disc < 0.0 {
        return None;
    }
    let s = disc.sqrt();
    let y = [fd.n, -fd.m + sigma * s];
    let y2 = [-fd.m - sigma * s, fd.l];
    let (ny, ny2) = (y[0].hypot(y[1]), y2[0].hypot(y2[1]));
    let v = if ny >= ny2 { y } else { y2 };
    if v[0] == 0.0 && v[1] == 0.0 {
        None
    } else {
        Some(fd.normalize(v))
    }
}

pub fn asymptotic_directions(fd: &FundamentalData) -> Result<AsymptoticLines> {
    let scale = second_form_scale(fd);
    if scale <= 1e-14 {
        return Err(Error::UndefinedField { u: f64::NAN, v: f64::NAN });
    }
    let disc = fd.m * fd.m - fd.l * fd.n;
    let big = fd.l.abs().max(fd.m.abs()).max(fd.n.abs());
    if disc.abs() <= PARABOLIC_TOL * big * big {
        // rank-one form: kernel of the dominant row
        let d = if fd.l.abs() >= fd.n.abs() { [-fd.m, fd.l] } else { [fd.n, -fd.m] };
        return Ok(AsymptoticLines::One(fd.normalize(d)));
    }
    if disc < 0.0 {
        return Ok(AsymptoticLines::None);
    }
    let plus = family_vector(fd, 1.0).expect("saddle point");
    let minus = family_vector(fd, -1.0).expect("saddle point");
    Ok(AsymptoticLines::Two(plus, minus))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceControls {
    /// Exceeding this without a classification is an error.
    pub max_steps: usize,
    /// Reaching this ends the trace with `Termination::Budget`.
    pub max_length: f64,
    /// Local error tolerance per step (parameter units).
    pub tolerance: f64,
    pub initial_step: f64,
    pub max_step: f64,
    pub min_step: f64,
    pub closure_position: f64,
    pub closure_angle: f64,
    /// Successive monotone, contracting returns required to declare a spiral.
    pub spiral_returns: usize,
}

impl Default for TraceControls {
    fn default() -> Self {
        Self {
            max_steps: 200_000,
            max_length: 1e3,
            tolerance: 1e-11,
            initial_step: 1e-3,
            max_step: 0.05,
            min_step: 1e-13,
            closure_position: 1e-6,
            closure_angle: 1e-4,
            spiral_returns: 5,
        }
    }
}

/// Failure modes of a single field evaluation during a step.
enum Probe {
    Direction([f64; 2]),
    /// `K >= 0` at the stage point: the step left `S-`.
    LeftRegion,
    OutsideDomain,
}

struct Field<'a, S: ?Sized> {
    source: &'a S,
    sigma: f64,
}

impl<S: FormSource + ?Sized> Field<'_, S> {
    fn eval(&self, p: ParamPoint, reference: [f64; 2]) -> Result<Probe> {
        let fd = match self.source.forms(p) {
            Ok(fd) => fd,
            Err(Error::OutsideDomain { .. }) => return Ok(Probe::OutsideDomain),
            Err(e) => return Err(e),
        };
        if second_form_scale(&fd) <= 1e-14 {
            return Err(Error::UndefinedField { u: p.u, v: p.v });
        }
        if fd.k >= 0.0 {
            return Ok(Probe::LeftRegion);
        }
        let d = match family_vector(&fd, self.sigma) {
            Some(d) => d,
            None => return Ok(Probe::LeftRegion),
        };
        let dot = fd.first_form(d, reference);
        Ok(Probe::Direction(if dot < 0.0 { [-d[0], -d[1]] } else { d }))
    }
}

enum Step {
    Accepted { p: ParamPoint, d: [f64; 2], err: f64 },
    LeftRegion,
    OutsideDomain,
}

fn rk4<S: FormSource + ?Sized>(
    field: &Field<'_, S>,
    p: ParamPoint,
    d0: [f64; 2],
    h: f64,
) -> Result<std::result::Result<(ParamPoint, [f64; 2]), Step>> {
    let shift = |q: ParamPoint, k: [f64; 2], a: f64| ParamPoint::new(q.u + a * k[0], q.v + a * k[1]);
    let mut ks = [[0.0; 2]; 4];
    let offsets = [0.0, 0.5, 0.5, 1.0];
    let mut reference = d0;
    for i in 0..4 {
        let q = if i == 0 { p } else { shift(p, ks[i - 1], offsets[i] * h) };
        match field.eval(q, reference)? {
            Probe::Direction(d) => {
                ks[i] = d;
                reference = d;
            }
            Probe::LeftRegion => return Ok(Err(Step::LeftRegion)),
            Probe::OutsideDomain => return Ok(Err(Step::OutsideDomain)),
        }
    }
    let du = h / 6.0 * (ks[0][0] + 2.0 * ks[1][0] + 2.0 * ks[2][0] + ks[3][0]);
    let dv = h / 6.0 * (ks[0][1] + 2.0 * ks[1][1] + 2.0 * ks[2][1] + ks[3][1]);
    let q = ParamPoint::new(p.u + du, p.v + dv);
    match field.eval(q, ks[3])? {
        Probe::Direction(d) => Ok(Ok((q, d))),
        Probe::LeftRegion => Ok(Err(Step::LeftRegion)),
        Probe::OutsideDomain => Ok(Err(Step::OutsideDomain)),
    }
}

/// One step-doubling RK4 step of metric length `h`.
fn step<S: FormSource + ?Sized>(field: &Field<'_, S>, p: ParamPoint, d: [f64; 2], h: f64) -> Result<Step> {
    let full = match rk4(field, p, d, h)? {
        Ok(x) => x,
        Err(s) => return Ok(s),
    };
    let (mid, dm) = match rk4(field, p, d, 0.5 * h)? {
        Ok(x) => x,
        Err(s) => return Ok(s),
    };
    let (end, de) = match rk4(field, mid, dm, 0.5 * h)? {
        Ok(x) => x,
        Err(s) => return Ok(s),
    };
    let err = (end.u - full.0.u).hypot(end.v - full.0.v);
    Ok(Step::Accepted { p: end, d: de, err })
}

/// Moves a start point with `K >= 0` but within rounding of the parabolic
/// curve a tiny distance down the gradient of `K`.
/// Also returns the inward direction when a nudge was needed.
fn nudge_into_saddle<S: FormSource + ?Sized>(s: &S, p: ParamPoint) -> Result<(ParamPoint, Option<[f64; 2]>)> {
    let fd = s.forms(p)?;
    if fd.k < 0.0 {
        return Ok((p, None));
    }
    let scale = second_form_scale(&fd).powi(2);
    if fd.k > 1e-10 * scale.max(1e-300) {
        return Err(Error::Precondition(format!(
            "trace start ({}, {}) has K = {:e} > 0",
            p.u, p.v, fd.k
        )));
    }
    let h = 1e-6;
    let ku = (s.forms(ParamPoint::new(p.u + h, p.v))?.k - s.forms(ParamPoint::new(p.u - h, p.v))?.k) / (2.0 * h);
    let kv = (s.forms(ParamPoint::new(p.u, p.v + h))?.k - s.forms(ParamPoint::new(p.u, p.v - h))?.k) / (2.0 * h);
    let g = ku.hypot(kv);
    if g == 0.0 {
        return Err(Error::Precondition("K has a critical point at the trace start".into()));
    }
    let mut delta = 1e-14 * (1.0 + p.u.abs().max(p.v.abs()));
    while delta < 1e-6 {
        let q = ParamPoint::new(p.u - delta * ku / g, p.v - delta * kv / g);
        if s.forms(q)?.k < 0.0 {
            return Ok((q, Some([-ku / g, -kv / g])));
        }
        delta *= 4.0;
    }
    Err(Error::Precondition("could not step into S- from the trace start".into()))
}

fn canonical_orientation(d: [f64; 2]) -> [f64; 2] {
    if d[1] < 0.0 || (d[1] == 0.0 && d[0] < 0.0) {
        [-d[0], -d[1]]
    } else {
        d
    }
}

/// Angle in the metric between `a` and the unoriented line of `b`.
pub(crate) fn line_angle(fd: &FundamentalData, a: [f64; 2], b: [f64; 2]) -> f64 {
    let c = fd.first_form(a, b) / (fd.first_form(a, a) * fd.first_form(b, b)).sqrt();
    c.abs().min(1.0).acos()
}

/// Tangent of the level set `K = 0` through (or near) `p`, from the gradient.
pub(crate) fn parabolic_tangent<S: FormSource + ?Sized>(s: &S, p: ParamPoint) -> Result<[f64; 2]> {
    let h = 1e-6;
    let k = |du: f64, dv: f64| s.forms(ParamPoint::new(p.u + du, p.v + dv)).map(|fd| fd.k);
    let ku = (k(h, 0.0)? - k(-h, 0.0)?) / (2.0 * h);
    let kv = (k(0.0, h)? - k(0.0, -h)?) / (2.0 * h);
    Ok([-kv, ku])
}

/// Traces the family-`family` asymptotic curve from `start`. The initial
/// orientation has non-negative `v` component, or points into `S-` when the
/// start lies on a parabolic curve; `trace_oriented` takes an explicit hint.
pub fn trace<S: FormSource + ?Sized>(
    s: &S,
    start: ParamPoint,
    family: i8,
    controls: &TraceControls,
) -> Result<TracedCurve> {
    trace_oriented(s, start, family, None, controls)
}

pub fn trace_oriented<S: FormSource + ?Sized>(
    s: &S,
    start: ParamPoint,
    family: i8,
    direction_hint: Option<[f64; 2]>,
    controls: &TraceControls,
) -> Result<TracedCurve> {
    if family != 1 && family != -1 {
        return Err(Error::Precondition("family tag must be +1 or -1".into()));
    }
    let domain = s.domain();
    let start = domain.reduce(start)?;
    let (p0, inward) = nudge_into_saddle(s, start)?;
    let field = Field { source: s, sigma: family as f64 };
    let fd0 = s.forms(p0)?;
    let d_raw = family_vector(&fd0, family as f64)
        .ok_or_else(|| Error::Precondition("no asymptotic direction at the trace start".into()))?;
    let d0 = match direction_hint {
        Some(h) if fd0.first_form(d_raw, h) < 0.0 => [-d_raw[0], -d_raw[1]],
        Some(_) => d_raw,
        // from a parabolic point only one orientation enters S-
        None => match inward {
            Some(w) if d_raw[0] * w[0] + d_raw[1] * w[1] < 0.0 => [-d_raw[0], -d_raw[1]],
            Some(_) => d_raw,
            None => canonical_orientation(d_raw),
        },
    };

    let mut samples = vec![CurveSample { point: start, tangent: d0, s: 0.0 }];
    let mut ks = vec![fd0.k];
    let (mut p, mut d, mut arclen) = (p0, d0, 0.0);
    let mut h = controls.initial_step;
    let mut unwrapped = [0.0f64; 2];
    let mut returns: Vec<f64> = Vec::new();
    let transversal_u = domain.u.periodic;

    for _ in 0..controls.max_steps {
        if arclen >= controls.max_length {
            return Ok(finish(s, samples, false, unwrapped, family, Termination::Budget));
        }
        let outcome = step(&field, p, d, h)?;
        match outcome {
            Step::Accepted { p: q, d: dq, err } if err <= controls.tolerance || h <= controls.min_step => {
                let du = domain.u.delta(p.u, q.u);
                let dv = domain.v.delta(p.v, q.v);
                let q_reduced = domain.reduce(q)?;

                // transversal returns: crossings of the start's u (or v) line
                let (before, after) = if transversal_u {
                    (unwrapped[0], unwrapped[0] + du)
                } else {
                    (unwrapped[1], unwrapped[1] + dv)
                };
                let period = if transversal_u { domain.u.length() } else { domain.v.length() };
                if (transversal_u || domain.v.periodic) && (before / period).floor() != (after / period).floor() {
                    let edge = (before.max(after) / period).floor() * period;
                    let frac = (edge - before) / (after - before);
                    let other = if transversal_u {
                        p.v + frac * dv
                    } else {
                        p.u + frac * du
                    };
                    returns.push(other);
                }

                // closure: closest approach of the chord to the start point
                let to_start = [domain.u.delta(p.u, start.u), domain.v.delta(p.v, start.v)];
                let chord = [du, dv];
                let len2 = chord[0] * chord[0] + chord[1] * chord[1];
                let tau = ((to_start[0] * chord[0] + to_start[1] * chord[1]) / len2).clamp(0.0, 1.0);
                let gap = (to_start[0] - tau * chord[0]).hypot(to_start[1] - tau * chord[1]);
                if arclen > 100.0 * controls.closure_position && samples.len() > 4 && gap < controls.closure_position {
                    let fd = s.forms(start)?;
                    let angle = fd.first_form(d, d0) / (fd.first_form(d, d) * fd.first_form(d0, d0)).sqrt();
                    if angle.min(1.0).acos() < controls.closure_angle {
                        unwrapped[0] += tau * du;
                        unwrapped[1] += tau * dv;
                        let closing = arclen + tau * h;
                        samples.push(CurveSample { point: start, tangent: d0, s: closing });
                        return Ok(finish(s, samples, true, unwrapped, family, Termination::Closed));
                    }
                }

                unwrapped[0] += du;
                unwrapped[1] += dv;
                arclen += h;
                p = q_reduced;
                d = dq;
                let fd_here = s.forms(p)?;
                samples.push(CurveSample { point: p, tangent: d, s: arclen });
                ks.push(fd_here.k);
                if is_parabolic(&fd_here) {
                    return arrive(s, samples, &ks, p, d, arclen, unwrapped, family);
                }

                if let Some(limit) = spiral_limit(&returns, controls.spiral_returns) {
                    return Ok(finish(s, samples, false, unwrapped, family, Termination::Spiral { limit }));
                }
                let grow = if err > 0.0 { 0.9 * (controls.tolerance / err).powf(0.2) } else { 2.0 };
                h = (h * grow.clamp(0.2, 2.0)).clamp(controls.min_step, controls.max_step);
            }
            Step::Accepted { err, .. } => {
                let shrink = 0.9 * (controls.tolerance / err).powf(0.2);
                h = (h * shrink.clamp(0.1, 0.9)).max(controls.min_step);
            }
            Step::LeftRegion => {
                if h <= controls.min_step {
                    return arrive(s, samples, &ks, p, d, arclen, unwrapped, family);
                }
                h = (0.5 * h).max(controls.min_step);
            }
            Step::OutsideDomain => {
                if h <= controls.min_step {
                    return Ok(finish(s, samples, false, unwrapped, family, Termination::DomainEdge));
                }
                h = (0.5 * h).max(controls.min_step);
            }
        }
    }
    Err(Error::BudgetExhausted { steps: controls.max_steps })
}

pub(crate) fn is_parabolic(fd: &FundamentalData) -> bool {
    let big = fd.l.abs().max(fd.m.abs()).max(fd.n.abs());
    (fd.m * fd.m - fd.l * fd.n).abs() <= PARABOLIC_TOL * big * big
}

#[allow(clippy::too_many_arguments)]
fn arrive<S: FormSource + ?Sized>(
    s: &S,
    mut samples: Vec<CurveSample>,
    ks: &[f64],
    p: ParamPoint,
    d: [f64; 2],
    arclen: f64,
    mut unwrapped: [f64; 2],
    family: i8,
) -> Result<TracedCurve> {
    let (point, extra) = parabolic_vertex(&samples, ks);
    let point = s.domain().reduce(point).unwrap_or(p);
    unwrapped[0] += extra * d[0];
    unwrapped[1] += extra * d[1];
    let tangent_k = parabolic_tangent(s, point)?;
    let fd = s.forms(p)?;
    let tangency = line_angle(&fd, d, tangent_k);
    if extra > 0.0 {
        samples.push(CurveSample { point, tangent: d, s: arclen + extra });
    }
    Ok(finish(s, samples, false, unwrapped, family, Termination::Parabolic { tangency }))
}

/// Extrapolates to the point where the trace touches `K = 0`. Near a
/// tangential arrival the distance to the parabolic curve, and so `K`,
/// decays quadratically in the remaining arclength, making `sqrt(-K)` linear.
fn parabolic_vertex(samples: &[CurveSample], ks: &[f64]) -> (ParamPoint, f64) {
    let n = samples.len();
    let last = samples[n - 1];
    if n < 2 {
        return (last.point, 0.0);
    }
    let prev = samples[n - 2];
    let (r1, r0) = ((-ks[n - 1]).max(0.0).sqrt(), (-ks[n - 2]).max(0.0).sqrt());
    let ds = last.s - prev.s;
    let extra = if r0 > r1 { r1 * ds / (r0 - r1) } else { 0.0 };
    let extra = extra.min(10.0 * ds);
    let p = ParamPoint::new(last.point.u + extra * last.tangent[0], last.point.v + extra * last.tangent[1]);
    (p, extra)
}

/// Aitken limit once the last `needed` returns are monotone and contracting.
fn spiral_limit(returns: &[f64], needed: usize) -> Option<f64> {
    if needed < 3 || returns.len() < needed {
        return None;
    }
    let r = &returns[returns.len() - needed..];
    let diffs: Vec<f64> = r.windows(2).map(|w| w[1] - w[0]).collect();
    let same_sign = diffs.iter().all(|d| d.signum() == diffs[0].signum() && *d != 0.0);
    let contracting = diffs.windows(2).all(|w| w[1].abs() < w[0].abs());
    if !(same_sign && contracting) {
        return None;
    }
    let (d1, d2) = (diffs[diffs.len() - 2], diffs[diffs.len() - 1]);
    let q = d2 / d1;
    Some(r[r.len() - 1] + d2 * q / (1.0 - q))
}

fn finish<S: FormSource + ?Sized>(
    s: &S,
    samples: Vec<CurveSample>,
    closed: bool,
    unwrapped: [f64; 2],
    family: i8,
    termination: Termination,
) -> TracedCurve {
    let domain = s.domain();
    let turns = |periodic: bool, len: f64, x: f64| if periodic { (x / len).round() as i32 } else { 0 };
    TracedCurve {
        samples,
        closed,
        winding: [
            turns(domain.u.periodic, domain.u.length(), unwrapped[0]),
            turns(domain.v.periodic, domain.v.length(), unwrapped[1]),
        ],
        family,
        termination,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prescribed::PrescribedForms;
    use crate::surface::{fundamental_data, Surface};
    use std::f64::consts::PI;

    #[test]
    fn torus_inner_equator_slopes() {
        let s = Surface::torus(2.0, 1.0).unwrap();
        let fd = fundamental_data(&s, ParamPoint::new(PI, 0.0)).unwrap();
        match asymptotic_directions(&fd).unwrap() {
            AsymptoticLines::Two(a, b) => {
                let slopes = [a[1] / a[0], b[1] / b[0]];
                assert!((slopes[0].abs() - 1.0).abs() < 1e-14);
                assert!((slopes[0] + slopes[1]).abs() < 1e-14);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn parabolic_point_has_single_line_along_circle() {
        let s = Surface::torus(2.0, 1.0).unwrap();
        let fd = fundamental_data(&s, ParamPoint::new(PI / 2.0, 0.4)).unwrap();
        match asymptotic_directions(&fd).unwrap() {
            AsymptoticLines::One(d) => assert!(d[0].abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sphere_has_none_and_plane_is_undefined() {
        let s = Surface::sphere(1.0).unwrap();
        let fd = fundamental_data(&s, ParamPoint::new(0.2, 0.1)).unwrap();
        assert_eq!(asymptotic_directions(&fd).unwrap(), AsymptoticLines::None);
        let p = Surface::plane(1.0).unwrap();
        let fd = fundamental_data(&p, ParamPoint::new(0.2, 0.1)).unwrap();
        assert!(matches!(asymptotic_directions(&fd), Err(Error::UndefinedField { .. })));
    }

    #[test]
    fn start_in_positive_region_is_rejected() {
        let s = Surface::torus(2.0, 1.0).unwrap();
        let r = trace(&s, ParamPoint::new(0.0, 0.0), 1, &TraceControls::default());
        assert!(matches!(r, Err(Error::Precondition(_))));
    }

    #[test]
    fn identity_field_trace_closes() {
        let f = PrescribedForms::identity_field();
        let c = trace(&f, ParamPoint::new(0.0, 0.1), -1, &TraceControls::default()).unwrap();
        assert!(c.closed, "{:?}", c.termination);
        assert_eq!(c.winding, [1, 0]);
        assert!((c.length() - 2.0 * PI).abs() < 1e-6);
    }

    #[test]
    fn limit_cycle_trace_spirals() {
        let f = PrescribedForms::limit_cycle(0.05, 0.0);
        let c = trace_oriented(&f, ParamPoint::new(0.0, 0.2), -1, Some([1.0, 0.0]), &TraceControls::default())
            .unwrap();
        match c.termination {
            Termination::Spiral { limit } => assert!(limit.abs() < 1e-6, "{limit}"),
            other => panic!("{other:?}"),
        }
    }
}
