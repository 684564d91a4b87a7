//! Frames along curves and the rigidity invariant of a closed asymptotic
//! curve, computed both from intrinsic curvatures and from coordinates.

use serde::{Deserialize, Serialize};

use crate::curve::TracedCurve;
use crate::error::{Error, Result};
use crate::surface::{FormSource, FundamentalData, Orientation, ParamPoint};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveFrame {
    pub point: ParamPoint,
    /// Unit tangent `T`.
    pub tangent: [f64; 2],
    /// Unit normal `Z = J T`, positively oriented with `T`.
    pub normal: [f64; 2],
    pub geodesic_curvature: f64,
    /// `II(Z, Z)`.
    pub normal_curvature: f64,
    pub gaussian_curvature: f64,
    pub sqrt_e: f64,
}

/// Geodesic curvature of a curve through a point with unit velocity `d1`
/// and acceleration `d2` (derivatives in metric arclength).
pub fn geodesic_curvature(fd: &FundamentalData, d1: [f64; 2], d2: [f64; 2]) -> f64 {
    let g = &fd.christoffels;
    let (u1, v1) = (d1[0], d1[1]);
    fd.det_i.sqrt()
        * (g.g211 * u1.powi(3) + (2.0 * g.g212 - g.g111) * u1 * u1 * v1
            + (g.g222 - 2.0 * g.g112) * u1 * v1 * v1
            - g.g122 * v1.powi(3)
            + u1 * d2[1]
            - d2[0] * v1)
}

fn frame_from(fd: &FundamentalData, p: ParamPoint, tangent: [f64; 2], k_g: f64) -> CurveFrame {
    let normal = fd.perpendicular(tangent);
    CurveFrame {
        point: p,
        tangent,
        normal,
        geodesic_curvature: k_g,
        normal_curvature: fd.second_form(normal, normal),
        gaussian_curvature: fd.k,
        sqrt_e: fd.e.sqrt(),
    }
}

/// Frame of the coordinate line `t = const` through `p`, traversed with `x`
/// increasing.
pub fn coordinate_line_frame<S: FormSource + ?Sized>(s: &S, p: ParamPoint) -> Result<CurveFrame> {
    let fd = s.forms(p)?;
    let tangent = [1.0 / fd.e.sqrt(), 0.0];
    let k_g = fd.christoffels.g211 * fd.det_i.sqrt() / fd.e.powf(1.5);
    Ok(frame_from(&fd, p, tangent, k_g))
}

/// Frame at sample `index` of a polyline. The tangent comes from the
/// samples, the acceleration from centered differences of tangents in
/// arclength.
pub fn curve_frame<S: FormSource + ?Sized>(s: &S, curve: &TracedCurve, index: usize) -> Result<CurveFrame> {
    let n = curve.len();
    if index >= n || n < 3 {
        return Err(Error::Precondition("curve frame needs three samples".into()));
    }
    // a closed curve stores its start again as the final sample
    let ring = if curve.closed && curve.samples[0].point == curve.samples[n - 1].point { n - 1 } else { n };
    let period = curve.samples[n - 1].s;
    let (prev, next, ds) = if curve.closed {
        let prev = (index + ring - 1) % ring;
        let next = (index + 1) % ring;
        let mut ds = curve.samples[next].s - curve.samples[prev].s;
        if ds <= 0.0 {
            ds += period;
        }
        (prev, next, ds)
    } else if index == 0 {
        (0, 1, curve.samples[1].s - curve.samples[0].s)
    } else if index == n - 1 {
        (n - 2, n - 1, curve.samples[n - 1].s - curve.samples[n - 2].s)
    } else {
        (index - 1, index + 1, curve.samples[index + 1].s - curve.samples[index - 1].s)
    };
    let sample = curve.samples[index];
    let fd = s.forms(sample.point)?;
    let tangent = fd.normalize(sample.tangent);
    let (a, b) = (curve.samples[prev].tangent, curve.samples[next].tangent);
    let accel = [(b[0] - a[0]) / ds, (b[1] - a[1]) / ds];
    let k_g = geodesic_curvature(&fd, tangent, accel);
    Ok(frame_from(&fd, sample.point, tangent, k_g))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidityInvariant {
    /// `∫ k_g k_n |K|^{-1/2} ds`.
    pub intrinsic: f64,
    /// `∫ M^{-1} ∂_t L dx` over one period, when the curve is a coordinate line.
    pub coordinate: Option<f64>,
    /// Predicted ratio `coordinate / intrinsic`, which is `-sgn M`.
    pub sign: f64,
    /// `|coordinate - sign * intrinsic|`.
    pub discrepancy: Option<f64>,
    pub orientation: Orientation,
    pub samples: usize,
}

/// Relative size of `L` tolerated along a curve claimed to be asymptotic.
const ASYMPTOTIC_TOL: f64 = 1e-8;

/// `∂_t L` synthesized from the first Codazzi equation.
fn codazzi_l_t<S: FormSource + ?Sized>(s: &S, p: ParamPoint, fd: &FundamentalData) -> Result<f64> {
    let h = 1e-3;
    let m = |k: f64| s.forms(ParamPoint::new(p.u + k * h, p.v)).map(|f| f.m);
    let m_x = (8.0 * (m(1.0)? - m(-1.0)?) - (m(2.0)? - m(-2.0)?)) / (12.0 * h);
    let k = &fd.coeffs;
    Ok(m_x - k.a * fd.l - k.b * fd.m - k.c * fd.n)
}

/// Invariant of the closed coordinate line `t = t0` of an annular chart,
/// by the periodic trapezoid rule on `samples` nodes.
pub fn rigidity_invariant_line<S: FormSource + ?Sized>(s: &S, t0: f64, samples: usize) -> Result<RigidityInvariant> {
    let domain = s.domain();
    if !domain.u.periodic {
        return Err(Error::Precondition("the x axis must be periodic".into()));
    }
    let n = samples.max(8);
    let dx = domain.u.length() / n as f64;
    let (mut intrinsic, mut coordinate) = (0.0, 0.0);
    let mut m_sign = 0.0;
    for i in 0..n {
        let p = ParamPoint::new(domain.u.min + i as f64 * dx, t0);
        let fd = s.forms(p)?;
        let scale = fd.l.abs().max(fd.m.abs()).max(fd.n.abs());
        if fd.l.abs() > ASYMPTOTIC_TOL * scale.max(1.0) {
            return Err(Error::Precondition(format!("L = {:e} at x = {}: not an asymptotic curve", fd.l, p.u)));
        }
        if fd.m == 0.0 || fd.k >= 0.0 {
            return Err(Error::Precondition(format!("M vanishes at x = {}", p.u)));
        }
        if m_sign == 0.0 {
            m_sign = fd.m.signum();
        } else if m_sign != fd.m.signum() {
            return Err(Error::Precondition("M changes sign along the curve".into()));
        }
        let frame = coordinate_line_frame(s, p)?;
        intrinsic += frame.geodesic_curvature * frame.normal_curvature / fd.k.abs().sqrt() * frame.sqrt_e * dx;
        coordinate += codazzi_l_t(s, p, &fd)? / fd.m * dx;
    }
    let sign = -m_sign;
    Ok(RigidityInvariant {
        intrinsic,
        coordinate: Some(coordinate),
        sign,
        discrepancy: Some((coordinate - sign * intrinsic).abs()),
        orientation: s.orientation(),
        samples: n,
    })
}

/// Intrinsic side along an arbitrary closed polyline, by the trapezoid rule
/// in arclength. The coordinate side is filled in only when the curve is a
/// `t = const` line of the chart.
pub fn rigidity_invariant_curve<S: FormSource + ?Sized>(s: &S, curve: &TracedCurve) -> Result<RigidityInvariant> {
    if !curve.closed {
        return Err(Error::Precondition("the invariant needs a closed curve".into()));
    }
    let t0 = curve.samples[0].point.v;
    let straight = curve.samples.iter().all(|c| (c.point.v - t0).abs() < 1e-10);
    if straight && curve.winding[0] != 0 {
        return rigidity_invariant_line(s, t0, curve.len().max(64));
    }
    let n = curve.len();
    let mut values = Vec::with_capacity(n);
    let mut m_sign = 0.0;
    for i in 0..n {
        let frame = curve_frame(s, curve, i)?;
        if frame.gaussian_curvature >= 0.0 {
            return Err(Error::Precondition("curve leaves S-".into()));
        }
        let m = s.forms(frame.point)?.m;
        m_sign = if m_sign == 0.0 { m.signum() } else { m_sign };
        values.push(frame.geodesic_curvature * frame.normal_curvature / frame.gaussian_curvature.abs().sqrt());
    }
    let intrinsic: f64 = (1..n)
        .map(|i| 0.5 * (values[i] + values[i - 1]) * (curve.samples[i].s - curve.samples[i - 1].s))
        .sum();
    Ok(RigidityInvariant {
        intrinsic,
        coordinate: None,
        sign: -m_sign,
        discrepancy: None,
        orientation: s.orientation(),
        samples: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prescribed::PrescribedForms;
    use crate::surface::Surface;
    use std::f64::consts::PI;

    #[test]
    fn torus_parallel_geodesic_curvature() {
        // the parallel u = u0 is a t = const line after exchanging coordinates
        let s = crate::returnmap::Swapped(Surface::torus(2.0, 1.0).unwrap());
        for u0 in [0.3, 1.0, 2.5, 4.0] {
            let f = coordinate_line_frame(&s, ParamPoint::new(0.7, u0)).unwrap();
            // swapping reverses the orientation of the frame, hence the sign
            let expected = u0.sin() / (2.0 + u0.cos());
            assert!((f.geodesic_curvature - expected).abs() < 1e-13, "{u0}");
        }
    }

    #[test]
    fn annulus_invariant_is_minus_pi_on_both_sides() {
        let f = PrescribedForms::annulus(0.1);
        let r = rigidity_invariant_line(&f, 0.0, 256).unwrap();
        assert!((r.coordinate.unwrap() + PI).abs() < 1e-9);
        assert!((r.intrinsic + PI).abs() < 1e-9);
        assert!(r.discrepancy.unwrap() < 1e-9);
    }

    #[test]
    fn mirroring_flips_only_the_intrinsic_side() {
        let f = PrescribedForms::annulus(0.1);
        let a = rigidity_invariant_line(&f, 0.0, 128).unwrap();
        let b = rigidity_invariant_line(&f.mirrored(), 0.0, 128).unwrap();
        assert!((a.intrinsic + b.intrinsic).abs() < 1e-12);
        assert!((a.coordinate.unwrap() - b.coordinate.unwrap()).abs() < 1e-9);
        assert_eq!(a.sign, -b.sign);
    }

    #[test]
    fn non_asymptotic_line_is_rejected() {
        let f = PrescribedForms::annulus(0.1);
        assert!(matches!(rigidity_invariant_line(&f, 0.2, 64), Err(Error::Precondition(_))));
    }
}
