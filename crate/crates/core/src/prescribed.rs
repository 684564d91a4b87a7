//! First and second fundamental forms prescribed on an annulus without an
//! underlying immersion.
//!
//! Coordinates are `(x, t)` stored in `ParamPoint { u: x, v: t }`, with `x`
//! periodic. Forms are closures over [`Taylor3`] so the connection coefficients
//! come from exact metric derivatives.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::surface::{
    Axis, Christoffels, Domain, FormSource, FundamentalData, Orientation, ParamPoint,
};
use crate::taylor::Taylor3;

/// `(x, t) -> [E, F, G, L, M, N]`
pub type FormFn = dyn Fn(Taylor3, Taylor3) -> [Taylor3; 6] + Send + Sync;

#[derive(Clone)]
pub struct PrescribedForms {
    pub name: String,
    pub domain: Domain,
    pub orientation: Orientation,
    forms: Arc<FormFn>,
}

impl fmt::Debug for PrescribedForms {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PrescribedForms")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("orientation", &self.orientation)
            .finish_non_exhaustive()
    }
}

fn annulus_domain(t_min: f64, t_max: f64) -> Domain {
    Domain { u: Axis::periodic(0.0, 2.0 * PI), v: Axis::bounded(t_min, t_max) }
}

impl PrescribedForms {
    pub fn new(
        name: impl Into<String>,
        domain: Domain,
        forms: impl Fn(Taylor3, Taylor3) -> [Taylor3; 6] + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            domain,
            orientation: Orientation::Standard,
            forms: Arc::new(forms),
        }
    }

    /// `E = 1 + t(1 + sin x)`, `F = 0`, `G = 1`, `M = -1`, `N = 1` and
    /// `L = t(1 + sin x)/2 - delta t^2`. The linear part of `L` is the value
    /// forced by the first Codazzi equation along `t = 0`; `delta > 0` keeps
    /// `L` strictly signed off the curve where `1 + sin x` vanishes.
    pub fn annulus(delta: f64) -> Self {
        let c = |v: f64| Taylor3::constant(v);
        Self::new("annulus", annulus_domain(-0.4, 0.4), move |x, t| {
            let bump = x.sin() + 1.0;
            [
                t * bump + 1.0,
                c(0.0),
                c(1.0),
                t * bump * 0.5 - t * t * delta,
                c(-1.0),
                c(1.0),
            ]
        })
    }

    /// Euclidean metric with `L = 0`, `M = -1`, `N = 1`.
    pub fn flat_annulus() -> Self {
        let c = |v: f64| Taylor3::constant(v);
        Self::new("flat-annulus", annulus_domain(-0.4, 0.4), move |_, _| {
            [c(1.0), c(0.0), c(1.0), c(0.0), c(-1.0), c(1.0)]
        })
    }

    /// Euclidean metric with `N = 1`, `M = -(1 + g)/2`, `L = g`, so the
    /// asymptotic slopes are `dt/dx = 1` and `dt/dx = g(t)`. Closed
    /// asymptotic curves sit at the zeros of `g`.
    pub fn slope_field(
        name: impl Into<String>,
        t_min: f64,
        t_max: f64,
        g: impl Fn(Taylor3) -> Taylor3 + Send + Sync + 'static,
    ) -> Self {
        let c = |v: f64| Taylor3::constant(v);
        Self::new(name, annulus_domain(t_min, t_max), move |_, t| {
            let gt = g(t);
            [c(1.0), c(0.0), c(1.0), gt, (gt + 1.0) * -0.5, c(1.0)]
        })
    }

    /// Slope `g = -kappa (t - t_star)`: one attracting closed curve at `t_star`
    /// (repelling for `kappa < 0`).
    pub fn limit_cycle(kappa: f64, t_star: f64) -> Self {
        Self::slope_field("limit-cycle", t_star - 0.4, t_star + 0.4, move |t| {
            (t + -t_star) * -kappa
        })
    }

    /// Slope `g = -kappa (t - a)(t - b)`: two closed curves at `a < b`.
    pub fn two_cycles(kappa: f64, a: f64, b: f64) -> Self {
        let pad = 0.5 * (b - a);
        Self::slope_field("two-cycles", a - pad, b + pad, move |t| {
            (t + -a) * (t + -b) * -kappa
        })
    }

    /// `g = 0`: every `t = const` line is a closed asymptotic curve.
    pub fn identity_field() -> Self {
        Self::slope_field("identity-field", -0.4, 0.4, |t| t * 0.0)
    }

    /// Same data with the second fundamental form negated.
    pub fn mirrored(&self) -> Self {
        let mut out = self.clone();
        out.orientation = self.orientation.flipped();
        out
    }

    /// Reparametrizes by `(x, t) -> (-x, -t)`, which keeps `M` and reverses the
    /// sign of `t`-derivatives.
    pub fn rotated(&self) -> Self {
        let inner = self.forms.clone();
        let d = self.domain;
        let domain = Domain {
            u: d.u,
            v: Axis { min: -d.v.max, max: -d.v.min, periodic: d.v.periodic },
        };
        Self {
            name: format!("{}-rotated", self.name),
            domain,
            orientation: self.orientation,
            forms: Arc::new(move |x, t| inner(-x, -t)),
        }
    }

    fn taylor_forms(&self, p: ParamPoint) -> [Taylor3; 6] {
        (self.forms)(Taylor3::var_u(p.u), Taylor3::var_v(p.v))
    }

    /// `∂_t L` at a point, exact from the form closure.
    pub fn l_t(&self, p: ParamPoint) -> Result<f64> {
        let p = self.domain.reduce(p)?;
        Ok(self.orientation.sign() * self.taylor_forms(p)[3].derivative(0, 1))
    }
}

/// Christoffel symbols of a metric from `E, F, G` and their first derivatives.
pub(crate) fn christoffels_from_metric(e: Taylor3, f: Taylor3, g: Taylor3) -> Christoffels {
    let d = |x: Taylor3| [x.derivative(1, 0), x.derivative(0, 1)];
    christoffels_from_values([e.value(), f.value(), g.value()], [d(e), d(f), d(g)])
}

/// Christoffel symbols from `[E, F, G]` and `[[E_x, E_t], [F_x, F_t], [G_x, G_t]]`.
pub fn christoffels_from_values(first: [f64; 3], d: [[f64; 2]; 3]) -> Christoffels {
    let [ev, fv, gv] = first;
    let det = ev * gv - fv * fv;
    let ([e_u, e_v], [f_u, f_v], [g_u, g_v]) = (d[0], d[1], d[2]);
    let raise = |k1: f64, k2: f64| [(gv * k1 - fv * k2) / det, (ev * k2 - fv * k1) / det];
    let c11 = raise(0.5 * e_u, f_u - 0.5 * e_v);
    let c12 = raise(0.5 * e_v, 0.5 * g_u);
    let c22 = raise(f_v - 0.5 * g_u, 0.5 * g_v);
    Christoffels {
        g111: c11[0],
        g211: c11[1],
        g112: c12[0],
        g212: c12[1],
        g122: c22[0],
        g222: c22[1],
    }
}

impl FormSource for PrescribedForms {
    fn forms(&self, p: ParamPoint) -> Result<FundamentalData> {
        let p = self.domain.reduce(p)?;
        let [e, f, g, l, m, n] = self.taylor_forms(p);
        let chr = christoffels_from_metric(e, f, g);
        let s = self.orientation.sign();
        FundamentalData::from_forms(
            [e.value(), f.value(), g.value()],
            [s * l.value(), s * m.value(), s * n.value()],
            chr,
        )
        .map_err(|err| match err {
            Error::DegenerateMetric { det, .. } => Error::DegenerateMetric { u: p.u, v: p.v, det },
            other => other,
        })
    }

    fn domain(&self) -> Domain {
        self.domain
    }

    fn orientation(&self) -> Orientation {
        self.orientation
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn annulus_coefficients_on_the_curve() {
        let a = PrescribedForms::annulus(0.1);
        for &x in &[0.0, 0.7, 2.0, 4.5] {
            let fd = a.forms(ParamPoint::new(x, 0.0)).unwrap();
            let half = 0.5 * (1.0 + x.sin());
            assert!((fd.coeffs.a + half).abs() < 1e-14);
            assert!(fd.coeffs.b.abs() < 1e-14);
            assert!((fd.coeffs.c + half).abs() < 1e-14);
            assert_eq!(fd.l, 0.0);
            assert!((fd.k + 1.0).abs() < 1e-14);
            assert!((a.l_t(ParamPoint::new(x, 0.0)).unwrap() - half).abs() < 1e-14);
        }
    }

    #[test]
    fn mirrored_negates_second_form() {
        let a = PrescribedForms::annulus(0.1);
        let m = a.mirrored();
        let p = ParamPoint::new(1.0, 0.2);
        let (x, y) = (a.forms(p).unwrap(), m.forms(p).unwrap());
        assert_eq!((x.l, x.m, x.n), (-y.l, -y.m, -y.n));
        assert_eq!(x.k, y.k);
    }

    #[test]
    fn rotated_keeps_m_and_flips_l_slope() {
        let a = PrescribedForms::annulus(0.1).rotated();
        let fd = a.forms(ParamPoint::new(-PI / 2.0, 0.0)).unwrap();
        assert_eq!(fd.m, -1.0);
        assert!((a.l_t(ParamPoint::new(-PI / 2.0, 0.0)).unwrap() + 1.0).abs() < 1e-14);
    }

    #[test]
    fn slope_field_has_expected_asymptotic_slopes() {
        let s = PrescribedForms::limit_cycle(0.3, 0.1);
        let fd = s.forms(ParamPoint::new(0.4, 0.25)).unwrap();
        let g = -0.3 * (0.25 - 0.1);
        for lam in [1.0, g] {
            assert!((fd.l + 2.0 * fd.m * lam + fd.n * lam * lam).abs() < 1e-14);
        }
    }
}
