//! Parametric immersions and their pointwise curvature data.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::SampledGrid;
use crate::taylor::Taylor3;

pub type Vec3 = [f64; 3];

pub(crate) fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

/// A point of the parameter domain. Serves both the native `(u, v)` chart and
/// adapted `(x, t)` charts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamPoint {
    pub u: f64,
    pub v: f64,
}

impl ParamPoint {
    pub fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub periodic: bool,
}

impl Axis {
    pub fn periodic(min: f64, max: f64) -> Self {
        Self { min, max, periodic: true }
    }

    pub fn bounded(min: f64, max: f64) -> Self {
        Self { min, max, periodic: false }
    }

    pub fn length(&self) -> f64 {
        self.max - self.min
    }

    fn reduce(&self, x: f64) -> Option<f64> {
        if self.periodic {
            let span = self.length();
            let mut r = (x - self.min) % span;
            if r < 0.0 {
                r += span;
            }
            Some(self.min + r)
        } else {
            let slack = 1e-12 * (1.0 + self.length());
            if x < self.min - slack || x > self.max + slack {
                None
            } else {
                Some(x.clamp(self.min, self.max))
            }
        }
    }

    /// Signed shortest displacement from `a` to `b` on this axis.
    pub fn delta(&self, a: f64, b: f64) -> f64 {
        let d = b - a;
        if self.periodic {
            let span = self.length();
            d - span * (d / span).round()
        } else {
            d
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub u: Axis,
    pub v: Axis,
}

impl Domain {
    /// Reduces periodic coordinates; rejects points outside bounded axes.
    pub fn reduce(&self, p: ParamPoint) -> Result<ParamPoint> {
        match (self.u.reduce(p.u), self.v.reduce(p.v)) {
            (Some(u), Some(v)) => Ok(ParamPoint { u, v }),
            _ => Err(Error::OutsideDomain { u: p.u, v: p.v }),
        }
    }

    pub fn contains(&self, p: ParamPoint) -> bool {
        self.reduce(p).is_ok()
    }
}

/// Normal-direction convention. `Standard` is `X_u x X_v / |X_u x X_v|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Orientation {
    #[default]
    Standard,
    Flipped,
}

impl Orientation {
    pub fn sign(self) -> f64 {
        match self {
            Orientation::Standard => 1.0,
            Orientation::Flipped => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Orientation::Standard => Orientation::Flipped,
            Orientation::Flipped => Orientation::Standard,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Family {
    Sphere {
        radius: f64,
    },
    Torus {
        axis_radius: f64,
        tube_radius: f64,
    },
    /// Torus whose tube radius is modulated by `1 + amplitude cos(p u) cos(q v)`.
    PerturbedTorus {
        axis_radius: f64,
        tube_radius: f64,
        amplitude: f64,
        freq_u: i32,
        freq_v: i32,
    },
    /// Surface of revolution over the profile `z = s^3`, radius `axis_radius + s`.
    /// Gaussian curvature vanishes to third order across `s = 0`.
    CubicCollar {
        axis_radius: f64,
        half_width: f64,
    },
    /// Monge patch `z = (a u^2 + 2 b u v + c v^2) / 2`; all zero is the plane.
    Graph {
        a: f64,
        b: f64,
        c: f64,
        half_width: f64,
    },
    Sampled(Arc<SampledGrid>),
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Sphere { .. } => "sphere",
            Family::Torus { .. } => "torus",
            Family::PerturbedTorus { .. } => "perturbed-torus",
            Family::CubicCollar { .. } => "cubic-collar",
            Family::Graph { .. } => "graph",
            Family::Sampled(_) => "sampled-grid",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Surface {
    pub family: Family,
    pub domain: Domain,
    pub orientation: Orientation,
    /// Euler characteristic from family metadata (`None` for open patches).
    pub euler_characteristic: Option<i32>,
}

impl Surface {
    pub fn sphere(radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidSurface("sphere radius must be positive".into()));
        }
        Ok(Self {
            family: Family::Sphere { radius },
            domain: Domain {
                u: Axis::bounded(-PI / 2.0, PI / 2.0),
                v: Axis::periodic(0.0, 2.0 * PI),
            },
            orientation: Orientation::Standard,
            euler_characteristic: Some(2),
        })
    }

    pub fn torus(axis_radius: f64, tube_radius: f64) -> Result<Self> {
        Self::perturbed_torus(axis_radius, tube_radius, 0.0, 0, 0).map(|mut s| {
            s.family = Family::Torus { axis_radius, tube_radius };
            s
        })
    }

    pub fn perturbed_torus(
        axis_radius: f64,
        tube_radius: f64,
        amplitude: f64,
        freq_u: i32,
        freq_v: i32,
    ) -> Result<Self> {
        if !(tube_radius > 0.0) {
            return Err(Error::InvalidSurface("tube radius must be positive".into()));
        }
        if !(tube_radius < axis_radius) {
            return Err(Error::InvalidSurface(
                "tube radius must be < axis radius".into(),
            ));
        }
        if tube_radius * (1.0 + amplitude.abs()) >= axis_radius || amplitude.abs() >= 1.0 {
            return Err(Error::InvalidSurface(
                "perturbation amplitude too large for an immersion".into(),
            ));
        }
        Ok(Self {
            family: Family::PerturbedTorus {
                axis_radius,
                tube_radius,
                amplitude,
                freq_u,
                freq_v,
            },
            domain: Domain {
                u: Axis::periodic(0.0, 2.0 * PI),
                v: Axis::periodic(0.0, 2.0 * PI),
            },
            orientation: Orientation::Standard,
            euler_characteristic: Some(0),
        })
    }

    pub fn cubic_collar(axis_radius: f64, half_width: f64) -> Result<Self> {
        if !(half_width > 0.0 && half_width < axis_radius) {
            return Err(Error::InvalidSurface(
                "collar half width must lie in (0, axis radius)".into(),
            ));
        }
        Ok(Self {
            family: Family::CubicCollar { axis_radius, half_width },
            domain: Domain {
                u: Axis::bounded(-half_width, half_width),
                v: Axis::periodic(0.0, 2.0 * PI),
            },
            orientation: Orientation::Standard,
            euler_characteristic: None,
        })
    }

    pub fn graph(a: f64, b: f64, c: f64, half_width: f64) -> Result<Self> {
        if !(half_width > 0.0) {
            return Err(Error::InvalidSurface("patch half width must be positive".into()));
        }
        Ok(Self {
            family: Family::Graph { a, b, c, half_width },
            domain: Domain {
                u: Axis::bounded(-half_width, half_width),
                v: Axis::bounded(-half_width, half_width),
            },
            orientation: Orientation::Standard,
            euler_characteristic: None,
        })
    }

    pub fn plane(half_width: f64) -> Result<Self> {
        Self::graph(0.0, 0.0, 0.0, half_width)
    }

    pub fn sampled(grid: SampledGrid) -> Self {
        let domain = grid.domain();
        let chi = grid.euler_characteristic;
        Self {
            family: Family::Sampled(Arc::new(grid)),
            domain,
            orientation: Orientation::Standard,
            euler_characteristic: chi,
        }
    }

    pub fn with_orientation(mut self, orientation: Orientation) -> Self {
        self.orientation = orientation;
        self
    }

    /// Closed-form position on Taylor inputs; `None` for sampled grids.
    fn position_taylor(&self, u: Taylor3, v: Taylor3) -> Option<[Taylor3; 3]> {
        match &self.family {
            Family::Sphere { radius } => {
                let (cu, su, cv, sv) = (u.cos(), u.sin(), v.cos(), v.sin());
                Some([cu * cv * *radius, cu * sv * *radius, su * *radius])
            }
            Family::Torus { axis_radius, tube_radius } => {
                let rho = u.cos() * *tube_radius + *axis_radius;
                Some([rho * v.cos(), rho * v.sin(), u.sin() * *tube_radius])
            }
            Family::PerturbedTorus {
                axis_radius,
                tube_radius,
                amplitude,
                freq_u,
                freq_v,
            } => {
                let modulation =
                    (u * *freq_u as f64).cos() * (v * *freq_v as f64).cos() * *amplitude + 1.0;
                let tube = modulation * *tube_radius;
                let rho = tube * u.cos() + *axis_radius;
                Some([rho * v.cos(), rho * v.sin(), tube * u.sin()])
            }
            Family::CubicCollar { axis_radius, .. } => {
                let rho = u + *axis_radius;
                Some([rho * v.cos(), rho * v.sin(), u * u * u])
            }
            Family::Graph { a, b, c, .. } => {
                let z = (u * u * *a + u * v * (2.0 * *b) + v * v * *c) * 0.5;
                Some([u, v, z])
            }
            Family::Sampled(_) => None,
        }
    }
}

/// Position and partial derivatives of the immersion to third order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub position: Vec3,
    /// `[X_u, X_v]`
    pub d1: [Vec3; 2],
    /// `[X_uu, X_uv, X_vv]`
    pub d2: [Vec3; 3],
    /// `[X_uuu, X_uuv, X_uvv, X_vvv]`
    pub d3: [Vec3; 4],
}

pub fn eval_jet(s: &Surface, p: ParamPoint) -> Result<Jet> {
    let p = s.domain.reduce(p)?;
    let jet = match &s.family {
        Family::Sampled(grid) => grid.jet(p)?,
        _ => {
            let x = s
                .position_taylor(Taylor3::var_u(p.u), Taylor3::var_v(p.v))
                .expect("analytic family");
            let pick = |i: usize, j: usize| [x[0].derivative(i, j), x[1].derivative(i, j), x[2].derivative(i, j)];
            Jet {
                position: pick(0, 0),
                d1: [pick(1, 0), pick(0, 1)],
                d2: [pick(2, 0), pick(1, 1), pick(0, 2)],
                d3: [pick(3, 0), pick(2, 1), pick(1, 2), pick(0, 3)],
            }
        }
    };
    let finite = std::iter::once(jet.position)
        .chain(jet.d1)
        .chain(jet.d2)
        .chain(jet.d3)
        .all(|v| v.iter().all(|c| c.is_finite()));
    if !finite {
        return Err(Error::InvalidSurface(format!(
            "non-finite jet at ({}, {})",
            p.u, p.v
        )));
    }
    Ok(jet)
}

/// Christoffel symbols of the second kind, `g{k}{i}{j}` = Γ^k_ij.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Christoffels {
    pub g111: f64,
    pub g112: f64,
    pub g122: f64,
    pub g211: f64,
    pub g212: f64,
    pub g222: f64,
}

/// The connection combinations entering the Codazzi equations.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CodazziCoeffs {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl CodazziCoeffs {
    pub fn from_christoffels(g: &Christoffels) -> Self {
        Self {
            a: -g.g112,
            b: g.g111 - g.g212,
            c: g.g211,
            alpha: -g.g122,
            beta: g.g112 - g.g222,
            gamma: g.g212,
        }
    }
}

/// Principal directions in parameter space, or `Indeterminate` at umbilics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PrincipalDirections {
    /// Directions for `k1` and `k2`, each unit in the first fundamental form.
    Pair([f64; 2], [f64; 2]),
    Indeterminate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FundamentalData {
    pub e: f64,
    pub f: f64,
    pub g: f64,
    pub l: f64,
    pub m: f64,
    pub n: f64,
    pub det_i: f64,
    pub k: f64,
    pub h: f64,
    pub k1: f64,
    pub k2: f64,
    pub christoffels: Christoffels,
    pub coeffs: CodazziCoeffs,
}

/// Relative tolerance below which `k1 = k2` is treated as umbilic.
pub const UMBILIC_TOL: f64 = 1e-9;

impl FundamentalData {
    pub fn from_forms(first: [f64; 3], second: [f64; 3], christoffels: Christoffels) -> Result<Self> {
        let [e, f, g] = first;
        let [l, m, n] = second;
        let det_i = e * g - f * f;
        if !(det_i > 0.0) || !(e > 0.0) {
            return Err(Error::DegenerateMetric { u: f64::NAN, v: f64::NAN, det: det_i });
        }
        let k = (l * n - m * m) / det_i;
        let h = (e * n - 2.0 * f * m + g * l) / (2.0 * det_i);
        let disc = (h * h - k).max(0.0).sqrt();
        Ok(Self {
            e,
            f,
            g,
            l,
            m,
            n,
            det_i,
            k,
            h,
            k1: h + disc,
            k2: h - disc,
            christoffels,
            coeffs: CodazziCoeffs::from_christoffels(&christoffels),
        })
    }

    pub fn first_form(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        self.e * a[0] * b[0] + self.f * (a[0] * b[1] + a[1] * b[0]) + self.g * a[1] * b[1]
    }

    pub fn second_form(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        self.l * a[0] * b[0] + self.m * (a[0] * b[1] + a[1] * b[0]) + self.n * a[1] * b[1]
    }

    pub fn normalize(&self, d: [f64; 2]) -> [f64; 2] {
        let len = self.first_form(d, d).sqrt();
        [d[0] / len, d[1] / len]
    }

    /// Rotates a tangent vector by +90 degrees in the metric (`J d`), unit output.
    pub fn perpendicular(&self, d: [f64; 2]) -> [f64; 2] {
        // J d has components (-(F d1 + G d2), E d1 + F d2) / sqrt(det I) for unit d.
        let s = self.det_i.sqrt();
        let jd = [
            -(self.f * d[0] + self.g * d[1]) / s,
            (self.e * d[0] + self.f * d[1]) / s,
        ];
        self.normalize(jd)
    }

    pub fn principal_directions(&self) -> PrincipalDirections {
        let scale = self.k1.abs().max(self.k2.abs()).max(1e-300);
        if (self.k1 - self.k2).abs() <= UMBILIC_TOL * scale {
            return PrincipalDirections::Indeterminate;
        }
        let dir = |k: f64| {
            // rows of (II - k I) d = 0; pick the better conditioned row
            let r1 = [self.l - k * self.e, self.m - k * self.f];
            let r2 = [self.m - k * self.f, self.n - k * self.g];
            let r = if r1[0].hypot(r1[1]) >= r2[0].hypot(r2[1]) { r1 } else { r2 };
            self.normalize([-r[1], r[0]])
        };
        PrincipalDirections::Pair(dir(self.k1), dir(self.k2))
    }
}

fn christoffels_from_jet(jet: &Jet, first: [f64; 3], det: f64) -> Christoffels {
    let [xu, xv] = jet.d1;
    let [xuu, xuv, xvv] = jet.d2;
    let [e, f, g] = first;
    let raise = |kind1: [f64; 2]| {
        [
            (g * kind1[0] - f * kind1[1]) / det,
            (e * kind1[1] - f * kind1[0]) / det,
        ]
    };
    let c11 = raise([dot(xuu, xu), dot(xuu, xv)]);
    let c12 = raise([dot(xuv, xu), dot(xuv, xv)]);
    let c22 = raise([dot(xvv, xu), dot(xvv, xv)]);
    Christoffels {
        g111: c11[0],
        g211: c11[1],
        g112: c12[0],
        g212: c12[1],
        g122: c22[0],
        g222: c22[1],
    }
}

pub fn fundamental_data(s: &Surface, p: ParamPoint) -> Result<FundamentalData> {
    let jet = eval_jet(s, p)?;
    let [xu, xv] = jet.d1;
    let first = [dot(xu, xu), dot(xu, xv), dot(xv, xv)];
    let det = first[0] * first[2] - first[1] * first[1];
    let nrm = cross(xu, xv);
    let len = norm(nrm);
    let scale = first[0].max(first[2]).max(1e-300);
    if !(det > 1e-14 * scale * scale) || len == 0.0 {
        return Err(Error::DegenerateMetric { u: p.u, v: p.v, det });
    }
    let sgn = s.orientation.sign() / len;
    let unit = [nrm[0] * sgn, nrm[1] * sgn, nrm[2] * sgn];
    let second = [dot(jet.d2[0], unit), dot(jet.d2[1], unit), dot(jet.d2[2], unit)];
    let chr = christoffels_from_jet(&jet, first, det);
    FundamentalData::from_forms(first, second, chr).map_err(|_| Error::DegenerateMetric {
        u: p.u,
        v: p.v,
        det,
    })
}

/// Christoffel symbols and the six Codazzi coefficients at a point.
pub fn connection_coeffs(s: &Surface, p: ParamPoint) -> Result<(Christoffels, CodazziCoeffs)> {
    let fd = fundamental_data(s, p)?;
    Ok((fd.christoffels, fd.coeffs))
}

/// Anything that can report pointwise first/second forms and connection data
/// on a parameter domain: immersions, prescribed annuli, adapted charts.
pub trait FormSource: Sync {
    fn forms(&self, p: ParamPoint) -> Result<FundamentalData>;
    fn domain(&self) -> Domain;
    fn orientation(&self) -> Orientation {
        Orientation::Standard
    }
}

impl FormSource for Surface {
    fn forms(&self, p: ParamPoint) -> Result<FundamentalData> {
        fundamental_data(self, p)
    }

    fn domain(&self) -> Domain {
        self.domain
    }

    fn orientation(&self) -> Orientation {
        self.orientation
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub gauss: f64,
    pub codazzi1: f64,
    pub codazzi2: f64,
}

impl Residuals {
    pub fn max_abs(&self) -> f64 {
        self.gauss.abs().max(self.codazzi1.abs()).max(self.codazzi2.abs())
    }
}

/// Residuals of the Gauss and both Codazzi equations with `(x, t) = (u, v)`,
/// using second-order centered differences of step `h`.
///
/// The Gauss residual compares `L N - M^2` with the intrinsic curvature
/// obtained from differentiated Christoffel symbols, so it is a genuine
/// compatibility check rather than the defining identity for `K`.
pub fn codazzi_residuals<S: FormSource + ?Sized>(s: &S, p: ParamPoint, h: f64) -> Result<Residuals> {
    let at = |du: f64, dv: f64| s.forms(ParamPoint::new(p.u + du, p.v + dv));
    let c = at(0.0, 0.0)?;
    let (up, um, vp, vm) = (at(h, 0.0)?, at(-h, 0.0)?, at(0.0, h)?, at(0.0, -h)?);
    let dx = |f: fn(&FundamentalData) -> f64| (f(&up) - f(&um)) / (2.0 * h);
    let dt = |f: fn(&FundamentalData) -> f64| (f(&vp) - f(&vm)) / (2.0 * h);
    let k = &c.coeffs;

    let codazzi1 = dt(|d| d.l) - dx(|d| d.m) + k.a * c.l + k.b * c.m + k.c * c.n;
    let codazzi2 = dt(|d| d.m) - dx(|d| d.n) + k.alpha * c.l + k.beta * c.m + k.gamma * c.n;

    let g = &c.christoffels;
    let e_k = dt(|d| d.christoffels.g211) - dx(|d| d.christoffels.g212) + g.g111 * g.g212
        + g.g211 * g.g222
        - g.g112 * g.g211
        - g.g212 * g.g212;
    let k_intrinsic = e_k / c.e;
    let gauss = k_intrinsic * c.det_i - (c.l * c.n - c.m * c.m);
    Ok(Residuals { gauss, codazzi1, codazzi2 })
}
