//! Polylines in the parameter domain.

use serde::{Deserialize, Serialize};

use crate::surface::{Domain, FormSource, ParamPoint};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveSample {
    pub point: ParamPoint,
    /// Parameter-space tangent, unit in the first fundamental form.
    pub tangent: [f64; 2],
    /// Metric arclength from the first sample.
    pub s: f64,
}

/// Why a trace stopped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Termination {
    /// Reached `K = 0`; `tangency` is the metric angle between the arrival
    /// direction and the parabolic curve's tangent.
    Parabolic { tangency: f64 },
    Closed,
    Spiral { limit: f64 },
    /// Left the domain through a bounded edge.
    DomainEdge,
    Budget,
    /// Extracted level set rather than an integrated trajectory.
    Contour,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracedCurve {
    pub samples: Vec<CurveSample>,
    pub closed: bool,
    /// Net turns around the `u` and `v` axes (zero on bounded axes).
    pub winding: [i32; 2],
    /// Asymptotic branch `+1` / `-1`, or `0` for level curves.
    pub family: i8,
    pub termination: Termination,
}

impl TracedCurve {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn length(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.s)
    }

    pub fn first(&self) -> Option<&CurveSample> {
        self.samples.first()
    }

    pub fn last(&self) -> Option<&CurveSample> {
        self.samples.last()
    }

    /// Builds a curve from raw points: unwrapped displacements give winding,
    /// chords give tangents, and arclength uses the metric at chord midpoints.
    pub fn from_points<S: FormSource + ?Sized>(
        source: &S,
        points: &[ParamPoint],
        closed: bool,
        family: i8,
        termination: Termination,
    ) -> Self {
        let domain = source.domain();
        let n = points.len();
        let mut samples = Vec::with_capacity(n);
        let mut s = 0.0;
        let mut unwrapped = [0.0f64; 2];
        let chord = |a: ParamPoint, b: ParamPoint| {
            [domain.u.delta(a.u, b.u), domain.v.delta(a.v, b.v)]
        };
        for k in 0..n {
            let next = if k + 1 < n {
                Some(points[k + 1])
            } else if closed && n > 1 {
                Some(points[0])
            } else {
                None
            };
            let prev = if k > 0 {
                Some(points[k - 1])
            } else if closed && n > 1 {
                Some(points[n - 1])
            } else {
                None
            };
            let d = match (prev, next) {
                (Some(a), Some(b)) => chord(a, b),
                (None, Some(b)) => chord(points[k], b),
                (Some(a), None) => chord(a, points[k]),
                (None, None) => [1.0, 0.0],
            };
            let tangent = source
                .forms(points[k])
                .map(|fd| fd.normalize(d))
                .unwrap_or(d);
            if k > 0 {
                let c = chord(points[k - 1], points[k]);
                unwrapped[0] += c[0];
                unwrapped[1] += c[1];
                s += metric_length(source, &domain, points[k - 1], c);
            }
            samples.push(CurveSample { point: points[k], tangent, s });
        }
        if closed && n > 1 {
            let c = chord(points[n - 1], points[0]);
            unwrapped[0] += c[0];
            unwrapped[1] += c[1];
        }
        let turns = |axis: &crate::surface::Axis, d: f64| {
            if axis.periodic {
                (d / axis.length()).round() as i32
            } else {
                0
            }
        };
        Self {
            samples,
            closed,
            winding: [turns(&domain.u, unwrapped[0]), turns(&domain.v, unwrapped[1])],
            family,
            termination,
        }
    }
}

/// Metric length of the parameter chord `c` starting at `a`, midpoint rule.
pub(crate) fn metric_length<S: FormSource + ?Sized>(
    source: &S,
    domain: &Domain,
    a: ParamPoint,
    c: [f64; 2],
) -> f64 {
    let mid = ParamPoint::new(a.u + 0.5 * c[0], a.v + 0.5 * c[1]);
    let mid = domain.reduce(mid).unwrap_or(a);
    match source.forms(mid) {
        Ok(fd) => fd.first_form(c, c).max(0.0).sqrt(),
        Err(_) => c[0].hypot(c[1]),
    }
}
