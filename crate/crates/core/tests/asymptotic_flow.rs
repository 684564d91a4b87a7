use std::f64::consts::PI;

use tightsurf::asymptotic::{trace, TraceControls};
use tightsurf::curve::Termination;
use tightsurf::numeric::gauss_legendre;
use tightsurf::{ParamPoint, Surface};

/// Change of `v` across `S-` along an asymptotic curve of the standard
/// torus, by direct quadrature of `dv/du = sqrt(-L/N)`. The substitution
/// `u - pi = (pi/2) sin(phi)` removes both endpoint singularities.
fn crossing_oracle(big_r: f64, r: f64) -> f64 {
    let (x, w) = gauss_legendre(120);
    let half = PI / 2.0;
    x.iter()
        .zip(&w)
        .map(|(&x, &w)| {
            let phi = half * x;
            let t = half * phi.sin();
            let dt = half * phi.cos() * half;
            w * dt * (r / ((big_r - r * t.cos()) * t.cos())).sqrt()
        })
        .sum()
}

#[test]
fn torus_crossing_matches_quadrature() {
    let s = Surface::torus(2.0, 1.0).unwrap();
    let expected = crossing_oracle(2.0, 1.0);
    for family in [1, -1] {
        let c = trace(&s, ParamPoint::new(PI / 2.0, 0.0), family, &TraceControls::default()).unwrap();
        let end = c.last().unwrap().point;
        let dv: f64 = c
            .samples
            .windows(2)
            .map(|w| {
                let d = w[1].point.v - w[0].point.v;
                d - 2.0 * PI * (d / (2.0 * PI)).round()
            })
            .sum::<f64>()
            .abs();
        assert!((dv - expected).abs() < 1e-5, "family {family}: {dv} vs {expected}");
        assert!((end.u - 1.5 * PI).abs() < 1e-6, "{}", end.u);
        match c.termination {
            Termination::Parabolic { tangency } => assert!(tangency < 1e-3, "{tangency}"),
            other => panic!("{other:?}"),
        }
        assert!(!c.closed);
    }
}

#[test]
fn torus_return_map_has_no_closed_curves() {
    use tightsurf::returnmap::{cylinder_decomposition, DecompositionControls, Swapped};
    let chart = Swapped(Surface::torus(2.0, 1.0).unwrap());
    for family in [1, -1] {
        let d = cylinder_decomposition(&chart, 0.0, family, (PI / 2.0, 1.5 * PI), &DecompositionControls::default())
            .unwrap();
        assert!(d.closed_curves.is_empty());
        assert_eq!(d.exited(), d.samples.len());
        assert_eq!(d.regions.len(), 1);
    }
}

#[test]
fn limit_cycle_is_unique_and_attracting_from_both_sides() {
    use tightsurf::prescribed::PrescribedForms;
    use tightsurf::returnmap::{cylinder_decomposition, DecompositionControls, Stability};
    let t_star = 0.037;
    let f = PrescribedForms::limit_cycle(0.2, t_star);
    let d = cylinder_decomposition(&f, 0.0, -1, (t_star - 0.35, t_star + 0.35), &DecompositionControls::default())
        .unwrap();
    assert_eq!(d.closed_curves.len(), 1);
    let c = d.closed_curves[0];
    assert!((c.t - t_star).abs() < 1e-8, "{}", c.t);
    assert_eq!(c.stability, Stability::Attracting);
    assert!((c.multiplier - (-2.0 * PI * 0.2f64).exp()).abs() < 1e-6);
    assert_eq!(d.regions.len(), 2);
    assert_eq!((d.regions[0].drift, d.regions[1].drift), (1, -1));
}

#[test]
fn flipped_orientation_with_opposite_family_retraces_the_curve() {
    use tightsurf::asymptotic::trace_oriented;
    use tightsurf::surface::Orientation;
    let s = Surface::perturbed_torus(2.0, 1.0, 0.1, 2, 1).unwrap();
    let flipped = s.clone().with_orientation(Orientation::Flipped);
    let mut controls = TraceControls::default();
    controls.max_length = 3.0;
    let start = ParamPoint::new(PI, 0.3);
    let a = trace_oriented(&s, start, 1, Some([0.0, 1.0]), &controls);
    let b = trace_oriented(&flipped, start, -1, Some([0.0, 1.0]), &controls);
    let (a, b) = (a.unwrap(), b.unwrap());
    assert_eq!(a.len(), b.len());
    for (x, y) in a.samples.iter().zip(&b.samples) {
        assert!((x.point.u - y.point.u).abs() < 1e-12 && (x.point.v - y.point.v).abs() < 1e-12);
    }
}
