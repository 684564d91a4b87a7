use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tightsurf::adapted::{asymptotic_adapted_chart, second_form, y_sigma, AdaptedSpec};
use tightsurf::asymptotic::{trace, TraceControls};
use tightsurf::codazzi::*;
use tightsurf::curve::Termination;
use tightsurf::integrals::{tightness_report, QuadratureSpec};
use tightsurf::invariant::rigidity_invariant_line;
use tightsurf::numeric::{gauss_legendre, loglog_slope};
use tightsurf::prescribed::PrescribedForms;
use tightsurf::returnmap::{cylinder_decomposition, DecompositionControls, Swapped};
use tightsurf::surface::codazzi_residuals;
use tightsurf::{FormSource, ParamPoint, Surface};

type Outcome = Result<String, String>;

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn tightness() -> Outcome {
    let torus = Surface::torus(2.0, 1.0).unwrap();
    let start = Instant::now();
    let rep = tightness_report(&torus, Some(0), &QuadratureSpec::with_resolution(512)).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let dpos = (rep.positive_curvature - 4.0 * PI).abs();
    let dabs = (rep.total_absolute - 8.0 * PI).abs();
    let gb = rep.gauss_bonnet_defect.unwrap().abs();
    let ok = dpos < 1e-6 && dabs < 1e-6 && gb < 1e-8 && secs < 10.0;
    verdict(ok, format!("|S+ - 4pi| = {dpos:.2e}, |abs - 8pi| = {dabs:.2e}, defect = {gb:.2e}, {secs:.2} s"))
}

fn codazzi_residual_slope() -> Outcome {
    let s = Surface::torus(2.0, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let points: Vec<ParamPoint> = (0..100)
        .map(|_| ParamPoint::new(rng.gen_range(PI / 2.0 + 0.1..1.5 * PI - 0.1), rng.gen_range(0.0..2.0 * PI)))
        .collect();
    let hs = [1e-2, 1e-3, 1e-4];
    let mut worst = Vec::new();
    for &h in &hs {
        let mut m = 0.0f64;
        for &p in &points {
            m = m.max(codazzi_residuals(&s, p, h).map_err(|e| e.to_string())?.max_abs());
        }
        worst.push(m);
    }
    let slope = loglog_slope(&hs, &worst);
    verdict(slope >= 1.9, format!("slope = {slope:.3}, residuals = {worst:?}"))
}

/// `Δv` across `S-` by quadrature of `dv/du = sqrt(-L/N)` after the
/// substitution `u - pi = (pi/2) sin(phi)`.
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

fn tracing() -> Outcome {
    let s = Surface::torus(2.0, 1.0).unwrap();
    let expected = crossing_oracle(2.0, 1.0);
    let mut worst_dv = 0.0f64;
    let mut worst_tangency = 0.0f64;
    let mut crossed = true;
    for family in [1, -1] {
        let c = trace(&s, ParamPoint::new(PI / 2.0, 0.0), family, &TraceControls::default()).map_err(|e| e.to_string())?;
        let dv = c
            .samples
            .windows(2)
            .map(|w| {
                let d = w[1].point.v - w[0].point.v;
                d - 2.0 * PI * (d / (2.0 * PI)).round()
            })
            .sum::<f64>()
            .abs();
        worst_dv = worst_dv.max((dv - expected).abs());
        crossed &= (c.last().unwrap().point.u - 1.5 * PI).abs() < 1e-6;
        match c.termination {
            Termination::Parabolic { tangency } => worst_tangency = worst_tangency.max(tangency),
            _ => crossed = false,
        }
    }
    let chart = Swapped(s);
    let mut closed = 0;
    for family in [1, -1] {
        let d = cylinder_decomposition(&chart, 0.0, family, (PI / 2.0, 1.5 * PI), &DecompositionControls::default())
            .map_err(|e| e.to_string())?;
        closed += d.closed_curves.len();
    }
    let ok = crossed && worst_dv < 1e-5 && worst_tangency < 1e-3 && closed == 0;
    verdict(
        ok,
        format!("boundary-to-boundary = {crossed}, |dv - oracle| = {worst_dv:.2e}, tangency = {worst_tangency:.2e} rad, closed = {closed}"),
    )
}

fn invariant_identity() -> Outcome {
    let a = rigidity_invariant_line(&PrescribedForms::annulus(0.1), 0.0, 256).map_err(|e| e.to_string())?;
    let flat = rigidity_invariant_line(&PrescribedForms::flat_annulus(), 0.0, 256).map_err(|e| e.to_string())?;
    let (coord, disc) = (a.coordinate.unwrap(), a.discrepancy.unwrap());
    let (fc, fi) = (flat.coordinate.unwrap(), flat.intrinsic);
    let ok = (coord + PI).abs() < 1e-6
        && (a.sign * a.intrinsic + PI).abs() < 1e-6
        && disc < 1e-6
        && fc.abs() < 1e-12
        && fi.abs() < 1e-12;
    verdict(
        ok,
        format!("annulus coordinate = {coord:.9}, intrinsic = {:.9}, discrepancy = {disc:.2e}; flat {fc:.1e} = {fi:.1e}", a.intrinsic),
    )
}

/// Worst deviation of `II(Y_σ, Y_σ)/(1 - σ²)` from `N (LN - M²)`,
/// relative, and worst null-direction value relative to the form scale.
fn quadratic_law(forms: [f64; 6]) -> (f64, f64) {
    let [_, _, _, l, m, n] = forms;
    let law = n * (l * n - m * m);
    let scale = n.abs() * (m * m + (l * n).abs());
    let (mut rel, mut null) = (0.0f64, 0.0f64);
    for sigma in [-1.0, -0.5, 0.0, 0.5, 1.0] {
        let q = second_form(&forms, y_sigma(&forms, sigma));
        if sigma * sigma == 1.0 {
            null = null.max(q.abs() / scale);
        } else {
            rel = rel.max((q / (1.0 - sigma * sigma) - law).abs() / law.abs());
        }
    }
    (rel, null)
}

fn y_sigma_law() -> Outcome {
    let f = PrescribedForms::annulus(0.1).rotated();
    let spec = AdaptedSpec { nx: 64, nt: 9, feet: 256, table_steps: 32, ..AdaptedSpec::default() };
    let chart = asymptotic_adapted_chart(&f, &spec).map_err(|e| e.to_string())?;
    let torus = Surface::torus(2.0, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut rel, mut null) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let (i, j) = (rng.gen_range(0..chart.nx()), rng.gen_range(1..chart.nt()));
        let (r, n) = quadratic_law(chart.form(i, j));
        let p = ParamPoint::new(rng.gen_range(PI / 2.0 + 0.1..1.5 * PI - 0.1), rng.gen_range(0.0..2.0 * PI));
        let fd = torus.forms(p).map_err(|e| e.to_string())?;
        let (r2, n2) = quadratic_law([fd.e, fd.f, fd.g, fd.l, fd.m, fd.n]);
        rel = rel.max(r).max(r2);
        null = null.max(n).max(n2);
    }
    verdict(rel < 1e-8 && null < 1e-12, format!("max relative spread = {rel:.2e}, null directions = {null:.2e} (200 adapted + 200 torus nodes)"))
}

fn collar() -> SystemField {
    collar_model(FieldGrid::bounded((-1.0, 1.0), 41, (0.0, 1.0), 41)).unwrap()
}

fn symmetrizers() -> Outcome {
    let boundary = build_symmetrizer(&collar(), SymmetrizerKind::Boundary, &SearchControls::default()).map_err(|e| e.to_string())?;
    let grid = FieldGrid::periodic((0.0, 2.0 * PI), 128, (0.0, 0.1), 17);
    let plain = PrescribedForms::annulus(0.1).rotated();
    let a = SystemField::from_source(&plain, "annulus", grid).map_err(|e| e.to_string())?;
    let b = SystemField::from_source(&plain.mirrored(), "mirrored annulus", grid).map_err(|e| e.to_string())?;
    let fkind = build_symmetrizer(&a, SymmetrizerKind::ClosedCurveF, &SearchControls::default()).map_err(|e| e.to_string())?;
    let mirrored = build_symmetrizer(&b, SymmetrizerKind::ClosedCurveF, &SearchControls::default()).map_err(|e| e.to_string())?;
    // hand value: f = -mean(∂_t L / M) = -(1/2π)∫(1 - sin x)/2 dx
    let f = fkind.f.as_ref().map(|f| f[0]).unwrap_or(f64::NAN);
    let ok = boundary.report.passed
        && boundary.report.min_eig > 0.0
        && boundary.lambda_bar.is_some_and(f64::is_finite)
        && fkind.report.passed
        && (f + 0.5).abs() < 1e-12
        && mirrored.report.passed
        && mirrored.sign == -1.0;
    verdict(
        ok,
        format!(
            "boundary min-eig = {:.2e} at lambda_bar = {}; f-kind f = {f:.6} min-eig = {:.2e}; mirrored sign = {} min-eig = {:.2e}",
            boundary.report.min_eig, boundary.lambda_bar.unwrap_or(f64::NAN), fkind.report.min_eig, mirrored.sign, mirrored.report.min_eig
        ),
    )
}

fn linear() -> SolveControls {
    SolveControls { coupling: Coupling::Linearized, ..SolveControls::default() }
}

fn wave_run(n: usize) -> Result<(SystemField, Solution), String> {
    let field = wave_field(FieldGrid::bounded((-0.1, 1.1), 25, (-0.1, 0.7), 17)).map_err(|e| e.to_string())?;
    let data = DataSpec::Cauchy { t0: 0.0, x: (0.0, 1.0), n, data: Box::new(|x| [x.sin(), 0.0]) };
    let sol = solve(&field, &data, &linear()).map_err(|e| e.to_string())?;
    Ok((field, sol))
}

fn solver() -> Outcome {
    // d'Alembert: u = sin x cos t, w = cos x sin t
    let hs = [1.0 / 64.0, 1.0 / 128.0, 1.0 / 256.0];
    let mut errors = Vec::new();
    let mut energy = 0.0f64;
    for h in hs {
        let (field, sol) = wave_run((1.0 / h) as usize)?;
        let mut e = 0.0f64;
        for a in 0..20 {
            for b in 0..10 {
                let x = 0.1 + 0.8 * (a as f64 + 0.37) / 20.0;
                let t = (x.min(1.0 - x) - 0.02) * (b as f64 + 0.61) / 10.0;
                let u = sol.sample(x, t).ok_or("probe outside the solution")?;
                e = e.max((u[0] - x.sin() * t.cos()).abs()).max((u[1] - x.cos() * t.sin()).abs());
            }
        }
        errors.push(e);
        let ledger = energy_audit(&field, &Symmetrizer::none(&field, 1.0), &sol, None, 10.0, 1e-9).map_err(|e| e.to_string())?;
        energy = energy.max(ledger.residual.abs() / ledger.scale.max(1.0));
    }
    let slope = loglog_slope(&hs, &errors);

    let annulus = PrescribedForms::annulus(0.1).rotated();
    let corpus = vec![
        (wave_field(FieldGrid::bounded((-1.0, 1.0), 21, (0.0, 1.0), 11)).unwrap(), 0.0, (-0.5, 0.5)),
        (collar(), 0.1, (-0.3, 0.3)),
        (
            SystemField::from_source(&Swapped(Surface::torus(2.0, 1.0).unwrap()), "torus strip", FieldGrid::periodic((0.0, 2.0 * PI), 64, (PI / 2.0 + 0.05, PI), 33))
                .unwrap(),
            2.2,
            (0.0, 0.5),
        ),
        (
            SystemField::from_source(&annulus, "annulus", FieldGrid::periodic((0.0, 2.0 * PI), 128, (0.0, 0.3), 31)).unwrap(),
            0.05,
            (1.0, 2.0),
        ),
    ];
    let mut zero = 0.0f64;
    for (field, t0, x) in &corpus {
        for controls in [linear(), SolveControls::default()] {
            let cauchy = DataSpec::Cauchy { t0: *t0, x: *x, n: 40, data: Box::new(|_| [0.0; 2]) };
            zero = zero.max(solve(field, &cauchy, &controls).map_err(|e| e.to_string())?.max_abs_u);
            let goursat = DataSpec::Goursat {
                corner: [0.5 * (x.0 + x.1), *t0],
                h: 0.01,
                n_right: 10,
                n_left: 10,
                right: Box::new(|_| [0.0; 2]),
                left: Box::new(|_| [0.0; 2]),
            };
            zero = zero.max(solve(field, &goursat, &controls).map_err(|e| e.to_string())?.max_abs_u);
        }
    }
    let ok = slope >= 1.9 && zero < 1e-12 && energy < 1e-12;
    verdict(ok, format!("d'Alembert slope = {slope:.3}, zero data max|U| = {zero:.1e} on {} fields, energy residual = {energy:.1e}", corpus.len()))
}

fn energy_decay() -> Outcome {
    let field = collar();
    let symm = build_symmetrizer(&field, SymmetrizerKind::Boundary, &SearchControls::default()).map_err(|e| e.to_string())?;
    let q = symm.report.q;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut margin = f64::INFINITY;
    for _ in 0..20 {
        let c: Vec<f64> = (0..6).map(|_| rng.gen_range(-1e-3..1e-3)).collect();
        let data = DataSpec::Cauchy {
            t0: 0.25,
            x: (-0.5, 0.5),
            n: 48,
            data: Box::new(move |x| {
                let s = PI * (x + 0.5);
                [c[0] * s.sin() + c[1] * (2.0 * s).sin() + c[2] * (3.0 * s).cos(), c[3] * s.cos() + c[4] * (2.0 * s).sin() + c[5]]
            }),
        };
        let sol = solve(&field, &data, &SolveControls::default()).map_err(|e| e.to_string())?;
        let w = WeightedNorm { q, exponent: symm.report.exponent, t_ref: field.grid.t0 };
        let ledger = energy_audit(&field, &symm, &sol, Some(w), 10.0, 1e-9).map_err(|e| e.to_string())?;
        margin = margin.min(ledger.margin.unwrap_or(f64::NEG_INFINITY));
    }
    verdict(q > 0.0 && margin > 0.0, format!("q = {q:.3}, min margin over 20 perturbations = {margin:.3e}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("tightness", tightness),
        ("gauss-codazzi residuals", codazzi_residual_slope),
        ("asymptotic tracing", tracing),
        ("invariant identity", invariant_identity),
        ("y-sigma law", y_sigma_law),
        ("symmetrizer certificates", symmetrizers),
        ("solver correctness", solver),
        ("energy decay", energy_decay),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                println!("FAIL {name}: {detail}");
                failed += 1;
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
