//! Chart adapted to a closed asymptotic curve `Γ = {t = t_Γ}` of an annular
//! source, in which `Γ` is `t = 0`, `L` vanishes on `Γ` and is strictly
//! signed on one side.
//!
//! A preliminary chart `(ξ, t̃)` follows the lines of curvature of positive
//! normal curvature out of `Γ`, labelled by their foot `ξ` and the native
//! `t`. Levels of the final chart are closed curves whose slope
//! `(-M̃ + σ sqrt(M̃² - L̃Ñ)) / Ñ` interpolates between the two asymptotic
//! slopes with one constant `σ` per level; `σ = -1` reproduces `Γ`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::charts::{pulled_back, AdaptedCase, Chart, ChartKind};
use crate::error::{Error, Result};
use crate::numeric::{bracket_root, gauss_legendre, uniform_interp};
use crate::surface::{FormSource, FundamentalData, ParamPoint};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptedSpec {
    pub t_gamma: f64,
    pub width: f64,
    pub nx: usize,
    pub nt: usize,
    /// Feet of the line-of-curvature table around `Γ`.
    pub feet: usize,
    /// Table steps in `t̃` on each side of `Γ`.
    pub table_steps: usize,
}

impl Default for AdaptedSpec {
    fn default() -> Self {
        Self { t_gamma: 0.0, width: 0.1, nx: 128, nt: 17, feet: 512, table_steps: 48 }
    }
}

const INTERP: usize = 8;

/// Positive principal direction with `dv > 0`, as `du/dv`.
fn curvature_line_slope(fd: &FundamentalData, sign: f64) -> Result<f64> {
    let (l, m, n) = (sign * fd.l, sign * fd.m, sign * fd.n);
    let h = (fd.e * n - 2.0 * fd.f * m + fd.g * l) / (2.0 * fd.det_i);
    let disc = (h * h - fd.k).max(0.0).sqrt();
    if disc <= 1e-12 * h.abs().max(1e-300) {
        return Err(Error::Chart("umbilic point on the curvature-line field".into()));
    }
    let kappa = h + disc;
    let r1 = [l - kappa * fd.e, m - kappa * fd.f];
    let r2 = [m - kappa * fd.f, n - kappa * fd.g];
    let r = if r1[0].hypot(r1[1]) >= r2[0].hypot(r2[1]) { r1 } else { r2 };
    let d = [-r[1], r[0]];
    if d[1].abs() <= 1e-12 * d[0].abs() {
        return Err(Error::Chart("line of curvature tangent to the levels of t".into()));
    }
    Ok(d[0] / d[1])
}

struct Table<'a, S: ?Sized> {
    source: &'a S,
    sign: f64,
    u0: f64,
    dir: f64,
    period: f64,
    t_gamma: f64,
    dt: f64,
    steps: usize,
    /// `X(ξ_k, t_m) - u0 - dir ξ_k`, row per foot, periodic in `k`.
    rows: Vec<Vec<f64>>,
}

struct PrelimPoint {
    fd: FundamentalData,
    point: ParamPoint,
    e_xi: [f64; 2],
    e_t: [f64; 2],
    forms: [f64; 6],
}

impl<'a, S: FormSource + ?Sized> Table<'a, S> {
    fn build(source: &'a S, sign: f64, u0: f64, dir: f64, t_gamma: f64, reach: f64, feet: usize, steps: usize) -> Result<Self> {
        let period = source.domain().u.length();
        let dt = reach / steps as f64;
        let rho = |u: f64, t: f64| -> Result<f64> {
            let p = source.domain().reduce(ParamPoint::new(u, t))?;
            curvature_line_slope(&source.forms(p)?, sign)
        };
        let rows: Result<Vec<Vec<f64>>> = (0..feet)
            .into_par_iter()
            .map(|k| {
                let xi = k as f64 * period / feet as f64;
                let foot = u0 + dir * xi;
                let mut row = vec![0.0; 2 * steps + 1];
                for side in [1.0, -1.0] {
                    let (mut u, mut t) = (foot, t_gamma);
                    let h = side * dt;
                    for m in 1..=steps {
                        let k1 = rho(u, t)?;
                        let k2 = rho(u + 0.5 * h * k1, t + 0.5 * h)?;
                        let k3 = rho(u + 0.5 * h * k2, t + 0.5 * h)?;
                        let k4 = rho(u + h * k3, t + h)?;
                        u += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                        t = t_gamma + side * m as f64 * dt;
                        let idx = (steps as isize + side as isize * m as isize) as usize;
                        row[idx] = u - foot;
                    }
                }
                Ok(row)
            })
            .collect();
        Ok(Self { source, sign, u0, dir, period, t_gamma, dt, steps, rows: rows? })
    }

    fn t_range(&self) -> f64 {
        self.dt * self.steps as f64
    }

    /// `X` and `X_ξ` at `(ξ, t̃)`.
    fn foot_map(&self, xi: f64, t: f64) -> Result<(f64, f64)> {
        let r = (t - self.t_gamma) / self.dt + self.steps as f64;
        if !(r >= 0.0 && r <= (2 * self.steps) as f64) {
            return Err(Error::Chart(format!("level left the curvature-line table at t = {t}")));
        }
        let feet = self.rows.len();
        let h = self.period / feet as f64;
        let base = (xi / h).floor() as isize - (INTERP as isize / 2 - 1);
        let column: Vec<f64> = (0..INTERP as isize)
            .map(|a| {
                let row = &self.rows[(base + a).rem_euclid(feet as isize) as usize];
                uniform_interp(row, 0.0, 1.0, r, INTERP, false).0
            })
            .collect();
        let xs: Vec<f64> = (0..INTERP as isize).map(|a| (base + a) as f64 * h).collect();
        let (y, dy) = crate::numeric::lagrange_eval(&xs, &column, xi);
        Ok((self.u0 + self.dir * xi + y, self.dir + dy))
    }

    fn prelim(&self, xi: f64, t: f64) -> Result<PrelimPoint> {
        let (x, x_xi) = self.foot_map(xi, t)?;
        let point = self.source.domain().reduce(ParamPoint::new(x, t))?;
        let fd = self.source.forms(point)?;
        let rho = curvature_line_slope(&fd, self.sign)?;
        let e_xi = [x_xi, 0.0];
        let e_t = [rho, 1.0];
        let forms = pulled_back(&fd, e_xi, e_t);
        Ok(PrelimPoint { fd, point, e_xi, e_t, forms })
    }

    /// Level slope `dt̃/dξ` with the second form in the standard orientation.
    fn slope(&self, xi: f64, t: f64, sigma: f64) -> Result<f64> {
        let p = self.prelim(xi, t)?;
        Ok(level_slope(&p.forms, self.sign, sigma))
    }
}

fn level_slope(forms: &[f64; 6], sign: f64, sigma: f64) -> f64 {
    let [l, m, n] = [3, 4, 5].map(|k| sign * forms[k]);
    let [a, b] = y_sigma(&[0.0, 0.0, 0.0, l, m, n], sigma);
    b / a
}

/// `Y_σ = N ∂_x + (-M + σ √(M² - LN)) ∂_t`; `σ = ±1` are the asymptotic directions.
pub fn y_sigma(forms: &[f64; 6], sigma: f64) -> [f64; 2] {
    let (l, m, n) = (forms[3], forms[4], forms[5]);
    [n, -m + sigma * (m * m - l * n).max(0.0).sqrt()]
}

/// `II(v, v)` for coefficients `[E, F, G, L, M, N]`.
pub fn second_form(forms: &[f64; 6], v: [f64; 2]) -> f64 {
    forms[3] * v[0] * v[0] + 2.0 * forms[4] * v[0] * v[1] + forms[5] * v[1] * v[1]
}

/// A level traced once around, sampled at `steps + 1` equally spaced `ξ`.
struct Level {
    t: Vec<f64>,
}

enum Trace {
    Done(Level),
    /// Left the table upwards (`+1`) or downwards (`-1`).
    Escaped(f64),
}

fn trace_level<S: FormSource + ?Sized>(table: &Table<'_, S>, t_start: f64, sigma: f64, steps: usize) -> Result<Trace> {
    let h = table.period / steps as f64;
    let mut t = t_start;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(t);
    let limit = table.t_range() * 0.999;
    for k in 0..steps {
        let xi = k as f64 * h;
        let f = |x: f64, y: f64| -> Result<f64> {
            if (y - table.t_gamma).abs() > limit {
                return Err(Error::Chart(String::new()));
            }
            table.slope(x, y, sigma)
        };
        let stage = (|| -> Result<f64> {
            let k1 = f(xi, t)?;
            let k2 = f(xi + 0.5 * h, t + 0.5 * h * k1)?;
            let k3 = f(xi + 0.5 * h, t + 0.5 * h * k2)?;
            let k4 = f(xi + h, t + h * k3)?;
            Ok(t + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
        })();
        match stage {
            Ok(next) => t = next,
            Err(Error::Chart(_)) => return Ok(Trace::Escaped((t - table.t_gamma).signum())),
            Err(e) => return Err(e),
        }
        out.push(t);
    }
    Ok(Trace::Done(Level { t: out }))
}

/// Closure defect `T(period) - T(0)`; escapes count as large defects.
fn closure<S: FormSource + ?Sized>(table: &Table<'_, S>, t_start: f64, sigma: f64, steps: usize) -> Result<(f64, Option<Level>)> {
    match trace_level(table, t_start, sigma, steps)? {
        Trace::Done(level) => Ok((level.t[steps] - t_start, Some(level))),
        Trace::Escaped(side) => Ok((side * 10.0 * table.t_range(), None)),
    }
}

fn closed_level<S: FormSource + ?Sized>(table: &Table<'_, S>, t_start: f64, steps: usize) -> Result<(f64, Level)> {
    let (g_lo, _) = closure(table, t_start, -1.0, steps)?;
    let (g_hi, _) = closure(table, t_start, 1.0, steps)?;
    if g_lo.signum() == g_hi.signum() {
        return Err(Error::Chart(format!("no closing level through t = {t_start}")));
    }
    let sigma = bracket_root(|s| closure(table, t_start, s, steps).map(|r| r.0), -1.0, 1.0, g_lo, g_hi, 1e-15)?;
    let (g, level) = closure(table, t_start, sigma, steps)?;
    let level = level.ok_or_else(|| Error::Chart("closing level escaped".into()))?;
    if g.abs() > 1e-9 {
        return Err(Error::Chart(format!("level through t = {t_start} does not close: defect {g:e}")));
    }
    Ok((sigma, level))
}

pub fn asymptotic_adapted_chart<S: FormSource + ?Sized>(s: &S, spec: &AdaptedSpec) -> Result<Chart> {
    let domain = s.domain();
    if !domain.u.periodic {
        return Err(Error::Precondition("the curve must run around a periodic x axis".into()));
    }
    let sign = s.orientation().sign();
    let tg = spec.t_gamma;
    let period = domain.u.length();

    // Γ must be asymptotic with M of one sign
    let probes = 64;
    let mut m_sign = 0.0;
    let mut best = (0.0, f64::NEG_INFINITY);
    for k in 0..probes {
        let u = domain.u.min + k as f64 * period / probes as f64;
        let fd = s.forms(ParamPoint::new(u, tg))?;
        let scale = fd.l.abs().max(fd.m.abs()).max(fd.n.abs());
        if fd.l.abs() > 1e-8 * scale.max(1.0) {
            return Err(Error::Precondition(format!("t = {tg} is not asymptotic: L = {:e} at x = {u}", fd.l)));
        }
        let ms = (sign * fd.m).signum();
        if fd.m == 0.0 || (m_sign != 0.0 && ms != m_sign) {
            return Err(Error::Precondition("M vanishes along the curve".into()));
        }
        m_sign = ms;
        // where |K det I / N| peaks, ∂_t L of the final chart peaks
        let rho = curvature_line_slope(&fd, sign)?;
        let n_t = sign * fd.second_form([rho, 1.0], [rho, 1.0]);
        let weight = (fd.k * fd.det_i / n_t).abs();
        if weight > best.1 {
            best = (u, weight);
        }
    }
    let dir = -m_sign;
    let u0 = best.0;

    let mut width = spec.width;
    let mut last = None;
    for _ in 0..4 {
        match build(s, spec, sign, u0, dir, width) {
            Ok(c) => return Ok(c),
            Err(e @ Error::Chart(_)) => {
                last = Some(e);
                width *= 0.5;
            }
            Err(e) => return Err(e),
        }
    }
    Err(last.unwrap_or_else(|| Error::Chart("adapted chart failed".into())))
}

fn build<S: FormSource + ?Sized>(s: &S, spec: &AdaptedSpec, sign: f64, u0: f64, dir: f64, width: f64) -> Result<Chart> {
    let domain = s.domain();
    let period = domain.u.length();
    let tg = spec.t_gamma;
    let table = Table::build(s, sign, u0, dir, tg, 3.0 * width, spec.feet.max(64), spec.table_steps.max(16))?;
    let steps = spec.feet.max(64) / 2;
    let nt = spec.nt.max(5);
    let nx = spec.nx.max(8);
    let ds: Vec<f64> = (0..nt).map(|j| width * j as f64 / (nt - 1) as f64).collect();

    // the side where levels close: σ = -1 and σ = +1 must drift apart
    let probe = ds[1];
    let mut side = 0.0;
    for candidate in [1.0, -1.0] {
        let (g_lo, _) = closure(&table, tg + candidate * probe, -1.0, steps)?;
        let (g_hi, _) = closure(&table, tg + candidate * probe, 1.0, steps)?;
        if g_lo.signum() != g_hi.signum() {
            side = candidate;
            break;
        }
    }
    if side == 0.0 {
        return Err(Error::Chart("no closing levels on either side of the curve".into()));
    }

    let delta = 1e-5 * width;
    let solved: Result<Vec<(f64, Vec<f64>, Vec<f64>)>> = ds
        .par_iter()
        .map(|&d| {
            let at = |d: f64| -> Result<(f64, Vec<f64>)> {
                if d == 0.0 {
                    return Ok((-1.0, vec![tg; steps + 1]));
                }
                closed_level(&table, tg + side * d, steps).map(|(sg, l)| (sg, l.t))
            };
            let (sigma, t) = at(d)?;
            let t_d: Vec<f64> = if d == 0.0 {
                let (a, b) = (at(delta)?.1, at(2.0 * delta)?.1);
                (0..=steps).map(|k| (-3.0 * tg + 4.0 * a[k] - b[k]) / (2.0 * delta)).collect()
            } else {
                let (a, b) = (at(d + delta)?.1, at(d - delta)?.1);
                (0..=steps).map(|k| (a[k] - b[k]) / (2.0 * delta)).collect()
            };
            Ok((sigma, t, t_d))
        })
        .collect();
    let solved = solved?;

    // arclength along Γ, measured from the rebased origin
    let h = period / steps as f64;
    let (gx, gw) = gauss_legendre(8);
    let speed = |xi: f64| -> Result<f64> {
        let p = domain.reduce(ParamPoint::new(u0 + dir * xi, tg))?;
        Ok(s.forms(p)?.e.sqrt())
    };
    let mut arc = vec![0.0; steps + 1];
    for k in 0..steps {
        let a = k as f64 * h;
        let mut acc = 0.0;
        for (x, w) in gx.iter().zip(&gw) {
            acc += w * speed(a + 0.5 * h * (x + 1.0))?;
        }
        arc[k + 1] = arc[k] + 0.5 * h * acc;
    }
    let length = arc[steps];
    let arc_at = |xi: f64| -> Result<f64> {
        let k = ((xi / h).floor() as usize).min(steps - 1);
        let a = k as f64 * h;
        let mut acc = 0.0;
        for (x, w) in gx.iter().zip(&gw) {
            acc += w * speed(a + 0.5 * (xi - a) * (x + 1.0))?;
        }
        Ok(arc[k] + 0.5 * (xi - a) * acc)
    };
    let xi_of = |target: f64| -> Result<f64> {
        let mut xi = target / length * period;
        for _ in 0..30 {
            let step = (arc_at(xi)? - target) / speed(xi)?;
            xi -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        Ok(xi)
    };

    let xs: Vec<f64> = (0..nx).map(|i| i as f64 * length / nx as f64).collect();
    let mut nodes = Vec::with_capacity(nx * nt);
    let mut jacobian = Vec::with_capacity(nx * nt);
    let mut forms = Vec::with_capacity(nx * nt);
    for &x in &xs {
        let xi = xi_of(x)?;
        let ds_dxi = speed(xi)?;
        for (sigma, levels, levels_d) in &solved {
            let periodic_part: Vec<f64> = levels[..steps].to_vec();
            let t = uniform_interp(&periodic_part, 0.0, h, xi, INTERP, true).0;
            let t_d = uniform_interp(&levels_d[..steps], 0.0, h, xi, INTERP, true).0;
            let p = table.prelim(xi, t)?;
            let slope = level_slope(&p.forms, sign, *sigma);
            let ex = [(p.e_xi[0] + slope * p.e_t[0]) / ds_dxi, (p.e_xi[1] + slope * p.e_t[1]) / ds_dxi];
            let et = [t_d * p.e_t[0], t_d * p.e_t[1]];
            nodes.push(p.point);
            jacobian.push([[ex[0], et[0]], [ex[1], et[1]]]);
            forms.push(pulled_back(&p.fd, ex, et));
        }
    }
    let case = if sign > 0.0 { AdaptedCase::NormalPositive } else { AdaptedCase::NormalNegative };
    Ok(Chart {
        kind: ChartKind::Adapted { case },
        x: xs,
        t: ds,
        x_period: Some(length),
        nodes,
        jacobian,
        forms,
        orientation: s.orientation(),
        level_sigma: solved.iter().map(|l| l.0).collect(),
        x_flipped: dir < 0.0,
        t_reversed: side < 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charts::chart_certificate;
    use crate::prescribed::PrescribedForms;
    use crate::surface::FormSource;

    fn small() -> AdaptedSpec {
        AdaptedSpec { nx: 64, nt: 9, feet: 256, table_steps: 32, ..AdaptedSpec::default() }
    }

    #[test]
    fn rotated_annulus_gives_normal_positive_case() {
        let f = PrescribedForms::annulus(0.1).rotated();
        let chart = asymptotic_adapted_chart(&f, &small()).unwrap();
        assert_eq!(chart.kind, ChartKind::Adapted { case: AdaptedCase::NormalPositive });
        assert_eq!(chart.level_sigma[0], -1.0);
        assert!(chart.level_sigma[1..].iter().all(|s| s.abs() < 1.0));
        let cert = chart_certificate(&f, &chart, 1e-5).unwrap();
        assert!(cert.passed, "{cert:#?}");
        // on a level of constant σ the second form satisfies L = (1 - σ²) K det I / N
        for i in (0..chart.nx()).step_by(7) {
            for j in 1..chart.nt() {
                let [e, ff, g, l, _, n] = chart.form(i, j);
                let k = f.forms(chart.nodes[chart.index(i, j)]).unwrap().k;
                let sg = chart.level_sigma[j];
                let expected = (1.0 - sg * sg) * k * (e * g - ff * ff) / n;
                assert!((l - expected).abs() < 1e-7, "{i} {j}: {l} vs {expected}");
            }
        }
    }

    #[test]
    fn mirrored_annulus_gives_normal_negative_case() {
        let f = PrescribedForms::annulus(0.1).rotated().mirrored();
        let chart = asymptotic_adapted_chart(&f, &small()).unwrap();
        assert_eq!(chart.kind, ChartKind::Adapted { case: AdaptedCase::NormalNegative });
        let cert = chart_certificate(&f, &chart, 1e-5).unwrap();
        assert!(cert.passed, "{cert:#?}");
    }
}
