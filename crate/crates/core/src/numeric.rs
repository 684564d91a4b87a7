//! Small numerical kernels shared across modules.

use crate::error::{Error, Result};

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Root of `f` in `[a, b]` given opposite-signed end values, by bisection
/// safeguarded secant (Illinois variant).
pub fn bracket_root(
    mut f: impl FnMut(f64) -> Result<f64>,
    mut a: f64,
    mut b: f64,
    mut fa: f64,
    mut fb: f64,
    xtol: f64,
) -> Result<f64> {
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Precondition("root is not bracketed".into()));
    }
    let mut side = 0;
    for _ in 0..200 {
        if (b - a).abs() <= xtol {
            break;
        }
        let mut c = (a * fb - b * fa) / (fb - fa);
        let mid = 0.5 * (a + b);
        if !(c > a.min(b) && c < a.max(b)) {
            c = mid;
        }
        let fc = f(c)?;
        if fc == 0.0 {
            return Ok(c);
        }
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
    }
    Ok(if fa.abs() < fb.abs() { a } else { b })
}

/// Value and first derivative at `x` of the polynomial through `(xs, ys)`.
pub fn lagrange_eval(xs: &[f64], ys: &[f64], x: f64) -> (f64, f64) {
    let n = xs.len();
    let (mut value, mut slope) = (0.0, 0.0);
    for a in 0..n {
        let mut denom = 1.0;
        let mut prod = 1.0;
        let mut dprod = 0.0;
        for b in (0..n).filter(|&b| b != a) {
            denom *= xs[a] - xs[b];
            dprod = dprod * (x - xs[b]) + prod;
            prod *= x - xs[b];
        }
        value += ys[a] * prod / denom;
        slope += ys[a] * dprod / denom;
    }
    (value, slope)
}

/// Value and derivative of a uniformly sampled function (`ys[k]` at
/// `x0 + k h`) using the `width` nodes nearest to `x`. With `periodic` the
/// samples cover one period and indices wrap.
pub fn uniform_interp(ys: &[f64], x0: f64, h: f64, x: f64, width: usize, periodic: bool) -> (f64, f64) {
    let n = ys.len() as isize;
    let w = width.min(ys.len()) as isize;
    let r = (x - x0) / h;
    let mut start = r.floor() as isize - (w / 2 - 1);
    if !periodic {
        start = start.clamp(0, n - w);
    }
    let xs: Vec<f64> = (0..w).map(|k| (start + k) as f64).collect();
    let vals: Vec<f64> = (0..w).map(|k| ys[(start + k).rem_euclid(n) as usize]).collect();
    let (v, d) = lagrange_eval(&xs, &vals, r);
    (v, d / h)
}

/// Eigenvalues of a symmetric 2x2 matrix, ascending.
pub fn sym2_eigen(m: [[f64; 2]; 2]) -> [f64; 2] {
    let tr = 0.5 * (m[0][0] + m[1][1]);
    let d = (0.5 * (m[0][0] - m[1][1])).hypot(0.5 * (m[0][1] + m[1][0]));
    [tr - d, tr + d]
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    num / den
}

/// Fourth-order derivative of samples `f(k)` at index `i` of `n`, centered
/// inside and one-sided at the edges.
pub fn fd4(f: &dyn Fn(isize) -> f64, i: usize, n: usize, h: f64, periodic: bool) -> f64 {
    let i = i as isize;
    let n = n as isize;
    if periodic || (i >= 2 && i + 2 < n) {
        (-f(i + 2) + 8.0 * f(i + 1) - 8.0 * f(i - 1) + f(i - 2)) / (12.0 * h)
    } else if i < 2 {
        let o = i;
        let g = |k: isize| f(k);
        let d0 = (-25.0 * g(0) + 48.0 * g(1) - 36.0 * g(2) + 16.0 * g(3) - 3.0 * g(4)) / (12.0 * h);
        if o == 0 {
            d0
        } else {
            (-3.0 * g(0) - 10.0 * g(1) + 18.0 * g(2) - 6.0 * g(3) + g(4)) / (12.0 * h)
        }
    } else {
        let g = |k: isize| f(n - 1 - k);
        let d = if i == n - 1 {
            (-25.0 * g(0) + 48.0 * g(1) - 36.0 * g(2) + 16.0 * g(3) - 3.0 * g(4)) / (12.0 * h)
        } else {
            (-3.0 * g(0) - 10.0 * g(1) + 18.0 * g(2) - 6.0 * g(3) + g(4)) / (12.0 * h)
        };
        -d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rule_integrates_degree_2n_minus_1() {
        for n in 1..8 {
            let (x, w) = gauss_legendre(n);
            let deg = 2 * n - 1;
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32 - 1)).sum();
            let exact = if (deg - 1) % 2 == 0 { 2.0 / deg as f64 } else { 0.0 };
            assert!((q - exact).abs() < 1e-13, "n={n}");
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
        }
    }

    #[test]
    fn root_of_cosine() {
        let r = bracket_root(|x| Ok(x.cos()), 1.0, 2.0, 1f64.cos(), 2f64.cos(), 1e-15).unwrap();
        assert!((r - std::f64::consts::FRAC_PI_2).abs() < 1e-14);
    }

    #[test]
    fn cubic_root_is_located() {
        let f = |x: f64| Ok((x - 0.3).powi(3));
        let r = bracket_root(f, 0.0, 1.0, -0.027, 0.343, 1e-14).unwrap();
        assert!((r - 0.3).abs() < 1e-12);
    }

    #[test]
    fn lagrange_reproduces_cubic_and_its_slope() {
        let xs = [0.0, 0.5, 1.3, 2.0];
        let ys: Vec<f64> = xs.iter().map(|x| x * x * x - x).collect();
        let (v, d) = lagrange_eval(&xs, &ys, 0.7);
        assert!((v - (0.343 - 0.7)).abs() < 1e-14);
        assert!((d - (3.0 * 0.49 - 1.0)).abs() < 1e-13);
    }

    #[test]
    fn periodic_interpolation_of_sine() {
        let n = 64;
        let h = std::f64::consts::TAU / n as f64;
        let ys: Vec<f64> = (0..n).map(|k| (k as f64 * h).sin()).collect();
        let (v, d) = uniform_interp(&ys, 0.0, h, 6.25, 8, true);
        assert!((v - 6.25f64.sin()).abs() < 1e-10 && (d - 6.25f64.cos()).abs() < 1e-8);
    }

    #[test]
    fn eigenvalues_of_symmetric_matrix() {
        let e = sym2_eigen([[2.0, 1.0], [1.0, 2.0]]);
        assert!((e[0] - 1.0).abs() < 1e-15 && (e[1] - 3.0).abs() < 1e-15);
    }
}
