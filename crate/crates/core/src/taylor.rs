//! Truncated bivariate Taylor polynomials of total degree three.
//!
//! Evaluating a closed-form immersion on `Taylor3` inputs yields every partial
//! derivative up to third order exactly (to rounding), which is how the
//! built-in surface families produce their jets.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Monomial layout: (0,0) (1,0) (0,1) (2,0) (1,1) (0,2) (3,0) (2,1) (1,2) (0,3).
const EXPONENTS: [(usize, usize); 10] = [
    (0, 0),
    (1, 0),
    (0, 1),
    (2, 0),
    (1, 1),
    (0, 2),
    (3, 0),
    (2, 1),
    (1, 2),
    (0, 3),
];

fn slot(i: usize, j: usize) -> Option<usize> {
    if i + j > 3 {
        return None;
    }
    EXPONENTS.iter().position(|&e| e == (i, j))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Taylor3 {
    c: [f64; 10],
}

impl Taylor3 {
    pub fn constant(value: f64) -> Self {
        let mut c = [0.0; 10];
        c[0] = value;
        Self { c }
    }

    /// The first coordinate variable expanded about `value`.
    pub fn var_u(value: f64) -> Self {
        let mut c = [0.0; 10];
        c[0] = value;
        c[1] = 1.0;
        Self { c }
    }

    pub fn var_v(value: f64) -> Self {
        let mut c = [0.0; 10];
        c[0] = value;
        c[2] = 1.0;
        Self { c }
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// Partial derivative d^{i+j} / du^i dv^j at the expansion point.
    pub fn derivative(&self, i: usize, j: usize) -> f64 {
        match slot(i, j) {
            Some(k) => self.c[k] * factorial(i) * factorial(j),
            None => 0.0,
        }
    }

    /// Applies a scalar function given its value and first three derivatives
    /// at the constant term.
    fn compose(self, d: [f64; 4]) -> Self {
        let mut h = self;
        h.c[0] = 0.0;
        let h2 = h * h;
        let h3 = h2 * h;
        let mut out = Self::constant(d[0]);
        for k in 1..10 {
            out.c[k] = d[1] * h.c[k] + d[2] / 2.0 * h2.c[k] + d[3] / 6.0 * h3.c[k];
        }
        out
    }

    pub fn sin(self) -> Self {
        let (s, c) = self.c[0].sin_cos();
        self.compose([s, c, -s, -c])
    }

    pub fn cos(self) -> Self {
        let (s, c) = self.c[0].sin_cos();
        self.compose([c, -s, -c, s])
    }

    pub fn sqrt(self) -> Self {
        let a = self.c[0];
        let r = a.sqrt();
        self.compose([r, 0.5 / r, -0.25 / (a * r), 0.375 / (a * a * r)])
    }

    pub fn recip(self) -> Self {
        let a = self.c[0];
        let r = 1.0 / a;
        self.compose([r, -r * r, 2.0 * r * r * r, -6.0 * r * r * r * r])
    }

    pub fn powi(self, n: i32) -> Self {
        let a = self.c[0];
        let nf = n as f64;
        self.compose([
            a.powi(n),
            nf * a.powi(n - 1),
            nf * (nf - 1.0) * a.powi(n - 2),
            nf * (nf - 1.0) * (nf - 2.0) * a.powi(n - 3),
        ])
    }

    pub fn scale(self, k: f64) -> Self {
        let mut out = self;
        for x in out.c.iter_mut() {
            *x *= k;
        }
        out
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).product::<usize>() as f64
}

impl Add for Taylor3 {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        for k in 0..10 {
            self.c[k] += rhs.c[k];
        }
        self
    }
}

impl Sub for Taylor3 {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        for k in 0..10 {
            self.c[k] -= rhs.c[k];
        }
        self
    }
}

impl Neg for Taylor3 {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-1.0)
    }
}

/// Index triples `(a, b, k)` with monomial `a` times monomial `b` landing in
/// slot `k`, for every product that survives truncation.
const PRODUCTS: [(usize, usize, usize); 35] = product_table();

const fn product_table() -> [(usize, usize, usize); 35] {
    let mut out = [(0, 0, 0); 35];
    let mut n = 0;
    let mut a = 0;
    while a < 10 {
        let mut b = 0;
        while b < 10 {
            let (i, j) = (EXPONENTS[a].0 + EXPONENTS[b].0, EXPONENTS[a].1 + EXPONENTS[b].1);
            if i + j <= 3 {
                let mut k = 0;
                while EXPONENTS[k].0 != i || EXPONENTS[k].1 != j {
                    k += 1;
                }
                out[n] = (a, b, k);
                n += 1;
            }
            b += 1;
        }
        a += 1;
    }
    out
}

impl Mul for Taylor3 {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut out = [0.0; 10];
        for &(a, b, k) in PRODUCTS.iter() {
            out[k] += self.c[a] * rhs.c[b];
        }
        Self { c: out }
    }
}

impl Div for Taylor3 {
    type Output = Self;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Self) -> Self {
        self * rhs.recip()
    }
}

impl Add<f64> for Taylor3 {
    type Output = Self;
    fn add(mut self, rhs: f64) -> Self {
        self.c[0] += rhs;
        self
    }
}

impl Mul<f64> for Taylor3 {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        self.scale(rhs)
    }
}
