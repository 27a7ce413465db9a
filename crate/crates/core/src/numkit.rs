//! Fixed-size real linear algebra for the 2-state servo models.
//!
//! Only what the discretization and error-dynamics analysis need: 2-vectors,
//! 2×2 matrices, the matrix exponential, its integral over one sample, and
//! closed-form eigenvalues.

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{invalid, Result};

/// Absolute tolerance used for matrix-function identities.
pub const MATRIX_FN_TOL: f64 = 1e-12;

/// Width, in ulps of the discriminant terms, treated as a repeated eigenvalue.
const DOUBLE_ROOT_ULPS: f64 = 16.0;

/// Scaling threshold for the Taylor core of the general exponential.
const SCALE_NORM: f64 = 0.5;
/// Taylor terms used once the argument has been scaled below `SCALE_NORM`.
const TAYLOR_TERMS: usize = 18;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2(pub [f64; 2]);

impl Vec2 {
    pub const ZERO: Vec2 = Vec2([0.0, 0.0]);

    pub const fn new(a: f64, b: f64) -> Self {
        Vec2([a, b])
    }

    pub fn dot(&self, other: &Vec2) -> f64 {
        self.0[0] * other.0[0] + self.0[1] * other.0[1]
    }

    pub fn norm1(&self) -> f64 {
        self.0[0].abs() + self.0[1].abs()
    }

    pub fn norm_inf(&self) -> f64 {
        self.0[0].abs().max(self.0[1].abs())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Row vector `selfᵀ M`.
    pub fn left_mul(&self, m: &Mat2) -> Vec2 {
        let [a, b] = self.0;
        Vec2([a * m.0[0][0] + b * m.0[1][0], a * m.0[0][1] + b * m.0[1][1]])
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2([self.0[0] + rhs.0[0], self.0[1] + rhs.0[1]])
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2([self.0[0] - rhs.0[0], self.0[1] - rhs.0[1]])
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2([-self.0[0], -self.0[1]])
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    fn mul(self, rhs: Vec2) -> Vec2 {
        Vec2([self * rhs.0[0], self * rhs.0[1]])
    }
}

/// Row-major 2×2 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Mat2 {
    pub const ZERO: Mat2 = Mat2([[0.0, 0.0], [0.0, 0.0]]);
    pub const IDENTITY: Mat2 = Mat2([[1.0, 0.0], [0.0, 1.0]]);

    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2([[a, b], [c, d]])
    }

    /// Outer product `u vᵀ`.
    pub fn outer(u: &Vec2, v: &Vec2) -> Self {
        Mat2([[u.0[0] * v.0[0], u.0[0] * v.0[1]], [u.0[1] * v.0[0], u.0[1] * v.0[1]]])
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.0[row][col]
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn det(&self) -> f64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn transpose(&self) -> Self {
        Mat2([[self.0[0][0], self.0[1][0]], [self.0[0][1], self.0[1][1]]])
    }

    /// Induced ∞-norm (maximum absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        self.0.iter().map(|row| row[0].abs() + row[1].abs()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Mat2) -> f64 {
        let d = *self - *other;
        d.0.iter().flatten().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|v| v.is_finite())
    }

    pub fn scale(&self, s: f64) -> Self {
        Mat2([
            [s * self.0[0][0], s * self.0[0][1]],
            [s * self.0[1][0], s * self.0[1][1]],
        ])
    }

    /// Solve `self · x = rhs`; `None` when the matrix is numerically singular.
    pub fn solve(&self, rhs: &Vec2) -> Option<Vec2> {
        let det = self.det();
        let scale = self.norm_inf().powi(2);
        if det == 0.0 || det.abs() <= f64::EPSILON * scale {
            return None;
        }
        let [[a, b], [c, d]] = self.0;
        let [p, q] = rhs.0;
        Some(Vec2([(d * p - b * q) / det, (a * q - c * p) / det]))
    }

    /// `selfⁿ` by repeated squaring.
    pub fn powi(&self, mut n: u32) -> Self {
        let mut base = *self;
        let mut acc = Mat2::IDENTITY;
        while n > 0 {
            if n & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            n >>= 1;
        }
        acc
    }

    /// First column zero: the shape of every servo state matrix.
    fn has_servo_structure(&self) -> bool {
        self.0[0][0] == 0.0 && self.0[1][0] == 0.0
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, rhs: Mat2) -> Mat2 {
        let mut out = self;
        for (r, row) in out.0.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v += rhs.0[r][c];
            }
        }
        out
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, rhs: Mat2) -> Mat2 {
        self + (-rhs)
    }
}

impl Neg for Mat2 {
    type Output = Mat2;
    fn neg(self) -> Mat2 {
        self.scale(-1.0)
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, rhs: Mat2) -> Mat2 {
        let a = &self.0;
        let b = &rhs.0;
        Mat2([
            [
                a[0][0] * b[0][0] + a[0][1] * b[1][0],
                a[0][0] * b[0][1] + a[0][1] * b[1][1],
            ],
            [
                a[1][0] * b[0][0] + a[1][1] * b[1][0],
                a[1][0] * b[0][1] + a[1][1] * b[1][1],
            ],
        ])
    }
}

impl Mul<Vec2> for Mat2 {
    type Output = Vec2;
    fn mul(self, v: Vec2) -> Vec2 {
        Vec2([
            self.0[0][0] * v.0[0] + self.0[0][1] * v.0[1],
            self.0[1][0] * v.0[0] + self.0[1][1] * v.0[1],
        ])
    }
}

/// The two eigenvalues of a real 2×2 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigPair2(pub Complex64, pub Complex64);

impl EigPair2 {
    pub fn real(a: f64, b: f64) -> Self {
        EigPair2(Complex64::new(a, 0.0), Complex64::new(b, 0.0))
    }

    pub fn conjugate(re: f64, im: f64) -> Self {
        EigPair2(Complex64::new(re, im), Complex64::new(re, -im))
    }

    pub fn spectral_radius(&self) -> f64 {
        self.0.norm().max(self.1.norm())
    }

    pub fn sum(&self) -> Complex64 {
        self.0 + self.1
    }

    pub fn product(&self) -> Complex64 {
        self.0 * self.1
    }

    /// Both real, or a conjugate pair, to within `tol`.
    pub fn is_self_conjugate(&self, tol: f64) -> bool {
        let both_real = self.0.im.abs() <= tol && self.1.im.abs() <= tol;
        both_real || (self.0 - self.1.conj()).norm() <= tol
    }

    /// Distance to another pair under the better of the two orderings.
    pub fn distance(&self, other: &EigPair2) -> f64 {
        let straight = (self.0 - other.0).norm().max((self.1 - other.1).norm());
        let swapped = (self.0 - other.1).norm().max((self.1 - other.0).norm());
        straight.min(swapped)
    }
}

fn check_finite(m: &Mat2) -> Result<()> {
    if m.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("matrix has non-finite entries: {m:?}")))
    }
}

/// (eˣ − 1)/x
fn exprel1(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x.exp_m1() / x
    }
}

/// (eˣ − 1 − x)/x²
fn exprel2(x: f64) -> f64 {
    if x.abs() < 0.1 {
        // Σ xⁱ/(i+2)!
        let mut term = 0.5;
        let mut sum = 0.0;
        for i in 0..20 {
            sum += term;
            term *= x / (i as f64 + 3.0);
        }
        sum
    } else {
        (x.exp_m1() - x) / (x * x)
    }
}

/// Scaled Taylor cores: returns `(e^N, ∫₀¹ e^{Nσ} dσ)`.
fn taylor_exp_and_integral(n: &Mat2) -> (Mat2, Mat2) {
    let norm = n.norm_inf();
    let squarings = if norm > SCALE_NORM {
        (norm / SCALE_NORM).log2().ceil() as i32
    } else {
        0
    };
    let small = n.scale(0.5f64.powi(squarings));

    let mut exp = Mat2::IDENTITY;
    let mut integral = Mat2::IDENTITY;
    let mut power = Mat2::IDENTITY;
    let mut fact = 1.0;
    for i in 1..=TAYLOR_TERMS {
        power = power * small;
        fact *= i as f64;
        exp = exp + power.scale(1.0 / fact);
        integral = integral + power.scale(1.0 / (fact * (i as f64 + 1.0)));
    }
    // ∫₀¹ e^{2Nσ}dσ = ½(I + e^N)∫₀¹ e^{Nσ}dσ
    for _ in 0..squarings {
        integral = (Mat2::IDENTITY + exp).scale(0.5) * integral;
        exp = exp * exp;
    }
    (exp, integral)
}

/// Matrix exponential `e^M`.
pub fn expm2(m: &Mat2) -> Result<Mat2> {
    check_finite(m)?;
    if m.has_servo_structure() {
        let q = m.0[0][1];
        let r = m.0[1][1];
        return Ok(Mat2::new(1.0, q * exprel1(r), 0.0, r.exp()));
    }
    Ok(taylor_exp_and_integral(m).0)
}

/// `Φ(T) = ∫₀ᵀ e^{Mτ} dτ`, computed without inverting `M`.
pub fn phi_integral(m: &Mat2, period: f64) -> Result<Mat2> {
    check_finite(m)?;
    if !(period.is_finite() && period > 0.0) {
        return Err(invalid(format!("integration period must be > 0, got {period}")));
    }
    let n = m.scale(period);
    let unit = if n.has_servo_structure() {
        let q = n.0[0][1];
        let r = n.0[1][1];
        Mat2::new(1.0, q * exprel2(r), 0.0, exprel1(r))
    } else {
        taylor_exp_and_integral(&n).1
    };
    Ok(unit.scale(period))
}

/// Eigenvalues as the roots of `λ² − tr(M)λ + det(M)`.
pub fn eig2(m: &Mat2) -> Result<EigPair2> {
    check_finite(m)?;
    let half_tr = 0.5 * m.trace();
    let det = m.det();
    let mut disc = half_tr * half_tr - det;
    // A discriminant inside its own rounding noise is a repeated root.
    if disc.abs() <= DOUBLE_ROOT_ULPS * f64::EPSILON * (half_tr * half_tr + det.abs()) {
        disc = 0.0;
    }
    if disc >= 0.0 {
        let root = disc.sqrt();
        // Larger-magnitude root first, the other from Vieta to avoid cancellation.
        let big = if half_tr >= 0.0 { half_tr + root } else { half_tr - root };
        let small = if big == 0.0 { 0.0 } else { det / big };
        Ok(EigPair2::real(big, small))
    } else {
        Ok(EigPair2::conjugate(half_tr, (-disc).sqrt()))
    }
}
