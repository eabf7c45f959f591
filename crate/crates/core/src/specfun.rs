//! Complex special functions used by the anisotropic fundamental solution.
//!
//! The square root carries its branch cut on the closed negative imaginary
//! axis, so deformed distances of lossy media land in the first quadrant.
//! Hankel functions of the first kind are evaluated by the ascending series for
//! small arguments and through `H_n(z) = (2/π) i^{-(n+1)} K_n(-iz)` with
//! Steed's continued fraction for `K_0`, `K_1` elsewhere. The continued fraction
//! never forms `J` and `Y` separately, so there is no cancellation when `z`
//! approaches the positive imaginary axis and `H` decays exponentially.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Below this modulus (and away from the imaginary axis) the ascending
/// series is used.
const SERIES_RADIUS: f64 = 2.5;
/// Series are also used up to this modulus while `|z| + 2 Im z` stays small
/// enough that cancellation costs less than four digits.
const SERIES_RADIUS_REAL: f64 = 7.0;
const SERIES_GROWTH_LIMIT: f64 = 8.0;

/// Beyond this modulus the large-argument expansion of `K_n` is used.
const ASYMPTOTIC_RADIUS: f64 = 20.0;

const CF_MAX_ITER: usize = 20_000;
const CF_EPS: f64 = 1e-16;

/// Square root with its branch cut on `{-it : t >= 0}`.
///
/// `arg z` is taken in `(-π/2, 3π/2)` so the result has argument in
/// `(-π/4, 3π/4)`. Fails on the cut itself (including zero).
pub fn branch_sqrt(z: Complex64) -> Result<Complex64> {
    if !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::Domain {
            function: "branch_sqrt",
            re: z.re,
            im: z.im,
            reason: "non-finite argument",
        });
    }
    if z.re == 0.0 && z.im <= 0.0 {
        return Err(Error::Domain {
            function: "branch_sqrt",
            re: z.re,
            im: z.im,
            reason: "on the branch cut {-it : t >= 0}",
        });
    }
    Ok(branch_sqrt_unchecked(z))
}

#[inline]
pub(crate) fn branch_sqrt_unchecked(z: Complex64) -> Complex64 {
    let r = principal_sqrt(z);
    // third quadrant: arg z + 2π lies in (π, 3π/2)
    if z.re < 0.0 && z.im < 0.0 {
        -r
    } else {
        r
    }
}

/// Principal square root with `Im z = -0.0` treated as the upper side.
#[inline]
fn principal_sqrt(z: Complex64) -> Complex64 {
    let (a, b) = (z.re, z.im);
    if a == 0.0 && b == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let m = a.hypot(b);
    if a >= 0.0 {
        let t = (0.5 * (m + a)).sqrt();
        Complex64::new(t, b / (2.0 * t))
    } else {
        let t = (0.5 * (m - a)).sqrt();
        let im = if b >= 0.0 { t } else { -t };
        Complex64::new(b.abs() / (2.0 * t), im)
    }
}

fn check_hankel_arg(function: &'static str, z: Complex64) -> Result<()> {
    if !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::Domain {
            function,
            re: z.re,
            im: z.im,
            reason: "non-finite argument",
        });
    }
    if z.re == 0.0 && z.im == 0.0 {
        return Err(Error::Domain {
            function,
            re: z.re,
            im: z.im,
            reason: "logarithmic singularity at zero",
        });
    }
    let slack = 1e-14 * z.norm();
    if z.re < -slack || z.im < -slack {
        return Err(Error::Domain {
            function,
            re: z.re,
            im: z.im,
            reason: "outside the closed first quadrant",
        });
    }
    Ok(())
}

/// `H_0^{(1)}(z)` for `z` in the closed first quadrant, `z != 0`.
pub fn hankel1_0(z: Complex64) -> Result<Complex64> {
    check_hankel_arg("hankel1_0", z)?;
    Ok(hankel1_01_unchecked(z).0)
}

/// `H_1^{(1)}(z)` for `z` in the closed first quadrant, `z != 0`.
pub fn hankel1_1(z: Complex64) -> Result<Complex64> {
    check_hankel_arg("hankel1_1", z)?;
    Ok(hankel1_01_unchecked(z).1)
}

/// `(H_0^{(1)}(z), H_1^{(1)}(z))` evaluated together.
pub fn hankel1_01(z: Complex64) -> Result<(Complex64, Complex64)> {
    check_hankel_arg("hankel1_01", z)?;
    Ok(hankel1_01_unchecked(z))
}

#[inline]
pub(crate) fn hankel1_01_unchecked(z: Complex64) -> (Complex64, Complex64) {
    let r = z.norm();
    if r <= SERIES_RADIUS || (r <= SERIES_RADIUS_REAL && r + 2.0 * z.im <= SERIES_GROWTH_LIMIT) {
        hankel_series(z)
    } else {
        hankel_from_k(z)
    }
}

/// Ascending series for `J_0, J_1, Y_0, Y_1`, combined into `H = J + iY`.
fn hankel_series(z: Complex64) -> (Complex64, Complex64) {
    let q = -0.25 * z * z; // -z²/4
    let mut term0 = Complex64::new(1.0, 0.0); // q^k / (k!)^2
    let mut term1 = Complex64::new(1.0, 0.0); // q^k / (k!(k+1)!)
    let mut j0 = term0;
    let mut j1s = term1;
    let mut harmonic = 0.0; // H_k
    let mut y0s = Complex64::new(0.0, 0.0); // Σ_{k>=1} H_k q^k/(k!)^2
                                            // Σ_{k>=0} (ψ(k+1)+ψ(k+2)) q^k/(k!(k+1)!) with ψ(k+1) = -γ + H_k
    let mut y1s = Complex64::new(1.0 - 2.0 * EULER_GAMMA, 0.0);
    let scale = 1.0 + z.norm_sqr();
    let mut k = 0usize;
    loop {
        k += 1;
        let kf = k as f64;
        term0 *= q / (kf * kf);
        term1 *= q / (kf * (kf + 1.0));
        harmonic += 1.0 / kf;
        j0 += term0;
        j1s += term1;
        y0s += harmonic * term0;
        // ψ(k+1) + ψ(k+2) = -2γ + H_k + H_{k+1}
        let psi = -2.0 * EULER_GAMMA + harmonic + (harmonic + 1.0 / (kf + 1.0));
        y1s += psi * term1;
        // Squared moduli keep hypot out of the inner loop.
        let weight = (scale * (1.0 + harmonic)).powi(2);
        if term0.norm_sqr() * weight < 1e-34 * j0.norm_sqr().max(1e-300)
            && term1.norm_sqr() * weight < 1e-34 * j1s.norm_sqr().max(1e-300)
        {
            break;
        }
        if k > 200 {
            break;
        }
    }
    let half_z = 0.5 * z;
    let log_term = half_z.ln();
    let j1 = half_z * j1s;
    let two_pi = 2.0 / PI;
    let y0 = two_pi * (log_term + EULER_GAMMA) * j0 - two_pi * y0s;
    let y1 = -two_pi / z + two_pi * log_term * j1 - (half_z / PI) * y1s;
    let i = Complex64::new(0.0, 1.0);
    (j0 + i * y0, j1 + i * y1)
}

/// `H_0, H_1` through the modified Bessel functions `K_0(w), K_1(w)`, `w = -iz`.
fn hankel_from_k(z: Complex64) -> (Complex64, Complex64) {
    let w = Complex64::new(z.im, -z.re);
    let (k0, k1) = if z.norm() >= ASYMPTOTIC_RADIUS {
        bessel_k01_asymptotic(w)
    } else {
        bessel_k01_steed(w)
    };
    // H_0(z) = -(2i/π) K_0(-iz),  H_1(z) = -(2/π) K_1(-iz)
    (Complex64::new(0.0, -2.0 / PI) * k0, -(2.0 / PI) * k1)
}

/// Steed's algorithm (Temme's CF2) for `K_0(w)` and `K_1(w)`, `Re w >= 0`.
fn bessel_k01_steed(w: Complex64) -> (Complex64, Complex64) {
    let one = Complex64::new(1.0, 0.0);
    let a1 = 0.25;
    let mut b = 2.0 * (one + w);
    let mut d = one / b;
    let mut h = d;
    let mut delh = d;
    let mut q1 = Complex64::new(0.0, 0.0);
    let mut q2 = one;
    let mut q = Complex64::new(a1, 0.0);
    let mut c = a1;
    let mut a = -a1;
    let mut s = one + q * delh;
    for i in 2..=CF_MAX_ITER {
        let fi = i as f64;
        a -= 2.0 * (fi - 1.0);
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = one / (b + a * d);
        delh = (b * d - one) * delh;
        h += delh;
        let dels = q * delh;
        s += dels;
        if dels.norm() < CF_EPS * s.norm() {
            break;
        }
    }
    h *= a1;
    let k0 = (Complex64::new(PI, 0.0) / (2.0 * w)).sqrt() * (-w).exp() / s;
    let k1 = k0 * (w + 0.5 - h) / w;
    (k0, k1)
}

/// Large-argument expansion `K_n(w) ~ sqrt(π/2w) e^{-w} Σ a_k(n) w^{-k}`,
/// truncated at the smallest term.
fn bessel_k01_asymptotic(w: Complex64) -> (Complex64, Complex64) {
    let one = Complex64::new(1.0, 0.0);
    let inv = one / w;
    let mut t0 = one;
    let mut t1 = one;
    let mut s0 = one;
    let mut s1 = one;
    let mut last0 = f64::INFINITY;
    let mut last1 = f64::INFINITY;
    let (mut done0, mut done1) = (false, false);
    for k in 1..200 {
        let odd = (2 * k - 1) as f64;
        let kf = k as f64;
        if !done0 {
            let n0 = t0 * inv * ((0.0 - odd * odd) / (8.0 * kf));
            let m = n0.norm();
            if m >= last0 || m < 1e-17 * s0.norm() {
                done0 = true;
            } else {
                t0 = n0;
                s0 += t0;
                last0 = m;
            }
        }
        if !done1 {
            let n1 = t1 * inv * ((4.0 - odd * odd) / (8.0 * kf));
            let m = n1.norm();
            if m >= last1 || m < 1e-17 * s1.norm() {
                done1 = true;
            } else {
                t1 = n1;
                s1 += t1;
                last1 = m;
            }
        }
        if done0 && done1 {
            break;
        }
    }
    let pre = (Complex64::new(PI, 0.0) / (2.0 * w)).sqrt() * (-w).exp();
    (pre * s0, pre * s1)
}
