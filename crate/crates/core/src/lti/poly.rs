//! Real-coefficient polynomials stored in descending powers of `s`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative residual accepted for a polynomial root of monic `p`:
/// `|p(r)| <= ROOT_TOL * max(max|c_k|, sum |c_k| |r|^k)`. The second term is the
/// rounding scale of evaluating `p` at `r`, which dominates for roots well
/// outside the unit disk.
pub const ROOT_TOL: f64 = 1e-8;

/// Drop leading zero coefficients. An all-zero input becomes `[0.0]`.
pub fn trim(coefs: &[f64]) -> Vec<f64> {
    match coefs.iter().position(|c| *c != 0.0) {
        Some(i) => coefs[i..].to_vec(),
        None => vec![0.0],
    }
}

pub fn degree(coefs: &[f64]) -> usize {
    trim(coefs).len() - 1
}

pub fn is_zero(coefs: &[f64]) -> bool {
    coefs.iter().all(|c| *c == 0.0)
}

/// Horner evaluation at a complex point.
pub fn eval(coefs: &[f64], s: Complex64) -> Complex64 {
    coefs
        .iter()
        .fold(Complex64::new(0.0, 0.0), |acc, c| acc * s + *c)
}

/// Horner evaluation with complex coefficients.
pub fn eval_complex(coefs: &[Complex64], s: Complex64) -> Complex64 {
    coefs
        .iter()
        .fold(Complex64::new(0.0, 0.0), |acc, c| acc * s + *c)
}

pub fn eval_real(coefs: &[f64], x: f64) -> f64 {
    coefs.iter().fold(0.0, |acc, c| acc * x + c)
}

pub fn derivative(coefs: &[f64]) -> Vec<f64> {
    let n = coefs.len();
    if n <= 1 {
        return vec![0.0];
    }
    coefs[..n - 1]
        .iter()
        .enumerate()
        .map(|(i, c)| c * (n - 1 - i) as f64)
        .collect()
}

pub fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len().max(b.len());
    let mut out = vec![0.0; n];
    for (i, x) in a.iter().enumerate() {
        out[n - a.len() + i] += x;
    }
    for (i, y) in b.iter().enumerate() {
        out[n - b.len() + i] += y;
    }
    out
}

pub fn scale(a: &[f64], k: f64) -> Vec<f64> {
    a.iter().map(|c| c * k).collect()
}

/// All complex roots of a polynomial, with multiplicity.
///
/// Roots are the eigenvalues of the companion matrix of the monic polynomial,
/// each refined by a few Newton steps. A root is accepted when its residual
/// satisfies [`ROOT_TOL`]; otherwise a [`Error::NumericFailure`] carries every
/// residual.
pub fn roots(coefs: &[f64]) -> Result<Vec<Complex64>> {
    let p = trim(coefs);
    if is_zero(&p) {
        return Err(Error::InvalidSystem("zero polynomial has no roots".into()));
    }
    let n = p.len() - 1;
    if n == 0 {
        return Ok(Vec::new());
    }
    let lead = p[0];
    let monic: Vec<f64> = p.iter().map(|c| c / lead).collect();

    // Trailing zero coefficients are exact roots at the origin.
    let zeros_at_origin = monic.iter().rev().take_while(|c| **c == 0.0).count();
    let reduced = &monic[..monic.len() - zeros_at_origin];
    let m = reduced.len() - 1;

    let mut found: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); zeros_at_origin];
    if m > 0 {
        let mut companion = DMatrix::<f64>::zeros(m, m);
        for j in 0..m {
            companion[(0, j)] = -reduced[j + 1];
        }
        for i in 1..m {
            companion[(i, i - 1)] = 1.0;
        }
        let eig = companion.complex_eigenvalues();
        let dp = derivative(reduced);
        for z in eig.iter() {
            found.push(polish(reduced, &dp, Complex64::new(z.re, z.im)));
        }
    }

    let residuals: Vec<f64> = found.iter().map(|r| relative_residual(&monic, *r)).collect();
    let worst = residuals.iter().cloned().fold(0.0, f64::max);
    let tolerance = ROOT_TOL;
    if !worst.is_finite() || worst > tolerance {
        return Err(Error::NumericFailure {
            residuals,
            worst_residual: worst,
            tolerance,
        });
    }
    found.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(b.im.partial_cmp(&a.im).unwrap_or(std::cmp::Ordering::Equal))
    });
    Ok(found)
}

/// `|p(r)| / max(max|c_k|, sum |c_k| |r|^k)`
pub fn relative_residual(p: &[f64], r: Complex64) -> f64 {
    let coef_scale = p.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let eval_scale = eval_real(&p.iter().map(|c| c.abs()).collect::<Vec<_>>(), r.norm());
    eval(p, r).norm() / coef_scale.max(eval_scale)
}

fn polish(p: &[f64], dp: &[f64], mut z: Complex64) -> Complex64 {
    let mut best = z;
    let mut best_res = eval(p, z).norm();
    for _ in 0..8 {
        let d = eval(dp, z);
        if d.norm() == 0.0 {
            break;
        }
        z -= eval(p, z) / d;
        let res = eval(p, z).norm();
        if !res.is_finite() {
            break;
        }
        if res < best_res {
            best = z;
            best_res = res;
        }
        if res == 0.0 {
            break;
        }
    }
    // Snap numerically real roots of real polynomials onto the axis.
    if best.im != 0.0 && best.im.abs() <= 1e-12 * best.re.abs().max(1.0) {
        let real = Complex64::new(best.re, 0.0);
        if eval(p, real).norm() <= best_res {
            best = real;
        }
    }
    best
}
