//! Gamma and lower incomplete gamma functions.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const EPS: f64 = 1e-16;
const MAX_TERMS: usize = 10_000;

/// `Γ(s)` for `s > 0`. Integers and half-integers up to 171 use the exact
/// recurrence from `Γ(1) = 1` and `Γ(1/2) = √π`; other arguments use the
/// Lanczos approximation (g = 7, nine terms).
pub fn gamma(s: f64) -> f64 {
    assert!(s > 0.0, "gamma needs a positive argument, got {s}");
    let twice = 2.0 * s;
    if twice.fract() == 0.0 && s <= 171.0 {
        let (mut x, mut acc) = if twice as u64 % 2 == 0 { (1.0, 1.0) } else { (0.5, PI.sqrt()) };
        while x < s {
            acc *= x;
            x += 1.0;
        }
        return acc;
    }
    lanczos(s)
}

fn lanczos(s: f64) -> f64 {
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if s < 0.5 {
        return PI / ((PI * s).sin() * lanczos(1.0 - s));
    }
    let x = s - 1.0;
    let mut a = C[0];
    for (i, c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    let t = x + G + 0.5;
    (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
}

/// Series `e^{−z} Σₙ zⁿ / (s(s+1)…(s+n)) = γ(s,z)/z^s`.
fn scaled_series(s: f64, z: f64) -> f64 {
    let mut term = 1.0 / s;
    let mut sum = term;
    for n in 1..MAX_TERMS {
        term *= z / (s + n as f64);
        sum += term;
        if term.abs() < EPS * sum.abs() {
            break;
        }
    }
    sum * (-z).exp()
}

/// Upper incomplete gamma `Γ(s,z)` by Lentz's continued fraction (valid for
/// `z > s + 1`).
fn upper_continued_fraction(s: f64, z: f64) -> f64 {
    let tiny = 1e-300;
    let mut b = z + 1.0 - s;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_TERMS {
        let an = -(i as f64) * (i as f64 - s);
        b += 2.0;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    (s * z.ln() - z).exp() * h
}

fn check(s: f64, z: f64) -> Result<()> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::InvalidArgument(format!("gamma order must be positive, got {s}")));
    }
    if !(z >= 0.0) {
        return Err(Error::InvalidArgument(format!("incomplete gamma needs z >= 0, got {z}")));
    }
    Ok(())
}

/// `γ(s,z) = ∫₀^z a^{s−1} e^{−a} da`.
pub fn lower_incomplete_gamma(s: f64, z: f64) -> Result<f64> {
    check(s, z)?;
    if z == 0.0 {
        return Ok(0.0);
    }
    if z.is_infinite() {
        return Ok(gamma(s));
    }
    if z < s + 1.0 {
        Ok(scaled_series(s, z) * z.powf(s))
    } else {
        Ok((gamma(s) - upper_continued_fraction(s, z)).max(0.0))
    }
}

/// `γ(s,z)/z^s`, finite at `z = 0` where it equals `1/s`.
pub fn scaled_lower_gamma(s: f64, z: f64) -> Result<f64> {
    check(s, z)?;
    if z < s + 1.0 {
        Ok(scaled_series(s, z))
    } else {
        Ok(lower_incomplete_gamma(s, z)? / z.powf(s))
    }
}

/// `γ(11/2, z)`, the radial integral `∫₀^z a^{9/2} e^{−a} da`.
pub fn gamma_eleven_halves(z: f64) -> Result<f64> {
    lower_incomplete_gamma(5.5, z)
}
