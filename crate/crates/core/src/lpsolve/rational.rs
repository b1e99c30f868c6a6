use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::Rational;

pub fn int(n: i64) -> Rational {
    BigRational::from_integer(BigInt::from(n))
}

pub fn ratio(n: i64, d: i64) -> Rational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Best continued-fraction convergent of `x` with denominator at most `max_den`, stopping
/// early once the convergent is within `tol` (relative to max(1, |x|)).
pub fn approximate(x: f64, max_den: u64, tol: f64) -> Rational {
    if !x.is_finite() {
        return Rational::zero();
    }
    let neg = x < 0.0;
    let target = x.abs();
    let (mut h0, mut h1): (i128, i128) = (0, 1);
    let (mut k0, mut k1): (i128, i128) = (1, 0);
    let mut r = target;
    let scale = target.max(1.0);
    loop {
        let a = r.floor();
        if a > 1e15 {
            break;
        }
        let a = a as i128;
        let h2 = a * h1 + h0;
        let k2 = a * k1 + k0;
        if k2 > max_den as i128 {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        if (target - h1 as f64 / k1 as f64).abs() <= tol * scale {
            break;
        }
        let frac = r - a as f64;
        if frac <= f64::EPSILON {
            break;
        }
        r = 1.0 / frac;
    }
    if k1 == 0 {
        // the first partial quotient already overflowed the bound
        return Rational::from_integer(BigInt::from(target.round() as i128) * if neg { -1 } else { 1 });
    }
    let q = BigRational::new(BigInt::from(h1), BigInt::from(k1));
    if neg {
        -q
    } else {
        q
    }
}

/// Scales a vector by a positive factor so that it becomes integral with coprime entries.
pub fn integerize(values: &[Rational]) -> (Vec<BigInt>, Rational) {
    let lcm = values.iter().fold(BigInt::one(), |acc, v| acc.lcm(v.denom()));
    let ints: Vec<BigInt> = values.iter().map(|v| (v * &lcm).to_integer()).collect();
    let gcd = ints.iter().fold(BigInt::zero(), |acc, v| acc.gcd(v));
    if gcd.is_zero() {
        return (ints, Rational::one());
    }
    let ints = ints.into_iter().map(|v| v / &gcd).collect();
    (ints, BigRational::new(lcm, gcd.abs()))
}

pub fn format(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn parse(s: &str) -> Option<Rational> {
    let s = s.trim();
    match s.split_once('/') {
        Some((n, d)) => {
            let d: BigInt = d.trim().parse().ok()?;
            if d.is_zero() {
                return None;
            }
            Some(BigRational::new(n.trim().parse().ok()?, d))
        }
        None => Some(BigRational::from_integer(s.parse().ok()?)),
    }
}
