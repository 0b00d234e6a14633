use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::{Error, Result};

/// C(n, k) as an exact integer; zero when k > n.
pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

fn ratio(num: BigUint, den: BigUint) -> BigRational {
    BigRational::new(num.into(), den.into())
}

fn check(l: u64, b: u64, m: u64) -> Result<()> {
    if l == 0 {
        return Err(Error::DomainError("watermark length L must be >= 1".into()));
    }
    if l > b {
        return Err(Error::DomainError(format!("L = {l} exceeds candidate blocks B = {b}")));
    }
    if m > b {
        return Err(Error::DomainError(format!("M = {m} exceeds candidate blocks B = {b}")));
    }
    Ok(())
}

/// Probability that M modified blocks out of B hit at least one of the L
/// watermark blocks, as the hypergeometric sum over the number of hits.
pub fn p_attack_exact(l: u64, b: u64, m: u64) -> Result<BigRational> {
    check(l, b, m)?;
    let mut num = BigUint::zero();
    for i in 1..=l.min(m) {
        num += binomial(m, i) * binomial(b - m, l - i);
    }
    Ok(ratio(num, binomial(b, l)))
}

/// 1 - C(B-M, L) / C(B, L).
pub fn p_attack_closed(l: u64, b: u64, m: u64) -> Result<BigRational> {
    check(l, b, m)?;
    Ok(BigRational::one() - ratio(binomial(b - m, l), binomial(b, l)))
}

pub fn p_attack(l: u64, b: u64, m: u64) -> Result<f64> {
    Ok(to_f64(&p_attack_exact(l, b, m)?))
}

/// p_attack raised to the N-th power, treating the N watermarks as
/// independent.
pub fn p_attack_n(l: u64, b: u64, m: u64, n: u32) -> Result<f64> {
    if n == 0 {
        return Err(Error::DomainError("watermark count N must be >= 1".into()));
    }
    Ok(p_attack(l, b, m)?.powi(n as i32))
}

/// Exact probability that M modified blocks hit every one of N watermarks
/// placed on pairwise-disjoint sets of L blocks each, by inclusion-exclusion
/// over the watermarks that are missed.
pub fn p_attack_disjoint(l: u64, b: u64, m: u64, n: u32) -> Result<f64> {
    check(l, b, m)?;
    let n = n as u64;
    if n == 0 || l * n > b {
        return Err(Error::DomainError(format!(
            "N = {n} watermarks of L = {l} do not fit in B = {b}"
        )));
    }
    let total = binomial(b, m);
    let mut acc = BigRational::zero();
    for k in 0..=n {
        let term = ratio(binomial(n, k) * binomial(b - k * l, m), total.clone());
        if k % 2 == 0 {
            acc += term;
        } else {
            acc -= term;
        }
    }
    Ok(to_f64(&acc))
}

pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Insertable groups under budget: floor(alpha * psi / T).
pub fn budget_groups(alpha: f64, psi: u64, threshold: u32) -> Result<u64> {
    if threshold == 0 {
        return Err(Error::DomainError("gas threshold T must be >= 1".into()));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::DomainError(format!(
            "alpha must be finite and >= 0, got {alpha}"
        )));
    }
    // small tolerance so 0.2 * 45 / 9 stays 1 instead of 0.999..
    Ok((alpha * psi as f64 / threshold as f64 + 1e-9).floor() as u64)
}

/// Expected modified candidate blocks: floor(alpha * psi / T) * B / C,
/// clamped to B.
pub fn expected_modified(alpha: f64, psi: u64, threshold: u32, b: u64, c: u64) -> Result<f64> {
    if c == 0 {
        return Err(Error::DomainError("C must be >= 1".into()));
    }
    if b > c {
        return Err(Error::DomainError(format!("B = {b} exceeds C = {c}")));
    }
    let k = budget_groups(alpha, psi, threshold)?;
    Ok((k as f64 * b as f64 / c as f64).min(b as f64))
}

/// p_attack_n at a fractional M, linearly interpolated between floor and ceil.
pub fn p_attack_n_interpolated(l: u64, b: u64, m: f64, n: u32) -> Result<f64> {
    if !(m >= 0.0 && m <= b as f64) {
        return Err(Error::DomainError(format!("M = {m} outside [0, {b}]")));
    }
    let lo = m.floor() as u64;
    let hi = m.ceil() as u64;
    let p_lo = p_attack_n(l, b, lo, n)?;
    if hi == lo {
        return Ok(p_lo);
    }
    let p_hi = p_attack_n(l, b, hi, n)?;
    let t = m - lo as f64;
    Ok(p_lo + t * (p_hi - p_lo))
}
