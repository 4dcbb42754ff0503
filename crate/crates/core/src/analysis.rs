//! Per-slot fault probabilities under binomial relay sampling.
//!
//! All tails are exact rational sums. Values are "potential fault"
//! probabilities: the chance that enough Byzantine relays are sampled for
//! the adversary to be able to break a property, not that it does.

use std::fmt::Write as _;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

pub const SECONDS_PER_YEAR: f64 = 365.25 * 24.0 * 3600.0;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AnalysisError {
    #[error("probability {0} outside [0, 1]")]
    Probability(String),
    #[error("cannot parse {0:?} as a decimal")]
    Parse(String),
    #[error("{0}")]
    Model(String),
    #[error("chernoff bound is vacuous for beta = {0} (needs 0 < beta < 1/5)")]
    Vacuous(String),
}

/// Parses `"0.15"`, `"3/20"`, `"1e-3"` or an integer into an exact rational.
pub fn parse_decimal(s: &str) -> Result<BigRational, AnalysisError> {
    let err = || AnalysisError::Parse(s.to_string());
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n = BigInt::from_str(n.trim()).map_err(|_| err())?;
        let d = BigInt::from_str(d.trim()).map_err(|_| err())?;
        if d.is_zero() {
            return Err(err());
        }
        return Ok(BigRational::new(n, d));
    }
    let (mantissa, exp) = match s.split_once(['e', 'E']) {
        Some((m, e)) => (m, e.parse::<i32>().map_err(|_| err())?),
        None => (s, 0),
    };
    let (neg, mantissa) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int.is_empty() && frac.is_empty() || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(err());
    }
    let digits = format!("{int}{frac}");
    let mut value = BigRational::new(
        BigInt::from_str(&digits).map_err(|_| err())?,
        BigInt::from(10u32).pow(frac.len() as u32),
    );
    let ten = BigRational::from_integer(BigInt::from(10u32));
    let scale = num_traits::pow(ten, exp.unsigned_abs() as usize);
    value = if exp >= 0 { value * scale } else { value / scale };
    Ok(if neg { -value } else { value })
}

fn check_probability(p: &BigRational) -> Result<(), AnalysisError> {
    if p.is_negative() || *p > BigRational::one() {
        return Err(AnalysisError::Probability(p.to_string()));
    }
    Ok(())
}

fn binomial_coefficients(n: u64) -> Vec<BigInt> {
    let mut row = Vec::with_capacity(n as usize + 1);
    let mut c = BigInt::one();
    row.push(c.clone());
    for k in 0..n {
        c = c * (n - k) / (k + 1);
        row.push(c.clone());
    }
    row
}

/// Sum of `C(n,k) p^k (1-p)^(n-k)` for `k` in `from..=n`.
fn tail_from(n: u64, p: &BigRational, from: u64) -> BigRational {
    if from > n {
        return BigRational::zero();
    }
    // p = a/b, so each term is C(n,k) a^k (b-a)^(n-k) / b^n.
    let a = p.numer().clone();
    let b = p.denom().clone();
    let c = &b - &a;
    let coeffs = binomial_coefficients(n);
    let mut sum = BigInt::zero();
    for k in from..=n {
        sum += &coeffs[k as usize] * a.pow(k as u32) * c.pow((n - k) as u32);
    }
    BigRational::new(sum, b.pow(n as u32))
}

/// Exact probability mass function of `Binomial(n, p)`.
pub fn binomial_pmf(n: u64, p: &BigRational) -> Result<Vec<BigRational>, AnalysisError> {
    check_probability(p)?;
    let a = p.numer().clone();
    let b = p.denom().clone();
    let c = &b - &a;
    let denom = b.pow(n as u32);
    Ok(binomial_coefficients(n)
        .into_iter()
        .enumerate()
        .map(|(k, coeff)| BigRational::new(coeff * a.pow(k as u32) * c.pow(n as u32 - k as u32), denom.clone()))
        .collect())
}

/// `P[X > t]` for `X ~ Binomial(n, p)`; a fractional `t` counts from
/// `floor(t) + 1`.
pub fn binomial_tail(n: u64, p: &BigRational, t: &BigRational) -> Result<BigRational, AnalysisError> {
    check_probability(p)?;
    if t.is_negative() {
        return Ok(BigRational::one());
    }
    let floor = t.floor().to_integer();
    let from = floor.to_u64().map_or(u64::MAX, |f| f.saturating_add(1));
    Ok(tail_from(n, p, from))
}

/// `P[X >= k]`.
pub fn binomial_tail_at_least(n: u64, p: &BigRational, k: u64) -> Result<BigRational, AnalysisError> {
    check_probability(p)?;
    Ok(tail_from(n, p, k))
}

/// Lossy conversion for display and comparison with floating-point bounds.
/// Accurate for values far below `f64::MIN_POSITIVE` too, down to zero.
pub fn to_f64(x: &BigRational) -> f64 {
    if x.is_zero() {
        return 0.0;
    }
    // Scale numerator so the quotient keeps 64 significant bits.
    let n = x.numer().abs();
    let d = x.denom().clone();
    let shift = d.bits() as i64 - n.bits() as i64 + 64;
    let q = if shift >= 0 { (n << shift as usize) / d } else { n / (d << (-shift) as usize) };
    let v = q.to_f64().unwrap_or(f64::INFINITY) * 2f64.powi(-(shift as i32));
    if x.is_negative() {
        -v
    } else {
        v
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FaultModel {
    pub n_relay: u64,
    /// Per-relay corruption probability.
    pub f: BigRational,
    pub gamma: BigRational,
    pub phi: BigRational,
    pub mu: BigRational,
    /// Hiding threshold, in relays. May be fractional.
    pub t: BigRational,
}

impl FaultModel {
    /// 512 relays, `f = 0.15`, `(gamma, phi, mu) = (0.3, 0.55, 0.8)`,
    /// `T = 0.15 * 512`.
    pub fn reference() -> Self {
        let d = |s| parse_decimal(s).expect("literal");
        FaultModel {
            n_relay: 512,
            f: d("0.15"),
            gamma: d("0.3"),
            phi: d("0.55"),
            mu: d("0.8"),
            t: d("76.8"),
        }
    }

    pub fn validate(&self) -> Result<(), AnalysisError> {
        check_probability(&self.f)?;
        for (name, v) in [("gamma", &self.gamma), ("phi", &self.phi), ("mu", &self.mu)] {
            if v.is_negative() || *v > BigRational::one() {
                return Err(AnalysisError::Model(format!("{name} = {v} outside [0, 1]")));
            }
        }
        if self.t.is_negative() {
            return Err(AnalysisError::Model(format!("T = {} is negative", self.t)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FaultReport {
    pub p_liveness: BigRational,
    pub p_scr: BigRational,
    pub p_hiding: BigRational,
}

/// Mean time between faults in years, infinite when `p` is zero.
pub fn mtbf_years(p: &BigRational, slot_ms: f64) -> f64 {
    let p = to_f64(p);
    if p == 0.0 {
        f64::INFINITY
    } else {
        slot_ms / 1000.0 / p / SECONDS_PER_YEAR
    }
}

pub fn fault_probabilities(model: &FaultModel) -> Result<FaultReport, AnalysisError> {
    model.validate()?;
    let n = BigRational::from_integer(BigInt::from(model.n_relay));
    let liveness = (&model.phi - &model.gamma) * &n;
    let scr = (&model.mu - &model.phi) * &n;
    Ok(FaultReport {
        p_liveness: binomial_tail(model.n_relay, &model.f, &liveness)?,
        p_scr: binomial_tail(model.n_relay, &model.f, &scr)?,
        p_hiding: binomial_tail(model.n_relay, &model.f, &model.t)?,
    })
}

pub const CSV_HEADER: &str =
    "n_relay,f,gamma,phi,mu,T,p_liveness,p_scr,p_hiding,mtbf_liveness_years,mtbf_scr_years";

/// Renders a rational as a decimal string, for configs and tables.
pub fn decimal_string(x: &BigRational) -> String {
    if x.is_integer() {
        return x.to_integer().to_string();
    }
    // Terminating decimals print exactly; anything else gets 12 digits.
    let mut d = x.denom().clone();
    let mut places = 0u32;
    let ten = BigInt::from(10u32);
    for p in [2u32, 5] {
        while d.is_multiple_of(&BigInt::from(p)) {
            d /= p;
        }
    }
    let exact = d.is_one();
    let limit = if exact { 400 } else { 12 };
    let mut scaled = x.clone();
    while !scaled.is_integer() && places < limit {
        scaled *= BigRational::from_integer(ten.clone());
        places += 1;
    }
    let digits = scaled.round().to_integer().abs().to_string();
    let digits = format!("{digits:0>width$}", width = places as usize + 1);
    let (int, frac) = digits.split_at(digits.len() - places as usize);
    let sign = if x.is_negative() { "-" } else { "" };
    let frac = frac.trim_end_matches('0');
    if frac.is_empty() {
        format!("{sign}{int}")
    } else {
        format!("{sign}{int}.{frac}")
    }
}

impl FaultReport {
    pub fn csv_row(&self, model: &FaultModel, slot_ms: f64) -> String {
        let mut row = String::new();
        let _ = write!(
            row,
            "{},{},{},{},{},{},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e}",
            model.n_relay,
            decimal_string(&model.f),
            decimal_string(&model.gamma),
            decimal_string(&model.phi),
            decimal_string(&model.mu),
            decimal_string(&model.t),
            to_f64(&self.p_liveness),
            to_f64(&self.p_scr),
            to_f64(&self.p_hiding),
            mtbf_years(&self.p_liveness, slot_ms),
            mtbf_years(&self.p_scr, slot_ms),
        );
        row
    }
}

/// Chernoff bound on `P[X >= n_relay / 5]` for `X ~ Binomial(n_relay, beta)`:
/// `exp(-n_relay (1 - 5 beta)^2 / (5 (1 + 5 beta)))`.
pub fn chernoff_relay_bound(beta: &BigRational, n_relay: u64) -> Result<f64, AnalysisError> {
    let fifth = BigRational::new(BigInt::one(), BigInt::from(5));
    if !beta.is_positive() || *beta >= fifth {
        return Err(AnalysisError::Vacuous(beta.to_string()));
    }
    let five = BigRational::from_integer(BigInt::from(5));
    let one = BigRational::one();
    let num = (&one - &five * beta).pow(2) * BigRational::from_integer(BigInt::from(n_relay));
    let den = &five * (&one + &five * beta);
    Ok((-to_f64(&(num / den))).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(s: &str) -> BigRational {
        parse_decimal(s).unwrap()
    }

    #[test]
    fn parses_decimals() {
        assert_eq!(q("0.15"), BigRational::new(3.into(), 20.into()));
        assert_eq!(q("76.8"), BigRational::new(384.into(), 5.into()));
        assert_eq!(q("3/20"), q("0.15"));
        assert_eq!(q("1.5e-2"), q("0.015"));
        assert_eq!(q("-2"), BigRational::from_integer((-2).into()));
        assert_eq!(q(".5"), q("1/2"));
        for bad in ["", "x", "1/0", "1.2.3", "e5"] {
            assert!(parse_decimal(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn tiny_tail() {
        assert_eq!(binomial_tail(2, &q("1/2"), &q("0")).unwrap(), q("3/4"));
        assert_eq!(binomial_tail(2, &q("1/2"), &q("0.9")).unwrap(), q("3/4"));
        assert_eq!(binomial_tail(2, &q("1/2"), &q("-1")).unwrap(), q("1"));
        assert_eq!(binomial_tail(2, &q("1/2"), &q("2")).unwrap(), q("0"));
        assert!(binomial_tail(2, &q("1.1"), &q("0")).is_err());
    }

    #[test]
    fn pmf_sums_to_one() {
        let pmf = binomial_pmf(512, &q("0.15")).unwrap();
        let total: BigRational = pmf.iter().sum();
        assert_eq!(total, BigRational::one());
    }

    #[test]
    fn f64_conversion_of_tiny_values() {
        let x = BigRational::new(BigInt::one(), BigInt::from(10u32).pow(400));
        assert_eq!(to_f64(&x), 0.0);
        let y = BigRational::new(BigInt::from(3), BigInt::from(10u32).pow(20));
        assert!((to_f64(&y) - 3e-20).abs() < 1e-33);
        assert_eq!(to_f64(&q("-0.5")), -0.5);
    }

    #[test]
    fn zero_corruption_means_no_faults() {
        let mut m = FaultModel::reference();
        m.f = q("0");
        let r = fault_probabilities(&m).unwrap();
        assert!(r.p_liveness.is_zero() && r.p_scr.is_zero() && r.p_hiding.is_zero());
    }

    #[test]
    fn equal_phi_mu_gives_any_corruption() {
        let mut m = FaultModel::reference();
        m.phi = m.mu.clone();
        let r = fault_probabilities(&m).unwrap();
        let q85 = q("0.85");
        assert_eq!(r.p_scr, BigRational::one() - num_traits::pow(q85, 512));
    }

    #[test]
    fn chernoff_edges() {
        assert!(chernoff_relay_bound(&q("0.2"), 512).is_err());
        assert!(chernoff_relay_bound(&q("0"), 512).is_err());
        let near = chernoff_relay_bound(&q("0.199999"), 64).unwrap();
        assert!(near > 0.999);
        let b = chernoff_relay_bound(&q("0.1"), 512).unwrap();
        assert!((b - (-512.0f64 * 0.25 / 7.5).exp()).abs() < 1e-20);
    }

    #[test]
    fn decimal_rendering() {
        assert_eq!(decimal_string(&q("0.15")), "0.15");
        assert_eq!(decimal_string(&q("76.8")), "76.8");
        assert_eq!(decimal_string(&q("512")), "512");
        assert_eq!(decimal_string(&q("1/3")), "0.333333333333");
        assert_eq!(decimal_string(&q("-0.05")), "-0.05");
    }

    #[test]
    fn csv_row_has_every_column() {
        let m = FaultModel::reference();
        let r = fault_probabilities(&m).unwrap();
        let row = r.csv_row(&m, 400.0);
        assert_eq!(row.split(',').count(), CSV_HEADER.split(',').count());
        assert!(row.starts_with("512,0.15,0.3,0.55,0.8,76.8,"));
    }
}
