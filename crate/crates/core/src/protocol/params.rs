//! Protocol parameters and the integer thresholds derived from them.

use num_rational::Ratio;
use thiserror::Error;

use crate::field::Field;

pub type Fraction = Ratio<u64>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParamsError {
    #[error("fractions must satisfy 0 < gamma <= phi <= mu <= 1 (got gamma={gamma}, phi={phi}, mu={mu})")]
    ThresholdOrder { gamma: Fraction, phi: Fraction, mu: Fraction },
    #[error("tau must satisfy 0 <= tau < gamma (got tau={tau}, gamma={gamma})")]
    Tau { tau: Fraction, gamma: Fraction },
    #[error("{what} * n_relay = {value} is not an integer")]
    NotIntegral { what: &'static str, value: Fraction },
    #[error("{0}")]
    Counts(String),
    #[error("timing: {0}")]
    Timing(String),
}

/// Everything a node needs to know about the deployment.
///
/// Times are milliseconds. Slot `s >= 1` starts its proposer phase at
/// `s * slot_period_ms`; the consensus proposal time is two network delays
/// later.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtocolParams {
    pub n: usize,
    pub n_prop: usize,
    pub n_relay: usize,
    pub mu: Fraction,
    pub phi: Fraction,
    pub gamma: Fraction,
    pub tau: Fraction,
    pub delta_ms: u64,
    pub slot_period_ms: u64,
    pub field: Field,
    /// Upper bound on codeword rows per batch, which caps batch size.
    pub max_rows: usize,
}

impl ProtocolParams {
    /// The default fractions (mu, phi, gamma, tau) = (4/5, 3/5, 2/5, 1/5).
    pub fn with_defaults(n: usize, n_relay: usize) -> Self {
        ProtocolParams {
            n,
            n_prop: n,
            n_relay,
            mu: Ratio::new(4, 5),
            phi: Ratio::new(3, 5),
            gamma: Ratio::new(2, 5),
            tau: Ratio::new(1, 5),
            delta_ms: 100,
            slot_period_ms: 300,
            field: Field::mersenne61(),
            max_rows: 64,
        }
    }

    pub fn validate(&self) -> Result<(), ParamsError> {
        let zero = Ratio::from_integer(0);
        let one = Ratio::from_integer(1);
        if !(zero < self.gamma && self.gamma <= self.phi && self.phi <= self.mu && self.mu <= one) {
            return Err(ParamsError::ThresholdOrder {
                gamma: self.gamma,
                phi: self.phi,
                mu: self.mu,
            });
        }
        if self.tau >= self.gamma {
            return Err(ParamsError::Tau {
                tau: self.tau,
                gamma: self.gamma,
            });
        }
        for (what, frac) in [("gamma", self.gamma), ("tau", self.tau)] {
            let value = frac * self.n_relay as u64;
            if !value.is_integer() {
                return Err(ParamsError::NotIntegral { what, value });
            }
        }
        if self.n == 0 || self.n_relay == 0 || self.n_prop == 0 {
            return Err(ParamsError::Counts("n, n_prop and n_relay must be positive".into()));
        }
        if self.n_prop > self.n || self.n_relay > self.n {
            return Err(ParamsError::Counts(format!(
                "n_prop = {} and n_relay = {} must not exceed n = {}",
                self.n_prop, self.n_relay, self.n
            )));
        }
        if self.n > u32::MAX as usize {
            return Err(ParamsError::Counts("n does not fit node ids".into()));
        }
        if self.n_relay as u64 >= self.field.modulus() {
            return Err(ParamsError::Counts(format!(
                "n_relay = {} needs distinct evaluation points in a field of size {}",
                self.n_relay,
                self.field.modulus()
            )));
        }
        if self.max_rows == 0 {
            return Err(ParamsError::Counts("max_rows must be positive".into()));
        }
        if self.delta_ms == 0 || self.slot_period_ms == 0 {
            return Err(ParamsError::Timing("delta and slot period must be positive".into()));
        }
        Ok(())
    }

    /// Payload coefficients per codeword row.
    pub fn k(&self) -> usize {
        ((self.gamma - self.tau) * self.n_relay as u64).to_integer() as usize
    }

    /// Randomness coefficients per codeword row.
    pub fn t(&self) -> usize {
        (self.tau * self.n_relay as u64).to_integer() as usize
    }

    pub fn thr_relay(&self) -> usize {
        ceil_frac(self.mu, self.n_relay)
    }

    pub fn thr_avail(&self) -> usize {
        ceil_frac(self.phi, self.n_relay)
    }

    pub fn thr_reconstruct(&self) -> usize {
        self.k() + self.t()
    }

    /// Consensus proposal time `T_s`.
    pub fn slot_time(&self, s: u64) -> u64 {
        self.slot_start(s) + 2 * self.delta_ms
    }

    /// MCP phase start, two network delays before `T_s`.
    pub fn slot_start(&self, s: u64) -> u64 {
        s * self.slot_period_ms
    }

    pub fn relay_time(&self, s: u64) -> u64 {
        self.slot_time(s) - self.delta_ms
    }
}

fn ceil_frac(frac: Fraction, n: usize) -> usize {
    (frac * n as u64).ceil().to_integer() as usize
}
