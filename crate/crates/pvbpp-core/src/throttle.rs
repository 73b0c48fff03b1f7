//! Delay policies that slow repeated login attempts.
//!
//! Two throttling schedules are provided: an exponential schedule where the
//! wait before attempt `n` is `base^n`, and a timestamp-interval schedule
//! where the wait scales with how long the previous round trip took. An
//! unthrottled policy exists as a comparison baseline for the attack
//! harness.

use std::fmt;

pub const DEFAULT_BASE: f64 = 2.0;
pub const DEFAULT_CAP_EXPONENT: u32 = 20;
pub const DEFAULT_ALPHA: f64 = 1.0;
pub const DEFAULT_MIN_DELAY: f64 = 0.0;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ThrottleError {
    #[error("attempt counter must be at least 1")]
    InvalidAttempt,
    #[error("response timestamp precedes challenge timestamp")]
    ClockSkew,
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("operation not defined for this policy kind")]
    UnsupportedPolicy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    /// Wait `base^n` before attempt `n`.
    Exponential,
    /// Wait proportional to the challenge/response interval, amplified by
    /// `base^n`.
    Timestamp,
    /// Never wait. Baseline for measuring what throttling buys.
    Unthrottled,
}

/// A validated delay policy. Construct through [`DelayPolicy::exponential`],
/// [`DelayPolicy::timestamp`], [`DelayPolicy::unthrottled`], or
/// [`DelayPolicy::parse`].
#[derive(Debug, Clone, PartialEq)]
pub struct DelayPolicy {
    kind: PolicyKind,
    base: f64,
    cap_exponent: u32,
    alpha: f64,
    min_delay: f64,
}

impl DelayPolicy {
    pub fn exponential(base: f64) -> Result<Self, ThrottleError> {
        Self::build(
            PolicyKind::Exponential,
            base,
            DEFAULT_CAP_EXPONENT,
            DEFAULT_ALPHA,
            DEFAULT_MIN_DELAY,
        )
    }

    pub fn timestamp(base: f64, alpha: f64) -> Result<Self, ThrottleError> {
        Self::build(
            PolicyKind::Timestamp,
            base,
            DEFAULT_CAP_EXPONENT,
            alpha,
            DEFAULT_MIN_DELAY,
        )
    }

    pub fn unthrottled() -> Self {
        DelayPolicy {
            kind: PolicyKind::Unthrottled,
            base: DEFAULT_BASE,
            cap_exponent: DEFAULT_CAP_EXPONENT,
            alpha: DEFAULT_ALPHA,
            min_delay: 0.0,
        }
    }

    pub fn build(
        kind: PolicyKind,
        base: f64,
        cap_exponent: u32,
        alpha: f64,
        min_delay: f64,
    ) -> Result<Self, ThrottleError> {
        if kind != PolicyKind::Unthrottled && (base.is_nan() || base <= 1.0) {
            return Err(ThrottleError::InvalidPolicy(format!(
                "base must be greater than 1, got {base}"
            )));
        }
        if cap_exponent < 1 {
            return Err(ThrottleError::InvalidPolicy(
                "cap_exponent must be at least 1".into(),
            ));
        }
        if alpha.is_nan() || alpha <= 0.0 {
            return Err(ThrottleError::InvalidPolicy(format!(
                "alpha must be positive, got {alpha}"
            )));
        }
        if min_delay < 0.0 {
            return Err(ThrottleError::InvalidPolicy(format!(
                "min_delay must be non-negative, got {min_delay}"
            )));
        }
        Ok(DelayPolicy {
            kind,
            base,
            cap_exponent,
            alpha,
            min_delay,
        })
    }

    pub fn with_cap(mut self, cap_exponent: u32) -> Result<Self, ThrottleError> {
        if cap_exponent < 1 {
            return Err(ThrottleError::InvalidPolicy(
                "cap_exponent must be at least 1".into(),
            ));
        }
        self.cap_exponent = cap_exponent;
        Ok(self)
    }

    pub fn with_min_delay(mut self, min_delay: f64) -> Result<Self, ThrottleError> {
        if min_delay < 0.0 {
            return Err(ThrottleError::InvalidPolicy(
                "min_delay must be non-negative".into(),
            ));
        }
        self.min_delay = min_delay;
        Ok(self)
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn base(&self) -> f64 {
        self.base
    }

    pub fn cap_exponent(&self) -> u32 {
        self.cap_exponent
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn min_delay(&self) -> f64 {
        self.min_delay
    }

    // base^min(n, cap)
    fn amplification(&self, n: u64) -> f64 {
        let exp = n.min(u64::from(self.cap_exponent)) as i32;
        self.base.powi(exp)
    }

    /// Wait imposed before attempt `next_n`, given when the failed
    /// challenge was issued and when its response arrived. Dispatches on the
    /// policy kind; a response timestamp behind the challenge timestamp is
    /// treated as a zero interval.
    pub fn delay_for_next(&self, next_n: u64, challenge_ts: u64, response_ts: u64) -> f64 {
        match self.kind {
            PolicyKind::Unthrottled => 0.0,
            PolicyKind::Exponential => {
                delay_exponential(next_n.max(1), self).expect("next_n clamped to at least 1")
            }
            PolicyKind::Timestamp => {
                let challenge_ts = challenge_ts.min(response_ts);
                delay_timestamp(challenge_ts, response_ts, next_n.max(1), self)
                    .expect("timestamps ordered and next_n clamped")
            }
        }
    }

    /// Parses a policy spec string: `exp:2`, `exp:2:cap20`, `none`, or
    /// `ts:2:alpha1.5:min0.5:cap20`. The first bare number is the base;
    /// `capN`, `alphaX`, and `minX` tokens set the remaining knobs.
    pub fn parse(spec: &str) -> Result<Self, ThrottleError> {
        let mut tokens = spec.split(':');
        let kind = match tokens.next().unwrap_or("") {
            "exp" | "exponential" => PolicyKind::Exponential,
            "ts" | "timestamp" => PolicyKind::Timestamp,
            "none" | "unthrottled" => PolicyKind::Unthrottled,
            other => {
                return Err(ThrottleError::InvalidPolicy(format!(
                    "unknown policy kind {other:?} (expected exp, ts, or none)"
                )))
            }
        };
        let mut base = DEFAULT_BASE;
        let mut cap = DEFAULT_CAP_EXPONENT;
        let mut alpha = DEFAULT_ALPHA;
        let mut min_delay = DEFAULT_MIN_DELAY;
        for token in tokens {
            if let Some(rest) = token.strip_prefix("cap") {
                cap = rest.parse().map_err(|_| {
                    ThrottleError::InvalidPolicy(format!("bad cap token {token:?}"))
                })?;
            } else if let Some(rest) = token.strip_prefix("alpha") {
                alpha = rest.parse().map_err(|_| {
                    ThrottleError::InvalidPolicy(format!("bad alpha token {token:?}"))
                })?;
            } else if let Some(rest) = token.strip_prefix("min") {
                min_delay = rest.parse().map_err(|_| {
                    ThrottleError::InvalidPolicy(format!("bad min token {token:?}"))
                })?;
            } else {
                base = token.parse().map_err(|_| {
                    ThrottleError::InvalidPolicy(format!("bad base token {token:?}"))
                })?;
            }
        }
        Self::build(kind, base, cap, alpha, min_delay)
    }

    /// Short label for reports, in the same shape [`parse`](Self::parse)
    /// accepts.
    pub fn label(&self) -> String {
        match self.kind {
            PolicyKind::Unthrottled => "none".to_string(),
            PolicyKind::Exponential => format!("exp:{}:cap{}", self.base, self.cap_exponent),
            PolicyKind::Timestamp => format!(
                "ts:{}:cap{}:alpha{}:min{}",
                self.base, self.cap_exponent, self.alpha, self.min_delay
            ),
        }
    }
}

impl Default for DelayPolicy {
    fn default() -> Self {
        DelayPolicy::exponential(DEFAULT_BASE).expect("default base is valid")
    }
}

impl fmt::Display for DelayPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Exponential schedule: `base^min(n, cap_exponent)` seconds. The cap stops
/// the schedule from diverging once `n` grows large.
pub fn delay_exponential(n: u64, policy: &DelayPolicy) -> Result<f64, ThrottleError> {
    if n < 1 {
        return Err(ThrottleError::InvalidAttempt);
    }
    Ok(policy.amplification(n))
}

/// Timestamp schedule: `max(min_delay, alpha * interval * base^min(n, cap))`
/// where the interval is how long the prover took between receiving the
/// challenge and the verifier receiving its response. Slower responders wait
/// longer for the next attempt.
pub fn delay_timestamp(
    challenge_ts: u64,
    response_ts: u64,
    n: u64,
    policy: &DelayPolicy,
) -> Result<f64, ThrottleError> {
    if n < 1 {
        return Err(ThrottleError::InvalidAttempt);
    }
    if response_ts < challenge_ts {
        return Err(ThrottleError::ClockSkew);
    }
    let interval = (response_ts - challenge_ts) as f64;
    Ok((policy.alpha * interval * policy.amplification(n)).max(policy.min_delay))
}

/// Total verifier-imposed wait accrued before attempt `attempts` under an
/// exponential policy: the sum of the per-attempt delays `base^a` for
/// `a = 2..=attempts`. The first attempt is always prompt-immediate, so
/// `attempts = 1` accrues nothing.
pub fn cumulative_lockout(attempts: u64, policy: &DelayPolicy) -> Result<f64, ThrottleError> {
    if attempts < 1 {
        return Err(ThrottleError::InvalidAttempt);
    }
    match policy.kind {
        PolicyKind::Unthrottled => Ok(0.0),
        PolicyKind::Timestamp => Err(ThrottleError::UnsupportedPolicy),
        PolicyKind::Exponential => {
            let mut total = 0.0;
            for a in 2..=attempts {
                total += delay_exponential(a, policy)?;
            }
            Ok(total)
        }
    }
}
