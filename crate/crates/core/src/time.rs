//! Integer simulation clock.
//!
//! All scheduling is done on nanosecond integers so that tick, measurement,
//! and reporting grids line up exactly. Seconds only appear at the edges
//! (configuration input and artifact output).

use std::fmt;
use std::ops::{Add, Sub};

use serde::{Serialize, Serializer};

const NANOS_PER_SEC: u64 = 1_000_000_000;

/// A point in (or span of) simulated time, in nanoseconds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SimTime(u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub const fn from_nanos(ns: u64) -> Self {
        SimTime(ns)
    }

    /// Converts seconds to the nearest nanosecond. Returns `None` for
    /// negative or non-finite input.
    pub fn from_secs_f64(secs: f64) -> Option<Self> {
        if !secs.is_finite() || secs < 0.0 {
            return None;
        }
        let ns = (secs * NANOS_PER_SEC as f64).round();
        if ns > u64::MAX as f64 {
            return None;
        }
        Some(SimTime(ns as u64))
    }

    pub const fn as_nanos(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / NANOS_PER_SEC as f64
    }

    /// True when `self` is a whole multiple of `step` (and `step` is non-zero).
    pub fn is_multiple_of(self, step: SimTime) -> bool {
        step.0 != 0 && self.0.is_multiple_of(step.0)
    }

    pub fn saturating_sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(rhs.0))
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 - rhs.0)
    }
}

/// Seconds with trailing zeros trimmed, always at least one decimal: `3.6`, `7.0`.
impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let whole = self.0 / NANOS_PER_SEC;
        let frac = self.0 % NANOS_PER_SEC;
        if frac == 0 {
            return write!(f, "{whole}.0");
        }
        let digits = format!("{frac:09}");
        write!(f, "{whole}.{}", digits.trim_end_matches('0'))
    }
}

impl Serialize for SimTime {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.as_secs_f64())
    }
}
