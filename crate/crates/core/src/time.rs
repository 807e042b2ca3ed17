//! Integer picosecond time axis.
//!
//! All event times are `u64` picoseconds since simulation start. Integer time
//! keeps cross-channel coincidences and equal-interval ties exact, and 64 bits
//! cover about 1.8e7 seconds.

use std::fmt;

pub const PS_PER_NS: u64 = 1_000;
pub const PS_PER_US: u64 = 1_000_000;
pub const PS_PER_SEC: u64 = 1_000_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct TimeStamp(pub u64);

impl TimeStamp {
    pub const ZERO: TimeStamp = TimeStamp(0);

    #[inline]
    pub const fn from_ps(ps: u64) -> Self {
        TimeStamp(ps)
    }

    #[inline]
    pub const fn from_ns(ns: u64) -> Self {
        TimeStamp(ns * PS_PER_NS)
    }

    #[inline]
    pub const fn ps(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / PS_PER_SEC as f64
    }
}

impl fmt::Display for TimeStamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}ps", self.0)
    }
}

/// Converts seconds to whole picoseconds, rounding to nearest.
pub fn secs_to_ps(secs: f64) -> u64 {
    (secs * PS_PER_SEC as f64).round() as u64
}

pub fn ps_to_secs(ps: u64) -> f64 {
    ps as f64 / PS_PER_SEC as f64
}

/// Converts a duration in nanoseconds (possibly fractional, e.g. 17.6) to ps.
pub fn ns_to_ps(ns: f64) -> u64 {
    (ns * PS_PER_NS as f64).round() as u64
}
