//! Integer-microsecond simulation time.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, Sub, SubAssign};

use serde::{Deserialize, Serialize};

/// A point in time or a duration, in whole microseconds.
///
/// All event ordering and airtime arithmetic uses this type so two runs of the
/// same scenario can never diverge through floating-point drift.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Micros(pub i64);

impl Micros {
    pub const ZERO: Micros = Micros(0);

    pub const fn from_us(us: i64) -> Self {
        Micros(us)
    }

    pub const fn from_ms(ms: i64) -> Self {
        Micros(ms * 1_000)
    }

    pub const fn from_secs(s: i64) -> Self {
        Micros(s * 1_000_000)
    }

    pub const fn as_us(self) -> i64 {
        self.0
    }

    pub fn as_ms_f64(self) -> f64 {
        self.0 as f64 / 1_000.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1_000_000.0
    }

    pub fn is_positive(self) -> bool {
        self.0 > 0
    }

    pub fn max(self, other: Micros) -> Micros {
        Micros(self.0.max(other.0))
    }

    pub fn min(self, other: Micros) -> Micros {
        Micros(self.0.min(other.0))
    }

    /// Saturates at zero instead of going negative.
    pub fn saturating_sub(self, other: Micros) -> Micros {
        Micros((self.0 - other.0).max(0))
    }
}

impl fmt::Display for Micros {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}us", self.0)
    }
}

impl Add for Micros {
    type Output = Micros;
    fn add(self, rhs: Micros) -> Micros {
        Micros(self.0 + rhs.0)
    }
}

impl AddAssign for Micros {
    fn add_assign(&mut self, rhs: Micros) {
        self.0 += rhs.0;
    }
}

impl Sub for Micros {
    type Output = Micros;
    fn sub(self, rhs: Micros) -> Micros {
        Micros(self.0 - rhs.0)
    }
}

impl SubAssign for Micros {
    fn sub_assign(&mut self, rhs: Micros) {
        self.0 -= rhs.0;
    }
}

impl Mul<i64> for Micros {
    type Output = Micros;
    fn mul(self, rhs: i64) -> Micros {
        Micros(self.0 * rhs)
    }
}

impl Div<i64> for Micros {
    type Output = Micros;
    fn div(self, rhs: i64) -> Micros {
        Micros(self.0 / rhs)
    }
}

impl Sum for Micros {
    fn sum<I: Iterator<Item = Micros>>(iter: I) -> Micros {
        Micros(iter.map(|m| m.0).sum())
    }
}

/// Airtime of `bits` sent at `rate_bps`, rounded up to the next microsecond.
pub fn airtime(bits: u64, rate_bps: u64) -> Micros {
    airtime_sum(&[(bits, rate_bps)])
}

/// Exact sum of several `bits / rate` segments, rounded up once at the end.
///
/// A PHY frame is sent as one unit (PLCP at one rate, MPDU at another), so the
/// segments are added as exact fractions and only the total is rounded.
pub fn airtime_sum(segments: &[(u64, u64)]) -> Micros {
    let mut num: u128 = 0;
    let mut den: u128 = 1;
    for &(bits, rate) in segments {
        assert!(rate > 0, "transmission rate must be positive");
        let seg_num = bits as u128 * 1_000_000;
        let seg_den = rate as u128;
        num = num * seg_den + seg_num * den;
        den *= seg_den;
        let g = gcd(num, den);
        if g > 1 {
            num /= g;
            den /= g;
        }
    }
    Micros(num.div_ceil(den) as i64)
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}
