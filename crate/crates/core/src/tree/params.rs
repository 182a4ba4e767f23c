use std::fmt;

use crate::{Error, Result};

/// Structural parameters of a split tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SplitParams {
    /// Branch factor `b`.
    pub b: u32,
    /// Leaf capacity `s`.
    pub s: u32,
    /// Balls kept by a vertex when it splits.
    pub s0: u32,
    /// Balls seeded into each child when a vertex splits.
    pub s1: u32,
}

impl SplitParams {
    pub fn new(b: u32, s: u32, s0: u32, s1: u32) -> Result<Self> {
        let p = Self { b, s, s0, s1 };
        p.validate()?;
        Ok(p)
    }

    /// Checks `b >= 2`, `s >= 1`, `0 <= s0 <= s` and `0 <= b*s1 <= s + 1 - s0`.
    pub fn validate(&self) -> Result<()> {
        if self.b < 2 {
            return Err(Error::InvalidParams(format!("b >= 2 violated: b = {}", self.b)));
        }
        if self.s < 1 {
            return Err(Error::InvalidParams(format!("s >= 1 violated: s = {}", self.s)));
        }
        if self.s0 > self.s {
            return Err(Error::InvalidParams(format!(
                "s0 <= s violated: s0 = {} > s = {}",
                self.s0, self.s
            )));
        }
        let seeded = u64::from(self.b) * u64::from(self.s1);
        let room = u64::from(self.s) + 1 - u64::from(self.s0);
        if seeded > room {
            return Err(Error::InvalidParams(format!(
                "b*s1 <= s+1-s0 violated: b*s1 = {seeded} > s+1-s0 = {room}"
            )));
        }
        Ok(())
    }

    /// Balls routed by the split vector when a full leaf splits.
    pub fn routed_on_split(&self) -> u32 {
        self.s + 1 - self.s0 - self.b * self.s1
    }
}

impl fmt::Display for SplitParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(b={}, s={}, s0={}, s1={})", self.b, self.s, self.s0, self.s1)
    }
}
