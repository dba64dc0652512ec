// SPDX-License-Identifier: Apache-2.0

//! Four-state bit vectors up to 64 bits wide.
//!
//! Every bit is either a known `0`/`1` or unknown. High impedance is folded
//! into unknown since nothing in the simulator resolves multiple drivers.

use std::fmt;

use serde::{Deserialize, Serialize};

pub const MAX_WIDTH: u32 = 64;

/// A vector of `width` bits. A set bit in `xmask` marks that position unknown;
/// the matching bit in `bits` is then always zero.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Value {
    pub width: u32,
    pub bits: u64,
    pub xmask: u64,
}

pub fn mask(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

impl Value {
    pub fn new(width: u32, bits: u64) -> Self {
        let width = width.clamp(1, MAX_WIDTH);
        Value {
            width,
            bits: bits & mask(width),
            xmask: 0,
        }
    }

    pub fn with_x(width: u32, bits: u64, xmask: u64) -> Self {
        let width = width.clamp(1, MAX_WIDTH);
        let xmask = xmask & mask(width);
        Value {
            width,
            bits: bits & mask(width) & !xmask,
            xmask,
        }
    }

    pub fn unknown(width: u32) -> Self {
        Value::with_x(width, 0, u64::MAX)
    }

    pub fn bit(b: bool) -> Self {
        Value::new(1, b as u64)
    }

    pub fn is_known(&self) -> bool {
        self.xmask == 0
    }

    /// `Some(true)` if any bit is a known one, `Some(false)` if every bit is a
    /// known zero, `None` otherwise.
    pub fn truthy(&self) -> Option<bool> {
        if self.bits != 0 {
            Some(true)
        } else if self.xmask == 0 {
            Some(false)
        } else {
            None
        }
    }

    pub fn to_u64(&self) -> Option<u64> {
        self.is_known().then_some(self.bits)
    }

    pub fn sign_bit_set(&self) -> bool {
        (self.bits >> (self.width - 1)) & 1 == 1
    }

    /// Interpret as a two's-complement number of `self.width` bits.
    pub fn to_i64(&self) -> i64 {
        if self.width >= 64 {
            return self.bits as i64;
        }
        if self.sign_bit_set() {
            (self.bits | !mask(self.width)) as i64
        } else {
            self.bits as i64
        }
    }

    /// Truncate or extend to `width`. Extension copies the top bit (including
    /// an unknown top bit) when `signed`, zero-fills otherwise.
    pub fn resize(&self, width: u32, signed: bool) -> Value {
        let width = width.clamp(1, MAX_WIDTH);
        if width <= self.width {
            return Value::with_x(width, self.bits, self.xmask);
        }
        let ext = mask(width) & !mask(self.width);
        let top = self.width - 1;
        let mut bits = self.bits;
        let mut xmask = self.xmask;
        if signed {
            if (self.xmask >> top) & 1 == 1 {
                xmask |= ext;
            } else if (self.bits >> top) & 1 == 1 {
                bits |= ext;
            }
        }
        Value::with_x(width, bits, xmask)
    }

    pub fn get_bit(&self, pos: u32) -> Value {
        if pos >= self.width {
            return Value::unknown(1);
        }
        Value::with_x(1, self.bits >> pos, self.xmask >> pos)
    }

    /// Extract `width` bits starting at `lo`; positions beyond the vector read
    /// as unknown.
    pub fn slice(&self, lo: i64, width: u32) -> Value {
        let mut out = Value::unknown(width);
        for i in 0..width {
            let pos = lo + i as i64;
            if pos >= 0 && (pos as u32) < self.width {
                let b = self.get_bit(pos as u32);
                out = out.set_slice(i as i64, &b);
            }
        }
        out
    }

    /// Overwrite bits starting at `lo` with `val`; positions outside the
    /// vector are dropped.
    pub fn set_slice(&self, lo: i64, val: &Value) -> Value {
        let mut bits = self.bits;
        let mut xmask = self.xmask;
        for i in 0..val.width {
            let pos = lo + i as i64;
            if pos < 0 || pos as u32 >= self.width {
                continue;
            }
            let m = 1u64 << pos;
            bits &= !m;
            xmask &= !m;
            if (val.xmask >> i) & 1 == 1 {
                xmask |= m;
            } else if (val.bits >> i) & 1 == 1 {
                bits |= m;
            }
        }
        Value::with_x(self.width, bits, xmask)
    }

    fn known_zero(&self) -> u64 {
        !self.bits & !self.xmask & mask(self.width)
    }

    pub fn and(&self, rhs: &Value) -> Value {
        let w = self.width;
        let ones = self.bits & rhs.bits;
        let zeros = self.known_zero() | rhs.known_zero();
        Value::with_x(w, ones, mask(w) & !ones & !zeros)
    }

    pub fn or(&self, rhs: &Value) -> Value {
        let w = self.width;
        let ones = self.bits | rhs.bits;
        let zeros = self.known_zero() & rhs.known_zero();
        Value::with_x(w, ones, mask(w) & !ones & !zeros)
    }

    pub fn xor(&self, rhs: &Value) -> Value {
        let xm = self.xmask | rhs.xmask;
        Value::with_x(self.width, self.bits ^ rhs.bits, xm)
    }

    pub fn not(&self) -> Value {
        Value::with_x(self.width, !self.bits, self.xmask)
    }

    fn arith(&self, rhs: &Value, f: impl FnOnce(u64, u64) -> Option<u64>) -> Value {
        if !self.is_known() || !rhs.is_known() {
            return Value::unknown(self.width);
        }
        match f(self.bits, rhs.bits) {
            Some(v) => Value::new(self.width, v),
            None => Value::unknown(self.width),
        }
    }

    pub fn add(&self, rhs: &Value) -> Value {
        self.arith(rhs, |a, b| Some(a.wrapping_add(b)))
    }

    pub fn sub(&self, rhs: &Value) -> Value {
        self.arith(rhs, |a, b| Some(a.wrapping_sub(b)))
    }

    pub fn mul(&self, rhs: &Value) -> Value {
        self.arith(rhs, |a, b| Some(a.wrapping_mul(b)))
    }

    pub fn div(&self, rhs: &Value, signed: bool) -> Value {
        let (wa, wb) = (self.to_i64(), rhs.to_i64());
        self.arith(rhs, |a, b| match (b, signed) {
            (0, _) => None,
            (_, true) => Some(wa.wrapping_div(wb) as u64),
            (_, false) => Some(a / b),
        })
    }

    pub fn rem(&self, rhs: &Value, signed: bool) -> Value {
        let (wa, wb) = (self.to_i64(), rhs.to_i64());
        self.arith(rhs, |a, b| match (b, signed) {
            (0, _) => None,
            (_, true) => Some(wa.wrapping_rem(wb) as u64),
            (_, false) => Some(a % b),
        })
    }

    pub fn pow(&self, rhs: &Value) -> Value {
        self.arith(rhs, |a, b| {
            let mut acc = 1u64;
            let mut base = a;
            let mut e = b;
            while e > 0 {
                if e & 1 == 1 {
                    acc = acc.wrapping_mul(base);
                }
                base = base.wrapping_mul(base);
                e >>= 1;
            }
            Some(acc)
        })
    }

    pub fn neg(&self) -> Value {
        Value::new(self.width, 0).sub(self)
    }

    pub fn shl(&self, amount: &Value) -> Value {
        match amount.to_u64() {
            None => Value::unknown(self.width),
            Some(n) if n >= self.width as u64 => Value::new(self.width, 0),
            Some(n) => Value::with_x(self.width, self.bits << n, self.xmask << n),
        }
    }

    pub fn shr(&self, amount: &Value) -> Value {
        match amount.to_u64() {
            None => Value::unknown(self.width),
            Some(n) if n >= self.width as u64 => Value::new(self.width, 0),
            Some(n) => Value::with_x(self.width, self.bits >> n, self.xmask >> n),
        }
    }

    pub fn ashr(&self, amount: &Value) -> Value {
        let Some(n) = amount.to_u64() else {
            return Value::unknown(self.width);
        };
        let top = self.get_bit(self.width - 1);
        let n = n.min(self.width as u64) as u32;
        let mut out = if n >= self.width {
            Value::new(self.width, 0)
        } else {
            Value::with_x(self.width, self.bits >> n, self.xmask >> n)
        };
        for i in 0..n {
            out = out.set_slice((self.width - 1 - i) as i64, &top);
        }
        out
    }

    /// `==` semantics: unknown if either side has unknown bits.
    pub fn logic_eq(&self, rhs: &Value) -> Value {
        if !self.is_known() || !rhs.is_known() {
            // known differing bits still decide the comparison
            let both_known = !self.xmask & !rhs.xmask;
            if (self.bits ^ rhs.bits) & both_known != 0 {
                return Value::bit(false);
            }
            return Value::unknown(1);
        }
        Value::bit(self.bits == rhs.bits)
    }

    /// `===` semantics: exact four-state match.
    pub fn case_eq(&self, rhs: &Value) -> bool {
        self.bits == rhs.bits && self.xmask == rhs.xmask
    }

    /// `casez`/`casex` matching: bits unknown in `pattern` (and in `self`
    /// for casex) are wildcards.
    pub fn wildcard_eq(&self, pattern: &Value, either_side: bool) -> bool {
        let mut wild = pattern.xmask;
        if either_side {
            wild |= self.xmask;
        }
        let care = !wild & mask(self.width);
        (self.bits & care) == (pattern.bits & care) && (self.xmask & care) == (pattern.xmask & care)
    }

    pub fn compare(&self, rhs: &Value, signed: bool) -> Option<std::cmp::Ordering> {
        if !self.is_known() || !rhs.is_known() {
            return None;
        }
        Some(if signed {
            self.to_i64().cmp(&rhs.to_i64())
        } else {
            self.bits.cmp(&rhs.bits)
        })
    }

    pub fn reduce_and(&self) -> Value {
        if self.known_zero() != 0 {
            Value::bit(false)
        } else if self.xmask != 0 {
            Value::unknown(1)
        } else {
            Value::bit(true)
        }
    }

    pub fn reduce_or(&self) -> Value {
        match self.truthy() {
            Some(b) => Value::bit(b),
            None => Value::unknown(1),
        }
    }

    pub fn reduce_xor(&self) -> Value {
        if self.xmask != 0 {
            Value::unknown(1)
        } else {
            Value::bit(self.bits.count_ones() % 2 == 1)
        }
    }

    /// Bitwise merge used when a `?:` condition is unknown: agreeing bits
    /// survive, disagreeing bits become unknown.
    pub fn merge(&self, rhs: &Value) -> Value {
        let differ = (self.bits ^ rhs.bits) | self.xmask | rhs.xmask;
        Value::with_x(self.width, self.bits, differ)
    }

    pub fn from_opt_bool(b: Option<bool>) -> Value {
        match b {
            Some(b) => Value::bit(b),
            None => Value::unknown(1),
        }
    }
}

impl fmt::Debug for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}'b", self.width)?;
        for i in (0..self.width).rev() {
            let c = if (self.xmask >> i) & 1 == 1 {
                'x'
            } else if (self.bits >> i) & 1 == 1 {
                '1'
            } else {
                '0'
            };
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn and_with_known_zero_is_known() {
        let a = Value::unknown(1);
        let z = Value::bit(false);
        assert_eq!(a.and(&z), Value::bit(false));
        assert_eq!(a.or(&Value::bit(true)), Value::bit(true));
        assert!(!a.and(&Value::bit(true)).is_known());
    }

    #[test]
    fn resize_sign_extends() {
        let v = Value::new(4, 0b1010);
        assert_eq!(v.resize(8, true).bits, 0b1111_1010);
        assert_eq!(v.resize(8, false).bits, 0b0000_1010);
        assert_eq!(v.resize(2, true).bits, 0b10);
    }

    #[test]
    fn arithmetic_wraps_at_width() {
        let a = Value::new(2, 1);
        let b = Value::new(2, 3);
        assert_eq!(a.add(&b).bits, 0);
        assert_eq!(Value::new(2, 0).sub(&Value::new(2, 1)).bits, 3);
        assert!(!a.div(&Value::new(2, 0), false).is_known());
    }

    #[test]
    fn slices() {
        let v = Value::new(8, 0b1011_0110);
        assert_eq!(v.slice(2, 3).bits, 0b101);
        let w = v.set_slice(0, &Value::new(2, 0b11));
        assert_eq!(w.bits, 0b1011_0111);
        assert!(!v.slice(7, 2).is_known());
    }

    #[test]
    fn equality_with_unknowns() {
        let a = Value::with_x(2, 0b01, 0b10);
        assert!(!a.logic_eq(&Value::new(2, 1)).is_known());
        assert_eq!(a.logic_eq(&Value::new(2, 0)), Value::bit(false));
        assert!(a.case_eq(&a));
        assert!(Value::new(4, 0b1010).wildcard_eq(&Value::with_x(4, 0b1000, 0b0011), false));
    }

    #[test]
    fn shifts() {
        let v = Value::new(4, 0b1001);
        assert_eq!(v.shl(&Value::new(32, 1)).bits, 0b0010);
        assert_eq!(v.shr(&Value::new(32, 3)).bits, 0b0001);
        assert_eq!(v.ashr(&Value::new(32, 2)).bits, 0b1110);
    }
}
