//! Binary attribute profiles and the componentwise partial order on them.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Largest supported number of attributes.
pub const MAX_ATTRIBUTES: usize = 24;

/// Result of comparing two profiles under the componentwise order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PartialOrderResult {
    Greater,
    Less,
    Equal,
    Incomparable,
}

/// A K-bit attribute mastery vector. Bit `k` holds attribute `k + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Profile {
    bits: u32,
    k: u8,
}

impl Profile {
    pub fn new(bits: u32, k: usize) -> Result<Self> {
        if k > MAX_ATTRIBUTES {
            return Err(Error::SizeGuard(format!(
                "K = {k} exceeds the limit of {MAX_ATTRIBUTES} attributes"
            )));
        }
        if k < 32 && bits >> k != 0 {
            return Err(Error::Dimension(format!(
                "bit pattern {bits:#b} does not fit in {k} attributes"
            )));
        }
        Ok(Profile { bits, k: k as u8 })
    }

    pub(crate) fn from_raw(bits: u32, k: usize) -> Self {
        debug_assert!(k <= MAX_ATTRIBUTES && bits >> k == 0);
        Profile { bits, k: k as u8 }
    }

    pub fn zero(k: usize) -> Self {
        Profile::from_raw(0, k)
    }

    pub fn ones(k: usize) -> Self {
        Profile::from_raw(full_mask(k), k)
    }

    pub fn unit(k: usize, attr: usize) -> Self {
        Profile::from_raw(1 << attr, k)
    }

    pub fn from_slice(v: &[u8]) -> Result<Self> {
        let mut bits = 0u32;
        for (i, &x) in v.iter().enumerate() {
            match x {
                0 => {}
                1 => bits |= 1 << i,
                _ => return Err(Error::Parse(format!("entry {x} is not binary"))),
            }
        }
        Profile::new(bits, v.len())
    }

    /// Parses a string such as `"1010"`; the first character is attribute 1.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let mut v = Vec::with_capacity(s.len());
        for c in s.chars() {
            match c {
                '0' => v.push(0),
                '1' => v.push(1),
                _ => return Err(Error::Parse(format!("'{s}' is not a 0/1 string"))),
            }
        }
        Profile::from_slice(&v)
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.k as usize
    }

    pub fn is_empty(&self) -> bool {
        self.k == 0
    }

    pub fn get(&self, attr: usize) -> bool {
        self.bits >> attr & 1 == 1
    }

    pub fn is_zero(&self) -> bool {
        self.bits == 0
    }

    pub fn to_vec(&self) -> Vec<u8> {
        (0..self.len()).map(|i| self.get(i) as u8).collect()
    }

    pub fn complement(&self) -> Profile {
        Profile::from_raw(!self.bits & full_mask(self.len()), self.len())
    }

    /// `self ⪰ other`.
    pub fn dominates(&self, other: &Profile) -> bool {
        self.bits & other.bits == other.bits
    }

    pub fn compare(&self, other: &Profile) -> Result<PartialOrderResult> {
        check_len(self, other)?;
        Ok(compare_bits(self.bits, other.bits))
    }

    pub fn join(&self, other: &Profile) -> Result<Profile> {
        check_len(self, other)?;
        Ok(Profile::from_raw(self.bits | other.bits, self.len()))
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len() {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl Serialize for Profile {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Profile {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Profile::parse(&s).map_err(serde::de::Error::custom)
    }
}

fn check_len(a: &Profile, b: &Profile) -> Result<()> {
    if a.k != b.k {
        return Err(Error::Dimension(format!(
            "profiles of length {} and {}",
            a.k, b.k
        )));
    }
    Ok(())
}

pub(crate) fn full_mask(k: usize) -> u32 {
    if k >= 32 {
        u32::MAX
    } else {
        (1u32 << k) - 1
    }
}

pub(crate) fn compare_bits(a: u32, b: u32) -> PartialOrderResult {
    let ge = a & b == b;
    let le = a & b == a;
    match (ge, le) {
        (true, true) => PartialOrderResult::Equal,
        (true, false) => PartialOrderResult::Greater,
        (false, true) => PartialOrderResult::Less,
        (false, false) => PartialOrderResult::Incomparable,
    }
}

pub fn compare(a: &Profile, b: &Profile) -> Result<PartialOrderResult> {
    a.compare(b)
}

pub fn join(a: &Profile, b: &Profile) -> Result<Profile> {
    a.join(b)
}

/// Join of a set of profiles; the empty join is the zero profile of length `k`.
pub fn join_all<'a>(k: usize, profiles: impl IntoIterator<Item = &'a Profile>) -> Result<Profile> {
    let mut acc = Profile::zero(k);
    for p in profiles {
        acc = acc.join(p)?;
    }
    Ok(acc)
}
