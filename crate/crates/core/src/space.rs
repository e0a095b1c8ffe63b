//! The latent class space: an ordered subset of {0,1}^K containing the zero profile.

use crate::error::{Error, Result};
use crate::profile::{Profile, MAX_ATTRIBUTES};
use std::collections::HashSet;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatentClassSpace {
    k: usize,
    profiles: Vec<Profile>,
    zero_index: usize,
}

impl LatentClassSpace {
    /// All 2^K profiles in canonical (ascending bit pattern) order.
    pub fn saturated(k: usize) -> Result<Self> {
        if k > MAX_ATTRIBUTES {
            return Err(Error::SizeGuard(format!("K = {k} exceeds {MAX_ATTRIBUTES}")));
        }
        let profiles = (0..1u32 << k).map(|b| Profile::from_raw(b, k)).collect();
        Ok(LatentClassSpace { k, profiles, zero_index: 0 })
    }

    /// A user-ordered space. Must contain the zero profile and no duplicates.
    pub fn from_profiles(k: usize, profiles: Vec<Profile>) -> Result<Self> {
        if k > MAX_ATTRIBUTES {
            return Err(Error::SizeGuard(format!("K = {k} exceeds {MAX_ATTRIBUTES}")));
        }
        let mut seen = HashSet::new();
        for p in &profiles {
            if p.len() != k {
                return Err(Error::Dimension(format!(
                    "profile {p} has length {} but K = {k}",
                    p.len()
                )));
            }
            if !seen.insert(p.bits()) {
                return Err(Error::Parse(format!("duplicate profile {p}")));
            }
        }
        let zero_index = profiles
            .iter()
            .position(|p| p.is_zero())
            .ok_or_else(|| Error::Parse("latent class space must contain the all-zero profile".into()))?;
        Ok(LatentClassSpace { k, profiles, zero_index })
    }

    /// Same as `from_profiles` but sorted into canonical order.
    pub fn canonical(k: usize, mut profiles: Vec<Profile>) -> Result<Self> {
        profiles.sort_by_key(|p| p.bits());
        Self::from_profiles(k, profiles)
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        let mut profiles = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cleaned: String = line.chars().filter(|c| *c != ',' && !c.is_whitespace()).collect();
            profiles.push(Profile::parse(&cleaned)?);
        }
        let k = profiles
            .first()
            .map(|p| p.len())
            .ok_or_else(|| Error::Parse("empty latent class space file".into()))?;
        Self::from_profiles(k, profiles)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for p in &self.profiles {
            s.push_str(&p.to_string());
            s.push('\n');
        }
        s
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn profiles(&self) -> &[Profile] {
        &self.profiles
    }

    pub fn profile(&self, i: usize) -> Profile {
        self.profiles[i]
    }

    pub fn zero_index(&self) -> usize {
        self.zero_index
    }

    pub fn is_saturated(&self) -> bool {
        self.profiles.len() == 1usize << self.k
    }

    pub fn index_of(&self, p: &Profile) -> Option<usize> {
        if self.is_saturated() && self.profiles[p.bits() as usize] == *p {
            return Some(p.bits() as usize);
        }
        self.profiles.iter().position(|x| x == p)
    }
}
