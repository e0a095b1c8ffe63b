//! Per-item model assumptions.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ItemModel {
    TwoParamConj,
    TwoParamDisj,
    MultiParam,
}

impl ItemModel {
    pub fn is_two_param(self) -> bool {
        !matches!(self, ItemModel::MultiParam)
    }

    pub fn code(self) -> char {
        match self {
            ItemModel::TwoParamConj => 'c',
            ItemModel::TwoParamDisj => 'd',
            ItemModel::MultiParam => 'm',
        }
    }
}

/// Family of a multi-parameter item, used only when generating parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MultiFamily {
    /// Main effects on the identity scale (ACDM).
    MainEffectIdentity,
    /// Main effects on the logit scale (LLM).
    MainEffectLogit,
    /// Main effects on the log scale (RUM).
    MainEffectLog,
    /// All effects on the identity scale (GDINA).
    AllEffect,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelSpec {
    pub items: Vec<ItemModel>,
    pub multi_family: Option<MultiFamily>,
}

impl ModelSpec {
    pub fn uniform(j: usize, model: ItemModel) -> Self {
        ModelSpec { items: vec![model; j], multi_family: None }
    }

    pub fn conj(j: usize) -> Self {
        Self::uniform(j, ItemModel::TwoParamConj)
    }

    pub fn disj(j: usize) -> Self {
        Self::uniform(j, ItemModel::TwoParamDisj)
    }

    pub fn multi(j: usize) -> Self {
        Self::uniform(j, ItemModel::MultiParam)
    }

    pub fn from_items(items: Vec<ItemModel>) -> Self {
        ModelSpec { items, multi_family: None }
    }

    pub fn with_family(mut self, family: MultiFamily) -> Self {
        self.multi_family = Some(family);
        self
    }

    /// Parses either a single tag (`conj`, `disj`, `multi`) applied to all `j` items,
    /// or a per-item string of `c`/`d`/`m` codes, optionally comma separated.
    pub fn parse(text: &str, j: usize) -> Result<Self> {
        let t = text.trim().to_ascii_lowercase();
        let single = match t.as_str() {
            "conj" | "dina" | "conjunctive" => Some(ItemModel::TwoParamConj),
            "disj" | "dino" | "disjunctive" => Some(ItemModel::TwoParamDisj),
            "multi" | "multi-param" => Some(ItemModel::MultiParam),
            _ => None,
        };
        if let Some(m) = single {
            return Ok(Self::uniform(j, m));
        }
        let items: Vec<ItemModel> = t
            .chars()
            .filter(|c| *c != ',' && !c.is_whitespace())
            .map(|c| match c {
                'c' => Ok(ItemModel::TwoParamConj),
                'd' => Ok(ItemModel::TwoParamDisj),
                'm' => Ok(ItemModel::MultiParam),
                _ => Err(Error::Parse(format!("unknown item model code '{c}'"))),
            })
            .collect::<Result<_>>()?;
        if items.len() != j {
            return Err(Error::Dimension(format!("{} item models for J = {j}", items.len())));
        }
        Ok(Self::from_items(items))
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn all_two_param(&self) -> bool {
        self.items.iter().all(|m| m.is_two_param())
    }

    pub fn all_multi(&self) -> bool {
        self.items.iter().all(|m| *m == ItemModel::MultiParam)
    }

    pub fn all(&self, model: ItemModel) -> bool {
        self.items.iter().all(|m| *m == model)
    }

    pub fn check_len(&self, j: usize) -> Result<()> {
        if self.items.len() != j {
            return Err(Error::Dimension(format!(
                "model spec has {} items but Q has {j}",
                self.items.len()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_forms() {
        assert!(ModelSpec::parse("conj", 3).unwrap().all(ItemModel::TwoParamConj));
        let m = ModelSpec::parse("c,d,m", 3).unwrap();
        assert_eq!(m.items, vec![ItemModel::TwoParamConj, ItemModel::TwoParamDisj, ItemModel::MultiParam]);
        assert!(ModelSpec::parse("cd", 3).is_err());
        assert!(ModelSpec::parse("cx", 2).is_err());
    }
}
