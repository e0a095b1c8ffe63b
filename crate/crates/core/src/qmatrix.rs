//! Binary item-by-attribute design matrices.

use crate::error::{Error, Result};
use crate::profile::{Profile, MAX_ATTRIBUTES};
use std::path::Path;

/// Largest supported number of items.
pub const MAX_ITEMS: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QMatrix {
    k: usize,
    rows: Vec<u32>,
    attribute_names: Option<Vec<String>>,
}

impl QMatrix {
    /// Builds a Q-matrix, rejecting all-zero rows and all-zero columns.
    pub fn new(rows: Vec<Vec<u8>>) -> Result<Self> {
        Self::with_options(rows, false)
    }

    /// Builds a Q-matrix; all-zero columns are accepted with a warning when `allow_zero_columns` is set.
    pub fn with_options(rows: Vec<Vec<u8>>, allow_zero_columns: bool) -> Result<Self> {
        let k = rows.first().map(|r| r.len()).unwrap_or(0);
        let mut masks = Vec::with_capacity(rows.len());
        for (j, r) in rows.iter().enumerate() {
            if r.len() != k {
                return Err(Error::Dimension(format!(
                    "row {} has {} entries, expected {k}",
                    j + 1,
                    r.len()
                )));
            }
            masks.push(Profile::from_slice(r)?.bits());
        }
        Self::from_masks(k, masks, allow_zero_columns)
    }

    pub fn from_masks(k: usize, rows: Vec<u32>, allow_zero_columns: bool) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Parse("Q-matrix has no rows".into()));
        }
        if k == 0 || k > MAX_ATTRIBUTES {
            return Err(Error::SizeGuard(format!("K = {k} must be in 1..={MAX_ATTRIBUTES}")));
        }
        if rows.len() > MAX_ITEMS {
            return Err(Error::SizeGuard(format!(
                "J = {} exceeds the limit of {MAX_ITEMS} items",
                rows.len()
            )));
        }
        for (j, &r) in rows.iter().enumerate() {
            if r == 0 {
                return Err(Error::Parse(format!("item {} has an all-zero q-vector", j + 1)));
            }
            if r >> k != 0 {
                return Err(Error::Dimension(format!("item {} exceeds K = {k}", j + 1)));
            }
        }
        let covered = rows.iter().fold(0u32, |a, &r| a | r);
        let zero_cols: Vec<usize> = (0..k).filter(|&c| covered >> c & 1 == 0).map(|c| c + 1).collect();
        if !zero_cols.is_empty() {
            if allow_zero_columns {
                log::warn!("attribute column(s) {zero_cols:?} are never required; the column is redundant");
            } else {
                return Err(Error::Parse(format!(
                    "attribute column(s) {zero_cols:?} are all zero; remove them or allow zero columns"
                )));
            }
        }
        Ok(QMatrix { k, rows, attribute_names: None })
    }

    pub fn with_attribute_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.k {
            return Err(Error::Dimension(format!("{} names for K = {}", names.len(), self.k)));
        }
        self.attribute_names = Some(names);
        Ok(self)
    }

    /// Reads comma-separated 0/1 rows. A first row containing anything other than 0/1 is a header.
    pub fn parse_csv(text: &str, allow_zero_columns: bool) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let mut rows = Vec::new();
        let mut names = None;
        for (i, rec) in reader.records().enumerate() {
            let rec = rec?;
            if rec.iter().all(|f| f.is_empty()) {
                continue;
            }
            let parsed: Option<Vec<u8>> = rec
                .iter()
                .map(|f| match f {
                    "0" => Some(0),
                    "1" => Some(1),
                    _ => None,
                })
                .collect();
            match parsed {
                Some(r) => rows.push(r),
                None if i == 0 => names = Some(rec.iter().map(str::to_string).collect()),
                None => return Err(Error::Parse(format!("row {} is not a 0/1 row", i + 1))),
            }
        }
        let q = Self::with_options(rows, allow_zero_columns)?;
        match names {
            Some(n) => q.with_attribute_names(n),
            None => Ok(q),
        }
    }

    pub fn from_file(path: impl AsRef<Path>, allow_zero_columns: bool) -> Result<Self> {
        Self::parse_csv(&std::fs::read_to_string(path)?, allow_zero_columns)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        if let Some(names) = &self.attribute_names {
            s.push_str(&names.join(","));
            s.push('\n');
        }
        for &r in &self.rows {
            let cells: Vec<&str> = (0..self.k).map(|c| if r >> c & 1 == 1 { "1" } else { "0" }).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    pub fn j(&self) -> usize {
        self.rows.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Row masks; bit `c` of row `j` is q_{j, c+1}.
    pub fn rows(&self) -> &[u32] {
        &self.rows
    }

    pub fn row(&self, j: usize) -> Profile {
        Profile::from_raw(self.rows[j], self.k)
    }

    pub fn entry(&self, j: usize, attr: usize) -> bool {
        self.rows[j] >> attr & 1 == 1
    }

    pub fn attribute_names(&self) -> Option<&[String]> {
        self.attribute_names.as_deref()
    }

    /// Number of items requiring each attribute.
    pub fn column_counts(&self) -> Vec<usize> {
        (0..self.k).map(|c| self.rows.iter().filter(|&&r| r >> c & 1 == 1).count()).collect()
    }

    /// Items (0-based) requiring attribute `attr`.
    pub fn items_with(&self, attr: usize) -> Vec<usize> {
        (0..self.j()).filter(|&j| self.entry(j, attr)).collect()
    }

    /// Submatrix keeping the listed items and dropping the listed attribute.
    pub fn minor(&self, keep_items: &[usize], drop_attr: usize) -> Vec<u32> {
        keep_items.iter().map(|&j| drop_bit(self.rows[j], drop_attr)).collect()
    }

    pub fn select_rows(&self, items: &[usize]) -> Result<QMatrix> {
        QMatrix::from_masks(self.k, items.iter().map(|&j| self.rows[j]).collect(), true)
    }

    /// True when every unit vector e_k appears among the rows.
    pub fn is_complete(&self) -> bool {
        (0..self.k).all(|c| self.rows.contains(&(1 << c)))
    }
}

/// Removes bit `pos`, shifting higher bits down by one.
pub(crate) fn drop_bit(x: u32, pos: usize) -> u32 {
    let low = x & ((1u32 << pos) - 1);
    let high = (x >> (pos + 1)) << pos;
    low | high
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_zero_rows_and_columns() {
        assert!(QMatrix::new(vec![vec![1, 0], vec![0, 0]]).is_err());
        assert!(QMatrix::new(vec![vec![1, 0], vec![1, 0]]).is_err());
        assert!(QMatrix::with_options(vec![vec![1, 0], vec![1, 0]], true).is_ok());
        assert!(QMatrix::new(vec![vec![1, 0], vec![1]]).is_err());
    }

    #[test]
    fn csv_with_header_round_trip() {
        let q = QMatrix::parse_csv("a,b\n1,0\n1,1\n", false).unwrap();
        assert_eq!(q.j(), 2);
        assert_eq!(q.attribute_names().unwrap(), &["a".to_string(), "b".to_string()]);
        let again = QMatrix::parse_csv(&q.to_csv(), false).unwrap();
        assert_eq!(q, again);
        let plain = QMatrix::parse_csv("1,0\n0,1\n", false).unwrap();
        assert!(plain.attribute_names().is_none());
        assert!(QMatrix::parse_csv("1,0\nx,1\n", false).is_err());
    }

    #[test]
    fn drop_bit_shifts() {
        assert_eq!(drop_bit(0b1011, 1), 0b101);
        assert_eq!(drop_bit(0b1011, 0), 0b101);
        assert_eq!(drop_bit(0b1011, 3), 0b011);
    }
}
