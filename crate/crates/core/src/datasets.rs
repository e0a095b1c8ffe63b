//! Q-matrices of published diagnostic tests.

use crate::profile::Profile;
use crate::qmatrix::QMatrix;

#[derive(Debug, Clone)]
pub struct BundledDataset {
    pub name: &'static str,
    pub q: QMatrix,
    pub notes: &'static str,
}

/// q-vector, count in form A, count in form B.
const TOEFL_TABLE: [(&str, usize, usize); 9] = [
    ("1000", 9, 9),
    ("0100", 8, 11),
    ("1100", 1, 1),
    ("0010", 10, 10),
    ("1010", 0, 1),
    ("0110", 2, 0),
    ("0101", 1, 0),
    ("0011", 7, 8),
    ("1011", 1, 0),
];

const TIMSS: [&str; 43] = [
    "101100000000", "100000000000", "101000000100", "011000000100", "000000100010", "000000100110",
    "000000100010", "010100000000", "000100100000", "000111000000", "000111000000", "100010000000",
    "000000011000", "000000011000", "000000010000", "000110000000", "100000000100", "111000000100",
    "000100000001", "100000100000", "110000000000", "001110000000", "100000000100", "000000001100",
    "000000100000", "100000000001", "100000000000", "110000000000", "110000000000", "000000000110",
    "001000100010", "100000000000", "000000110000", "010010000000", "000000100100", "000000011000",
    "000000100000", "000011000000", "100000000000", "111000000000", "100000000000", "110100000000",
    "100000000001",
];

const FRACTION: [&str; 20] = [
    "00010110", "00010010", "00010010", "01101010", "01010011", "00000010", "11000010", "00000010",
    "01000000", "01001011", "01001010", "00000011", "01011010", "01000010", "10000010", "01000010",
    "01001010", "01001110", "11101010", "01101010",
];

pub const NAMES: [&str; 4] = ["toefl_a", "toefl_b", "timss", "fraction"];

fn from_strings<'a>(rows: impl IntoIterator<Item = &'a str>) -> QMatrix {
    let rows: Vec<Vec<u8>> = rows.into_iter().map(|r| Profile::parse(r).expect("bundled row").to_vec()).collect();
    QMatrix::new(rows).expect("bundled Q-matrix")
}

fn toefl(form_b: bool) -> QMatrix {
    from_strings(TOEFL_TABLE.iter().flat_map(|&(q, a, b)| std::iter::repeat_n(q, if form_b { b } else { a })))
}

pub fn toefl_a() -> BundledDataset {
    BundledDataset {
        name: "toefl_a",
        q: toefl(false),
        notes: "TOEFL iBT reading field test, form A: 39 items x 4 attributes, expanded from the q-vector frequency table top to bottom",
    }
}

pub fn toefl_b() -> BundledDataset {
    BundledDataset {
        name: "toefl_b",
        q: toefl(true),
        notes: "TOEFL iBT reading field test, form B: 40 items x 4 attributes, expanded from the q-vector frequency table top to bottom",
    }
}

pub fn timss() -> BundledDataset {
    BundledDataset { name: "timss", q: from_strings(TIMSS), notes: "TIMSS 2003 8th grade mathematics: 43 items x 12 attributes" }
}

pub fn fraction() -> BundledDataset {
    BundledDataset { name: "fraction", q: from_strings(FRACTION), notes: "Fraction subtraction data: 20 items x 8 attributes" }
}

pub fn by_name(name: &str) -> Option<BundledDataset> {
    match name.to_ascii_lowercase().as_str() {
        "toefl_a" => Some(toefl_a()),
        "toefl_b" => Some(toefl_b()),
        "timss" => Some(timss()),
        "fraction" => Some(fraction()),
        _ => None,
    }
}

pub fn all() -> Vec<BundledDataset> {
    vec![toefl_a(), toefl_b(), timss(), fraction()]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes() {
        let dims: Vec<(usize, usize)> = all().iter().map(|d| (d.q.j(), d.q.k())).collect();
        assert_eq!(dims, vec![(39, 4), (40, 4), (43, 12), (20, 8)]);
    }
}
