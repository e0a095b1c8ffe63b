//! Item sets as 64-bit masks.

pub type ItemMask = u64;

pub fn iter_bits(mask: ItemMask) -> impl Iterator<Item = usize> {
    let mut m = mask;
    std::iter::from_fn(move || {
        if m == 0 {
            None
        } else {
            let i = m.trailing_zeros() as usize;
            m &= m - 1;
            Some(i)
        }
    })
}

pub fn all_items(j: usize) -> ItemMask {
    if j >= 64 {
        u64::MAX
    } else {
        (1u64 << j) - 1
    }
}

/// 1-based item numbers, ascending.
pub fn to_numbers(mask: ItemMask) -> Vec<usize> {
    iter_bits(mask).map(|i| i + 1).collect()
}

pub fn from_numbers(items: &[usize]) -> ItemMask {
    items.iter().fold(0, |m, &i| m | 1u64 << (i - 1))
}

pub fn from_indices(items: &[usize]) -> ItemMask {
    items.iter().fold(0, |m, &i| m | 1u64 << i)
}

/// Elements of `universe` in ascending order.
pub fn elements(universe: ItemMask) -> Vec<usize> {
    iter_bits(universe).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbering() {
        assert_eq!(to_numbers(0b1011), vec![1, 2, 4]);
        assert_eq!(from_numbers(&[1, 2, 4]), 0b1011);
        assert_eq!(all_items(3), 0b111);
        assert_eq!(all_items(64), u64::MAX);
    }
}
