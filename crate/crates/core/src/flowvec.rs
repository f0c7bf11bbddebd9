//! Fixed-width bit vectors indexed by flow.

use std::fmt;

const WORD: usize = 64;

/// One bit per flow, in canonical flow order.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct FlowVector {
    width: usize,
    words: Vec<u64>,
}

impl FlowVector {
    /// The zero vector of the given width.
    pub fn zeros(width: usize) -> Self {
        Self {
            width,
            words: vec![0; width.div_ceil(WORD)],
        }
    }

    /// The all-ones vector of the given width.
    pub fn ones(width: usize) -> Self {
        let mut v = Self {
            width,
            words: vec![u64::MAX; width.div_ceil(WORD)],
        };
        v.clear_padding();
        v
    }

    pub fn from_indices(width: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut v = Self::zeros(width);
        for i in indices {
            v.set(i);
        }
        v
    }

    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.width);
        self.words[i / WORD] >> (i % WORD) & 1 == 1
    }

    /// Sets bit `i`, returning whether it was previously clear.
    #[inline]
    pub fn set(&mut self, i: usize) -> bool {
        assert!(i < self.width, "flow index {i} out of range {}", self.width);
        let w = &mut self.words[i / WORD];
        let mask = 1u64 << (i % WORD);
        let was_clear = *w & mask == 0;
        *w |= mask;
        was_clear
    }

    /// Clears bit `i`, returning whether it was previously set.
    #[inline]
    pub fn clear(&mut self, i: usize) -> bool {
        assert!(i < self.width, "flow index {i} out of range {}", self.width);
        let w = &mut self.words[i / WORD];
        let mask = 1u64 << (i % WORD);
        let was_set = *w & mask != 0;
        *w &= !mask;
        was_set
    }

    /// Number of set bits, `|a|`.
    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Index of the lowest set bit.
    pub fn first(&self) -> Option<usize> {
        self.words
            .iter()
            .enumerate()
            .find(|(_, &w)| w != 0)
            .map(|(i, w)| i * WORD + w.trailing_zeros() as usize)
    }

    pub fn iter_ones(&self) -> Ones<'_> {
        Ones {
            words: &self.words,
            idx: 0,
            cur: self.words.first().copied().unwrap_or(0),
        }
    }

    pub fn and(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a & b)
    }

    pub fn or(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a | b)
    }

    /// `self ∧ ¬other`.
    pub fn and_not(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a & !b)
    }

    pub fn not(&self) -> Self {
        let mut v = Self {
            width: self.width,
            words: self.words.iter().map(|w| !w).collect(),
        };
        v.clear_padding();
        v
    }

    pub fn or_assign(&mut self, other: &Self) {
        self.check_width(other);
        self.words.iter_mut().zip(&other.words).for_each(|(a, b)| *a |= b);
    }

    pub fn and_not_assign(&mut self, other: &Self) {
        self.check_width(other);
        self.words.iter_mut().zip(&other.words).for_each(|(a, b)| *a &= !b);
    }

    /// Element-wise OR over a collection, `⋁A`. Returns the zero vector of
    /// `width` for an empty collection.
    pub fn big_or<'a>(width: usize, vectors: impl IntoIterator<Item = &'a FlowVector>) -> Self {
        let mut acc = Self::zeros(width);
        for v in vectors {
            acc.or_assign(v);
        }
        acc
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.check_width(other);
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(u64, u64) -> u64) -> Self {
        self.check_width(other);
        Self {
            width: self.width,
            words: self.words.iter().zip(&other.words).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    fn check_width(&self, other: &Self) {
        assert_eq!(self.width, other.width, "flow vector width mismatch");
    }

    fn clear_padding(&mut self) {
        let rem = self.width % WORD;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }
}

impl fmt::Debug for FlowVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter_ones()).finish()
    }
}

/// Iterator over set bit positions, ascending.
pub struct Ones<'a> {
    words: &'a [u64],
    idx: usize,
    cur: u64,
}

impl Iterator for Ones<'_> {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        loop {
            if self.cur != 0 {
                let bit = self.cur.trailing_zeros() as usize;
                self.cur &= self.cur - 1;
                return Some(self.idx * WORD + bit);
            }
            self.idx += 1;
            if self.idx >= self.words.len() {
                return None;
            }
            self.cur = self.words[self.idx];
        }
    }
}
