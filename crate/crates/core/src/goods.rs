//! Compact sets of goods.
//!
//! Good `0` is the notional reject good; real goods are `1..=n`. A set is a
//! 64-bit mask with bit `i` standing for good `i`, so at most 63 real goods
//! are supported.

use std::fmt;

#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GoodSet(u64);

impl GoodSet {
    pub const MAX_GOODS: usize = 63;

    pub const fn empty() -> Self {
        GoodSet(0)
    }

    pub const fn from_bits(bits: u64) -> Self {
        GoodSet(bits)
    }

    pub const fn bits(self) -> u64 {
        self.0
    }

    pub fn singleton(good: usize) -> Self {
        GoodSet(1u64 << good)
    }

    /// All of `[n]_0`, reject good included.
    pub fn all(n: usize) -> Self {
        debug_assert!(n <= Self::MAX_GOODS);
        if n == Self::MAX_GOODS {
            GoodSet(u64::MAX)
        } else {
            GoodSet((1u64 << (n + 1)) - 1)
        }
    }

    /// The real goods `[n]`.
    pub fn real(n: usize) -> Self {
        GoodSet(Self::all(n).0 & !1)
    }

    pub fn contains(self, good: usize) -> bool {
        good < 64 && self.0 & (1u64 << good) != 0
    }

    pub fn insert(&mut self, good: usize) {
        self.0 |= 1u64 << good;
    }

    pub fn remove(&mut self, good: usize) {
        self.0 &= !(1u64 << good);
    }

    pub fn with(mut self, good: usize) -> Self {
        self.insert(good);
        self
    }

    pub fn without(mut self, good: usize) -> Self {
        self.remove(good);
        self
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset(self, other: GoodSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn intersects(self, other: GoodSet) -> bool {
        self.0 & other.0 != 0
    }

    pub fn union(self, other: GoodSet) -> Self {
        GoodSet(self.0 | other.0)
    }

    pub fn intersection(self, other: GoodSet) -> Self {
        GoodSet(self.0 & other.0)
    }

    pub fn difference(self, other: GoodSet) -> Self {
        GoodSet(self.0 & !other.0)
    }

    pub fn min(self) -> Option<usize> {
        (self.0 != 0).then(|| self.0.trailing_zeros() as usize)
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let good = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(good)
            }
        })
    }
}

impl FromIterator<usize> for GoodSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        let mut set = GoodSet::empty();
        for good in iter {
            set.insert(good);
        }
        set
    }
}

impl fmt::Debug for GoodSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for GoodSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, good) in self.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{good}")?;
        }
        f.write_str("}")
    }
}
