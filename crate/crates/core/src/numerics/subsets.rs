//! Subsets of `{1, …, n}` as bitmasks (bit `i` set iff component `i + 1` is a member).

use std::fmt;

use serde::{Serialize, Serializer};

/// A subset of the component index set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct SubsetMask(pub u32);

impl SubsetMask {
    pub const EMPTY: SubsetMask = SubsetMask(0);

    /// The full set `{1, …, n}`.
    pub fn full(n: usize) -> Self {
        debug_assert!(n <= 31);
        SubsetMask(((1u64 << n) - 1) as u32)
    }

    pub fn singleton(index: usize) -> Self {
        SubsetMask(1 << index)
    }

    /// Build from zero-based component indices.
    pub fn from_indices<I: IntoIterator<Item = usize>>(indices: I) -> Self {
        SubsetMask(indices.into_iter().fold(0u32, |acc, i| acc | (1 << i)))
    }

    #[inline]
    pub fn bits(self) -> u32 {
        self.0
    }

    #[inline]
    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    #[inline]
    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    #[inline]
    pub fn contains(self, index: usize) -> bool {
        self.0 >> index & 1 == 1
    }

    #[inline]
    pub fn intersects(self, other: SubsetMask) -> bool {
        self.0 & other.0 != 0
    }

    #[inline]
    pub fn is_subset_of(self, other: SubsetMask) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn union(self, other: SubsetMask) -> Self {
        SubsetMask(self.0 | other.0)
    }

    /// Zero-based member indices in increasing order.
    pub fn members(self) -> Members {
        Members(self.0)
    }

    /// All submasks, each exactly once, from `self` down to the empty set.
    pub fn submasks(self) -> Submasks {
        Submasks {
            of: self.0,
            next: Some(self.0),
        }
    }

    pub fn complement(self, n: usize) -> Self {
        SubsetMask(!self.0 & SubsetMask::full(n).0)
    }
}

/// Rendered 1-based, e.g. `[1,3]`.
impl fmt::Display for SubsetMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (k, i) in self.members().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}", i + 1)?;
        }
        f.write_str("]")
    }
}

impl Serialize for SubsetMask {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

pub struct Members(u32);

impl Iterator for Members {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            return None;
        }
        let i = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(i)
    }
}

pub struct Submasks {
    of: u32,
    next: Option<u32>,
}

impl Iterator for Submasks {
    type Item = SubsetMask;

    fn next(&mut self) -> Option<SubsetMask> {
        let s = self.next?;
        self.next = if s == 0 {
            None
        } else {
            Some((s - 1) & self.of)
        };
        Some(SubsetMask(s))
    }
}

/// Every subset of `{1, …, n}`, including the empty set, in increasing bit order.
pub fn subsets_iter(n: usize) -> impl Iterator<Item = SubsetMask> {
    (0..(1u64 << n)).map(|b| SubsetMask(b as u32))
}

pub fn subsets_of(j: SubsetMask) -> Submasks {
    j.submasks()
}

pub fn complement(j: SubsetMask, n: usize) -> SubsetMask {
    j.complement(n)
}
