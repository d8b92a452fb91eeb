//! Order-fixed summation.
//!
//! Every reduction in the crate goes through a fixed binary tree so that the result depends
//! only on the input sequence, never on how work was scheduled.

const LEAF: usize = 8;

/// Pairwise (cascade) summation with a fixed split point at `len / 2`.
pub fn pairwise_sum(terms: &[f64]) -> f64 {
    if terms.len() <= LEAF {
        return terms.iter().fold(0.0, |acc, &x| acc + x);
    }
    let mid = terms.len() / 2;
    pairwise_sum(&terms[..mid]) + pairwise_sum(&terms[mid..])
}

/// Sum of exponent contributions for log-space survival assembly.
///
/// Callers feed terms in a canonical order; the pairwise tree keeps rounding error at
/// `O(log n)` ulps.
pub fn log_sum_accumulate(terms: &[f64]) -> f64 {
    pairwise_sum(terms)
}

/// Running count / mean / centered second moment, mergeable in a fixed tree order.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Moments {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    pub fn from_slice(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self::default();
        }
        if values.len() <= LEAF {
            let mut m = Self::default();
            for &v in values {
                m.push(v);
            }
            return m;
        }
        let mid = values.len() / 2;
        Self::from_slice(&values[..mid]).merge(&Self::from_slice(&values[mid..]))
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Chan et al. pairwise combination.
    pub fn merge(&self, other: &Self) -> Self {
        if self.count == 0 {
            return *other;
        }
        if other.count == 0 {
            return *self;
        }
        let count = self.count + other.count;
        let (na, nb, n) = (self.count as f64, other.count as f64, count as f64);
        let delta = other.mean - self.mean;
        let mean = if delta == 0.0 {
            self.mean
        } else {
            self.mean + delta * nb / n
        };
        Self {
            count,
            mean,
            m2: self.m2 + other.m2 + delta * delta * na * nb / n,
        }
    }

    /// Merge a sequence of partial moments in a fixed pairwise tree.
    pub fn merge_all(parts: &[Moments]) -> Self {
        match parts.len() {
            0 => Self::default(),
            1 => parts[0],
            len => {
                let mid = len / 2;
                Self::merge_all(&parts[..mid]).merge(&Self::merge_all(&parts[mid..]))
            }
        }
    }

    /// Unbiased sample variance; zero with fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count - 1) as f64).max(0.0)
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}
