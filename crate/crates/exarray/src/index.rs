//! Finite combinatorics of multi-indexes: tuples without repetition, binary
//! pattern vectors, embeddings, permutation actions and canonical label sets.
//!
//! Conventions used across the whole crate:
//!
//! * labels are positive integers; `0` acts as the "absent" marker and is
//!   stripped when a tuple is collapsed to a set,
//! * a *tuple* has pairwise distinct entries (an element of the set of
//!   k-tuples without repetition),
//! * a *pattern* is a k-vector of bits selecting a subset of positions; the
//!   canonical enumeration is by level (number of ones) ascending, then
//!   lexicographic within a level. Every other module relies on this order.

use crate::error::{Error, Result};

/// A k-tuple of pairwise distinct positive labels.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IndexTuple {
    entries: Vec<u64>,
}

impl IndexTuple {
    pub fn new(entries: Vec<u64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::invalid("tuple must have at least one entry"));
        }
        if entries.contains(&0) {
            return Err(Error::invalid("tuple labels must be positive"));
        }
        let mut sorted = entries.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid(format!(
                "tuple entries must be pairwise distinct, got {entries:?}"
            )));
        }
        Ok(IndexTuple { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.entries
    }

    /// The tuple (i_{σ(1)}, ..., i_{σ(k)}) for a one-based permutation σ.
    pub fn permute(&self, sigma: &[usize]) -> Result<IndexTuple> {
        check_permutation(sigma, self.len())?;
        let entries = sigma.iter().map(|&s| self.entries[s - 1]).collect();
        Ok(IndexTuple { entries })
    }
}

impl std::ops::Deref for IndexTuple {
    type Target = [u64];
    fn deref(&self) -> &[u64] {
        &self.entries
    }
}

impl std::fmt::Display for IndexTuple {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (m, x) in self.entries.iter().enumerate() {
            if m > 0 {
                write!(f, ",")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, ")")
    }
}

/// Validates that `sigma` is a bijection of {1..k} given one-based.
pub fn check_permutation(sigma: &[usize], k: usize) -> Result<()> {
    if sigma.len() != k {
        return Err(Error::invalid(format!(
            "permutation length {} does not match tuple length {k}",
            sigma.len()
        )));
    }
    let mut seen = vec![false; k];
    for &s in sigma {
        if s == 0 || s > k || seen[s - 1] {
            return Err(Error::invalid(format!("not a bijection of 1..={k}: {sigma:?}")));
        }
        seen[s - 1] = true;
    }
    Ok(())
}

/// Inverse of a one-based permutation.
pub fn invert_permutation(sigma: &[usize]) -> Result<Vec<usize>> {
    check_permutation(sigma, sigma.len())?;
    let mut inv = vec![0usize; sigma.len()];
    for (pos, &s) in sigma.iter().enumerate() {
        inv[s - 1] = pos + 1;
    }
    Ok(inv)
}

/// All k! one-based permutations of {1..k}, in lexicographic order.
pub fn all_permutations(k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (1..=k).collect();
    loop {
        out.push(cur.clone());
        // next lexicographic permutation
        let Some(i) = (0..k.saturating_sub(1)).rev().find(|&i| cur[i] < cur[i + 1]) else {
            break;
        };
        let j = (i + 1..k).rev().find(|&j| cur[j] > cur[i]).unwrap();
        cur.swap(i, j);
        cur[i + 1..].reverse();
    }
    out
}

/// A binary k-vector selecting positions; `level` is its number of ones.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PatternVector {
    bits: Vec<bool>,
}

impl PatternVector {
    pub fn new(bits: Vec<bool>) -> Self {
        PatternVector { bits }
    }

    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::invalid("pattern entries must be 0 or 1"));
        }
        Ok(PatternVector { bits: bits.iter().map(|&b| b == 1).collect() })
    }

    pub fn zeros(k: usize) -> Self {
        PatternVector { bits: vec![false; k] }
    }

    pub fn ones(k: usize) -> Self {
        PatternVector { bits: vec![true; k] }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn level(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn bit(&self, pos: usize) -> bool {
        self.bits[pos]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// Componentwise partial order e ≤ e'.
    pub fn le(&self, other: &PatternVector) -> bool {
        self.bits.len() == other.bits.len()
            && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    /// Positions (zero-based) where the pattern is set, ascending.
    pub fn selected_positions(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(m, &b)| b.then_some(m))
            .collect()
    }

    /// The pattern (e_{σ(1)}, ..., e_{σ(k)}) for a one-based permutation σ.
    pub fn permute(&self, sigma: &[usize]) -> Result<PatternVector> {
        check_permutation(sigma, self.bits.len())?;
        Ok(PatternVector { bits: sigma.iter().map(|&s| self.bits[s - 1]).collect() })
    }
}

impl std::fmt::Display for PatternVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for &b in &self.bits {
            write!(f, "{}", if b { '1' } else { '0' })?;
        }
        Ok(())
    }
}

/// Canonical set of positive labels: sorted ascending, deduplicated, no zeros.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IndexSet {
    labels: Vec<u64>,
}

impl IndexSet {
    /// Builds the canonical set from arbitrary entries; zeros are stripped.
    pub fn from_entries(entries: &[u64]) -> Self {
        let mut labels: Vec<u64> = entries.iter().copied().filter(|&x| x > 0).collect();
        labels.sort_unstable();
        labels.dedup();
        IndexSet { labels }
    }

    pub fn empty() -> Self {
        IndexSet { labels: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[u64] {
        &self.labels
    }
}

/// Enumerates the patterns of length `k`, optionally restricted to one level.
///
/// The order is canonical: level ascending, lexicographic within a level.
pub fn pattern_vectors(k: usize, level: Option<usize>) -> Result<Vec<PatternVector>> {
    if k == 0 {
        return Err(Error::invalid("pattern length k must be positive"));
    }
    if k > 24 {
        return Err(Error::CountOverflow(format!("2^{k} patterns is beyond the supported range")));
    }
    if let Some(j) = level {
        if j > k {
            return Err(Error::invalid(format!("pattern level {j} exceeds length {k}")));
        }
    }
    let mut all: Vec<PatternVector> = (0..(1u32 << k))
        .map(|mask| {
            PatternVector::new((0..k).map(|pos| mask & (1 << (k - 1 - pos)) != 0).collect())
        })
        .collect();
    all.sort_by(|a, b| (a.level(), a.bits()).cmp(&(b.level(), b.bits())));
    Ok(match level {
        Some(j) => all.into_iter().filter(|e| e.level() == j).collect(),
        None => all,
    })
}

/// The nonempty patterns of length `k` in canonical order; these index the
/// argument list of a kernel.
pub fn nonempty_patterns(k: usize) -> Result<Vec<PatternVector>> {
    Ok(pattern_vectors(k, None)?.into_iter().filter(|e| e.level() > 0).collect())
}

/// Places the entries of a level-j tuple at the selected positions of a
/// level-j pattern; all other positions are 0.
pub fn embed(entries: &[u64], pattern: &PatternVector) -> Result<Vec<u64>> {
    if entries.len() != pattern.level() {
        return Err(Error::invalid(format!(
            "tuple length {} does not match pattern level {}",
            entries.len(),
            pattern.level()
        )));
    }
    let mut out = vec![0u64; pattern.len()];
    let mut next = 0;
    for (pos, &b) in pattern.bits().iter().enumerate() {
        if b {
            out[pos] = entries[next];
            next += 1;
        }
    }
    Ok(out)
}

/// The canonical set {i ⊙ e}⁺: entries of `i` at positions where `e` is set.
pub fn mask_to_set(entries: &[u64], pattern: &PatternVector) -> Result<IndexSet> {
    if entries.len() != pattern.len() {
        return Err(Error::invalid(format!(
            "tuple length {} does not match pattern length {}",
            entries.len(),
            pattern.len()
        )));
    }
    let selected: Vec<u64> = entries
        .iter()
        .zip(pattern.bits())
        .filter_map(|(&x, &b)| b.then_some(x))
        .collect();
    Ok(IndexSet::from_entries(&selected))
}

/// Number of k-tuples without repetition over n labels: n·(n−1)···(n−k+1).
pub fn tuple_count(n: u64, k: usize) -> Result<u64> {
    if n == 0 || k == 0 {
        return Err(Error::invalid("n and k must be positive"));
    }
    if (k as u64) > n {
        return Ok(0);
    }
    let mut acc: u128 = 1;
    for m in 0..k as u64 {
        acc = acc.saturating_mul((n - m) as u128);
        if acc > i64::MAX as u128 {
            return Err(Error::CountOverflow(format!("tuple count for n={n}, k={k}")));
        }
    }
    Ok(acc as u64)
}

/// Binomial coefficient C(n, k) with the same range policy as `tuple_count`.
pub fn binomial(n: u64, k: usize) -> Result<u64> {
    if (k as u64) > n {
        return Ok(0);
    }
    let k = (k as u64).min(n - k as u64) as usize;
    let mut acc: u128 = 1;
    for m in 1..=k as u64 {
        acc = acc.saturating_mul((n - (k as u64) + m) as u128) / m as u128;
        if acc > i64::MAX as u128 {
            return Err(Error::CountOverflow(format!("binomial for n={n}, k={k}")));
        }
    }
    Ok(acc as u64)
}

/// Lazy stream over the k-tuples of {1..n}; strictly increasing tuples only
/// when `ordered` is set. The order is lexicographic and deterministic.
pub struct TupleStream {
    n: u64,
    k: usize,
    ordered: bool,
    current: Option<Vec<u64>>,
}

impl TupleStream {
    fn first(n: u64, k: usize) -> Option<Vec<u64>> {
        if (k as u64) > n {
            return None;
        }
        Some((1..=k as u64).collect())
    }
}

impl Iterator for TupleStream {
    type Item = IndexTuple;

    fn next(&mut self) -> Option<IndexTuple> {
        let cur = self.current.as_mut()?;
        let item = IndexTuple { entries: cur.clone() };
        if self.ordered {
            // advance the rightmost entry that still has room
            let k = self.k;
            let mut pos = k;
            loop {
                if pos == 0 {
                    self.current = None;
                    break;
                }
                pos -= 1;
                if cur[pos] < self.n - (k - 1 - pos) as u64 {
                    cur[pos] += 1;
                    for q in pos + 1..k {
                        cur[q] = cur[q - 1] + 1;
                    }
                    break;
                }
            }
        } else {
            // odometer over {1..n}^k, skipping entries already in the prefix
            'outer: loop {
                let mut pos = self.k;
                loop {
                    if pos == 0 {
                        self.current = None;
                        break 'outer;
                    }
                    pos -= 1;
                    if cur[pos] < self.n {
                        cur[pos] += 1;
                        cur[pos + 1..].fill(1);
                        break;
                    }
                    cur[pos] = 1;
                }
                if distinct(cur) {
                    break;
                }
            }
        }
        Some(item)
    }
}

fn distinct(entries: &[u64]) -> bool {
    for (m, &x) in entries.iter().enumerate() {
        if entries[..m].contains(&x) {
            return false;
        }
    }
    true
}

/// Streams the tuples of {1..n} without materializing them.
///
/// `k > n` yields an empty stream (the index set is empty, not an error);
/// `k = 0` or `n = 0` is rejected.
pub fn enumerate_tuples(n: u64, k: usize, ordered: bool) -> Result<TupleStream> {
    if n == 0 || k == 0 {
        return Err(Error::invalid("n and k must be positive"));
    }
    // the lexicographically first tuple (1, 2, ..., k) serves both modes
    let current = TupleStream::first(n, k);
    Ok(TupleStream { n, k, ordered, current })
}

/// Visits every tuple in the same order as `enumerate_tuples`, without
/// per-item allocation. The visitor sees a scratch buffer it must not hold.
pub fn visit_tuples<F: FnMut(&[u64])>(n: u64, k: usize, ordered: bool, mut f: F) -> Result<()> {
    if n == 0 || k == 0 {
        return Err(Error::invalid("n and k must be positive"));
    }
    if (k as u64) > n {
        return Ok(());
    }
    let mut cur: Vec<u64> = (1..=k as u64).collect();
    if ordered {
        loop {
            f(&cur);
            let mut pos = k;
            loop {
                if pos == 0 {
                    return Ok(());
                }
                pos -= 1;
                if cur[pos] < n - (k - 1 - pos) as u64 {
                    cur[pos] += 1;
                    for q in pos + 1..k {
                        cur[q] = cur[q - 1] + 1;
                    }
                    break;
                }
            }
        }
    } else {
        loop {
            f(&cur);
            'advance: loop {
                let mut pos = k;
                loop {
                    if pos == 0 {
                        return Ok(());
                    }
                    pos -= 1;
                    if cur[pos] < n {
                        cur[pos] += 1;
                        cur[pos + 1..].fill(1);
                        break;
                    }
                    cur[pos] = 1;
                }
                if distinct(&cur) {
                    break 'advance;
                }
            }
        }
    }
}

/// Visits the tuples over {1..m} whose maximum label is exactly m.
///
/// This is the increment from n = m−1 to n = m of a sum over all tuples,
/// which is what lets a whole trajectory cost one pass over the largest
/// index set. For `ordered` the maximum sits in the last slot; otherwise m
/// is placed at each position in turn, lexicographic within a placement.
pub fn visit_tuples_with_max<F: FnMut(&[u64])>(
    m: u64,
    k: usize,
    ordered: bool,
    mut f: F,
) -> Result<()> {
    if m == 0 || k == 0 {
        return Err(Error::invalid("m and k must be positive"));
    }
    if (k as u64) > m {
        return Ok(());
    }
    let mut buf = vec![0u64; k];
    if k == 1 {
        buf[0] = m;
        f(&buf);
        return Ok(());
    }
    if ordered {
        buf[k - 1] = m;
        visit_tuples(m - 1, k - 1, true, |rest| {
            buf[..k - 1].copy_from_slice(rest);
            f(&buf);
        })
    } else {
        for slot in 0..k {
            visit_tuples(m - 1, k - 1, false, |rest| {
                let mut q = 0;
                for (pos, item) in buf.iter_mut().enumerate() {
                    if pos == slot {
                        *item = m;
                    } else {
                        *item = rest[q];
                        q += 1;
                    }
                }
                f(&buf);
            })?;
        }
        Ok(())
    }
}
