use std::collections::BTreeMap;

use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest size for which [`brute_force_root`] enumerates `S_N`.
pub const BRUTE_FORCE_LIMIT: usize = 8;

/// A bijection on `[0, N)`, stored in one-line image form.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct FinitePermutation {
    images: Vec<usize>,
}

impl TryFrom<Vec<usize>> for FinitePermutation {
    type Error = Error;

    fn try_from(images: Vec<usize>) -> Result<Self> {
        Self::from_images(images)
    }
}

impl From<FinitePermutation> for Vec<usize> {
    fn from(p: FinitePermutation) -> Self {
        p.images
    }
}

impl FinitePermutation {
    pub fn from_images(images: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; images.len()];
        for &i in &images {
            if i >= images.len() || std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidArgument(format!(
                    "not a permutation of [0, {})",
                    images.len()
                )));
            }
        }
        Ok(FinitePermutation { images })
    }

    pub fn identity(n: usize) -> Self {
        FinitePermutation {
            images: (0..n).collect(),
        }
    }

    /// The `n`-cycle `i ↦ i + 1 mod n`.
    pub fn cycle(n: usize) -> Self {
        FinitePermutation {
            images: (0..n).map(|i| (i + 1) % n.max(1)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn images(&self) -> &[usize] {
        &self.images
    }

    pub fn apply(&self, i: usize) -> usize {
        self.images[i]
    }

    /// `(self ∘ other)(i) = self(other(i))`.
    pub fn compose(&self, other: &FinitePermutation) -> FinitePermutation {
        assert_eq!(self.len(), other.len());
        FinitePermutation {
            images: other.images.iter().map(|&i| self.images[i]).collect(),
        }
    }

    pub fn inverse(&self) -> FinitePermutation {
        let mut images = vec![0; self.len()];
        for (i, &j) in self.images.iter().enumerate() {
            images[j] = i;
        }
        FinitePermutation { images }
    }

    /// Cycles, each starting at its smallest element, ordered by that element.
    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.len()];
        let mut out = Vec::new();
        for start in 0..self.len() {
            if seen[start] {
                continue;
            }
            let mut cycle = Vec::new();
            let mut i = start;
            while !seen[i] {
                seen[i] = true;
                cycle.push(i);
                i = self.images[i];
            }
            out.push(cycle);
        }
        out
    }

    pub fn cycle_count(&self) -> usize {
        self.cycles().len()
    }

    /// Number of cycles of each length.
    pub fn cycle_type(&self) -> BTreeMap<usize, usize> {
        let mut t = BTreeMap::new();
        for c in self.cycles() {
            *t.entry(c.len()).or_default() += 1;
        }
        t
    }

    /// `self^k`, computed cycle by cycle.
    pub fn pow(&self, k: u64) -> FinitePermutation {
        let mut images = vec![0; self.len()];
        for cycle in self.cycles() {
            let len = cycle.len();
            let step = (k % len as u64) as usize;
            for (pos, &i) in cycle.iter().enumerate() {
                images[i] = cycle[(pos + step) % len];
            }
        }
        FinitePermutation { images }
    }
}

/// Whether `σ^k = perm` has a solution.
pub fn root_exists(perm: &FinitePermutation, k: u64) -> Result<bool> {
    Ok(kth_root(perm, k)?.is_some())
}

/// A `k`-th root of `perm`, if one exists.
///
/// An `M`-cycle raised to the `k`-th power splits into `d = gcd(M, k)` cycles
/// of length `M/d`. So the `c_L` cycles of length `L` must be split into
/// groups of sizes `d` with `d | k` and `gcd(L·d, k) = d`; each group of `d`
/// cycles is then interleaved into a single cycle of length `L·d`.
pub fn kth_root(perm: &FinitePermutation, k: u64) -> Result<Option<FinitePermutation>> {
    if k == 0 {
        return Err(Error::InvalidArgument("root degree must be ≥ 1".into()));
    }
    let mut by_length: BTreeMap<usize, Vec<Vec<usize>>> = BTreeMap::new();
    for c in perm.cycles() {
        by_length.entry(c.len()).or_default().push(c);
    }
    let mut images = vec![0; perm.len()];
    for (len, cycles) in by_length {
        let allowed: Vec<usize> = divisors(k)
            .into_iter()
            .filter(|&d| (len as u64 * d).gcd(&k) == d)
            .map(|d| d as usize)
            .collect();
        let Some(groups) = split_into(cycles.len(), &allowed) else {
            return Ok(None);
        };
        let mut rest = cycles.as_slice();
        for d in groups {
            let (group, tail) = rest.split_at(d);
            rest = tail;
            interleave(group, k, &mut images);
        }
    }
    let root = FinitePermutation { images };
    debug_assert_eq!(&root.pow(k), perm);
    Ok(Some(root))
}

fn divisors(k: u64) -> Vec<u64> {
    (1..=k).filter(|d| k.is_multiple_of(*d)).collect()
}

/// Writes `count` as a sum of parts from `allowed`, if possible.
fn split_into(count: usize, allowed: &[usize]) -> Option<Vec<usize>> {
    // reach[c] = last part used to reach c.
    let mut reach: Vec<Option<usize>> = vec![None; count + 1];
    let mut ok = vec![false; count + 1];
    ok[0] = true;
    for c in 1..=count {
        for &d in allowed {
            if d <= c && ok[c - d] {
                ok[c] = true;
                reach[c] = Some(d);
                break;
            }
        }
    }
    if !ok[count] {
        return None;
    }
    let mut parts = Vec::new();
    let mut c = count;
    while c > 0 {
        let d = reach[c].expect("reachable");
        parts.push(d);
        c -= d;
    }
    Some(parts)
}

/// Builds one cycle `x_0 → x_1 → … → x_{M-1}` of length `M = L·d` whose
/// `k`-th power is the given `d` cycles of length `L`.
fn interleave(group: &[Vec<usize>], k: u64, images: &mut [usize]) {
    let d = group.len();
    let len = group[0].len();
    let m = len * d;
    let mut seq = vec![0usize; m];
    let k = (k % m as u64) as usize;
    for (t, cycle) in group.iter().enumerate() {
        for (j, &x) in cycle.iter().enumerate() {
            seq[(t + j * k) % m] = x;
        }
    }
    for i in 0..m {
        images[seq[i]] = seq[(i + 1) % m];
    }
}

/// Exhaustive search over `S_N` for `N ≤ BRUTE_FORCE_LIMIT`.
pub fn brute_force_root(perm: &FinitePermutation, k: u64) -> Result<Option<FinitePermutation>> {
    if perm.len() > BRUTE_FORCE_LIMIT {
        return Err(Error::InvalidArgument(format!(
            "brute force limited to N ≤ {BRUTE_FORCE_LIMIT}"
        )));
    }
    let mut candidate: Vec<usize> = (0..perm.len()).collect();
    loop {
        let sigma = FinitePermutation {
            images: candidate.clone(),
        };
        if &sigma.pow(k) == perm {
            return Ok(Some(sigma));
        }
        if !next_permutation(&mut candidate) {
            return Ok(None);
        }
    }
}

/// Lexicographic successor; false when `v` was the last permutation.
pub(crate) fn next_permutation(v: &mut [usize]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn rejects_non_bijections() {
        assert!(FinitePermutation::from_images(vec![0, 0]).is_err());
        assert!(FinitePermutation::from_images(vec![2, 0]).is_err());
        let p: FinitePermutation = serde_json::from_str("[1,2,0]").unwrap();
        assert_eq!(serde_json::to_string(&p).unwrap(), "[1,2,0]");
        assert!(serde_json::from_str::<FinitePermutation>("[1,1]").is_err());
    }

    #[test]
    fn identity_has_roots() {
        for k in 1..6 {
            let id = FinitePermutation::identity(5);
            let root = kth_root(&id, k).unwrap().unwrap();
            assert_eq!(root.pow(k), id);
        }
    }

    #[test]
    fn four_cycle_has_no_square_root() {
        let c4 = FinitePermutation::cycle(4);
        assert!(!root_exists(&c4, 2).unwrap());
        assert!(brute_force_root(&c4, 2).unwrap().is_none());
    }

    #[test]
    fn six_cycle_no_cube_root() {
        let c6 = FinitePermutation::cycle(6);
        assert!(!root_exists(&c6, 3).unwrap());
        assert!(brute_force_root(&c6, 3).unwrap().is_none());
        // Two 3-cycles do have a square root (a 6-cycle).
        let two = FinitePermutation::from_images(vec![1, 2, 0, 4, 5, 3]).unwrap();
        let root = kth_root(&two, 2).unwrap().unwrap();
        assert_eq!(root.pow(2), two);
    }

    #[test]
    fn pow_matches_repeated_composition() {
        let p = FinitePermutation::from_images(vec![3, 0, 4, 1, 2, 6, 5]).unwrap();
        let mut acc = FinitePermutation::identity(7);
        for k in 0..12u64 {
            assert_eq!(p.pow(k), acc);
            acc = p.compose(&acc);
        }
        assert_eq!(p.compose(&p.inverse()), FinitePermutation::identity(7));
    }

    /// Every permutation of size ≤ 7 against the set of all k-th powers.
    #[test]
    fn criterion_matches_power_image() {
        for n in 0..=7usize {
            let mut all = Vec::new();
            let mut v: Vec<usize> = (0..n).collect();
            loop {
                all.push(FinitePermutation { images: v.clone() });
                if !next_permutation(&mut v) {
                    break;
                }
            }
            for k in 2..=5u64 {
                let powers: HashSet<_> = all.iter().map(|s| s.pow(k)).collect();
                for p in &all {
                    let root = kth_root(p, k).unwrap();
                    assert_eq!(root.is_some(), powers.contains(p), "n={n} k={k} {p:?}");
                    if let Some(r) = root {
                        assert_eq!(&r.pow(k), p);
                    }
                }
            }
        }
    }
}
