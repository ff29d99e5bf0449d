//! Brute-force model of a finite tower as subintervals of the real line.
//!
//! Levels are laid out by cutting each interval into equal pieces and taking
//! spacers from fresh line to the right; membership is decided by interval
//! containment rather than by column offsets.

#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

pub type Q = BigRational;

/// `(h₁, [(cuts, spacers)])`.
pub type Toy = (usize, Vec<(usize, Vec<usize>)>);

pub fn q(p: i64, d: i64) -> Q {
    Q::new(p.into(), d.into())
}

pub struct LineTower {
    pub width: Q,
    /// Left endpoint of each level, bottom to top.
    pub starts: Vec<Q>,
}

pub struct LineModel {
    pub towers: Vec<LineTower>,
}

impl LineModel {
    /// `stages[i] = (cuts, spacers)` for the cut taking tower `i + 1` to `i + 2`.
    pub fn build(h1: usize, w1: Q, stages: &[(usize, Vec<usize>)]) -> Self {
        let first = LineTower {
            starts: (0..h1).map(|k| &w1 * Q::from_integer(BigInt::from(k))).collect(),
            width: w1.clone(),
        };
        let mut free = &w1 * Q::from_integer(BigInt::from(h1));
        let mut towers = vec![first];
        for (cuts, spacers) in stages {
            let prev = towers.last().unwrap();
            let width = &prev.width / Q::from_integer(BigInt::from(*cuts));
            let mut starts = Vec::new();
            for (i, &count) in spacers.iter().enumerate().take(*cuts) {
                let shift = &width * Q::from_integer(BigInt::from(i));
                starts.extend(prev.starts.iter().map(|a| a + &shift));
                for _ in 0..count {
                    starts.push(free.clone());
                    free += &width;
                }
            }
            towers.push(LineTower { width, starts });
        }
        LineModel { towers }
    }

    pub fn tower(&self, j: usize) -> &LineTower {
        &self.towers[j - 1]
    }

    /// Real intervals making up a union of stage-`j` levels.
    pub fn intervals(&self, j: usize, levels: &[usize]) -> Vec<(Q, Q)> {
        let t = self.tower(j);
        levels.iter().map(|&l| (t.starts[l].clone(), &t.starts[l] + &t.width)).collect()
    }

    /// Whether level `l` of tower `k` lies inside the union.
    pub fn inside(&self, k: usize, l: usize, set: &[(Q, Q)]) -> bool {
        let t = self.tower(k);
        let (a, b) = (&t.starts[l], &t.starts[l] + &t.width);
        set.iter().any(|(lo, hi)| lo <= a && &b <= hi)
    }

    /// `μ(A ∩ TⁿB)` on tower `k` closed up cyclically, plus the part of it
    /// that uses no wrap-around.
    pub fn cyclic_correlation(&self, k: usize, a: &[(Q, Q)], b: &[(Q, Q)], n: i64) -> (Q, Q) {
        let t = self.tower(k);
        let h = t.starts.len() as i64;
        let mut all = 0i64;
        let mut straight = 0i64;
        for l in 0..h {
            let src = l - n;
            let wrapped = src.rem_euclid(h);
            if self.inside(k, l as usize, a) && self.inside(k, wrapped as usize, b) {
                all += 1;
                if (0..h).contains(&src) {
                    straight += 1;
                }
            }
        }
        let w = t.width.clone();
        (&w * Q::from_integer(all.into()), &w * Q::from_integer(straight.into()))
    }

    pub fn height(&self, k: usize) -> usize {
        self.tower(k).starts.len()
    }
}

pub fn to_f64(x: &Q) -> f64 {
    x.numer().to_f64().unwrap() / x.denom().to_f64().unwrap()
}

pub fn is_zero(x: &Q) -> bool {
    x.is_zero()
}

/// Every subset of `0..h` as a sorted level list.
pub fn subsets(h: usize) -> Vec<Vec<usize>> {
    (0u32..1 << h)
        .map(|mask| (0..h).filter(|i| mask >> i & 1 == 1).collect())
        .collect()
}
