use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::rational::Rational;
use crate::tower::{correlation, CellSet, MeasureInterval, TowerGeometry};

/// The skew product `F(T,p)` on `X × Z_p`: the fibre index advances by one
/// every step, and the base moves by `T` only when leaving fibre `0`.
#[derive(Clone, Copy, Debug)]
pub struct SkewSystem<'g> {
    p: u64,
    base: &'g TowerGeometry,
}

impl<'g> SkewSystem<'g> {
    pub fn new(p: u64, base: &'g TowerGeometry) -> Result<Self> {
        if p < 2 {
            return Err(Error::InvalidArgument("skew order p must exceed 1".into()));
        }
        Ok(SkewSystem { p, base })
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    /// Mechanics never need `p` prime; some analyses do.
    pub fn is_prime(&self) -> bool {
        (2..).take_while(|d| d * d <= self.p).all(|d| !self.p.is_multiple_of(d))
    }

    pub fn base(&self) -> &'g TowerGeometry {
        self.base
    }

    /// Net power of `T` applied by `Fⁿ` starting in fibre `z`.
    pub fn base_steps(&self, z: u64, n: &BigInt) -> BigInt {
        let p = BigInt::from(self.p);
        let z = BigInt::from(z);
        // Multiples of p in [z + lo, z + hi).
        let multiples = |lo: &BigInt, hi: &BigInt| -> BigInt {
            let top: BigInt = &z + hi - 1;
            let bottom: BigInt = &z + lo - 1;
            top.div_floor(&p) - bottom.div_floor(&p)
        };
        if n.is_negative() {
            -multiples(n, &BigInt::zero())
        } else {
            multiples(&BigInt::zero(), n)
        }
    }

    /// Fibre correlation `μ(A ∩ π_X(Fⁿ(B×{z′}) ∩ X×{z}))`: zero unless
    /// `z ≡ z′ + n (mod p)`, otherwise `μ(A ∩ T^q B)` with `q` the number of
    /// passages through fibre `0`.
    #[allow(clippy::too_many_arguments)]
    pub fn skew_correlation(
        &self,
        a: &CellSet,
        z: u64,
        b: &CellSet,
        z_prime: u64,
        n: &BigInt,
        tol: &Rational,
    ) -> Result<MeasureInterval> {
        if z >= self.p || z_prime >= self.p {
            return Err(Error::InvalidArgument(format!(
                "fibre indices must lie in Z_{}",
                self.p
            )));
        }
        let landing = (BigInt::from(z_prime) + n).mod_floor(&BigInt::from(self.p));
        if landing != BigInt::from(z) {
            return Ok(MeasureInterval::point(Rational::zero()));
        }
        let q = self.base_steps(z_prime, n);
        correlation(self.base, a, b, &q, tol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};
    use crate::tower::{derive_geometry, RankOneSchedule, StageParams};
    use num_traits::ToPrimitive;

    fn geometry() -> TowerGeometry {
        let s = RankOneSchedule::new(
            3,
            int(1),
            vec![StageParams::custom(vec![0, 1]), StageParams::custom(vec![0, 2, 0])],
        )
        .unwrap();
        derive_geometry(&s, 3).unwrap()
    }

    /// Step-by-step fibre walk.
    fn walk(p: u64, z: u64, n: i64) -> i64 {
        let (mut z, mut q) = (z as i64, 0i64);
        let p = p as i64;
        if n >= 0 {
            for _ in 0..n {
                if z == 0 {
                    q += 1;
                }
                z = (z + 1) % p;
            }
        } else {
            for _ in 0..-n {
                z = (z - 1).rem_euclid(p);
                if z == 0 {
                    q -= 1;
                }
            }
        }
        q
    }

    #[test]
    fn base_steps_match_walk() {
        let g = geometry();
        for p in 2..6u64 {
            let f = SkewSystem::new(p, &g).unwrap();
            for z in 0..p {
                for n in -15i64..15 {
                    assert_eq!(f.base_steps(z, &BigInt::from(n)).to_i64().unwrap(), walk(p, z, n));
                }
            }
        }
    }

    #[test]
    fn one_passage_after_p_steps() {
        let g = geometry();
        let a = CellSet::from_ranges(&g, 1, &[(0, 2)]).unwrap();
        let b = CellSet::from_levels(&g, 1, &[1]).unwrap();
        let tol = ratio(1, 1 << 16);
        let f = SkewSystem::new(3, &g).unwrap();
        let got = f.skew_correlation(&a, 0, &b, 0, &BigInt::from(3), &tol).unwrap();
        assert_eq!(got, correlation(&g, &a, &b, &BigInt::from(1), &tol).unwrap());
    }

    #[test]
    fn fibre_move_without_base_motion() {
        let g = geometry();
        let a = CellSet::from_ranges(&g, 1, &[(0, 2)]).unwrap();
        let b = CellSet::from_ranges(&g, 1, &[(1, 3)]).unwrap();
        let f = SkewSystem::new(4, &g).unwrap();
        let got = f.skew_correlation(&a, 2, &b, 1, &BigInt::from(1), &ratio(1, 8)).unwrap();
        assert_eq!(got, MeasureInterval::point(a.intersect(&b).unwrap().measure(&g)));
        let off = f.skew_correlation(&a, 3, &b, 1, &BigInt::from(1), &ratio(1, 8)).unwrap();
        assert_eq!(off, MeasureInterval::point(int(0)));
    }

    #[test]
    fn p_th_power_acts_as_base() {
        let g = geometry();
        let a = CellSet::from_ranges(&g, 2, &[(0, 3), (5, 6)]).unwrap();
        let b = CellSet::from_ranges(&g, 2, &[(2, 7)]).unwrap();
        let tol = int(10);
        for p in [2u64, 3, 5] {
            let f = SkewSystem::new(p, &g).unwrap();
            for z in 0..p {
                for m in -2i64..=2 {
                    let n = BigInt::from(m * p as i64);
                    let got = f.skew_correlation(&a, z, &b, z, &n, &tol).unwrap();
                    let want = correlation(&g, &a, &b, &BigInt::from(m), &tol).unwrap();
                    assert_eq!(got, want);
                }
            }
        }
        assert!(SkewSystem::new(1, &g).is_err());
        assert!(!SkewSystem::new(4, &g).unwrap().is_prime());
    }
}
