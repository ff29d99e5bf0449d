use num_bigint::BigInt;
use proptest::prelude::*;
use rankone::poisson::{sample_indexed, Simulator};
use rankone::tower::{derive_geometry, generated_schedule, translate, CellSet, GeneratorOptions, TowerGeometry};

fn standard(depth: usize) -> TowerGeometry {
    let s = generated_schedule(|j| j % 2 == 1, &[2, 3], depth, &GeneratorOptions::default()).unwrap();
    derive_geometry(&s, depth + 1).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn apply_t_agrees_with_translate(seed in any::<u64>(), mask in 1u32..32, n in -200i64..200) {
        let g = standard(8);
        let levels: Vec<u64> = (0..5).filter(|i| mask >> i & 1 == 1).collect();
        let a = CellSet::from_levels(&g, 2, &levels).unwrap();
        let k = 4;
        let sim = Simulator::new(&g, k, 128).unwrap();
        let n = BigInt::from(n);
        // Resolved part of T⁻ⁿA at stage k.
        let pre = translate(&g, &a, &-&n, k).unwrap().resolved;
        let h = g.height(k).clone();
        for i in 0..8 {
            let config = sample_indexed(&sim, seed, i).unwrap();
            for x in &config.points {
                let y = sim.apply_t(x, &n).unwrap();
                let image = &x.level + &n;
                if image >= BigInt::from(0) && image < h {
                    prop_assert_eq!(sim.contains(&a, &y).unwrap(), pre.contains_level(&x.level));
                    prop_assert_eq!(y.stage, k);
                }
                let back = sim.apply_t(&y, &-&n).unwrap();
                prop_assert_eq!(back, sim.lift_to(x, y.stage).unwrap());
            }
        }
    }
}

#[test]
fn climbing_preserves_membership_of_lower_sets() {
    let g = standard(8);
    let a = CellSet::from_ranges(&g, 2, &[(1, 4)]).unwrap();
    let sim = Simulator::new(&g, 3, 128).unwrap();
    for i in 0..50 {
        for x in sample_indexed(&sim, 99, i).unwrap().points {
            let before = sim.contains(&a, &x).unwrap();
            let up = sim.lift_to(&x, 6).unwrap();
            assert_eq!(sim.contains(&a, &up).unwrap(), before);
        }
    }
}
