use productmix::sfm::{submodularity_violation, FnSetFunction};
use productmix::testgen::{generate_instance, GenConfig};
use productmix::{
    demanded_bundle, indirect_utility, initial_problem, is_demanded, project_bid, surplus_gap, Bid,
    GoodSet, Price, PriceProblem, Scalar, SurplusGap,
};
use proptest::prelude::*;

fn bid(n: usize) -> impl Strategy<Value = Bid> {
    (prop::collection::vec(0i64..12, n), prop::bool::ANY)
        .prop_map(|(v, pos)| Bid::from_ints(&v, if pos { 1 } else { -1 }).unwrap())
}

fn price(n: usize) -> impl Strategy<Value = Price> {
    prop::collection::vec(0i64..12, n).prop_map(|v| Price::from_ints(&v))
}

fn case(n: usize) -> impl Strategy<Value = (Vec<Bid>, Price)> {
    (prop::collection::vec(bid(n), 0..8), price(n))
}

/// All-positive lists are always valid.
fn positive_case(n: usize) -> impl Strategy<Value = (Vec<Bid>, Price)> {
    let bid = prop::collection::vec(0i64..12, n).prop_map(|v| Bid::positive(&v));
    (prop::collection::vec(bid, 0..8), price(n))
}

proptest! {
    #[test]
    fn fast_slope_matches_direct((bids, p) in (1usize..5).prop_flat_map(case), target in prop::collection::vec(0i64..4, 4)) {
        let n = p.n();
        let problem = PriceProblem::new(bids, target[..n].to_vec()).unwrap();
        let oracle = problem.slope_oracle(&p);
        for bits in 0..(1u64 << n) {
            let s = GoodSet::from_bits(bits << 1);
            prop_assert_eq!(oracle.slope(s), problem.slope(&p, s));
        }
    }

    #[test]
    fn projection_widens_the_gap((bids, p) in (1usize..5).prop_flat_map(case)) {
        for b in &bids {
            let projected = project_bid(b, &p);
            match surplus_gap(b, &p) {
                SurplusGap::AllGoods => prop_assert_eq!(&projected, b),
                SurplusGap::Gap(g) => {
                    prop_assert_eq!(surplus_gap(&projected, &p), SurplusGap::Gap(g + 1));
                }
            }
            prop_assert_eq!(
                productmix::demanded_goods(&projected, &p),
                productmix::demanded_goods(b, &p)
            );
        }
    }

    #[test]
    fn indirect_utility_is_additive((bids, p) in (1usize..5).prop_flat_map(case), split in 0usize..8) {
        let k = split.min(bids.len());
        let (a, b) = bids.split_at(k);
        prop_assert_eq!(
            indirect_utility(&bids, &p),
            indirect_utility(a, &p) + indirect_utility(b, &p)
        );
    }

    #[test]
    fn generic_prices_demand_their_bundle((bids, p) in (1usize..4).prop_flat_map(positive_case)) {
        // Offsets 1/3, 1/9, .. avoid every tie among integral bids.
        let mut q = p.clone();
        let mut step = Scalar::new(1, 3);
        for i in 1..=p.n() {
            q = q.offset(GoodSet::singleton(i), step);
            step /= 3;
        }
        let x = demanded_bundle(&bids, &q).unwrap();
        prop_assert!(is_demanded(&bids, &x.goods, &q).unwrap());
    }

    #[test]
    fn generated_slopes_are_submodular(seed in 0u64..1000, n in 2usize..5) {
        let cfg = GenConfig { max_value: 20, ..GenConfig::new(n, 4) };
        let inst = generate_instance(&cfg, 2, seed).unwrap();
        let bids: Vec<Bid> = inst.lists.iter().flat_map(|l| l.bids.clone()).collect();
        let problem = PriceProblem::new(bids, inst.target).unwrap();
        for p in [Price::zeros(n), inst.price.clone(), Price::from_ints(&vec![7; n])] {
            let f = FnSetFunction::new(n, |s| problem.slope(&p, GoodSet::from_bits(s << 1)));
            prop_assert!(submodularity_violation(&f).is_none());
        }
    }

    #[test]
    fn residual_slope_fast_path(seed in 0u64..1000, pick in 0usize..64) {
        let cfg = GenConfig { max_value: 20, ..GenConfig::new(3, 4) };
        let inst = generate_instance(&cfg, 3, seed).unwrap();
        let mut a = initial_problem(inst.lists, &inst.target, &inst.price).unwrap();
        a.non_marginals();
        let good = pick % 4;
        let bidder = pick / 4 % 3;
        let p = inst.price;
        let base = a.residual_lyapunov(&p, good, bidder);
        for set in 0..8u64 {
            for sign in [1i64, -1] {
                let q = p.offset(GoodSet::from_bits(set << 1), Scalar::new(sign, 10));
                prop_assert_eq!(
                    a.residual_slope(good, bidder, set, sign),
                    a.residual_lyapunov(&q, good, bidder) - base
                );
            }
        }
    }
}
