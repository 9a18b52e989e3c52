//! The bidding language: bids, prices, bundles and everything that can be
//! read off a single bid or bid list at a given price.
//!
//! Goods are indexed `0..=n` where `0` is the reject good. Its value and price
//! are always zero and it is never stored.

use std::fmt;

use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::goods::GoodSet;
use crate::pricing::{PriceProblem, StepRule};
use crate::sfm::{self, FnSetFunction};
use crate::Scalar;

/// One unit bid: a value per real good and a weight of `+1` or `-1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Bid {
    values: Vec<Scalar>,
    weight: i64,
}

impl Bid {
    pub fn new(values: Vec<Scalar>, weight: i64) -> Result<Self> {
        if weight != 1 && weight != -1 {
            return Err(Error::BadWeight(weight));
        }
        if values.len() > GoodSet::MAX_GOODS {
            return Err(Error::TooManyGoods(values.len()));
        }
        Ok(Bid { values, weight })
    }

    pub fn from_ints(values: &[i64], weight: i64) -> Result<Self> {
        Bid::new(values.iter().map(|&v| Scalar::from_integer(v)).collect(), weight)
    }

    pub fn positive(values: &[i64]) -> Self {
        Bid::from_ints(values, 1).expect("unit weight")
    }

    pub fn negative(values: &[i64]) -> Self {
        Bid::from_ints(values, -1).expect("unit weight")
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn weight(&self) -> i64 {
        self.weight
    }

    pub fn values(&self) -> &[Scalar] {
        &self.values
    }

    /// Value for good `i`; the reject good is worth zero.
    pub fn value(&self, good: usize) -> Scalar {
        if good == 0 {
            Scalar::zero()
        } else {
            self.values[good - 1]
        }
    }

    pub fn surplus(&self, p: &Price, good: usize) -> Scalar {
        self.value(good) - p.get(good)
    }

    pub fn is_integral(&self) -> bool {
        self.values.iter().all(|v| v.is_integer())
    }

    pub fn max_value(&self) -> Scalar {
        self.values.iter().copied().fold(Scalar::zero(), Scalar::max)
    }

    pub(crate) fn values_mut(&mut self) -> &mut [Scalar] {
        &mut self.values
    }
}

impl fmt::Display for Bid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (k, v) in self.values.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ";{:+})", self.weight)
    }
}

/// A bidder's list of unit bids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BidList {
    pub owner: String,
    pub bids: Vec<Bid>,
}

impl BidList {
    pub fn new(owner: impl Into<String>, bids: Vec<Bid>) -> Self {
        BidList {
            owner: owner.into(),
            bids,
        }
    }

    /// Builds a list from bids of arbitrary integer weight, replacing each by
    /// `|w|` unit bids of the same sign.
    pub fn from_weighted(
        owner: impl Into<String>,
        weighted: impl IntoIterator<Item = (Vec<Scalar>, i64)>,
    ) -> Result<Self> {
        let mut bids = Vec::new();
        for (values, w) in weighted {
            if w == 0 {
                return Err(Error::BadWeight(0));
            }
            let unit = Bid::new(values, w.signum())?;
            bids.extend(std::iter::repeat_n(unit, w.unsigned_abs() as usize));
        }
        Ok(BidList::new(owner, bids))
    }

    pub fn total_weight(&self) -> i64 {
        self.bids.iter().map(Bid::weight).sum()
    }

    pub fn len(&self) -> usize {
        self.bids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bids.is_empty()
    }
}

/// A price vector over the real goods; the reject good's price is zero.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Price(Vec<Scalar>);

impl Price {
    pub fn new(values: Vec<Scalar>) -> Self {
        Price(values)
    }

    pub fn zeros(n: usize) -> Self {
        Price(vec![Scalar::zero(); n])
    }

    pub fn from_ints(values: &[i64]) -> Self {
        Price(values.iter().map(|&v| Scalar::from_integer(v)).collect())
    }

    pub fn n(&self) -> usize {
        self.0.len()
    }

    pub fn get(&self, good: usize) -> Scalar {
        if good == 0 {
            Scalar::zero()
        } else {
            self.0[good - 1]
        }
    }

    pub fn values(&self) -> &[Scalar] {
        &self.0
    }

    pub fn is_integral(&self) -> bool {
        self.0.iter().all(|v| v.is_integer())
    }

    /// Integer coordinates, if every coordinate is integral.
    pub fn to_ints(&self) -> Option<Vec<i64>> {
        self.0
            .iter()
            .map(|v| v.is_integer().then(|| v.to_integer()))
            .collect()
    }

    /// `p + delta * e^S` over the real goods in `set`.
    pub fn offset(&self, set: GoodSet, delta: Scalar) -> Price {
        let mut out = self.clone();
        for good in set.iter().filter(|&g| g > 0) {
            out.0[good - 1] += delta;
        }
        out
    }

    pub fn dot(&self, bundle: &[i64]) -> Scalar {
        self.0
            .iter()
            .zip(bundle)
            .map(|(p, &x)| *p * Scalar::from_integer(x))
            .fold(Scalar::zero(), |a, b| a + b)
    }

    pub fn max_norm(&self) -> Scalar {
        self.0
            .iter()
            .map(|v| v.abs())
            .fold(Scalar::zero(), Scalar::max)
    }
}

impl fmt::Display for Price {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (k, v) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str(")")
    }
}

/// Item counts per real good plus the number of rejected bids.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Bundle {
    pub reject: i64,
    pub goods: Vec<i64>,
}

impl Bundle {
    pub fn zeros(n: usize) -> Self {
        Bundle {
            reject: 0,
            goods: vec![0; n],
        }
    }

    pub fn from_goods(goods: Vec<i64>) -> Self {
        Bundle { reject: 0, goods }
    }

    pub fn n(&self) -> usize {
        self.goods.len()
    }

    pub fn get(&self, good: usize) -> i64 {
        if good == 0 {
            self.reject
        } else {
            self.goods[good - 1]
        }
    }

    pub fn add(&mut self, good: usize, amount: i64) {
        if good == 0 {
            self.reject += amount;
        } else {
            self.goods[good - 1] += amount;
        }
    }

    pub fn set(&mut self, good: usize, amount: i64) {
        if good == 0 {
            self.reject = amount;
        } else {
            self.goods[good - 1] = amount;
        }
    }

    /// Items over real goods, i.e. the L1 norm when all counts are non-negative.
    pub fn items(&self) -> i64 {
        self.goods.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.reject == 0 && self.goods.iter().all(|&x| x == 0)
    }
}

impl std::ops::Add<&Bundle> for &Bundle {
    type Output = Bundle;
    fn add(self, rhs: &Bundle) -> Bundle {
        Bundle {
            reject: self.reject + rhs.reject,
            goods: self.goods.iter().zip(&rhs.goods).map(|(a, b)| a + b).collect(),
        }
    }
}

/// Goods maximising `b_i - p_i` over `[n]_0`.
pub fn demanded_goods(bid: &Bid, p: &Price) -> GoodSet {
    debug_assert_eq!(bid.n(), p.n());
    let mut best = Scalar::zero();
    let mut set = GoodSet::singleton(0);
    for (k, (v, price)) in bid.values.iter().zip(&p.0).enumerate() {
        let s = v - price;
        match s.cmp(&best) {
            std::cmp::Ordering::Greater => {
                best = s;
                set = GoodSet::singleton(k + 1);
            }
            std::cmp::Ordering::Equal => set.insert(k + 1),
            std::cmp::Ordering::Less => {}
        }
    }
    set
}

pub fn is_marginal(bid: &Bid, p: &Price) -> bool {
    demanded_goods(bid, p).len() > 1
}

/// Best surplus of a bid, i.e. `max_i (b_i - p_i)` over `[n]_0`.
pub fn best_surplus(bid: &Bid, p: &Price) -> Scalar {
    bid.values
        .iter()
        .zip(&p.0)
        .map(|(v, price)| v - price)
        .fold(Scalar::zero(), Scalar::max)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SurplusGap {
    /// Gap between the best surplus and the best surplus over non-demanded goods.
    Gap(Scalar),
    /// The bid demands every good, so there is no runner-up.
    AllGoods,
}

pub fn surplus_gap(bid: &Bid, p: &Price) -> SurplusGap {
    let demanded = demanded_goods(bid, p);
    let n = bid.n();
    if demanded == GoodSet::all(n) {
        return SurplusGap::AllGoods;
    }
    let best = best_surplus(bid, p);
    let runner_up = (0..=n)
        .filter(|&i| !demanded.contains(i))
        .map(|i| bid.surplus(p, i))
        .max()
        .expect("some good is not demanded");
    SurplusGap::Gap(best - runner_up)
}

/// `sum_b w(b) max_i (b_i - p_i)`.
pub fn indirect_utility(bids: &[Bid], p: &Price) -> Scalar {
    bids.iter()
        .map(|b| best_surplus(b, p) * Scalar::from_integer(b.weight))
        .fold(Scalar::zero(), |a, b| a + b)
}

/// The unique bundle demanded at a non-marginal price, reject count included.
pub fn demanded_bundle(bids: &[Bid], p: &Price) -> Result<Bundle> {
    let mut bundle = Bundle::zeros(p.n());
    for bid in bids {
        let demanded = demanded_goods(bid, p);
        if demanded.len() > 1 {
            return Err(Error::MarginalPrice);
        }
        bundle.add(demanded.min().expect("non-empty"), bid.weight);
    }
    Ok(bundle)
}

/// Moves a bid one unit away from its non-demanded goods, widening its
/// surplus gap at `p` by exactly one. Bids demanding every good are returned
/// unchanged.
pub fn project_bid(bid: &Bid, p: &Price) -> Bid {
    let demanded = demanded_goods(bid, p);
    let mut out = bid.clone();
    if demanded.contains(0) {
        for (k, v) in out.values.iter_mut().enumerate() {
            if !demanded.contains(k + 1) {
                *v -= Scalar::one();
            }
        }
    } else {
        for good in demanded.iter() {
            out.values[good - 1] += Scalar::one();
        }
    }
    out
}

/// Adds `delta * e^good` to every bid.
pub fn shift_bids(bids: &[Bid], good: usize, delta: Scalar) -> Vec<Bid> {
    assert!(good >= 1, "the reject good cannot be shifted");
    bids.iter()
        .map(|b| {
            let mut out = b.clone();
            out.values[good - 1] += delta;
            out
        })
        .collect()
}

/// Valuation `u(x)` of a bundle for a valid bid list.
///
/// Finds the minimal price `q >= 0` minimising `f(q) + q.x` by ascending
/// steepest descent, certifies that `q` is a global minimiser by checking the
/// downward directions as well, and returns `f(q) + q.x`.
pub fn valuation(bids: &[Bid], bundle: &[i64]) -> Result<Scalar> {
    let n = bundle.len();
    if let Some(b) = bids.iter().find(|b| b.n() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: b.n(),
        });
    }
    if bundle.iter().any(|&x| x < 0) {
        return Err(Error::InfeasibleBundle);
    }
    let problem = PriceProblem::without_reserves(bids.to_vec(), bundle.to_vec())?;
    let q = match problem.long_step_min_up(StepRule::Binary) {
        Ok(sol) => sol.price,
        Err(Error::InfeasibleTarget { .. }) => return Err(Error::InfeasibleBundle),
        Err(e) => return Err(e),
    };
    let step = problem.step();
    let base = problem.lyapunov(&q);
    let downward = FnSetFunction::new(n, |set: u64| {
        let s = GoodSet::from_bits(set << 1);
        problem.lyapunov(&q.offset(s, -step)) - base
    })
    .with_resolution(step);
    let lowest = sfm::minimise(&downward)?;
    if lowest.value < Scalar::zero() {
        return Err(Error::InfeasibleBundle);
    }
    Ok(base)
}

/// Whether `x` is in the demand set of a valid list at `p`.
pub fn is_demanded(bids: &[Bid], bundle: &[i64], p: &Price) -> Result<bool> {
    if p.n() != bundle.len() {
        return Err(Error::DimensionMismatch {
            expected: bundle.len(),
            found: p.n(),
        });
    }
    let u = match valuation(bids, bundle) {
        Ok(u) => u,
        Err(Error::InfeasibleBundle) => return Ok(false),
        Err(e) => return Err(e),
    };
    Ok(u - p.dot(bundle) == indirect_utility(bids, p))
}

/// Least common multiple of the denominators of all values; `1` for integral bids.
pub fn common_denominator<'a>(bids: impl IntoIterator<Item = &'a Bid>) -> i64 {
    bids.into_iter()
        .flat_map(|b| b.values.iter())
        .fold(1i64, |acc, v| acc.lcm(v.denom()))
}

#[cfg(test)]
pub(crate) use tests::{alice, bob};

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Scalar {
        Scalar::new(n, d)
    }

    pub(crate) fn alice() -> Vec<Bid> {
        vec![Bid::positive(&[6, 6]), Bid::positive(&[0, 4])]
    }

    pub(crate) fn bob() -> Vec<Bid> {
        vec![
            Bid::positive(&[2, 4]),
            Bid::positive(&[4, 2]),
            Bid::negative(&[4, 4]),
            Bid::positive(&[6, 6]),
        ]
    }

    fn set(goods: &[usize]) -> GoodSet {
        goods.iter().copied().collect()
    }

    #[test]
    fn demanded_goods_examples() {
        let b = Bid::positive(&[6, 6]);
        assert_eq!(demanded_goods(&b, &Price::from_ints(&[1, 3])), set(&[1]));
        assert_eq!(demanded_goods(&b, &Price::from_ints(&[6, 6])), set(&[0, 1, 2]));
        let b2 = Bid::positive(&[0, 4]);
        assert_eq!(demanded_goods(&b2, &Price::from_ints(&[2, 4])), set(&[0, 2]));
    }

    #[test]
    fn marginality() {
        assert!(!is_marginal(&Bid::positive(&[6, 6]), &Price::from_ints(&[6, 2])));
        assert!(is_marginal(&Bid::positive(&[0, 4]), &Price::from_ints(&[2, 4])));
        let high = Price::from_ints(&[8, 8]);
        for b in alice().iter().chain(&bob()) {
            assert!(!is_marginal(b, &high));
            assert_eq!(demanded_goods(b, &high), GoodSet::singleton(0));
        }
    }

    #[test]
    fn surplus_gap_examples() {
        let p = Price::from_ints(&[4, 4]);
        assert_eq!(
            surplus_gap(&Bid::positive(&[6, 6]), &p),
            SurplusGap::Gap(q(2, 1))
        );
        assert_eq!(surplus_gap(&Bid::negative(&[4, 4]), &p), SurplusGap::AllGoods);
        assert_eq!(
            surplus_gap(&Bid::positive(&[5, 3]), &p),
            SurplusGap::Gap(q(1, 1))
        );
    }

    #[test]
    fn indirect_utility_examples() {
        assert_eq!(indirect_utility(&[], &Price::from_ints(&[3, 1])), q(0, 1));
        assert_eq!(indirect_utility(&alice(), &Price::from_ints(&[1, 3])), q(6, 1));
        assert_eq!(indirect_utility(&bob(), &Price::from_ints(&[10, 10])), q(0, 1));
    }

    #[test]
    fn demanded_bundle_examples() {
        let x = demanded_bundle(&alice(), &Price::from_ints(&[1, 2])).unwrap();
        assert_eq!(x.goods, vec![1, 1]);
        let x = demanded_bundle(&alice(), &Price::from_ints(&[6, 2])).unwrap();
        assert_eq!(x.goods, vec![0, 2]);
        let x = demanded_bundle(&bob(), &Price::from_ints(&[7, 7])).unwrap();
        assert_eq!(x.goods, vec![0, 0]);
        assert_eq!(x.reject, 2);
        assert_eq!(
            demanded_bundle(&alice(), &Price::from_ints(&[4, 4])),
            Err(Error::MarginalPrice)
        );
    }

    #[test]
    fn valuation_examples() {
        assert_eq!(valuation(&bob(), &[1, 1]).unwrap(), q(10, 1));
        assert_eq!(valuation(&bob(), &[0, 2]).unwrap(), q(8, 1));
        assert_eq!(valuation(&bob(), &[2, 0]).unwrap(), q(8, 1));
        assert_eq!(valuation(&bob(), &[0, 0]).unwrap(), q(0, 1));
        assert_eq!(valuation(&alice(), &[0, 0]).unwrap(), q(0, 1));
        // Bob's list carries total weight two, so three items are out of reach.
        assert_eq!(valuation(&bob(), &[2, 1]), Err(Error::InfeasibleBundle));
    }

    #[test]
    fn membership_examples() {
        let p = Price::from_ints(&[4, 4]);
        assert!(is_demanded(&bob(), &[1, 1], &p).unwrap());
        assert!(!is_demanded(&bob(), &[0, 2], &p).unwrap());
        assert!(is_demanded(&alice(), &[0, 2], &p).unwrap());
    }

    #[test]
    fn demand_sets_at_four_four_match_enumeration() {
        // Alice demands {(1,0),(0,1),(1,1),(0,2)}; Bob demands
        // {(1,0),(0,1),(1,1),(2,0),(0,2)} minus (0,2) and (2,0).
        let p = Price::from_ints(&[4, 4]);
        let mut alice_set = Vec::new();
        let mut bob_set = Vec::new();
        for x1 in 0..=3 {
            for x2 in 0..=3 {
                if is_demanded(&alice(), &[x1, x2], &p).unwrap() {
                    alice_set.push((x1, x2));
                }
                if is_demanded(&bob(), &[x1, x2], &p).unwrap() {
                    bob_set.push((x1, x2));
                }
            }
        }
        assert_eq!(alice_set, vec![(0, 1), (0, 2), (1, 0), (1, 1)]);
        assert_eq!(bob_set, vec![(0, 1), (1, 0), (1, 1)]);
    }

    #[test]
    fn projection_examples() {
        let p = Price::from_ints(&[4, 4]);
        let neg = Bid::negative(&[4, 4]);
        assert_eq!(project_bid(&neg, &p), neg);
        assert_eq!(project_bid(&Bid::positive(&[5, 3]), &p), Bid::positive(&[6, 3]));
        assert_eq!(project_bid(&Bid::positive(&[0, 4]), &p), Bid::positive(&[-1, 4]));
    }

    #[test]
    fn shift_examples() {
        let shifted = shift_bids(&[Bid::positive(&[6, 6])], 1, q(1, 10));
        assert_eq!(shifted[0].values(), &[q(61, 10), q(6, 1)]);
        let back = shift_bids(&shifted, 1, q(-1, 10));
        assert_eq!(back, vec![Bid::positive(&[6, 6])]);
        assert!(shift_bids(&[], 2, q(1, 10)).is_empty());
    }

    #[test]
    fn weighted_bids_expand_to_unit_bids() {
        let list = BidList::from_weighted(
            "x",
            vec![(vec![q(3, 1)], 3), (vec![q(2, 1)], -2)],
        )
        .unwrap();
        assert_eq!(list.len(), 5);
        assert_eq!(list.total_weight(), 1);
        assert!(BidList::from_weighted("y", vec![(vec![q(1, 1)], 0)]).is_err());
        assert_eq!(Bid::from_ints(&[1], 2), Err(Error::BadWeight(2)));
    }
}

