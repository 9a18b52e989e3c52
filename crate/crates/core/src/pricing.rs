//! Component-wise minimal market-clearing prices.
//!
//! The Lyapunov function `g(p) = f(p) + t.p` is L-natural convex for a valid
//! aggregate list and its minimal minimiser is the minimal clearing price.
//! Starting from the origin we repeatedly move up along the inclusion-minimal
//! steepest descent set, either one lattice step at a time or as far as the
//! slope stays constant.
//!
//! Prices live on the lattice `delta * Z^n` where `delta` is the reciprocal of
//! the common denominator of all bid values; for integral bids it is 1.

use std::collections::HashMap;

use num_traits::Zero;

use crate::bids::{best_surplus, common_denominator, demanded_goods, Bid, BidList, Price};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::goods::GoodSet;
use crate::sfm::{FnSetFunction, Minimiser};
use crate::Scalar;

#[derive(Clone, Debug)]
pub struct PriceProblem {
    n: usize,
    bids: Vec<Bid>,
    target: Vec<i64>,
    reserve: Bid,
    reserves: i64,
    step: Scalar,
    bound: Scalar,
    sfm: Minimiser,
    execution: Execution,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StepRule {
    /// One lattice step per iteration.
    Unit,
    /// Long steps, length found by binary search.
    Binary,
    /// Long steps, length found by tracking when demand changes.
    DemandChange,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceStep {
    /// Price before the step.
    pub price: Price,
    pub direction: GoodSet,
    /// Step length in lattice units.
    pub length: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DescentTrace {
    pub steps: Vec<TraceStep>,
}

impl DescentTrace {
    pub fn iterations(&self) -> usize {
        self.steps.len()
    }

    /// Every price visited, the final one excluded.
    pub fn prices(&self) -> impl Iterator<Item = &Price> {
        self.steps.iter().map(|s| &s.price)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PriceSolution {
    pub price: Price,
    pub trace: DescentTrace,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DemandBounds {
    /// Goods over-demanded by every demanded bundle.
    pub over: GoodSet,
    /// Goods under-demanded (or exactly demanded) by every demanded bundle.
    pub under: GoodSet,
    pub min: Vec<i64>,
    pub max: Vec<i64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StepLength {
    pub length: u64,
    pub rounds: usize,
}

/// Bids at a lattice price grouped by demand set; answers slope queries in
/// time linear in the number of distinct demand sets.
#[derive(Clone, Debug)]
pub struct SlopeOracle {
    groups: Vec<(GoodSet, i64)>,
    target: Vec<i64>,
    step: Scalar,
}

impl SlopeOracle {
    /// `g'(p; S)` in lattice units.
    pub fn units(&self, set: GoodSet) -> i64 {
        let supply: i64 = set.iter().map(|i| self.target[i - 1]).sum();
        let leaving: i64 = self
            .groups
            .iter()
            .filter(|(d, _)| d.is_subset(set))
            .map(|(_, w)| w)
            .sum();
        supply - leaving
    }

    pub fn slope(&self, set: GoodSet) -> Scalar {
        self.step * Scalar::from_integer(self.units(set))
    }
}

impl PriceProblem {
    /// Aggregate bids plus `|t|_1 + 1` reserve bids at the origin.
    pub fn new(bids: Vec<Bid>, target: Vec<i64>) -> Result<Self> {
        let reserves = target.iter().sum::<i64>() + 1;
        Self::build(bids, target, reserves)
    }

    pub fn from_lists(lists: &[BidList], target: Vec<i64>) -> Result<Self> {
        Self::new(
            lists.iter().flat_map(|l| l.bids.iter().cloned()).collect(),
            target,
        )
    }

    /// The bare aggregate with no reserve bids.
    pub fn without_reserves(bids: Vec<Bid>, target: Vec<i64>) -> Result<Self> {
        Self::build(bids, target, 0)
    }

    fn build(bids: Vec<Bid>, target: Vec<i64>, reserves: i64) -> Result<Self> {
        let n = target.len();
        if n > GoodSet::MAX_GOODS {
            return Err(Error::TooManyGoods(n));
        }
        if let Some(i) = target.iter().position(|&t| t < 0) {
            return Err(Error::NegativeTarget(i + 1));
        }
        if let Some(b) = bids.iter().find(|b| b.n() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: b.n(),
            });
        }
        let step = Scalar::new(1, common_denominator(&bids));
        let bound = bids.iter().map(Bid::max_value).fold(Scalar::zero(), Scalar::max);
        Ok(PriceProblem {
            n,
            bids,
            target,
            reserve: Bid::new(vec![Scalar::zero(); n], 1)?,
            reserves,
            step,
            bound,
            sfm: Minimiser::default(),
            execution: Execution::default(),
        })
    }

    pub fn with_sfm(mut self, sfm: Minimiser) -> Self {
        self.sfm = sfm;
        self
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self.sfm = self.sfm.with_execution(execution);
        self
    }

    /// Overrides the price bound `M`; it may only grow.
    pub fn with_bound(mut self, bound: Scalar) -> Self {
        self.bound = self.bound.max(bound);
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn target(&self) -> &[i64] {
        &self.target
    }

    pub fn bids(&self) -> &[Bid] {
        &self.bids
    }

    pub fn reserves(&self) -> i64 {
        self.reserves
    }

    /// Number of unit bids, reserves included.
    pub fn total_bids(&self) -> usize {
        self.bids.len() + self.reserves as usize
    }

    /// Lattice spacing `delta`.
    pub fn step(&self) -> Scalar {
        self.step
    }

    pub fn bound(&self) -> Scalar {
        self.bound
    }

    fn term_count(&self) -> usize {
        self.bids.len() + usize::from(self.reserves > 0)
    }

    fn term(&self, k: usize) -> (&Bid, i64) {
        match self.bids.get(k) {
            Some(b) => (b, b.weight()),
            None => (&self.reserve, self.reserves),
        }
    }

    fn check_price(&self, p: &Price) {
        assert_eq!(p.n(), self.n, "price dimension");
    }

    pub fn indirect_utility(&self, p: &Price) -> Scalar {
        self.check_price(p);
        self.execution.map_reduce(
            self.term_count(),
            Scalar::zero(),
            |k| {
                let (b, w) = self.term(k);
                best_surplus(b, p) * Scalar::from_integer(w)
            },
            |a, b| a + b,
        )
    }

    /// `g(p) = f(p) + t.p`.
    pub fn lyapunov(&self, p: &Price) -> Scalar {
        self.indirect_utility(p) + p.dot(&self.target)
    }

    /// `g(p + delta e^S) - g(p)` evaluated directly.
    pub fn slope(&self, p: &Price, set: GoodSet) -> Scalar {
        self.lyapunov(&p.offset(set, self.step)) - self.lyapunov(p)
    }

    fn demand_sets(&self, p: &Price) -> Vec<(GoodSet, i64)> {
        self.execution.map_collect(self.term_count(), |k| {
            let (b, w) = self.term(k);
            (demanded_goods(b, p), w)
        })
    }

    /// Fast slope evaluator at a lattice price.
    pub fn slope_oracle(&self, p: &Price) -> SlopeOracle {
        self.check_price(p);
        debug_assert!(self.on_lattice(p), "price {p} is off the lattice");
        let mut groups: HashMap<GoodSet, i64> = HashMap::new();
        for (d, w) in self.demand_sets(p) {
            if !d.contains(0) {
                *groups.entry(d).or_default() += w;
            }
        }
        let mut groups: Vec<_> = groups.into_iter().filter(|&(_, w)| w != 0).collect();
        groups.sort();
        SlopeOracle {
            groups,
            target: self.target.clone(),
            step: self.step,
        }
    }

    pub fn on_lattice(&self, p: &Price) -> bool {
        p.values().iter().all(|v| (v / self.step).is_integer())
    }

    pub fn demand_bounds(&self, p: &Price) -> DemandBounds {
        self.check_price(p);
        let mut min = vec![0i64; self.n];
        let mut max = vec![0i64; self.n];
        for (d, w) in self.demand_sets(p) {
            let marginal = d.len() > 1;
            for i in d.iter().filter(|&i| i > 0) {
                max[i - 1] += w;
                if !marginal {
                    min[i - 1] += w;
                }
            }
        }
        let mut over = GoodSet::empty();
        let mut under = GoodSet::empty();
        for i in 0..self.n {
            if min[i] > self.target[i] {
                over.insert(i + 1);
            }
            if max[i] <= self.target[i] {
                under.insert(i + 1);
            }
        }
        DemandBounds {
            over,
            under,
            min,
            max,
        }
    }

    /// Inclusion-minimal set `S` minimising `g'(p; S)`; empty exactly when
    /// `p` is the minimal minimiser of `g` among prices at or above `p`.
    pub fn steepest_direction(&self, p: &Price) -> Result<GoodSet> {
        let bounds = self.demand_bounds(p);
        let free = GoodSet::real(self.n)
            .difference(bounds.over)
            .difference(bounds.under);
        if free.is_empty() {
            return Ok(bounds.over);
        }
        let oracle = self.slope_oracle(p);
        let elements: Vec<usize> = free.iter().collect();
        let expand = |s: u64| -> GoodSet {
            elements
                .iter()
                .enumerate()
                .filter(|(k, _)| s >> k & 1 == 1)
                .map(|(_, &g)| g)
                .collect()
        };
        let h = FnSetFunction::new(elements.len(), |s| {
            Scalar::from_integer(oracle.units(expand(s).union(bounds.over)))
        });
        let best = self.sfm.minimal_minimiser(&h)?;
        Ok(bounds.over.union(expand(best.set)))
    }

    /// Largest `lambda` with `g'(p; S) = g'(p + (lambda - 1) delta e^S; S)` is
    /// guaranteed below this.
    fn step_cap(&self, p: &Price, set: GoodSet) -> u64 {
        let lowest = set
            .iter()
            .map(|i| p.get(i))
            .min()
            .expect("non-empty direction");
        let room = ((self.bound - lowest) / self.step).floor().to_integer();
        (room.max(0) as u64) + 2
    }

    fn slope_units_at(&self, p: &Price, set: GoodSet, lambda: u64) -> i64 {
        let q = p.offset(set, self.step * Scalar::from_integer(lambda as i64));
        self.slope_oracle(&q).units(set)
    }

    pub fn step_length_binary(&self, p: &Price, set: GoodSet) -> u64 {
        assert!(!set.is_empty(), "step length needs a direction");
        let base = self.slope_oracle(p).units(set);
        let (mut lo, mut hi) = (1u64, self.step_cap(p, set));
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.slope_units_at(p, set, mid - 1) == base {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    pub fn step_length_demand_change(&self, p: &Price, set: GoodSet) -> StepLength {
        assert!(!set.is_empty(), "step length needs a direction");
        let base = self.slope_oracle(p).units(set);
        let cap = self.step_cap(p, set) - 1;
        let outside: Vec<usize> = GoodSet::all(self.n).difference(set).iter().collect();
        let mut lambda = 0u64;
        let mut rounds = 0;
        loop {
            rounds += 1;
            let cur = p.offset(set, self.step * Scalar::from_integer(lambda as i64));
            let mu = (0..self.term_count())
                .filter_map(|k| {
                    let (b, _) = self.term(k);
                    let d = demanded_goods(b, &cur);
                    if !d.is_subset(set) {
                        return None;
                    }
                    let best = best_surplus(b, &cur);
                    outside
                        .iter()
                        .map(|&j| best - b.surplus(&cur, j))
                        .min()
                })
                .min();
            let Some(mu) = mu else {
                return StepLength {
                    length: cap,
                    rounds,
                };
            };
            let mu = (mu / self.step).to_integer();
            debug_assert!(mu >= 1);
            lambda += mu as u64;
            if lambda >= cap || self.slope_units_at(p, set, lambda) != base {
                return StepLength {
                    length: lambda.min(cap),
                    rounds,
                };
            }
        }
    }

    /// Steepest descent from the origin with unit steps.
    pub fn min_up(&self) -> Result<PriceSolution> {
        self.descend(StepRule::Unit)
    }

    pub fn long_step_min_up(&self, rule: StepRule) -> Result<PriceSolution> {
        self.descend(rule)
    }

    fn descend(&self, rule: StepRule) -> Result<PriceSolution> {
        let mut p = Price::zeros(self.n);
        let mut trace = DescentTrace::default();
        loop {
            let direction = self.steepest_direction(&p)?;
            if direction.is_empty() {
                return Ok(PriceSolution { price: p, trace });
            }
            let length = match rule {
                StepRule::Unit => 1,
                StepRule::Binary => self.step_length_binary(&p, direction),
                StepRule::DemandChange => self.step_length_demand_change(&p, direction).length,
            };
            let next = p.offset(direction, self.step * Scalar::from_integer(length as i64));
            trace.steps.push(TraceStep {
                price: p,
                direction,
                length,
            });
            if next.values().iter().any(|v| *v > self.bound) {
                return Err(Error::InfeasibleTarget {
                    bound: self.bound.to_string(),
                });
            }
            p = next;
        }
    }

    /// Whether `p` minimises `g`: no lattice step up or down decreases it.
    pub fn is_minimiser(&self, p: &Price) -> Result<bool> {
        let base = self.lyapunov(p);
        for delta in [self.step, -self.step] {
            let f = FnSetFunction::new(self.n, |s: u64| {
                self.lyapunov(&p.offset(GoodSet::from_bits(s << 1), delta)) - base
            })
            .with_resolution(self.step);
            if self.sfm.minimise(&f)?.value < Scalar::zero() {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Reject count that completes the target to a bundle over `[n]_0`.
    pub fn reject_count(&self) -> i64 {
        let weight: i64 = self.bids.iter().map(Bid::weight).sum::<i64>() + self.reserves;
        weight - self.target.iter().sum::<i64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bids::{alice, bob};

    fn alice_bob(target: &[i64]) -> PriceProblem {
        PriceProblem::new([alice(), bob()].concat(), target.to_vec()).unwrap()
    }

    fn set(goods: &[usize]) -> GoodSet {
        goods.iter().copied().collect()
    }

    fn int(v: i64) -> Scalar {
        Scalar::from_integer(v)
    }

    #[test]
    fn lyapunov_examples() {
        let pp = PriceProblem::without_reserves([alice(), bob()].concat(), vec![1, 1]).unwrap();
        assert_eq!(pp.lyapunov(&Price::from_ints(&[4, 4])), int(12));
        assert_eq!(pp.lyapunov(&Price::from_ints(&[0, 0])), int(20));
        let empty = PriceProblem::without_reserves(vec![], vec![0, 0]).unwrap();
        assert_eq!(empty.lyapunov(&Price::from_ints(&[3, 7])), int(0));
    }

    #[test]
    fn slope_examples() {
        let pp = alice_bob(&[1, 1]);
        let zero = Price::zeros(2);
        assert_eq!(pp.slope(&zero, GoodSet::empty()), int(0));
        assert!(pp.slope(&zero, set(&[1, 2])) < int(0));
        let star = Price::from_ints(&[4, 4]);
        for s in [set(&[1]), set(&[2]), set(&[1, 2])] {
            assert!(pp.slope(&star, s) >= int(0));
        }
    }

    #[test]
    fn fast_slope_matches_direct_slope() {
        let pp = alice_bob(&[1, 1]);
        for a in 0..8 {
            for b in 0..8 {
                let p = Price::from_ints(&[a, b]);
                let oracle = pp.slope_oracle(&p);
                for bits in 0..4u64 {
                    let s = GoodSet::from_bits(bits << 1);
                    assert_eq!(oracle.slope(s), pp.slope(&p, s), "p={p} S={s}");
                }
            }
        }
    }

    #[test]
    fn demand_bounds_examples() {
        let pp = alice_bob(&[1, 1]);
        let b = pp.demand_bounds(&Price::from_ints(&[4, 4]));
        assert_eq!((b.max[0], b.min[0]), (2, 0));
        let high = pp.demand_bounds(&Price::from_ints(&[9, 9]));
        assert_eq!(high.under, GoodSet::real(2));
        let unique = pp.demand_bounds(&Price::from_ints(&[1, 2]));
        assert_eq!(unique.over.union(unique.under), GoodSet::real(2));
    }

    #[test]
    fn steepest_direction_examples() {
        let pp = alice_bob(&[1, 1]);
        assert_eq!(pp.steepest_direction(&Price::zeros(2)).unwrap(), set(&[1, 2]));
        assert!(pp.steepest_direction(&Price::from_ints(&[4, 4])).unwrap().is_empty());
    }

    #[test]
    fn min_up_worked_example() {
        let sol = alice_bob(&[1, 1]).min_up().unwrap();
        assert_eq!(sol.price, Price::from_ints(&[4, 4]));
        assert_eq!(sol.trace.iterations(), 4);
        assert!(sol.trace.steps.iter().all(|s| s.direction == set(&[1, 2]) && s.length == 1));
    }

    #[test]
    fn long_steps_worked_example() {
        let pp = alice_bob(&[1, 1]);
        for rule in [StepRule::Binary, StepRule::DemandChange] {
            let sol = pp.long_step_min_up(rule).unwrap();
            assert_eq!(sol.price, Price::from_ints(&[4, 4]));
            assert_eq!(sol.trace.iterations(), 1);
            assert_eq!(sol.trace.steps[0].length, 4);
        }
        assert_eq!(pp.step_length_binary(&Price::zeros(2), set(&[1, 2])), 4);
        assert_eq!(pp.step_length_demand_change(&Price::zeros(2), set(&[1, 2])).length, 4);
    }

    #[test]
    fn trivial_targets() {
        let pp = PriceProblem::new(vec![Bid::positive(&[5, 0])], vec![1, 0]).unwrap();
        assert_eq!(pp.min_up().unwrap().price, Price::zeros(2));
        let empty = PriceProblem::new(vec![], vec![0, 0]).unwrap();
        let sol = empty.long_step_min_up(StepRule::Binary).unwrap();
        assert_eq!(sol.price, Price::zeros(2));
        assert_eq!(sol.trace.iterations(), 0);
    }

    #[test]
    fn zero_target_with_bids_rises_to_rejection() {
        // Nothing is supplied, so every bid must be priced out.
        let sol = alice_bob(&[0, 0]).min_up().unwrap();
        assert_eq!(sol.price, Price::from_ints(&[6, 6]));
    }

    #[test]
    fn fractional_bids_use_a_finer_lattice() {
        let bids = vec![Bid::new(vec![Scalar::new(51, 10), int(2)], 1).unwrap()];
        let pp = PriceProblem::new(bids, vec![0, 0]).unwrap();
        assert_eq!(pp.step(), Scalar::new(1, 10));
        let sol = pp.long_step_min_up(StepRule::Binary).unwrap();
        assert_eq!(sol.price.values(), &[Scalar::new(51, 10), int(2)]);
        assert_eq!(pp.min_up().unwrap().price, sol.price);
    }

    #[test]
    fn demand_change_rounds_continue_past_cancelling_exits() {
        // A positive and a negative bid leave the descent set together; the
        // slope is unchanged so a second round is needed.
        let bids = vec![
            Bid::positive(&[3, 1]),
            Bid::positive(&[5, 0]),
            Bid::negative(&[3, 1]),
        ];
        let pp = PriceProblem::without_reserves(bids, vec![0, 0]).unwrap();
        let s = set(&[1]);
        let p = Price::zeros(2);
        let step = pp.step_length_demand_change(&p, s);
        assert_eq!(step.length, pp.step_length_binary(&p, s));
        assert_eq!(step.length, 5);
        assert_eq!(step.rounds, 2);
    }

    #[test]
    fn unreachable_target_is_not_a_minimiser() {
        // Without reserves, demand for two items from one unit bid cannot be met.
        let pp = PriceProblem::without_reserves(vec![Bid::positive(&[3])], vec![2]).unwrap();
        let sol = pp.min_up().unwrap();
        assert!(!pp.is_minimiser(&sol.price).unwrap());
    }
}
