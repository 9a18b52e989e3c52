//! Splitting a target bundle among bidders at a market-clearing price.
//!
//! An [`AllocationProblem`] tracks, per bidder, the bids still in play and the
//! items already assigned, plus the residual supply. Each reduction removes
//! marginal-graph edges until no bids remain, at which point the partial
//! bundles are the answer.

use num_traits::Zero;

use crate::bids::{demanded_goods, is_demanded, project_bid, Bid, BidList, Bundle, Price};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::goods::GoodSet;
use crate::graphs::{self, Cluster, Params};
use crate::pricing::{PriceProblem, PriceSolution, StepRule};
use crate::sfm::{FnSetFunction, Minimiser};
use crate::Scalar;

/// Owner name of the pseudo-bidder that holds the reserve bids.
pub const AUCTIONEER: &str = "<auctioneer>";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AllocationProblem {
    price: Price,
    lists: Vec<BidList>,
    partial: Vec<Bundle>,
    residual: Bundle,
    supply: Bundle,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ParamsRule {
    FindParams,
    /// `(good, bidder index)` pairs, most preferred first.
    Priority(Vec<(usize, usize)>),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AllocationStats {
    pub iterations: usize,
    pub unambiguous: usize,
    pub shifts: usize,
    /// Marginal-graph edge count after the initial pass and after every iteration.
    pub edge_counts: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Solution {
    pub owners: Vec<String>,
    /// Bundle per bidder, reject count included.
    pub bundles: Vec<Bundle>,
    pub stats: AllocationStats,
}

impl Solution {
    pub fn total(&self, n: usize) -> Bundle {
        self.bundles.iter().fold(Bundle::zeros(n), |acc, b| &acc + b)
    }
}

fn require_integral(p: &Price, lists: &[BidList]) -> Result<()> {
    if !p.is_integral() {
        return Err(Error::NonIntegral("price"));
    }
    if lists.iter().flat_map(|l| &l.bids).any(|b| !b.is_integral()) {
        return Err(Error::NonIntegral("bid values"));
    }
    Ok(())
}

fn check_dimensions(n: usize, lists: &[BidList]) -> Result<()> {
    match lists.iter().flat_map(|l| &l.bids).find(|b| b.n() != n) {
        Some(b) => Err(Error::DimensionMismatch {
            expected: n,
            found: b.n(),
        }),
        None => Ok(()),
    }
}

/// Starting state: nothing allocated, residual equal to the target plus the
/// reject count implied by the total bid weight.
pub fn initial_problem(lists: Vec<BidList>, target: &[i64], p: &Price) -> Result<AllocationProblem> {
    build_problem(lists, target, p, true)
}

fn build_problem(
    lists: Vec<BidList>,
    target: &[i64],
    p: &Price,
    verify: bool,
) -> Result<AllocationProblem> {
    let n = target.len();
    if p.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: p.n(),
        });
    }
    check_dimensions(n, &lists)?;
    require_integral(p, &lists)?;
    if let Some(i) = target.iter().position(|&t| t < 0) {
        return Err(Error::NegativeTarget(i + 1));
    }
    let aggregate: Vec<Bid> = lists.iter().flat_map(|l| l.bids.iter().cloned()).collect();
    if verify && !is_demanded(&aggregate, target, p)? {
        return Err(Error::NotClearing);
    }
    let weight: i64 = lists.iter().map(BidList::total_weight).sum();
    let residual = Bundle {
        reject: weight - target.iter().sum::<i64>(),
        goods: target.to_vec(),
    };
    Ok(AllocationProblem {
        price: p.clone(),
        partial: vec![Bundle::zeros(n); lists.len()],
        lists,
        supply: residual.clone(),
        residual,
    })
}

impl AllocationProblem {
    pub fn price(&self) -> &Price {
        &self.price
    }

    pub fn lists(&self) -> &[BidList] {
        &self.lists
    }

    pub fn partial(&self) -> &[Bundle] {
        &self.partial
    }

    pub fn residual(&self) -> &Bundle {
        &self.residual
    }

    pub fn n(&self) -> usize {
        self.price.n()
    }

    pub fn is_vacuous(&self) -> bool {
        self.lists.iter().all(BidList::is_empty)
    }

    /// `r + sum_j m^j` equals the initial residual on every coordinate.
    pub fn conserves_supply(&self) -> bool {
        let total = self
            .partial
            .iter()
            .fold(self.residual.clone(), |acc, m| &acc + m);
        total == self.supply
    }

    fn assign(&mut self, bidder: usize, good: usize, amount: i64) {
        self.partial[bidder].add(good, amount);
        self.residual.add(good, -amount);
    }

    /// Accepts every non-marginal bid on its unique demanded good.
    pub fn non_marginals(&mut self) {
        for j in 0..self.lists.len() {
            let bids = std::mem::take(&mut self.lists[j].bids);
            let mut kept = Vec::with_capacity(bids.len());
            for bid in bids {
                let d = demanded_goods(&bid, &self.price);
                if d.len() == 1 {
                    self.assign(j, d.min().expect("non-empty"), bid.weight());
                } else {
                    kept.push(bid);
                }
            }
            self.lists[j].bids = kept;
        }
        debug_assert!(self.conserves_supply());
    }

    /// Allocates the bids of a demand cluster with no link good, or with the
    /// single link good `link`.
    pub fn unambiguous_marginals(&mut self, cluster: Cluster, link: Option<usize>) -> Result<()> {
        let j = cluster.bidder;
        if j >= self.lists.len() {
            return Err(Error::UnknownBidder(j));
        }
        if let Some(i) = link {
            if !cluster.goods.contains(i) {
                return Err(Error::BadCluster(format!("link good {i} not in {}", cluster.goods)));
            }
        }
        let mut weight = 0i64;
        let mut inside = Vec::new();
        for (k, bid) in self.lists[j].bids.iter().enumerate() {
            let d = demanded_goods(bid, &self.price);
            if d.len() == 1 {
                return Err(Error::BadCluster("non-marginal bid present".into()));
            }
            if d.is_subset(cluster.goods) {
                weight += bid.weight();
                inside.push(k);
            } else if d.intersects(cluster.goods) {
                return Err(Error::BadCluster(format!(
                    "{} is not a component of bidder {j}",
                    cluster.goods
                )));
            }
        }
        let mut k = 0;
        self.lists[j].bids.retain(|_| {
            let keep = inside.binary_search(&k).is_err();
            k += 1;
            keep
        });
        let others = cluster.goods.difference(link.map_or(GoodSet::empty(), GoodSet::singleton));
        let mut moved = 0;
        for i in others.iter() {
            let r = self.residual.get(i);
            self.assign(j, i, r);
            moved += r;
        }
        match link {
            Some(i) => {
                let d = weight - moved;
                if d < 0 || d > self.residual.get(i) {
                    return Err(Error::BadCluster(format!(
                        "cannot move {d} items of good {i} with {} left",
                        self.residual.get(i)
                    )));
                }
                self.assign(j, i, d);
            }
            None if moved != weight => {
                return Err(Error::BadCluster(format!(
                    "isolated cluster {} holds {moved} items for bid weight {weight}",
                    cluster.goods
                )));
            }
            None => {}
        }
        debug_assert!(self.conserves_supply());
        Ok(())
    }

    /// Breaks a multi-bidder cycle through `good` by perturbing the bids of
    /// `bidder`, moving to a nearby price where the residual is still demanded,
    /// and projecting every bid so its demand near `p` is fixed.
    pub fn shift_project_unshift(&mut self, good: usize, bidder: usize) -> Result<()> {
        self.shift_project_unshift_with(good, bidder, &Minimiser::default())
    }

    pub fn shift_project_unshift_with(
        &mut self,
        good: usize,
        bidder: usize,
        sfm: &Minimiser,
    ) -> Result<()> {
        if bidder >= self.lists.len() {
            return Err(Error::UnknownBidder(bidder));
        }
        if good > self.n() {
            return Err(Error::BadCluster(format!("no good {good}")));
        }
        let n = self.n();
        let eps = Scalar::new(1, 10);
        let oracle = ResidualSlope::new(self, good, bidder);
        let tenths = Scalar::new(1, 10);
        let up = FnSetFunction::new(n, |s| Scalar::from_integer(oracle.tenths(s, 1)) * tenths)
            .with_resolution(tenths);
        let down = FnSetFunction::new(n, |s| Scalar::from_integer(oracle.tenths(s, -1)) * tenths)
            .with_resolution(tenths);
        let plus = sfm.minimise(&up)?;
        let minus = sfm.minimise(&down)?;
        let perturbed = if plus.value <= minus.value {
            self.price.offset(GoodSet::from_bits(plus.set << 1), eps)
        } else {
            self.price.offset(GoodSet::from_bits(minus.set << 1), -eps)
        };
        for (j, list) in self.lists.iter_mut().enumerate() {
            for bid in list.bids.iter_mut() {
                if j == bidder {
                    shift_value(bid, good, eps);
                    *bid = project_bid(bid, &perturbed);
                    shift_value(bid, good, -eps);
                } else {
                    *bid = project_bid(bid, &perturbed);
                }
                assert!(bid.is_integral(), "projection left a fractional bid {bid}");
            }
        }
        Ok(())
    }

    /// Residual Lyapunov `g_r(q) = f(q) + r.q` with the shift applied, by direct
    /// evaluation; the fast path in `shift_project_unshift` must agree.
    pub fn residual_lyapunov(&self, q: &Price, good: usize, bidder: usize) -> Scalar {
        let eps = Scalar::new(1, 10);
        let mut total = q.dot(&self.residual.goods);
        for (j, list) in self.lists.iter().enumerate() {
            for bid in &list.bids {
                let mut b = bid.clone();
                if j == bidder {
                    shift_value(&mut b, good, eps);
                }
                total += crate::bids::best_surplus(&b, q) * Scalar::from_integer(b.weight());
            }
        }
        total
    }

    /// `g_r(p + sign * eps * e^S) - g_r(p)` through the grouped fast path.
    pub fn residual_slope(&self, good: usize, bidder: usize, set: u64, sign: i64) -> Scalar {
        let oracle = ResidualSlope::new(self, good, bidder);
        Scalar::new(oracle.tenths(set, sign), 10)
    }
}

/// Adds `amount` to the bid's value for `good`. The reject good's value is
/// pinned at zero, so raising it means lowering every real good instead.
fn shift_value(bid: &mut Bid, good: usize, amount: Scalar) {
    if good == 0 {
        for v in bid.values_mut() {
            *v -= amount;
        }
    } else {
        bid.values_mut()[good - 1] += amount;
    }
}

/// Bids grouped by demand set at `p` and by whether they carry the shift.
///
/// At an integral price with integral bids every non-demanded good trails by
/// at least 1, while the shift and the perturbation move surpluses by at most
/// 1/5, so the maximum stays inside the demand set at `p`.
struct ResidualSlope {
    groups: Vec<(GoodSet, bool, i64)>,
    good: usize,
    residual: Vec<i64>,
}

impl ResidualSlope {
    fn new(problem: &AllocationProblem, good: usize, bidder: usize) -> Self {
        let mut map = std::collections::BTreeMap::new();
        for (j, list) in problem.lists.iter().enumerate() {
            for bid in &list.bids {
                let d = demanded_goods(bid, &problem.price);
                let shifted = j == bidder && d.contains(good);
                *map.entry((d, shifted)).or_insert(0i64) += bid.weight();
            }
        }
        ResidualSlope {
            groups: map
                .into_iter()
                .filter(|&(_, w)| w != 0)
                .map(|((d, s), w)| (d, s, w))
                .collect(),
            good,
            residual: problem.residual.goods.clone(),
        }
    }

    /// The slope in tenths for `S` given as a mask over real goods.
    fn tenths(&self, set: u64, sign: i64) -> i64 {
        let set = GoodSet::from_bits(set << 1);
        let mut total: i64 = set.iter().map(|i| sign * self.residual[i - 1]).sum();
        for &(d, shifted, w) in &self.groups {
            let base = i64::from(shifted);
            let moved = d
                .iter()
                .map(|i| {
                    let s = i64::from(shifted && i == self.good);
                    s - sign * i64::from(set.contains(i))
                })
                .max()
                .expect("non-empty demand set");
            total += w * (moved - base);
        }
        total
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AllocateOptions {
    pub sfm: Minimiser,
    /// Check up front that the target is demanded at the price. Skipping it
    /// is for callers that already know, such as the benchmark.
    pub verify_clearing: bool,
}

impl Default for AllocateOptions {
    fn default() -> Self {
        AllocateOptions {
            sfm: Minimiser::default(),
            verify_clearing: true,
        }
    }
}

/// Solves the allocation problem at an integral clearing price.
pub fn allocate(lists: Vec<BidList>, target: &[i64], p: &Price, rule: &ParamsRule) -> Result<Solution> {
    allocate_with(lists, target, p, rule, &AllocateOptions::default())
}

pub fn allocate_with(
    lists: Vec<BidList>,
    target: &[i64],
    p: &Price,
    rule: &ParamsRule,
    options: &AllocateOptions,
) -> Result<Solution> {
    let sfm = &options.sfm;
    let mut problem = build_problem(lists, target, p, options.verify_clearing)?;
    let n = problem.n();
    let bound = problem.lists.len() * (n + 1) * n / 2;
    let mut stats = AllocationStats::default();
    problem.non_marginals();
    let mut edges = graphs::build_marginal_graph(&problem).edge_count();
    stats.edge_counts.push(edges);
    while !problem.is_vacuous() {
        stats.iterations += 1;
        assert!(stats.iterations <= bound, "allocation exceeded its iteration bound");
        let params = match rule {
            ParamsRule::FindParams => graphs::find_params(&problem)?,
            ParamsRule::Priority(list) => graphs::priority_params(&problem, list)?,
        };
        match params {
            Params::IsolatedCluster(c) => {
                problem.unambiguous_marginals(c, None)?;
                stats.unambiguous += 1;
            }
            Params::LeafCluster(c, link) => {
                problem.unambiguous_marginals(c, Some(link))?;
                stats.unambiguous += 1;
            }
            Params::CycleEdge(good, bidder) => {
                problem.shift_project_unshift_with(good, bidder, sfm)?;
                stats.shifts += 1;
            }
        }
        problem.non_marginals();
        let after = graphs::build_marginal_graph(&problem).edge_count();
        assert!(after < edges, "reduction did not remove a marginal edge");
        edges = after;
        stats.edge_counts.push(edges);
    }
    assert!(problem.residual.is_zero(), "residual supply left over");
    assert!(problem.conserves_supply());
    Ok(Solution {
        owners: problem.lists.iter().map(|l| l.owner.clone()).collect(),
        bundles: problem.partial,
        stats,
    })
}

/// Canonical priority list: goods ascending, bidders ascending within a good.
pub fn canonical_priority(n: usize, bidders: usize) -> Vec<(usize, usize)> {
    (0..=n)
        .flat_map(|i| (0..bidders).map(move |j| (i, j)))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuctionOutcome {
    pub price: PriceSolution,
    /// Bidders in input order followed by the auctioneer, whose real-good
    /// coordinates are the unsold items.
    pub solution: Solution,
}

/// Price finding followed by allocation. The reserve bids are handed to an
/// auctioneer pseudo-bidder so that unsold supply is accounted for.
pub fn solve_auction(
    lists: Vec<BidList>,
    target: &[i64],
    step: StepRule,
    rule: &ParamsRule,
    execution: Execution,
) -> Result<AuctionOutcome> {
    let pricing = PriceProblem::from_lists(&lists, target.to_vec())?.with_execution(execution);
    let price = pricing.long_step_min_up(step)?;
    let mut all = lists;
    let n = target.len();
    let reserve = Bid::new(vec![Scalar::zero(); n], 1)?;
    all.push(BidList::new(
        AUCTIONEER,
        vec![reserve; pricing.reserves() as usize],
    ));
    let options = AllocateOptions {
        sfm: Minimiser::default().with_execution(execution),
        ..AllocateOptions::default()
    };
    let solution = allocate_with(all, target, &price.price, rule, &options)?;
    Ok(AuctionOutcome { price, solution })
}

/// Whether every list is locally valid at an integral price `p`: no price
/// within distance 1/4 of `p` has a good pair on which the marginal bids of
/// one list have negative total weight.
///
/// Near `p` a bid demands the goods of its demand set at `p` whose price
/// offset is smallest, so only the relative order of the offsets matters and
/// offsets in `{-n, .., n}` cover every order.
pub fn locally_valid(lists: &[BidList], p: &Price) -> bool {
    let n = p.n();
    assert!(n <= 5, "local validity check is for small n only");
    let span = 2 * n as i64 + 1;
    let points = (span as usize).pow(n as u32);
    lists.iter().all(|list| {
        let mut groups: std::collections::BTreeMap<GoodSet, i64> = Default::default();
        for bid in &list.bids {
            let d = demanded_goods(bid, p);
            if d.len() > 1 {
                *groups.entry(d).or_default() += bid.weight();
            }
        }
        (0..points).all(|code| {
            let mut c = code as i64;
            let mut offset = vec![0i64; n + 1];
            for o in offset.iter_mut().skip(1) {
                *o = c % span - n as i64;
                c /= span;
            }
            let mut pair = vec![vec![0i64; n + 1]; n + 1];
            for (&d, &w) in &groups {
                let low = d.iter().map(|i| offset[i]).min().expect("non-empty");
                let near: Vec<usize> = d.iter().filter(|&i| offset[i] == low).collect();
                for (k, &a) in near.iter().enumerate() {
                    for &b in &near[k + 1..] {
                        pair[a][b] += w;
                    }
                }
            }
            pair.iter().flatten().all(|&s| s >= 0)
        })
    })
}
