//! Random valid instances and the scaling benchmark.
//!
//! Lists are built around the anchor price `p = (M/2, .., M/2)`: every round
//! adds either one positive bid marginal at `p` or a negative bid together
//! with three positive bids that cover it, and grows a bundle demanded at `p`.
//! Lists for which `p` is not the minimal clearing price of the bundle are
//! discarded.

use std::time::Instant;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::allocation::{allocate_with, AllocateOptions, ParamsRule};
use crate::bids::{demanded_bundle, Bid, BidList, Price};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::goods::GoodSet;
use crate::pricing::{PriceProblem, StepRule};
use crate::Scalar;

pub type Rng64 = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng64 {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GenConfig {
    pub n: usize,
    /// Price scale `M`; even.
    pub max_value: i64,
    /// Rounds per list.
    pub q: usize,
    /// Reject lists whose bundle has a lower clearing price than the anchor.
    pub require_minimal: bool,
    pub max_retries: usize,
}

impl GenConfig {
    pub fn new(n: usize, q: usize) -> Self {
        GenConfig {
            n,
            max_value: 100,
            q,
            require_minimal: true,
            max_retries: 1000,
        }
    }

    pub fn anchor(&self) -> Price {
        Price::from_ints(&vec![self.max_value / 2; self.n])
    }
}

fn pick_subset(n: usize, rng: &mut Rng64) -> GoodSet {
    if n <= 10 {
        loop {
            let bits: u64 = rng.gen::<u64>() & GoodSet::all(n).bits();
            if bits.count_ones() >= 2 {
                return GoodSet::from_bits(bits);
            }
        }
    }
    let size = rng.gen_range(2..=n + 1);
    index::sample(rng, n + 1, size).into_iter().collect()
}

/// Integer bid marginal exactly on `set` at `p`, with surplus `c` there.
fn marginal_bid(set: GoodSet, p: &[i64], c_max: i64, rng: &mut Rng64) -> Vec<i64> {
    let c = if set.contains(0) {
        0
    } else {
        rng.gen_range(1..=c_max)
    };
    (1..=p.len())
        .map(|i| {
            if set.contains(i) {
                p[i - 1] + c
            } else {
                rng.gen_range(0..=p[i - 1] + c - 1)
            }
        })
        .collect()
}

fn to_bid(values: &[i64], weight: i64) -> Bid {
    Bid::from_ints(values, weight).expect("unit weight")
}

/// One attempt; `None` when the anchor is not the minimal clearing price.
fn attempt(cfg: &GenConfig, rng: &mut Rng64) -> Result<Option<(Vec<Bid>, Vec<i64>)>> {
    let n = cfg.n;
    let half = cfg.max_value / 2;
    let p = vec![half; n];
    let anchor = cfg.anchor();
    let eps = Scalar::new(1, 20);
    let mut bids = Vec::new();
    let mut x = vec![0i64; n];
    for _ in 0..cfg.q {
        let set = pick_subset(n, rng);
        if n < 2 || rng.gen_bool(0.5) {
            bids.push(to_bid(&marginal_bid(set, &p, half, rng), 1));
            let goods: Vec<usize> = set.iter().collect();
            let i = *goods.choose(rng).expect("non-empty");
            if i > 0 {
                x[i - 1] += 1;
            }
            continue;
        }
        let (neg, i, j) = loop {
            let neg = marginal_bid(set, &p, half - 1, rng);
            let eligible: Vec<usize> = (1..=n).filter(|&g| neg[g - 1] >= 2).collect();
            if eligible.len() >= 2 {
                let pair: Vec<usize> = eligible.choose_multiple(rng, 2).copied().collect();
                break (neg, pair[0], pair[1]);
            }
        };
        let mut low_i = neg.clone();
        low_i[i - 1] -= rng.gen_range(1..=neg[i - 1] - 1);
        let mut low_j = neg.clone();
        low_j[j - 1] -= rng.gen_range(1..=neg[j - 1] - 1);
        let room = neg.iter().map(|b| cfg.max_value - b).min().expect("n >= 2");
        let lift = rng.gen_range(1..=room);
        let high: Vec<i64> = neg.iter().map(|b| b + lift).collect();
        let group = [
            to_bid(&neg, -1),
            to_bid(&low_i, 1),
            to_bid(&low_j, 1),
            to_bid(&high, 1),
        ];
        let mut order: Vec<usize> = (1..=n).collect();
        order.shuffle(rng);
        let mut perturbed = anchor.clone();
        for (k, &g) in order.iter().enumerate() {
            perturbed = perturbed.offset(
                GoodSet::singleton(g),
                eps / Scalar::from_integer(2 * (k as i64 + 1)),
            );
        }
        let bundle = demanded_bundle(&group, &perturbed)?;
        for (xi, d) in x.iter_mut().zip(&bundle.goods) {
            *xi += d;
        }
        bids.extend(group);
    }
    if cfg.require_minimal {
        let problem = PriceProblem::new(bids.clone(), x.clone())?;
        let found = problem.long_step_min_up(StepRule::Binary)?;
        if found.price != anchor {
            return Ok(None);
        }
    }
    Ok(Some((bids, x)))
}

/// A valid list and a bundle it demands at the anchor price.
pub fn generate_list(cfg: &GenConfig, owner: &str, rng: &mut Rng64) -> Result<(BidList, Vec<i64>)> {
    assert!(cfg.max_value % 2 == 0 && cfg.max_value >= 4, "M must be even and at least 4");
    assert!(cfg.q >= 1 && cfg.n >= 1);
    for _ in 0..cfg.max_retries {
        if let Some((bids, x)) = attempt(cfg, rng)? {
            return Ok((BidList::new(owner, bids), x));
        }
    }
    Err(Error::RetryLimit(cfg.max_retries))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    pub lists: Vec<BidList>,
    pub target: Vec<i64>,
    /// Minimal clearing price of `target`.
    pub price: Price,
}

/// `m` bidders, each with a generated list; the target is the sum of their bundles.
pub fn generate_instance(cfg: &GenConfig, m: usize, seed: u64) -> Result<Instance> {
    let mut rng = rng(seed);
    let mut lists = Vec::with_capacity(m);
    let mut target = vec![0i64; cfg.n];
    for j in 0..m {
        let (list, x) = generate_list(cfg, &format!("bidder{}", j + 1), &mut rng)?;
        for (t, v) in target.iter_mut().zip(x) {
            *t += v;
        }
        lists.push(list);
    }
    Ok(Instance {
        lists,
        target,
        price: cfg.anchor(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    Bids,
    Goods,
    Bidders,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Bids => "bids",
            Axis::Goods => "goods",
            Axis::Bidders => "bidders",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BenchConfig {
    pub n: usize,
    pub m: usize,
    pub q: usize,
    pub max_value: i64,
    pub repetitions: usize,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            n: 2,
            m: 5,
            q: 20,
            max_value: 100,
            repetitions: 5,
            seed: 0,
            execution: Execution::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub axis: Axis,
    pub value: usize,
    pub mean_seconds: f64,
    pub stddev_seconds: f64,
    pub samples: usize,
}

pub const CSV_HEADER: &str = "axis,value,mean_seconds,stddev_seconds,samples";

impl BenchRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{:.6e},{:.6e},{}",
            self.axis.name(),
            self.value,
            self.mean_seconds,
            self.stddev_seconds,
            self.samples
        )
    }
}

/// Seed of repetition `rep` at grid point `value`.
pub fn instance_seed(base: u64, value: usize, rep: usize) -> u64 {
    base.wrapping_mul(1_000_003)
        .wrapping_add((value as u64) << 20)
        .wrapping_add(rep as u64)
}

/// Times `allocate` at each grid point. Instances are generated in parallel
/// up front; the timed runs are sequential.
pub fn bench_suite(axis: Axis, grid: &[usize], base: &BenchConfig) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::with_capacity(grid.len());
    for &value in grid {
        let (n, m, q) = match axis {
            Axis::Bids => (base.n, base.m, value),
            Axis::Goods => (value, base.m, base.q),
            Axis::Bidders => (base.n, value, base.q),
        };
        let cfg = GenConfig {
            max_value: base.max_value,
            ..GenConfig::new(n, q)
        };
        let instances: Vec<Result<Instance>> =
            base.execution.map_each(base.repetitions, |rep| {
                generate_instance(&cfg, m, instance_seed(base.seed, value, rep))
            });
        let mut times = Vec::with_capacity(instances.len());
        for inst in instances {
            let inst = inst?;
            let options = AllocateOptions {
                verify_clearing: false,
                ..AllocateOptions::default()
            };
            let start = Instant::now();
            allocate_with(inst.lists, &inst.target, &inst.price, &ParamsRule::FindParams, &options)?;
            times.push(start.elapsed().as_secs_f64());
        }
        let (mean, stddev) = mean_stddev(&times);
        rows.push(BenchRow {
            axis,
            value,
            mean_seconds: mean,
            stddev_seconds: stddev,
            samples: times.len(),
        });
    }
    Ok(rows)
}

pub fn mean_stddev(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    (mean, var.sqrt())
}
