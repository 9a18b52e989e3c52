//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any FAIL.

mod common;

use std::time::Instant;

use common::{aggregate, alice, bob};
use productmix::allocation::canonical_priority;
use productmix::graphs::marginal_graph;
use productmix::sfm::{FnSetFunction, Minimiser, SfmStrategy};
use productmix::testgen::{
    bench_suite, generate_instance, generate_list, rng, Axis, BenchConfig, GenConfig, Instance,
};
use productmix::validity::brute_force_valid;
use productmix::{
    allocate, check_validity, is_demanded, Bid, BidList, Execution, ParamsRule, Price,
    PriceProblem, PriceSolution, Scalar, StepRule,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn err<E: std::fmt::Debug>(e: E) -> String {
    format!("{e:?}")
}

const METHODS: [StepRule; 3] = [StepRule::Unit, StepRule::Binary, StepRule::DemandChange];

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let lists = vec![alice(), bob()];
    let problem = PriceProblem::from_lists(&lists, vec![1, 1]).map_err(err)?;
    for rule in METHODS {
        let p = problem.long_step_min_up(rule).map_err(err)?.price;
        ensure!(p == Price::from_ints(&[4, 4]), "{rule:?} gave {p}");
    }
    let p = Price::from_ints(&[4, 4]);
    for rule in [ParamsRule::FindParams, ParamsRule::Priority(canonical_priority(2, 2))] {
        let sol = allocate(lists.clone(), &[1, 1], &p, &rule).map_err(err)?;
        let a = &sol.bundles[0].goods;
        let b = &sol.bundles[1].goods;
        ensure!(a == &[1, 0] || a == &[0, 1], "Alice got {a:?}");
        ensure!(a[0] + b[0] == 1 && a[1] + b[1] == 1, "Bob got {b:?}");
    }
    let elapsed = start.elapsed().as_secs_f64();
    ensure!(elapsed < 1.0, "took {elapsed:.3}s");
    Ok(format!("price (4,4) under all methods, split ok, {elapsed:.3}s"))
}

/// Instance `k` of the pricing sample: n in 2..=5, m in 2..=4, q in 5..=30.
fn pricing_instance(k: u64) -> Instance {
    let mut r = ChaCha8Rng::seed_from_u64(1000 + k);
    let n = r.gen_range(2..=5);
    let m = r.gen_range(2..=4);
    let q = r.gen_range(5..=30);
    generate_instance(&GenConfig::new(n, q), m, r.gen()).expect("generation")
}

struct Descents {
    anchor: Price,
    bids: usize,
    n: usize,
    runs: Vec<PriceSolution>,
}

fn descents(count: u64) -> Vec<Result<Descents, String>> {
    Execution::Parallel.map_each(count as usize, |k| {
        let inst = pricing_instance(k as u64);
        let problem = PriceProblem::new(aggregate(&inst.lists), inst.target.clone()).map_err(err)?;
        let runs = METHODS
            .iter()
            .map(|&rule| problem.long_step_min_up(rule).map_err(err))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Descents {
            anchor: inst.price,
            bids: problem.total_bids(),
            n: problem.n(),
            runs,
        })
    })
}

fn is_subsequence(long: &[&Price], unit: &[&Price]) -> bool {
    let mut it = unit.iter();
    long.iter().all(|p| it.any(|q| q == p))
}

fn criterion_2(data: &[Result<Descents, String>]) -> Outcome {
    for (k, d) in data.iter().enumerate() {
        let d = d.as_ref().map_err(|e| format!("instance {k}: {e}"))?;
        let [unit, binary, demand] = &d.runs[..] else { unreachable!() };
        ensure!(unit.price == d.anchor, "instance {k}: unit price {} != {}", unit.price, d.anchor);
        ensure!(binary.price == unit.price && demand.price == unit.price, "instance {k}: final prices differ");
        let unit_path: Vec<&Price> = unit.trace.prices().chain([&unit.price]).collect();
        for long in [binary, demand] {
            let path: Vec<&Price> = long.trace.prices().chain([&long.price]).collect();
            ensure!(is_subsequence(&path, &unit_path), "instance {k}: long path leaves the unit path");
        }
        ensure!(binary.trace == demand.trace, "instance {k}: step lengths differ between rules");
    }
    Ok(format!("{} instances, 0 failures", data.len()))
}

fn criterion_3(data: &[Result<Descents, String>]) -> Outcome {
    let mut worst = 0f64;
    for (k, d) in data.iter().enumerate() {
        let d = d.as_ref().map_err(|e| format!("instance {k}: {e}"))?;
        let norm = d.runs[0].price.max_norm();
        ensure!(
            Scalar::from_integer(d.runs[0].trace.iterations() as i64) == norm,
            "instance {k}: {} unit iterations for norm {norm}",
            d.runs[0].trace.iterations()
        );
        for run in &d.runs[1..] {
            let bound = d.n * d.bids;
            ensure!(run.trace.iterations() <= bound, "instance {k}: {} > {bound}", run.trace.iterations());
            worst = worst.max(run.trace.iterations() as f64 / bound as f64);
        }
    }
    Ok(format!("unit count = norm everywhere, long-step worst ratio to n|B| {worst:.4}"))
}

/// Weighted coverage minus a modular term: submodular.
fn random_submodular(seed: u64) -> (usize, Vec<u64>, Vec<i64>, Vec<i64>) {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let k = r.gen_range(1..=12);
    let universe = r.gen_range(1..=16);
    let covers: Vec<u64> = (0..k).map(|_| r.gen::<u64>() & ((1u64 << universe) - 1)).collect();
    let weights: Vec<i64> = (0..universe).map(|_| r.gen_range(0..=6)).collect();
    let modular: Vec<i64> = (0..k).map(|_| r.gen_range(-8..=8)).collect();
    (k, covers, weights, modular)
}

fn criterion_4() -> Outcome {
    let strategies = [SfmStrategy::Auto, SfmStrategy::BruteForce, SfmStrategy::Wolfe];
    for seed in 0..200u64 {
        let (k, covers, weights, modular) = random_submodular(seed);
        let eval = |s: u64| -> i64 {
            let covered = (0..k).filter(|&i| s >> i & 1 == 1).fold(0u64, |acc, i| acc | covers[i]);
            let cov: i64 = (0..weights.len()).filter(|&e| covered >> e & 1 == 1).map(|e| weights[e]).sum();
            let lin: i64 = (0..k).filter(|&i| s >> i & 1 == 1).map(|i| modular[i]).sum();
            cov + lin
        };
        // Exhaustive oracle.
        let mut best = i64::MAX;
        let mut meet = u64::MAX;
        for s in 0..(1u64 << k) {
            let v = eval(s);
            if v < best {
                best = v;
                meet = s;
            } else if v == best {
                meet &= s;
            }
        }
        let f = FnSetFunction::new(k, |s| Scalar::from_integer(eval(s)));
        for strategy in strategies {
            let m = Minimiser::new(strategy);
            let min = m.minimise(&f).map_err(err)?;
            ensure!(min.value == Scalar::from_integer(best), "seed {seed} {strategy:?}: {} vs {best}", min.value);
            ensure!(eval(min.set) == best, "seed {seed} {strategy:?}: set value mismatch");
            let mm = m.minimal_minimiser(&f).map_err(err)?;
            ensure!(mm.set == meet, "seed {seed} {strategy:?}: minimal {:#b} vs {meet:#b}", mm.set);
        }
    }
    Ok("200 functions x 3 strategies match enumeration".into())
}

/// Instance `k` of the allocation sample; the first quarter is n=2, m=5 with
/// q up to 100.
fn allocation_instance(k: u64) -> Instance {
    let mut r = ChaCha8Rng::seed_from_u64(5000 + k);
    let (n, m, q) = if k < 25 {
        (2, 5, r.gen_range(20..=100))
    } else {
        (r.gen_range(2..=5), r.gen_range(2..=5), r.gen_range(5..=40))
    };
    generate_instance(&GenConfig::new(n, q), m, r.gen()).expect("generation")
}

fn check_allocation(inst: &Instance, rule: &ParamsRule) -> Result<(), String> {
    let n = inst.target.len();
    let sol = allocate(inst.lists.clone(), &inst.target, &inst.price, rule).map_err(err)?;
    ensure!(sol.total(n).goods == inst.target, "bundles do not sum to the target");
    for (list, b) in inst.lists.iter().zip(&sol.bundles) {
        ensure!(is_demanded(&list.bids, &b.goods, &inst.price).map_err(err)?, "{} not demanded", list.owner);
    }
    ensure!(sol.stats.edge_counts.windows(2).all(|w| w[1] < w[0]), "edge count did not drop");
    let bound = inst.lists.len() * (n + 1) * n / 2;
    ensure!(sol.stats.iterations <= bound, "{} iterations > {bound}", sol.stats.iterations);
    let initial = marginal_graph(&inst.price, &inst.lists).edge_count();
    ensure!(sol.stats.edge_counts.first().copied().unwrap_or(0) <= initial, "edge count grew");
    Ok(())
}

fn criterion_5() -> Outcome {
    let results = Execution::Parallel.map_each(100, |k| {
        let inst = allocation_instance(k as u64);
        let n = inst.target.len();
        let bidders = inst.lists.len();
        check_allocation(&inst, &ParamsRule::FindParams)?;
        check_allocation(&inst, &ParamsRule::Priority(canonical_priority(n, bidders)))?;
        Ok::<_, String>(inst.lists.iter().map(BidList::len).sum::<usize>())
    });
    let mut largest = 0;
    for (k, r) in results.into_iter().enumerate() {
        largest = largest.max(r.map_err(|e| format!("instance {k}: {e}"))?);
    }
    Ok(format!("100 instances, both params rules, largest {largest} bids"))
}

fn random_small_list(r: &mut ChaCha8Rng) -> Vec<Bid> {
    let n = r.gen_range(1..=3);
    let negatives = r.gen_range(0..=3);
    let positives = r.gen_range(0..=6);
    let bid = |w: i64, r: &mut ChaCha8Rng| {
        let v: Vec<i64> = (0..n).map(|_| r.gen_range(0..=10)).collect();
        Bid::from_ints(&v, w).unwrap()
    };
    let mut bids: Vec<Bid> = (0..positives).map(|_| bid(1, r)).collect();
    bids.extend((0..negatives).map(|_| bid(-1, r)));
    bids
}

fn criterion_6() -> Outcome {
    let agree = |bids: &[Bid]| -> Result<bool, String> {
        let fast = check_validity(bids).is_valid();
        let slow = brute_force_valid(bids).map_err(err)?;
        ensure!(fast == slow, "disagreement on {bids:?}");
        Ok(fast)
    };
    ensure!(agree(&bob().bids)?, "Bob's list reported invalid");
    ensure!(!agree(&[Bid::negative(&[4, 4])])?, "lone negative bid reported valid");
    let mut r = ChaCha8Rng::seed_from_u64(6);
    let mut valid = 0;
    for k in 0..100 {
        // Every other list comes from the generator so both answers occur often.
        let bids = if k % 2 == 0 {
            random_small_list(&mut r)
        } else {
            let cfg = GenConfig {
                max_value: 10,
                require_minimal: false,
                ..GenConfig::new(r.gen_range(1..=3), r.gen_range(1..=3))
            };
            generate_list(&cfg, "g", &mut rng(r.gen())).map_err(err)?.0.bids
        };
        ensure!(bids.iter().filter(|b| b.weight() < 0).count() <= 3, "too many negative bids");
        if agree(&bids)? {
            valid += 1;
        }
    }
    Ok(format!("Bob valid, lone negative invalid, 100 random lists agree ({valid} valid)"))
}

fn criterion_7(data: &[Result<Descents, String>]) -> Outcome {
    let mut prices = 0;
    for d in data.iter().flatten() {
        for run in &d.runs {
            ensure!(run.price.is_integral(), "fractional price {}", run.price);
            prices += 1;
        }
    }
    ensure!(prices == 3 * data.len(), "missing descents");
    Ok(format!("{prices} prices, all integral"))
}

fn criterion_8() -> Outcome {
    let seeds = 20;
    let bids = BenchConfig {
        n: 2,
        m: 5,
        repetitions: seeds,
        seed: 8,
        execution: Execution::Parallel,
        ..BenchConfig::default()
    };
    let rows = bench_suite(Axis::Bids, &[100, 400], &bids).map_err(err)?;
    let q_ratio = rows[1].mean_seconds / rows[0].mean_seconds;
    let goods = BenchConfig { q: 50, ..bids };
    let rows = bench_suite(Axis::Goods, &[10, 20], &goods).map_err(err)?;
    let n_ratio = rows[1].mean_seconds / rows[0].mean_seconds;
    ensure!(q_ratio <= 8.0, "q 100->400 ratio {q_ratio:.2}");
    ensure!(n_ratio <= 8.0, "n 10->20 ratio {n_ratio:.2}");
    Ok(format!("q 100->400 ratio {q_ratio:.2}, n 10->20 ratio {n_ratio:.2}, {seeds} seeds each"))
}

fn main() {
    let start = Instant::now();
    let data = descents(100);
    let results: Vec<(usize, &str, Outcome)> = vec![
        (1, "worked example", criterion_1()),
        (2, "trajectory equivalence", criterion_2(&data)),
        (3, "iteration bounds", criterion_3(&data)),
        (4, "SFM oracle equivalence", criterion_4()),
        (5, "allocation soundness", criterion_5()),
        (6, "validity agreement", criterion_6()),
        (7, "integrality", criterion_7(&data)),
        (8, "scaling shape", criterion_8()),
    ];
    let mut failed = 0;
    for (k, name, outcome) in &results {
        match outcome {
            Ok(msg) => println!("criterion {k} ({name}): PASS - {msg}"),
            Err(msg) => {
                failed += 1;
                println!("criterion {k} ({name}): FAIL - {msg}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed, {:.1}s", results.len() - failed, start.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
