use std::fmt::Write as _;
use std::str::FromStr;

use productmix::allocation::{canonical_priority, solve_auction, AUCTIONEER};
use productmix::testgen::{bench_suite, generate_instance, Axis, BenchConfig, BenchRow, GenConfig, CSV_HEADER};
use productmix::validity::{check_validity_with, ValidityOptions};
use productmix::{
    demanded_bundle, is_demanded, Bid, Error, Execution, ParamsRule, Price, PriceProblem, Scalar,
    StepRule, Validity,
};
use serde_json::{json, Value};

use crate::file::{format_value, parse_value, value_json, AuctionFile};
use crate::{CliError, Output};

/// Environment variable holding the default price scale `M`.
pub const MAX_VALUE_ENV: &str = "PRODUCTMIX_M";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Unit,
    LongBinary,
    LongDemand,
}

impl Method {
    pub fn rule(self) -> StepRule {
        match self {
            Method::Unit => StepRule::Unit,
            Method::LongBinary => StepRule::Binary,
            Method::LongDemand => StepRule::DemandChange,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Unit => "unit",
            Method::LongBinary => "long-binary",
            Method::LongDemand => "long-demand",
        }
    }
}

fn price_json(p: &Price) -> Value {
    Value::Array(p.values().iter().map(value_json).collect())
}

pub fn validate(file: &AuctionFile) -> Output {
    let mut out = String::new();
    let mut all_valid = true;
    for list in &file.bidders {
        let verdict = check_validity_with(&list.bids, ValidityOptions::default());
        match &verdict {
            Validity::Valid => writeln!(out, "{}: Valid", list.owner),
            Validity::Invalid(w) => {
                let bids: Vec<String> = w.subset.iter().map(|&k| list.bids[k].to_string()).collect();
                writeln!(
                    out,
                    "{}: Invalid witness {} weight {} from negative bids {}",
                    list.owner,
                    w.region,
                    w.weight,
                    bids.join(" ")
                )
            }
            Validity::Undecided => writeln!(out, "{}: Undecided (subset budget exhausted)", list.owner),
        }
        .expect("write to string");
        all_valid &= verdict.is_valid();
    }
    Output {
        stdout: out,
        code: if all_valid { 0 } else { 1 },
    }
}

fn require_valid(file: &AuctionFile) -> Result<(), CliError> {
    for list in &file.bidders {
        if let Validity::Invalid(w) = check_validity_with(&list.bids, ValidityOptions::default()) {
            return Err(CliError::Domain(format!(
                "bid list of {} is invalid (witness {})",
                list.owner, w.region
            )));
        }
    }
    Ok(())
}

pub fn price(file: &AuctionFile, method: Method, trace: bool) -> Result<Output, CliError> {
    require_valid(file)?;
    let problem = PriceProblem::from_lists(&file.bidders, file.target.clone())?;
    let solution = problem.long_step_min_up(method.rule())?;
    let mut out = String::new();
    if trace {
        for (k, step) in solution.trace.steps.iter().enumerate() {
            let direction: Vec<usize> = step.direction.iter().collect();
            let line = json!({
                "step": k,
                "price": price_json(&step.price),
                "direction": direction,
                "length": step.length,
            });
            writeln!(out, "{line}").expect("write to string");
        }
    }
    let summary = json!({
        "method": method.name(),
        "price": price_json(&solution.price),
        "iterations": solution.trace.iterations(),
    });
    writeln!(out, "{summary}").expect("write to string");
    Ok(Output::ok(out))
}

/// Resolves names to indices and completes the list to a permutation of
/// goods x bidders, auctioneer included as the last bidder.
pub fn priority_indices(file: &AuctionFile, pairs: &[(usize, String)]) -> Result<Vec<(usize, usize)>, CliError> {
    let m = file.bidders.len();
    let index = |name: &str| -> Result<usize, CliError> {
        if name == AUCTIONEER {
            return Ok(m);
        }
        file.bidders
            .iter()
            .position(|l| l.owner == name)
            .ok_or_else(|| CliError::Parse(format!("priority: unknown bidder {name:?}")))
    };
    let mut out = Vec::new();
    for (good, name) in pairs {
        if *good > file.goods {
            return Err(CliError::Parse(format!("priority: no good {good}")));
        }
        let pair = (*good, index(name)?);
        if !out.contains(&pair) {
            out.push(pair);
        }
    }
    for pair in canonical_priority(file.goods, m + 1) {
        if !out.contains(&pair) {
            out.push(pair);
        }
    }
    Ok(out)
}

pub fn parse_priority(text: &str) -> Result<Vec<(usize, String)>, CliError> {
    serde_json::from_str(text).map_err(|e| {
        CliError::Parse(format!("priority file line {} column {}: {e}", e.line(), e.column()))
    })
}

pub fn allocate(
    file: &AuctionFile,
    method: Method,
    priority: Option<&[(usize, String)]>,
    deterministic: bool,
) -> Result<Output, CliError> {
    require_valid(file)?;
    let pairs = priority.or(file.priority.as_deref());
    let rule = match pairs {
        Some(p) => ParamsRule::Priority(priority_indices(file, p)?),
        None if deterministic => ParamsRule::Priority(priority_indices(file, &[])?),
        None => ParamsRule::FindParams,
    };
    let execution = if deterministic {
        Execution::Sequential
    } else {
        Execution::default()
    };
    let outcome = solve_auction(file.bidders.clone(), &file.target, method.rule(), &rule, execution)?;
    let p = &outcome.price.price;
    let sol = &outcome.solution;
    let m = file.bidders.len();

    // Check the result before printing it.
    if !p.is_integral() {
        return Err(CliError::Domain(format!("internal error: fractional price {p}")));
    }
    if sol.total(file.goods).goods != file.target {
        return Err(CliError::Domain("internal error: bundles do not sum to the target".into()));
    }
    for (list, bundle) in file.bidders.iter().zip(&sol.bundles) {
        if !is_demanded(&list.bids, &bundle.goods, p)? {
            return Err(CliError::Domain(format!(
                "internal error: {} does not demand {:?}",
                list.owner, bundle.goods
            )));
        }
    }

    let bidders: Vec<Value> = file
        .bidders
        .iter()
        .zip(&sol.bundles)
        .map(|(list, b)| json!({ "name": list.owner, "bundle": b.goods, "rejected": b.reject }))
        .collect();
    let result = json!({
        "price": price_json(p),
        "bidders": bidders,
        "unsold": sol.bundles[m].goods,
        "statistics": {
            "method": method.name(),
            "pricing_iterations": outcome.price.trace.iterations(),
            "allocation_iterations": sol.stats.iterations,
            "unambiguous": sol.stats.unambiguous,
            "shifts": sol.stats.shifts,
        },
    });
    Ok(Output::ok(serde_json::to_string_pretty(&result).expect("serialisable") + "\n"))
}

pub fn generate(n: usize, m: usize, q: usize, max_value: i64, seed: u64) -> Result<Output, CliError> {
    if max_value < 4 || max_value % 2 != 0 {
        return Err(CliError::Usage("M must be even and at least 4".into()));
    }
    if n == 0 || q == 0 {
        return Err(CliError::Usage("n and q must be positive".into()));
    }
    let cfg = GenConfig {
        max_value,
        ..GenConfig::new(n, q)
    };
    let inst = generate_instance(&cfg, m, seed)?;
    let file = AuctionFile {
        goods: n,
        max_value: Some(max_value),
        bidders: inst.lists,
        target: inst.target,
        priority: None,
    };
    Ok(Output::ok(file.to_json()))
}

/// `a..b:step`, `a..b` (step `a`) or a comma-separated list.
pub fn parse_grid(text: &str) -> Result<Vec<usize>, CliError> {
    let bad = || CliError::Usage(format!("bad grid {text:?}; use a..b:step, a..b or a,b,c"));
    let num = |s: &str| s.trim().parse::<usize>().map_err(|_| bad());
    if let Some((start, rest)) = text.split_once("..") {
        let (b, step) = match rest.split_once(':') {
            Some((b, s)) => (num(b)?, Some(num(s)?)),
            None => (num(rest)?, None),
        };
        let a = num(start)?;
        let step = step.unwrap_or(a.max(1));
        if step == 0 || b < a {
            return Err(bad());
        }
        return Ok((a..=b).step_by(step).collect());
    }
    text.split(',').map(num).collect()
}

pub fn parse_axis(text: &str) -> Result<Axis, CliError> {
    match text {
        "bids" => Ok(Axis::Bids),
        "goods" => Ok(Axis::Goods),
        "bidders" => Ok(Axis::Bidders),
        _ => Err(CliError::Usage(format!("unknown axis {text:?}; use bids, goods or bidders"))),
    }
}

pub struct BenchOutput {
    pub csv: String,
    pub manifest: String,
}

pub fn bench(axis: Axis, grid: &[usize], cfg: &BenchConfig) -> Result<BenchOutput, CliError> {
    if grid.is_empty() || cfg.repetitions == 0 {
        return Err(CliError::Usage("empty grid or zero repetitions".into()));
    }
    let rows: Vec<BenchRow> = bench_suite(axis, grid, cfg)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER.split(',')).map_err(csv_error)?;
    for row in &rows {
        w.write_record(row.csv_line().split(',')).map_err(csv_error)?;
    }
    let csv = String::from_utf8(w.into_inner().map_err(|e| CliError::Io(e.into_error()))?)
        .expect("utf-8");
    let manifest = json!({
        "axis": axis.name(),
        "grid": grid,
        "seed": cfg.seed,
        "n": cfg.n,
        "m": cfg.m,
        "q": cfg.q,
        "M": cfg.max_value,
        "repetitions": cfg.repetitions,
        "execution": if cfg.execution.is_parallel() { "parallel" } else { "sequential" },
        "instance_seeds": "testgen::instance_seed(seed, value, repetition)",
    });
    Ok(BenchOutput {
        csv,
        manifest: serde_json::to_string_pretty(&manifest).expect("serialisable") + "\n",
    })
}

fn csv_error(e: csv::Error) -> CliError {
    CliError::Io(std::io::Error::other(e))
}

/// `1/2`, `0.5` or `2`.
pub fn parse_step(text: &str) -> Result<Scalar, CliError> {
    let step = Scalar::from_str(text)
        .or_else(|_| parse_value(&Value::from(text)))
        .map_err(|_| CliError::Usage(format!("bad grid step {text:?}")))?;
    if step <= Scalar::from_integer(0) {
        return Err(CliError::Usage("grid step must be positive".into()));
    }
    Ok(step)
}

/// Samples the demanded bundle over a square price grid; `marginal` marks
/// prices where demand is not a single bundle.
pub fn regions(
    file: &AuctionFile,
    step: Scalar,
    max: Option<Scalar>,
    bidder: Option<&str>,
) -> Result<Output, CliError> {
    if file.goods != 2 {
        return Err(CliError::Domain(
            Error::DimensionMismatch {
                expected: 2,
                found: file.goods,
            }
            .to_string(),
        ));
    }
    let bids: Vec<Bid> = match bidder {
        Some(name) => file
            .bidders
            .iter()
            .find(|l| l.owner == name)
            .ok_or_else(|| CliError::Usage(format!("unknown bidder {name:?}")))?
            .bids
            .clone(),
        None => file.bidders.iter().flat_map(|l| l.bids.iter().cloned()).collect(),
    };
    let max = max.unwrap_or_else(|| Scalar::from_integer(file.max_bid_value() + 2));
    let points = (max / step).floor().to_integer();
    if points > 2000 {
        return Err(CliError::Usage(format!("{} grid points per axis is too many", points + 1)));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["p1", "p2", "bundle"]).map_err(csv_error)?;
    for a in 0..=points {
        for b in 0..=points {
            let p = Price::new(vec![step * Scalar::from_integer(a), step * Scalar::from_integer(b)]);
            let bundle = match demanded_bundle(&bids, &p) {
                Ok(x) => format!("{};{}", x.goods[0], x.goods[1]),
                Err(Error::MarginalPrice) => "marginal".to_string(),
                Err(e) => return Err(e.into()),
            };
            w.write_record([format_value(&p.get(1)), format_value(&p.get(2)), bundle])
                .map_err(csv_error)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
    Ok(Output::ok(String::from_utf8(bytes).expect("utf-8")))
}
