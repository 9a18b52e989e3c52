//! Validity of bid lists.
//!
//! A list is valid when no price has a pair of goods on which the marginal
//! bids carry negative total weight. [`check_validity`] decides this through a
//! finite family of regions anchored at small sets of negative bids;
//! [`brute_force_valid`] scans a fine price grid instead and serves as a test
//! oracle at desk scale.

use std::fmt;

use num_integer::Integer;
use num_traits::{Signed, Zero};

use crate::bids::{common_denominator, Bid};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RegionKind {
    /// `H_i`: points below the anchor that meet it on coordinate `i`.
    H(usize),
    /// `F_ij`: diagonal translates of points below the anchor that meet it on
    /// coordinates `i` and `j`.
    F(usize, usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RegionQuery {
    pub anchor: Vec<Scalar>,
    pub kind: RegionKind,
}

impl fmt::Display for RegionQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            RegionKind::H(i) => write!(f, "H_{i}")?,
            RegionKind::F(i, j) => write!(f, "F_{i}{j}")?,
        }
        f.write_str(" at (")?;
        for (k, v) in self.anchor.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str(")")
    }
}

/// Membership of a bid's value vector. Goods are numbered from 1.
pub fn contains(query: &RegionQuery, bid: &Bid) -> bool {
    let x = bid.values();
    let y = &query.anchor;
    match query.kind {
        RegionKind::H(i) => {
            x[i - 1] == y[i - 1]
                && x.iter().zip(y).all(|(a, b)| *a >= Scalar::zero() && a <= b)
        }
        RegionKind::F(i, j) => {
            let beta = x[i - 1] - y[i - 1];
            beta >= Scalar::zero()
                && x[j - 1] - y[j - 1] == beta
                && x.iter().zip(y).all(|(a, b)| *a - beta <= *b)
        }
    }
}

/// Total weight of the bids a region contains.
pub fn region_weight(query: &RegionQuery, bids: &[Bid]) -> i64 {
    bids.iter()
        .filter(|b| contains(query, b))
        .map(Bid::weight)
        .sum()
}

/// Component-wise maximum.
pub fn md<'a>(set: impl IntoIterator<Item = &'a Bid>) -> Result<Vec<Scalar>> {
    let mut it = set.into_iter();
    let first = it.next().ok_or(Error::EmptySet)?;
    Ok(it.fold(first.values().to_vec(), |mut acc, b| {
        for (a, v) in acc.iter_mut().zip(b.values()) {
            *a = (*a).max(*v);
        }
        acc
    }))
}

/// `min_b b_i * 1 + md({b - b_i * 1})`.
pub fn md_f<'a>(i: usize, set: impl IntoIterator<Item = &'a Bid> + Clone) -> Result<Vec<Scalar>> {
    let low = set
        .clone()
        .into_iter()
        .map(|b| b.values()[i - 1])
        .min()
        .ok_or(Error::EmptySet)?;
    let mut it = set.into_iter();
    let first = it.next().expect("non-empty");
    let shifted = |b: &Bid| -> Vec<Scalar> {
        let base = b.values()[i - 1];
        b.values().iter().map(|v| v - base).collect()
    };
    let top = it.fold(shifted(first), |mut acc, b| {
        for (a, v) in acc.iter_mut().zip(shifted(b)) {
            *a = (*a).max(v);
        }
        acc
    });
    Ok(top.into_iter().map(|v| v + low).collect())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Witness {
    pub region: RegionQuery,
    /// Indices into the list of the negative bids generating the anchor.
    pub subset: Vec<usize>,
    /// Total weight inside the region; negative.
    pub weight: i64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Validity {
    Valid,
    Invalid(Witness),
    /// The subset budget ran out before a decision.
    Undecided,
}

impl Validity {
    pub fn is_valid(&self) -> bool {
        matches!(self, Validity::Valid)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ValidityOptions {
    /// Maximum number of negative-bid subsets examined.
    pub budget: usize,
    pub execution: Execution,
}

impl Default for ValidityOptions {
    fn default() -> Self {
        ValidityOptions {
            budget: 2_000_000,
            execution: Execution::default(),
        }
    }
}

pub fn check_validity(bids: &[Bid]) -> Validity {
    check_validity_with(bids, ValidityOptions::default())
}

pub fn check_validity_with(bids: &[Bid], options: ValidityOptions) -> Validity {
    let negatives: Vec<usize> = (0..bids.len()).filter(|&k| bids[k].weight() < 0).collect();
    if negatives.is_empty() {
        return Validity::Valid;
    }
    let n = bids[0].n();
    let max_size = (n + 1).min(negatives.len());
    let mut subsets = Vec::new();
    let mut exhausted = true;
    'sizes: for size in 1..=max_size {
        let mut combo: Vec<usize> = (0..size).collect();
        loop {
            if subsets.len() == options.budget {
                exhausted = false;
                break 'sizes;
            }
            subsets.push(combo.iter().map(|&k| negatives[k]).collect::<Vec<_>>());
            if !next_combination(&mut combo, negatives.len()) {
                break;
            }
        }
    }
    let found = options
        .execution
        .find_map_first(subsets.len(), |k| violated_region(bids, &subsets[k]));
    match found {
        Some(w) => Validity::Invalid(w),
        None if exhausted => Validity::Valid,
        None => Validity::Undecided,
    }
}

/// Advances to the next `k`-combination of `0..len` in lexicographic order.
fn next_combination(combo: &mut [usize], len: usize) -> bool {
    let k = combo.len();
    for pos in (0..k).rev() {
        if combo[pos] < len - k + pos {
            combo[pos] += 1;
            for q in pos + 1..k {
                combo[q] = combo[q - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn violated_region(bids: &[Bid], subset: &[usize]) -> Option<Witness> {
    let members: Vec<&Bid> = subset.iter().map(|&k| &bids[k]).collect();
    let n = members[0].n();
    let witness = |region: RegionQuery| {
        let weight = region_weight(&region, bids);
        (weight < 0).then(|| Witness {
            region,
            subset: subset.to_vec(),
            weight,
        })
    };
    let agree = |f: &dyn Fn(&Bid) -> Scalar| {
        let first = f(members[0]);
        members.iter().all(|b| f(b) == first)
    };
    for i in 1..=n {
        if agree(&|b: &Bid| b.values()[i - 1]) {
            let anchor = md(members.iter().copied()).expect("non-empty");
            if let Some(w) = witness(RegionQuery {
                anchor,
                kind: RegionKind::H(i),
            }) {
                return Some(w);
            }
        }
    }
    for i in 1..=n {
        for j in i + 1..=n {
            if agree(&|b: &Bid| b.values()[i - 1] - b.values()[j - 1]) {
                let anchor = md_f(i, members.iter().copied()).expect("non-empty");
                if let Some(w) = witness(RegionQuery {
                    anchor,
                    kind: RegionKind::F(i, j),
                }) {
                    return Some(w);
                }
            }
        }
    }
    None
}

pub const BRUTE_FORCE_MAX_GOODS: usize = 3;
pub const BRUTE_FORCE_MAX_VALUE: i64 = 20;

/// Grid-search oracle for validity.
///
/// Weight sums only change on the hyperplanes `p_a - p_c = b_a - b_c` and
/// `p_a = b_a`. Every face of that arrangement contains a point whose
/// coordinates are multiples of `1 / lcm(1..=n+1)`, so scanning that grid
/// finds every pattern of marginal bids. A negative sum needs a negative bid
/// that is marginal on the pair, so only prices on those bids' tie
/// hyperplanes are scanned.
pub fn brute_force_valid(bids: &[Bid]) -> Result<bool> {
    brute_force_valid_with(bids, Execution::default())
}

pub fn brute_force_valid_with(bids: &[Bid], execution: Execution) -> Result<bool> {
    let Some(first) = bids.first() else {
        return Ok(true);
    };
    let n = first.n();
    if n > BRUTE_FORCE_MAX_GOODS {
        return Err(Error::ScaleExceeded(format!("{n} goods")));
    }
    if bids.iter().any(|b| b.n() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: bids.iter().find(|b| b.n() != n).map_or(0, Bid::n),
        });
    }
    let top = bids
        .iter()
        .flat_map(|b| b.values())
        .map(|v| v.abs().ceil().to_integer())
        .max()
        .unwrap_or(0);
    if top > BRUTE_FORCE_MAX_VALUE {
        return Err(Error::ScaleExceeded(format!("bid value {top}")));
    }
    let denom = common_denominator(bids);
    if denom > 10 {
        return Err(Error::ScaleExceeded(format!("denominator {denom}")));
    }
    let grid = (1..=n as i64 + 1).fold(1i64, |acc, k| acc.lcm(&k));
    let scale = denom * grid;
    // Scaled integer values with the reject good in column 0.
    let values: Vec<Vec<i64>> = bids
        .iter()
        .map(|b| {
            std::iter::once(0)
                .chain(b.values().iter().map(|v| (*v * scale).to_integer()))
                .collect()
        })
        .collect();
    let weights: Vec<i64> = bids.iter().map(Bid::weight).collect();
    let (lo, hi) = (-scale, (top + 1) * scale);

    let mut tasks = Vec::new();
    for (k, w) in weights.iter().enumerate() {
        if *w < 0 {
            for a in 0..=n {
                for c in a + 1..=n {
                    tasks.push((k, a, c));
                }
            }
        }
    }
    let pair_weight = |p: &[i64], a: usize, c: usize| -> i64 {
        values
            .iter()
            .zip(&weights)
            .filter(|(v, _)| {
                let best = (0..=n).map(|g| v[g] - p[g]).max().expect("non-empty");
                v[a] - p[a] == best && v[c] - p[c] == best
            })
            .map(|(_, w)| w)
            .sum()
    };
    let violation = execution.find_map_first(tasks.len(), |t| {
        let (k, a, c) = tasks[t];
        let v = &values[k];
        // Free coordinates: all real goods except c, whose price follows from
        // the tie with a.
        let free: Vec<usize> = (1..=n).filter(|&g| g != c).collect();
        let span = (hi - lo + 1) as usize;
        let points = span.pow(free.len() as u32);
        let mut p = vec![0i64; n + 1];
        for code in 0..points {
            let mut rest = code;
            for &g in &free {
                p[g] = lo + (rest % span) as i64;
                rest /= span;
            }
            p[c] = v[c] - (v[a] - p[a]);
            if p[c] < lo || p[c] > hi {
                continue;
            }
            let best = (0..=n).map(|g| v[g] - p[g]).max().expect("non-empty");
            if v[a] - p[a] != best {
                continue;
            }
            if pair_weight(&p, a, c) < 0 {
                return Some(());
            }
        }
        None
    });
    Ok(violation.is_none())
}
