//! Submodular set-function minimisation.
//!
//! Sets are bitmasks over a ground set `{0, .., k-1}` with `k <= 64`. Small
//! ground sets are enumerated exhaustively; larger ones go through the
//! Fujishige-Wolfe minimum-norm-point method in `f64`, with every candidate set
//! re-evaluated exactly so the reported minimiser and value are exact.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use num_traits::{One, ToPrimitive};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::Scalar;

pub trait SetFunction: Sync {
    /// Ground set size `k`.
    fn size(&self) -> usize;

    fn eval(&self, set: u64) -> Scalar;

    /// Every difference `f(S) - f(T)` is a multiple of this.
    fn resolution(&self) -> Scalar {
        Scalar::one()
    }

    /// Known bound on `|f|`, if any.
    fn bound(&self) -> Option<Scalar> {
        None
    }
}

/// A set function backed by a closure.
pub struct FnSetFunction<F> {
    size: usize,
    f: F,
    resolution: Scalar,
    bound: Option<Scalar>,
}

impl<F: Fn(u64) -> Scalar + Sync> FnSetFunction<F> {
    pub fn new(size: usize, f: F) -> Self {
        assert!(size <= 64, "ground set too large");
        FnSetFunction {
            size,
            f,
            resolution: Scalar::one(),
            bound: None,
        }
    }

    pub fn with_resolution(mut self, resolution: Scalar) -> Self {
        self.resolution = resolution;
        self
    }

    pub fn with_bound(mut self, bound: Scalar) -> Self {
        self.bound = Some(bound);
        self
    }
}

impl<F: Fn(u64) -> Scalar + Sync> SetFunction for FnSetFunction<F> {
    fn size(&self) -> usize {
        self.size
    }
    fn eval(&self, set: u64) -> Scalar {
        (self.f)(set)
    }
    fn resolution(&self) -> Scalar {
        self.resolution
    }
    fn bound(&self) -> Option<Scalar> {
        self.bound
    }
}

/// Caches evaluations of an inner function and counts the calls that reach it.
pub struct Memo<'a, F: ?Sized> {
    inner: &'a F,
    cache: Mutex<HashMap<u64, Scalar>>,
    evaluations: AtomicUsize,
}

impl<'a, F: SetFunction + ?Sized> Memo<'a, F> {
    pub fn new(inner: &'a F) -> Self {
        Memo {
            inner,
            cache: Mutex::new(HashMap::new()),
            evaluations: AtomicUsize::new(0),
        }
    }

    /// Number of evaluations forwarded to the inner function.
    pub fn evaluations(&self) -> usize {
        self.evaluations.load(Ordering::Relaxed)
    }
}

impl<F: SetFunction + ?Sized> SetFunction for Memo<'_, F> {
    fn size(&self) -> usize {
        self.inner.size()
    }

    fn eval(&self, set: u64) -> Scalar {
        if let Some(v) = self.cache.lock().expect("memo lock").get(&set) {
            return *v;
        }
        let v = self.inner.eval(set);
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        self.cache.lock().expect("memo lock").insert(set, v);
        v
    }

    fn resolution(&self) -> Scalar {
        self.inner.resolution()
    }

    fn bound(&self) -> Option<Scalar> {
        self.inner.bound()
    }
}

/// `f` restricted to a subset of its ground set, re-indexed densely.
struct Restricted<'a, F: ?Sized> {
    inner: &'a F,
    elements: Vec<usize>,
}

impl<F: SetFunction + ?Sized> Restricted<'_, F> {
    fn expand(&self, set: u64) -> u64 {
        self.elements
            .iter()
            .enumerate()
            .filter(|(k, _)| set >> k & 1 == 1)
            .fold(0, |acc, (_, &e)| acc | 1 << e)
    }
}

impl<F: SetFunction + ?Sized> SetFunction for Restricted<'_, F> {
    fn size(&self) -> usize {
        self.elements.len()
    }
    fn eval(&self, set: u64) -> Scalar {
        self.inner.eval(self.expand(set))
    }
    fn resolution(&self) -> Scalar {
        self.inner.resolution()
    }
    fn bound(&self) -> Option<Scalar> {
        self.inner.bound()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Minimum {
    pub set: u64,
    pub value: Scalar,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum SfmStrategy {
    /// Enumerate up to [`BRUTE_FORCE_MAX`] elements, Wolfe beyond.
    #[default]
    Auto,
    BruteForce,
    Wolfe,
}

pub const BRUTE_FORCE_MAX: usize = 16;
pub const FALLBACK_MAX: usize = 24;
const ENUMERATION_LIMIT: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Minimiser {
    pub strategy: SfmStrategy,
    pub execution: Execution,
    /// Major-cycle cap for Wolfe; `None` scales with the ground set.
    pub max_iterations: Option<usize>,
}

impl Default for Minimiser {
    fn default() -> Self {
        Minimiser::new(SfmStrategy::Auto)
    }
}

impl Minimiser {
    pub fn new(strategy: SfmStrategy) -> Self {
        Minimiser {
            strategy,
            execution: Execution::default(),
            max_iterations: None,
        }
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    fn use_brute_force(&self, k: usize) -> bool {
        match self.strategy {
            SfmStrategy::Auto => k <= BRUTE_FORCE_MAX,
            SfmStrategy::BruteForce => true,
            SfmStrategy::Wolfe => false,
        }
    }

    /// Some minimiser of `f` and its exact value.
    pub fn minimise<F: SetFunction + ?Sized>(&self, f: &F) -> Result<Minimum> {
        let k = f.size();
        if self.use_brute_force(k) {
            return brute_force(f, self.execution);
        }
        let memo = Memo::new(f);
        self.wolfe_with_fallback(&memo)
    }

    /// The inclusion-wise minimal minimiser of `f`.
    pub fn minimal_minimiser<F: SetFunction + ?Sized>(&self, f: &F) -> Result<Minimum> {
        let k = f.size();
        if self.use_brute_force(k) {
            return brute_force(f, self.execution);
        }
        let memo = Memo::new(f);
        let base = self.wolfe_with_fallback(&memo)?;
        let mut set = 0u64;
        for v in (0..k).filter(|v| base.set >> v & 1 == 1) {
            let restricted = Restricted {
                inner: &memo,
                elements: (0..k).filter(|&e| e != v).collect(),
            };
            let without = self.minimise(&restricted)?;
            if without.value > base.value {
                set |= 1 << v;
            }
        }
        Ok(Minimum {
            set,
            value: memo.eval(set),
        })
    }

    fn wolfe_with_fallback<F: SetFunction + ?Sized>(&self, f: &F) -> Result<Minimum> {
        let k = f.size();
        let cap = self.max_iterations.unwrap_or(1000 + 100 * k);
        match wolfe(f, cap) {
            Err(Error::ConvergenceFailure { .. }) if k <= FALLBACK_MAX => {
                brute_force(f, self.execution)
            }
            other => other,
        }
    }
}

pub fn minimise<F: SetFunction + ?Sized>(f: &F) -> Result<Minimum> {
    Minimiser::default().minimise(f)
}

pub fn minimal_minimiser<F: SetFunction + ?Sized>(f: &F) -> Result<Minimum> {
    Minimiser::default().minimal_minimiser(f)
}

/// Exhaustive search; returns the intersection of all minimisers, which for a
/// submodular function is itself a minimiser.
pub fn brute_force<F: SetFunction + ?Sized>(f: &F, execution: Execution) -> Result<Minimum> {
    let k = f.size();
    if k > ENUMERATION_LIMIT {
        return Err(Error::ScaleExceeded(format!(
            "{k} elements is too many for enumeration"
        )));
    }
    let best = execution.map_reduce(
        1usize << k,
        None,
        |s| Some((f.eval(s as u64), s as u64)),
        |a: Option<(Scalar, u64)>, b| match (a, b) {
            (None, x) | (x, None) => x,
            (Some((va, sa)), Some((vb, sb))) => Some(match va.cmp(&vb) {
                std::cmp::Ordering::Less => (va, sa),
                std::cmp::Ordering::Greater => (vb, sb),
                std::cmp::Ordering::Equal => (va, sa & sb),
            }),
        },
    );
    let (value, set) = best.expect("non-empty power set");
    debug_assert_eq!(f.eval(set), value, "minimisers do not form a lattice");
    Ok(Minimum { set, value })
}

/// Finds a violated submodularity inequality `f(S+i) + f(S+j) >= f(S+i+j) + f(S)`.
pub fn submodularity_violation<F: SetFunction + ?Sized>(f: &F) -> Option<(u64, usize, usize)> {
    let k = f.size();
    assert!(k <= 12, "submodularity check is for small ground sets only");
    for s in 0..1u64 << k {
        for i in (0..k).filter(|i| s >> i & 1 == 0) {
            for j in (i + 1..k).filter(|j| s >> j & 1 == 0) {
                let (si, sj) = (s | 1 << i, s | 1 << j);
                if f.eval(si) + f.eval(sj) < f.eval(si | sj) + f.eval(s) {
                    return Some((s, i, j));
                }
            }
        }
    }
    None
}

fn to_f64(x: Scalar) -> f64 {
    x.to_f64().expect("finite rational")
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn combine(points: &[Vec<f64>], weights: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; points[0].len()];
    for (p, &w) in points.iter().zip(weights) {
        for (xi, pi) in x.iter_mut().zip(p) {
            *xi += w * pi;
        }
    }
    x
}

/// Weights of the minimum-norm point in the affine hull of `points`, or
/// `None` when the points are numerically affinely dependent.
fn affine_minimiser(points: &[Vec<f64>]) -> Option<Vec<f64>> {
    let m = points.len();
    let dim = m + 1;
    let mut a = vec![vec![0.0; dim + 1]; dim];
    let mut scale = 1.0f64;
    for i in 0..m {
        for j in 0..m {
            a[i][j] = dot(&points[i], &points[j]);
            scale = scale.max(a[i][j].abs());
        }
        a[i][m] = 1.0;
        a[m][i] = 1.0;
    }
    a[m][dim] = 1.0;
    for col in 0..dim {
        let pivot = (col..dim)
            .max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))
            .expect("non-empty");
        if a[pivot][col].abs() < 1e-12 * scale {
            return None;
        }
        a.swap(col, pivot);
        let pivot_row = a[col].clone();
        for (r, row) in a.iter_mut().enumerate().take(dim) {
            if r != col {
                let factor = row[col] / pivot_row[col];
                if factor != 0.0 {
                    for (x, p) in row[col..=dim].iter_mut().zip(&pivot_row[col..=dim]) {
                        *x -= factor * p;
                    }
                }
            }
        }
    }
    Some((0..m).map(|i| a[i][dim] / a[i][i]).collect())
}

/// Fujishige-Wolfe minimum-norm point with a duality-gap stopping rule.
///
/// Every greedy vertex comes with its prefix sets, which are evaluated exactly
/// anyway, so the best prefix seen so far is an exact upper bound. The lower
/// bound `f(0) + sum_i min(x_i, 0)` holds for any `x` in the base polytope.
/// Once the two are within half the resolution the best prefix is optimal.
fn wolfe<F: SetFunction + ?Sized>(f: &F, max_iterations: usize) -> Result<Minimum> {
    let k = f.size();
    let f0 = f.eval(0);
    let half_res = to_f64(f.resolution()) / 2.0;
    let mut best = Minimum { set: 0, value: f0 };
    if k == 0 {
        return Ok(best);
    }

    let greedy = |x: &[f64], best: &mut Minimum| -> Vec<f64> {
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));
        let mut vertex = vec![0.0; k];
        let mut set = 0u64;
        let mut prev = f0;
        for &i in &order {
            set |= 1 << i;
            let v = f.eval(set);
            vertex[i] = to_f64(v - prev);
            prev = v;
            if v < best.value {
                *best = Minimum { set, value: v };
            }
        }
        vertex
    };

    let mut points = vec![greedy(&vec![0.0; k], &mut best)];
    let mut lambda = vec![1.0];
    let mut x = points[0].clone();

    for _ in 0..max_iterations {
        let q = greedy(&x, &mut best);
        let lower = to_f64(f0) + x.iter().map(|v| v.min(0.0)).sum::<f64>();
        if to_f64(best.value) - lower < half_res {
            return Ok(best);
        }
        let xx = dot(&x, &x);
        if xx - dot(&x, &q) <= 1e-10 * (1.0 + xx) {
            break;
        }
        points.push(q);
        lambda.push(0.0);
        loop {
            let Some(alpha) = affine_minimiser(&points) else {
                points.pop();
                lambda.pop();
                break;
            };
            if alpha.iter().all(|&a| a > 1e-12) {
                x = combine(&points, &alpha);
                lambda = alpha;
                break;
            }
            let theta = lambda
                .iter()
                .zip(&alpha)
                .filter(|(_, &a)| a <= 1e-12)
                .map(|(&l, &a)| l / (l - a))
                .fold(1.0f64, f64::min);
            for (l, a) in lambda.iter_mut().zip(&alpha) {
                *l = theta * a + (1.0 - theta) * *l;
            }
            let drop = lambda
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, _)| i)
                .expect("non-empty");
            let mut idx = 0;
            points.retain(|_| {
                let keep = idx != drop && lambda[idx] > 1e-12;
                idx += 1;
                keep
            });
            lambda = lambda
                .iter()
                .enumerate()
                .filter(|&(i, &l)| i != drop && l > 1e-12)
                .map(|(_, &l)| l)
                .collect();
            let total: f64 = lambda.iter().sum();
            lambda.iter_mut().for_each(|l| *l /= total);
            x = combine(&points, &lambda);
        }
    }
    Err(Error::ConvergenceFailure {
        iterations: max_iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn int(v: i64) -> Scalar {
        Scalar::from_integer(v)
    }

    fn modular(a: Vec<i64>) -> FnSetFunction<impl Fn(u64) -> Scalar + Sync> {
        let k = a.len();
        FnSetFunction::new(k, move |s| {
            int((0..k).filter(|i| s >> i & 1 == 1).map(|i| a[i]).sum())
        })
    }

    #[test]
    fn cardinality_is_minimised_by_empty_set() {
        let f = FnSetFunction::new(5, |s: u64| int(s.count_ones() as i64));
        for strategy in [SfmStrategy::BruteForce, SfmStrategy::Wolfe] {
            let m = Minimiser::new(strategy).minimise(&f).unwrap();
            assert_eq!((m.set, m.value), (0, int(0)));
        }
    }

    #[test]
    fn modular_function_picks_negative_coordinates() {
        let f = modular(vec![-2, 3, -1]);
        for strategy in [SfmStrategy::BruteForce, SfmStrategy::Wolfe] {
            let mm = Minimiser::new(strategy);
            let m = mm.minimise(&f).unwrap();
            assert_eq!((m.set, m.value), (0b101, int(-3)));
            assert_eq!(mm.minimal_minimiser(&f).unwrap().set, 0b101);
        }
    }

    #[test]
    fn constant_function_has_empty_minimal_minimiser() {
        let f = FnSetFunction::new(2, |_| int(0));
        for strategy in [SfmStrategy::BruteForce, SfmStrategy::Wolfe] {
            assert_eq!(Minimiser::new(strategy).minimal_minimiser(&f).unwrap().set, 0);
        }
    }

    #[test]
    fn memo_evaluates_each_set_once() {
        let f = modular(vec![1, -1, 2]);
        let memo = Memo::new(&f);
        for _ in 0..5 {
            memo.eval(0b011);
        }
        assert_eq!(memo.evaluations(), 1);
        memo.eval(0b100);
        assert_eq!(memo.evaluations(), 2);
    }

    #[test]
    fn wolfe_handles_large_ground_sets() {
        // Cut function of a path plus a modular pull: submodular, 30 elements.
        let k = 30;
        let f = FnSetFunction::new(k, move |s: u64| {
            let cut = (0..k - 1)
                .filter(|&i| (s >> i & 1) != (s >> (i + 1) & 1))
                .count() as i64;
            let pull: i64 = (0..k)
                .filter(|&i| s >> i & 1 == 1)
                .map(|i| if (10..20).contains(&i) { -1 } else { 1 })
                .sum();
            int(3 * cut + pull)
        });
        let m = Minimiser::new(SfmStrategy::Wolfe).minimal_minimiser(&f).unwrap();
        // The middle block: two cuts (6) against a pull of 10.
        assert_eq!(m.value, int(-4));
        assert_eq!(m.set, ((1u64 << 20) - 1) & !((1u64 << 10) - 1));
    }

    #[test]
    fn finds_submodularity_violations() {
        let supermodular = FnSetFunction::new(2, |s: u64| int(if s == 3 { 1 } else { 0 }));
        assert!(submodularity_violation(&supermodular).is_some());
        assert!(submodularity_violation(&modular(vec![1, 2, 3])).is_none());
    }

    #[test]
    fn resolution_scales_the_stopping_rule() {
        let f = FnSetFunction::new(20, |s: u64| {
            Scalar::new(if s & 0b11 == 0b11 { -1 } else { 0 }, 10)
        })
        .with_resolution(Scalar::new(1, 10));
        let m = Minimiser::new(SfmStrategy::Wolfe).minimal_minimiser(&f).unwrap();
        assert_eq!(m.value, Scalar::new(-1, 10));
        assert_eq!(m.set, 0b11);
    }
}
