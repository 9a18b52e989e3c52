//! The marginal-bids multigraph and the derived bipartite graph of link goods
//! and demand clusters, plus the two rules that pick the next reduction.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;

use crate::allocation::AllocationProblem;
use crate::bids::{demanded_goods, BidList, Price};
use crate::error::{Error, Result};
use crate::goods::GoodSet;

/// Edges `(a, b, bidder)` with `a < b`, at most one per pair and bidder.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MarginalGraph {
    pub n: usize,
    pub bidders: usize,
    pub edges: BTreeSet<(usize, usize, usize)>,
}

impl MarginalGraph {
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cluster {
    pub bidder: usize,
    pub goods: GoodSet,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DerivedGraph {
    /// Sorted by `(bidder, smallest good)`.
    pub clusters: Vec<Cluster>,
    /// Ascending.
    pub link_goods: Vec<usize>,
    /// Link goods of each cluster, ascending.
    pub cluster_links: Vec<Vec<usize>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Params {
    IsolatedCluster(Cluster),
    LeafCluster(Cluster, usize),
    /// A cycle-link good and the bidder labelling one of its cycle edges.
    CycleEdge(usize, usize),
}

pub fn marginal_graph(p: &Price, lists: &[BidList]) -> MarginalGraph {
    let mut edges = BTreeSet::new();
    for (j, list) in lists.iter().enumerate() {
        for bid in &list.bids {
            let goods: Vec<usize> = demanded_goods(bid, p).iter().collect();
            for (k, &a) in goods.iter().enumerate() {
                for &b in &goods[k + 1..] {
                    edges.insert((a, b, j));
                }
            }
        }
    }
    MarginalGraph {
        n: p.n(),
        bidders: lists.len(),
        edges,
    }
}

pub fn build_marginal_graph(problem: &AllocationProblem) -> MarginalGraph {
    marginal_graph(problem.price(), problem.lists())
}

struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(len: usize) -> Self {
        UnionFind {
            parent: (0..len).collect(),
            rank: vec![0; len],
        }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

pub fn build_derived_graph(graph: &MarginalGraph) -> DerivedGraph {
    let vertices = graph.n + 1;
    let mut clusters = Vec::new();
    for j in 0..graph.bidders {
        let mut uf = UnionFind::new(vertices);
        let mut touched = GoodSet::empty();
        for &(a, b, _) in graph.edges.iter().filter(|e| e.2 == j) {
            uf.union(a, b);
            touched.insert(a);
            touched.insert(b);
        }
        let mut components: Vec<GoodSet> = vec![GoodSet::empty(); vertices];
        for g in touched.iter() {
            let root = uf.find(g);
            components[root].insert(g);
        }
        clusters.extend(
            components
                .into_iter()
                .filter(|c| c.len() >= 2)
                .map(|goods| Cluster { bidder: j, goods }),
        );
    }
    clusters.sort_by_key(|c| (c.bidder, c.goods.min()));

    let mut count = vec![0usize; vertices];
    for c in &clusters {
        for g in c.goods.iter() {
            count[g] += 1;
        }
    }
    let link_goods: Vec<usize> = (0..vertices).filter(|&g| count[g] >= 2).collect();
    let links: GoodSet = link_goods.iter().copied().collect();
    let cluster_links = clusters
        .iter()
        .map(|c| c.goods.intersection(links).iter().collect())
        .collect();
    DerivedGraph {
        clusters,
        link_goods,
        cluster_links,
    }
}

impl DerivedGraph {
    /// Clusters containing `good`, ascending.
    pub fn clusters_of(&self, good: usize) -> Vec<usize> {
        (0..self.clusters.len())
            .filter(|&c| self.clusters[c].goods.contains(good))
            .collect()
    }

    pub fn is_link(&self, good: usize) -> bool {
        self.link_goods.binary_search(&good).is_ok()
    }

    fn isolated(&self) -> Option<Cluster> {
        (0..self.clusters.len())
            .find(|&c| self.cluster_links[c].is_empty())
            .map(|c| self.clusters[c])
    }

    fn leaf(&self) -> Option<Params> {
        (0..self.clusters.len())
            .find(|&c| self.cluster_links[c].len() == 1)
            .map(|c| Params::LeafCluster(self.clusters[c], self.cluster_links[c][0]))
    }

    /// Whether the edge between `good` and cluster `c` lies on a cycle, i.e.
    /// the two stay connected once the edge is removed.
    pub fn edge_on_cycle(&self, good: usize, c: usize) -> bool {
        let mut seen_goods = GoodSet::singleton(good);
        let mut seen_clusters = vec![false; self.clusters.len()];
        let mut queue = VecDeque::from([good]);
        while let Some(g) = queue.pop_front() {
            for k in self.clusters_of(g) {
                if (g == good && k == c) || seen_clusters[k] {
                    continue;
                }
                if k == c {
                    return true;
                }
                seen_clusters[k] = true;
                for &h in &self.cluster_links[k] {
                    if !seen_goods.contains(h) {
                        seen_goods.insert(h);
                        queue.push_back(h);
                    }
                }
            }
        }
        false
    }
}

pub fn find_params(problem: &AllocationProblem) -> Result<Params> {
    find_params_in(&build_marginal_graph(problem))
}

pub fn find_params_in(graph: &MarginalGraph) -> Result<Params> {
    if graph.is_empty() {
        return Err(Error::NoMarginals);
    }
    let derived = build_derived_graph(graph);
    if let Some(c) = derived.isolated() {
        return Ok(Params::IsolatedCluster(c));
    }
    // Greedy maximal path from the lowest link good, smallest neighbour first.
    let mut seen_goods = GoodSet::empty();
    let mut seen_clusters = vec![false; derived.clusters.len()];
    let mut good = derived.link_goods[0];
    let mut last_cluster = None;
    seen_goods.insert(good);
    loop {
        let Some(c) = derived
            .clusters_of(good)
            .into_iter()
            .find(|&c| !seen_clusters[c])
        else {
            let c: usize = last_cluster.expect("a link good has two clusters");
            return Ok(Params::CycleEdge(good, derived.clusters[c].bidder));
        };
        seen_clusters[c] = true;
        last_cluster = Some(c);
        let links = &derived.cluster_links[c];
        match links.iter().copied().find(|&g| !seen_goods.contains(g)) {
            Some(g) => {
                seen_goods.insert(g);
                good = g;
            }
            None if links.len() == 1 => return Ok(Params::LeafCluster(derived.clusters[c], good)),
            None => return Ok(Params::CycleEdge(good, derived.clusters[c].bidder)),
        }
    }
}

pub fn priority_params(problem: &AllocationProblem, priority: &[(usize, usize)]) -> Result<Params> {
    priority_params_in(&build_marginal_graph(problem), priority)
}

pub fn priority_params_in(graph: &MarginalGraph, priority: &[(usize, usize)]) -> Result<Params> {
    if graph.is_empty() {
        return Err(Error::NoMarginals);
    }
    let derived = build_derived_graph(graph);
    for &(good, bidder) in priority {
        if !derived.is_link(good) {
            continue;
        }
        let Some(c) = derived
            .clusters_of(good)
            .into_iter()
            .find(|&c| derived.clusters[c].bidder == bidder)
        else {
            continue;
        };
        if derived.edge_on_cycle(good, c) {
            return Ok(Params::CycleEdge(good, bidder));
        }
    }
    if let Some(c) = derived.isolated() {
        return Ok(Params::IsolatedCluster(c));
    }
    match derived.leaf() {
        Some(leaf) => Ok(leaf),
        // An incomplete priority list can miss every cycle edge.
        None => find_params_in(graph),
    }
}

/// Line-based dump of both graphs, one edge per line.
pub fn dump(graph: &MarginalGraph) -> String {
    let derived = build_derived_graph(graph);
    let mut out = String::new();
    writeln!(out, "marginal n={} bidders={}", graph.n, graph.bidders).unwrap();
    for (a, b, j) in &graph.edges {
        writeln!(out, "edge {a} {b} {j}").unwrap();
    }
    writeln!(out, "derived clusters={} links={}", derived.clusters.len(), derived.link_goods.len()).unwrap();
    for (k, c) in derived.clusters.iter().enumerate() {
        writeln!(out, "cluster {k} bidder={} goods={}", c.bidder, c.goods).unwrap();
    }
    for (k, links) in derived.cluster_links.iter().enumerate() {
        for g in links {
            writeln!(out, "link {g} {k}").unwrap();
        }
    }
    out
}
