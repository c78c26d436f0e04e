//! Directed graphs over item pairs.
//!
//! Every comparison `(i, j, k, l)` becomes an edge from pair `{i, j}` to pair
//! `{k, l}`. A cycle means no embedding can satisfy the whole set; an edge
//! implied by a longer path is redundant. The routines here remove both
//! problems and leave a strict partial order over pairs.

use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::comparison::{validate_all, Comparison, Pair};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Edge {
    from: usize,
    to: usize,
    /// First comparison record that produced this edge.
    source: Comparison,
}

/// Directed graph whose vertices are canonical pairs.
///
/// Edges keep insertion order, so every derived graph and every exported
/// comparison list is deterministic.
#[derive(Debug, Clone, Default)]
pub struct PairGraph {
    vertices: Vec<Pair>,
    index: HashMap<Pair, usize>,
    edges: Vec<Edge>,
    edge_set: HashSet<(usize, usize)>,
    out_adj: Vec<Vec<usize>>,
    in_adj: Vec<Vec<usize>>,
}

impl PairGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Build the graph of a comparison set. Duplicates (including mirrored
    /// spellings such as `(j, i, l, k)`) collapse into a single edge.
    pub fn from_comparisons(comparisons: &[Comparison]) -> Result<Self> {
        validate_all(comparisons)?;
        let mut g = PairGraph::new();
        for c in comparisons {
            g.add_comparison(*c);
        }
        Ok(g)
    }

    fn vertex_id(&mut self, p: Pair) -> usize {
        if let Some(&id) = self.index.get(&p) {
            return id;
        }
        let id = self.vertices.len();
        self.vertices.push(p);
        self.index.insert(p, id);
        self.out_adj.push(Vec::new());
        self.in_adj.push(Vec::new());
        id
    }

    /// Insert `c`; returns false when it was already present. Panics on an
    /// invalid comparison.
    fn add_comparison(&mut self, c: Comparison) -> bool {
        let (near, far) = c.pairs().expect("comparison validated before insertion");
        let u = self.vertex_id(near);
        let v = self.vertex_id(far);
        self.add_edge_ids(u, v, c)
    }

    fn add_edge_ids(&mut self, u: usize, v: usize, source: Comparison) -> bool {
        debug_assert_ne!(u, v);
        if !self.edge_set.insert((u, v)) {
            return false;
        }
        self.edges.push(Edge { from: u, to: v, source });
        self.out_adj[u].push(v);
        self.in_adj[v].push(u);
        true
    }

    /// Same vertex set, no edges.
    fn empty_like(&self) -> Self {
        PairGraph {
            vertices: self.vertices.clone(),
            index: self.index.clone(),
            edges: Vec::new(),
            edge_set: HashSet::new(),
            out_adj: vec![Vec::new(); self.vertices.len()],
            in_adj: vec![Vec::new(); self.vertices.len()],
        }
    }

    fn with_edges(&self, edges: impl IntoIterator<Item = Edge>) -> Self {
        let mut g = self.empty_like();
        for e in edges {
            g.add_edge_ids(e.from, e.to, e.source);
        }
        g
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[Pair] {
        &self.vertices
    }

    pub fn contains_vertex(&self, p: Pair) -> bool {
        self.index.contains_key(&p)
    }

    pub fn vertex_index(&self, p: Pair) -> Option<usize> {
        self.index.get(&p).copied()
    }

    /// Edges as `(from, to)` pairs, in insertion order.
    pub fn edges(&self) -> impl Iterator<Item = (Pair, Pair)> + '_ {
        self.edges
            .iter()
            .map(|e| (self.vertices[e.from], self.vertices[e.to]))
    }

    pub fn has_edge(&self, from: Pair, to: Pair) -> bool {
        match (self.index.get(&from), self.index.get(&to)) {
            (Some(&u), Some(&v)) => self.edge_set.contains(&(u, v)),
            _ => false,
        }
    }

    pub fn in_degree(&self, p: Pair) -> usize {
        self.index.get(&p).map_or(0, |&v| self.in_adj[v].len())
    }

    /// Pairs with an edge into `p`.
    pub fn predecessors(&self, p: Pair) -> Vec<Pair> {
        self.index.get(&p).map_or_else(Vec::new, |&v| {
            self.in_adj[v].iter().map(|&u| self.vertices[u]).collect()
        })
    }

    /// One comparison per edge, using the first record seen for that edge.
    pub fn comparisons(&self) -> Vec<Comparison> {
        self.edges.iter().map(|e| e.source).collect()
    }

    /// A directed cycle as a vertex sequence, if one exists.
    pub fn find_cycle(&self) -> Option<Vec<Pair>> {
        const WHITE: u8 = 0;
        const GREY: u8 = 1;
        const BLACK: u8 = 2;
        let n = self.vertices.len();
        let mut color = vec![WHITE; n];
        let mut parent = vec![usize::MAX; n];
        for root in 0..n {
            if color[root] != WHITE {
                continue;
            }
            // (vertex, next neighbour position)
            let mut stack = vec![(root, 0usize)];
            color[root] = GREY;
            while let Some(&mut (u, ref mut pos)) = stack.last_mut() {
                if *pos < self.out_adj[u].len() {
                    let v = self.out_adj[u][*pos];
                    *pos += 1;
                    match color[v] {
                        WHITE => {
                            color[v] = GREY;
                            parent[v] = u;
                            stack.push((v, 0));
                        }
                        GREY => {
                            let mut cycle = vec![self.vertices[u]];
                            let mut w = u;
                            while w != v {
                                w = parent[w];
                                cycle.push(self.vertices[w]);
                            }
                            cycle.reverse();
                            return Some(cycle);
                        }
                        _ => {}
                    }
                } else {
                    color[u] = BLACK;
                    stack.pop();
                }
            }
        }
        None
    }

    pub fn is_acyclic(&self) -> bool {
        self.find_cycle().is_none()
    }

    fn ensure_acyclic(&self) -> Result<()> {
        match self.find_cycle() {
            Some(cycle) => Err(Error::Cyclic(cycle)),
            None => Ok(()),
        }
    }

    /// Vertex ids in topological order (Kahn's algorithm, lowest id first
    /// among ready vertices).
    fn topo_ids(&self) -> Result<Vec<usize>> {
        let n = self.vertices.len();
        let mut indeg: Vec<usize> = self.in_adj.iter().map(Vec::len).collect();
        let mut ready: std::collections::BinaryHeap<std::cmp::Reverse<usize>> = indeg
            .iter()
            .enumerate()
            .filter(|(_, &d)| d == 0)
            .map(|(v, _)| std::cmp::Reverse(v))
            .collect();
        let mut order = Vec::with_capacity(n);
        while let Some(std::cmp::Reverse(u)) = ready.pop() {
            order.push(u);
            for &v in &self.out_adj[u] {
                indeg[v] -= 1;
                if indeg[v] == 0 {
                    ready.push(std::cmp::Reverse(v));
                }
            }
        }
        if order.len() != n {
            self.ensure_acyclic()?;
            unreachable!("Kahn's algorithm stalled on an acyclic graph");
        }
        Ok(order)
    }

    /// Pairs in topological order; rejects cyclic graphs with a witness.
    pub fn topological_order(&self) -> Result<Vec<Pair>> {
        Ok(self
            .topo_ids()?
            .into_iter()
            .map(|v| self.vertices[v])
            .collect())
    }

    /// Is `target` reachable from `start` through edges of `adj`?
    fn reaches(adj: &[Vec<usize>], start: usize, target: usize, seen: &mut Stamp) -> bool {
        seen.next();
        let mut stack = vec![start];
        seen.mark(start);
        while let Some(u) = stack.pop() {
            if u == target {
                return true;
            }
            for &v in &adj[u] {
                if seen.mark(v) {
                    stack.push(v);
                }
            }
        }
        false
    }

    /// Greedy approximate maximum acyclic subgraph.
    ///
    /// Edges are visited in an order drawn from a ChaCha8 generator seeded
    /// with `seed`; each is kept iff it closes no cycle among edges already
    /// kept. The result is acyclic and maximal. Kept edges are reported in
    /// their original order.
    pub fn max_acyclic_subgraph(&self, seed: u64) -> PairGraph {
        let mut order: Vec<usize> = (0..self.edges.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        order.shuffle(&mut rng);

        let n = self.vertices.len();
        let mut adj = vec![Vec::new(); n];
        let mut keep = vec![false; self.edges.len()];
        let mut seen = Stamp::new(n);
        for eid in order {
            let Edge { from, to, .. } = self.edges[eid];
            if !Self::reaches(&adj, to, from, &mut seen) {
                adj[from].push(to);
                keep[eid] = true;
            }
        }
        self.with_edges(
            self.edges
                .iter()
                .zip(&keep)
                .filter(|(_, &k)| k)
                .map(|(e, _)| *e),
        )
    }

    /// Vertices reachable from `u` by a nonempty path, in id order.
    fn reachable_from(&self, u: usize, seen: &mut Stamp) -> Vec<usize> {
        seen.next();
        let mut stack: Vec<usize> = Vec::new();
        for &v in &self.out_adj[u] {
            if seen.mark(v) {
                stack.push(v);
            }
        }
        let mut out = Vec::new();
        while let Some(w) = stack.pop() {
            out.push(w);
            for &v in &self.out_adj[w] {
                if seen.mark(v) {
                    stack.push(v);
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Graph with an edge `u -> v` for every nonempty path `u ~> v`.
    ///
    /// Vertices on a cycle would reach themselves; those self-loops are
    /// omitted because pair graphs never carry them.
    pub fn transitive_closure(&self) -> PairGraph {
        let mut g = self.with_edges(self.edges.iter().copied());
        let mut seen = Stamp::new(self.vertices.len());
        for u in 0..self.vertices.len() {
            for v in self.reachable_from(u, &mut seen) {
                if v != u {
                    let (p, q) = (self.vertices[u], self.vertices[v]);
                    g.add_edge_ids(u, v, Comparison::new(p.a, p.b, q.a, q.b));
                }
            }
        }
        g
    }

    /// Drop every edge `u -> v` for which `v` is also reachable from `u`
    /// through a path of two or more edges. Requires a DAG.
    pub fn transitive_reduction(&self) -> Result<PairGraph> {
        self.ensure_acyclic()?;
        let n = self.vertices.len();
        let mut seen = Stamp::new(n);
        let mut redundant = HashSet::new();
        for u in 0..n {
            if self.out_adj[u].len() < 2 {
                // a single out-edge cannot be bypassed in a DAG
                continue;
            }
            // everything reachable from a successor via at least one edge
            seen.next();
            let mut stack = Vec::new();
            for &w in &self.out_adj[u] {
                for &x in &self.out_adj[w] {
                    if seen.mark(x) {
                        stack.push(x);
                    }
                }
            }
            while let Some(x) = stack.pop() {
                for &y in &self.out_adj[x] {
                    if seen.mark(y) {
                        stack.push(y);
                    }
                }
            }
            for &v in &self.out_adj[u] {
                if seen.is_marked(v) {
                    redundant.insert((u, v));
                }
            }
        }
        Ok(self.with_edges(
            self.edges
                .iter()
                .filter(|e| !redundant.contains(&(e.from, e.to)))
                .copied(),
        ))
    }

    /// Number of edges on the longest directed path. Requires a DAG.
    pub fn diameter(&self) -> Result<usize> {
        let order = self.topo_ids()?;
        let mut longest = vec![0usize; self.vertices.len()];
        let mut best = 0;
        for u in order {
            for &v in &self.out_adj[u] {
                longest[v] = longest[v].max(longest[u] + 1);
                best = best.max(longest[v]);
            }
        }
        Ok(best)
    }
}

/// Generation-stamped visited set, reusable across searches.
struct Stamp {
    marks: Vec<u32>,
    current: u32,
}

impl Stamp {
    fn new(n: usize) -> Self {
        Stamp {
            marks: vec![0; n],
            current: 0,
        }
    }

    fn next(&mut self) {
        self.current += 1;
    }

    /// Mark `v`; true if it was unmarked.
    fn mark(&mut self, v: usize) -> bool {
        if self.marks[v] == self.current {
            false
        } else {
            self.marks[v] = self.current;
            true
        }
    }

    fn is_marked(&self, v: usize) -> bool {
        self.marks[v] == self.current
    }
}

/// Build the pair graph of `comparisons`.
pub fn build_graph(comparisons: &[Comparison]) -> Result<PairGraph> {
    PairGraph::from_comparisons(comparisons)
}

/// Remove both sides of every directly contradictory pair of comparisons,
/// i.e. whenever `(i,j,k,l)` and `(k,l,i,j)` both occur. Order of the
/// survivors is preserved.
pub fn prune_direct_contradictions(comparisons: &[Comparison]) -> Vec<Comparison> {
    let keys: Vec<Option<(Pair, Pair)>> = comparisons.iter().map(|c| c.pairs().ok()).collect();
    let present: HashSet<(Pair, Pair)> = keys.iter().flatten().copied().collect();
    comparisons
        .iter()
        .zip(&keys)
        .filter(|(_, key)| match key {
            Some((near, far)) => !present.contains(&(*far, *near)),
            None => true,
        })
        .map(|(c, _)| *c)
        .collect()
}

/// Drop repeated measurements, keeping the first spelling of each.
pub fn dedup(comparisons: &[Comparison]) -> Result<Vec<Comparison>> {
    Ok(PairGraph::from_comparisons(comparisons)?.comparisons())
}

/// Which stages of the cleanup pipeline to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProcessOptions {
    pub prune_contradictions: bool,
    /// Seed for the acyclic-subgraph stage; `None` skips it.
    pub max_acyclic: Option<u64>,
    pub reduce: bool,
}

impl ProcessOptions {
    pub fn full(seed: u64) -> Self {
        ProcessOptions {
            prune_contradictions: true,
            max_acyclic: Some(seed),
            reduce: true,
        }
    }
}

/// Comparison counts after each pipeline stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ProcessReport {
    pub input: usize,
    pub deduplicated: usize,
    pub after_contradictions: usize,
    pub after_acyclic: usize,
    pub after_reduction: usize,
}

/// Run the selected cleanup stages: deduplicate, prune direct
/// contradictions, keep a maximal acyclic subset, and take the transitive
/// reduction.
pub fn process_with(
    comparisons: &[Comparison],
    opts: ProcessOptions,
) -> Result<(Vec<Comparison>, ProcessReport)> {
    let mut report = ProcessReport {
        input: comparisons.len(),
        ..Default::default()
    };
    let mut current = dedup(comparisons)?;
    report.deduplicated = current.len();
    if opts.prune_contradictions {
        current = prune_direct_contradictions(&current);
    }
    report.after_contradictions = current.len();
    let mut graph = PairGraph::from_comparisons(&current)?;
    if let Some(seed) = opts.max_acyclic {
        graph = graph.max_acyclic_subgraph(seed);
    }
    report.after_acyclic = graph.edge_count();
    if opts.reduce {
        graph = graph.transitive_reduction()?;
    }
    report.after_reduction = graph.edge_count();
    Ok((graph.comparisons(), report))
}

/// Full cleanup pipeline; the output is a strict partial order in reduced form.
pub fn process_constraints(comparisons: &[Comparison], seed: u64) -> Result<Vec<Comparison>> {
    process_with(comparisons, ProcessOptions::full(seed)).map(|(c, _)| c)
}
