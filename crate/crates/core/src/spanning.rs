//! Wilson's algorithm, spanning-tree probabilities, the matrix-tree count,
//! and wired spanning forests on boxes in `Z^d`.

use std::collections::BTreeMap;

use petgraph::unionfind::UnionFind;
use rand::Rng as _;

use crate::chain::{Symmetry, Vertex, WeightedChain};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::walk::TransitionTable;

/// Undirected multigraph on `0..n`. Edges are stored once with `u <= v` and
/// an integer multiplicity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Multigraph {
    n: usize,
    edges: BTreeMap<(usize, usize), u32>,
}

impl Multigraph {
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Multigraph { n, edges: BTreeMap::new() };
        for &(u, v) in edges {
            g.add_edge(u, v, 1)?;
        }
        Ok(g)
    }

    pub fn add_edge(&mut self, u: usize, v: usize, count: u32) -> Result<()> {
        if u >= self.n || v >= self.n {
            return Err(Error::InvalidInput(format!("edge ({u},{v}) outside 0..{}", self.n)));
        }
        *self.edges.entry((u.min(v), u.max(v))).or_insert(0) += count;
        Ok(())
    }

    pub fn complete(n: usize) -> Self {
        let e: Vec<_> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
        Multigraph::new(n, &e).expect("valid complete graph")
    }

    pub fn n_vertices(&self) -> usize {
        self.n
    }

    /// Distinct undirected edges with multiplicities, self-edges included.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, u32)> + '_ {
        self.edges.iter().map(|(&(u, v), &m)| (u, v, m))
    }

    pub fn multiplicity(&self, u: usize, v: usize) -> u32 {
        self.edges.get(&(u.min(v), u.max(v))).copied().unwrap_or(0)
    }

    /// Number of non-loop edge ends at `v`.
    pub fn degree(&self, v: usize) -> u32 {
        self.edges().filter(|&(a, b, _)| a != b && (a == v || b == v)).map(|(_, _, m)| m).sum()
    }

    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        let mut uf = UnionFind::new(self.n);
        for (u, v, _) in self.edges() {
            uf.union(u, v);
        }
        (1..self.n).all(|v| uf.equiv(0, v))
    }

    /// Degree matrix minus adjacency; self-edges do not contribute.
    pub fn laplacian(&self) -> Matrix<f64> {
        let mut l = Matrix::zeros(self.n, self.n);
        for (u, v, m) in self.edges() {
            if u != v {
                let m = m as f64;
                l[(u, v)] -= m;
                l[(v, u)] -= m;
                l[(u, u)] += m;
                l[(v, v)] += m;
            }
        }
        l
    }
}

/// How a graph is turned into a random walk.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WalkType {
    /// `p(x, y) = (multiplicity) / d_x`.
    One,
    /// `p(x, y) = (multiplicity) / n` with holding `1 - d_x / n`, so that
    /// `n (I - P)` is the graph Laplacian.
    Two { n: u32 },
}

impl WalkType {
    /// Type II with `n` equal to the largest degree.
    pub fn two_for(graph: &Multigraph) -> Self {
        WalkType::Two { n: (0..graph.n).map(|v| graph.degree(v)).max().unwrap_or(1).max(1) }
    }
}

/// Random walk on `graph` killed at `root`. Chain vertex `i` is graph vertex
/// `order[i]`; the root is the only boundary vertex.
pub fn walk_chain(graph: &Multigraph, root: usize, walk: WalkType) -> Result<(WeightedChain<f64>, Vec<usize>)> {
    if root >= graph.n || graph.n < 2 {
        return Err(Error::InvalidInput("root outside the graph or graph too small".into()));
    }
    let order: Vec<usize> = (0..graph.n).filter(|&v| v != root).chain([root]).collect();
    let mut pos = vec![0; graph.n];
    for (i, &v) in order.iter().enumerate() {
        pos[v] = i;
    }
    let mut edges = Vec::new();
    for &x in &order[..graph.n - 1] {
        let d = graph.degree(x);
        if d == 0 {
            return Err(Error::Irreducible(x.to_string()));
        }
        let norm = match walk {
            WalkType::One => d as f64,
            WalkType::Two { n } => {
                if n < d {
                    return Err(Error::InvalidInput(format!("type II constant {n} below degree {d}")));
                }
                if n > d {
                    edges.push((pos[x], pos[x], 1.0 - d as f64 / n as f64));
                }
                n as f64
            }
        };
        for y in 0..graph.n {
            let m = graph.multiplicity(x, y);
            if y != x && m > 0 {
                edges.push((pos[x], pos[y], m as f64 / norm));
            }
        }
    }
    let chain = WeightedChain::new(
        order[..graph.n - 1].iter().map(|v| v.to_string()).collect(),
        vec![root.to_string()],
        edges,
        Symmetry::General,
    )?;
    Ok((chain, order))
}

/// Spanning tree of the closure of `A` oriented towards the boundary: every
/// interior vertex has exactly one parent.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SpanningTree {
    parent: Vec<Vertex>,
}

impl SpanningTree {
    pub fn from_parents(parent: Vec<Vertex>) -> Self {
        SpanningTree { parent }
    }

    /// Parent of each interior vertex, indexed by vertex.
    pub fn parents(&self) -> &[Vertex] {
        &self.parent
    }

    /// Directed edges `x → parent(x)`.
    pub fn edges(&self) -> impl Iterator<Item = (Vertex, Vertex)> + '_ {
        self.parent.iter().enumerate().map(|(x, &p)| (x, p))
    }

    /// Checks the tree invariants against `chain`: one parent per interior
    /// vertex along a nonzero edge, and every vertex reaches the boundary.
    pub fn is_valid<S: Scalar>(&self, chain: &WeightedChain<S>) -> bool {
        let n = chain.n_interior();
        if self.parent.len() != n {
            return false;
        }
        for (x, &p) in self.parent.iter().enumerate() {
            if p == x || chain.weight(x, p).is_none_or(|w| w.is_zero()) {
                return false;
            }
        }
        (0..n).all(|x| {
            let mut v = x;
            for _ in 0..=n {
                if chain.is_boundary(v) {
                    return true;
                }
                v = self.parent[v];
            }
            false
        })
    }

    /// `p(T) = ∏ p(x, parent(x))`.
    pub fn weight<S: Scalar>(&self, chain: &WeightedChain<S>) -> S {
        let mut w = S::one();
        for (x, p) in self.edges() {
            w *= chain.q(x, p);
        }
        w
    }
}

fn check_irreducible<S: Scalar>(chain: &WeightedChain<S>) -> Result<()> {
    match chain.unreachable_from_boundary() {
        Some(v) => Err(Error::Irreducible(chain.label(v).to_string())),
        None => Ok(()),
    }
}

/// Wilson's algorithm: for each vertex of `ordering` not yet in the tree,
/// attach the loop-erased walk from it to the current tree. The boundary
/// starts as the tree, so several boundary vertices act as one wired root.
pub fn wilson<S: Scalar>(chain: &WeightedChain<S>, ordering: &[Vertex], rng: &mut Rng) -> Result<SpanningTree> {
    check_irreducible(chain)?;
    let table = TransitionTable::markov(chain)?;
    let n = chain.n_interior();
    let mut seen = vec![false; n];
    for &v in ordering {
        if v >= n || std::mem::replace(&mut seen[v], true) {
            return Err(Error::InvalidInput("ordering must list every interior vertex once".into()));
        }
    }
    if ordering.len() != n {
        return Err(Error::InvalidInput("ordering must list every interior vertex once".into()));
    }
    let mut in_tree: Vec<bool> = (0..chain.n_vertices()).map(|v| chain.is_boundary(v)).collect();
    let mut next = vec![usize::MAX; chain.n_vertices()];
    for &u in ordering {
        // Overwriting next[] on revisits is chronological loop erasure.
        let mut v = u;
        while !in_tree[v] {
            next[v] = table.step(v, rng).expect("Markov chains are never killed");
            v = next[v];
        }
        let mut v = u;
        while !in_tree[v] {
            in_tree[v] = true;
            v = next[v];
        }
    }
    Ok(SpanningTree { parent: next[..n].to_vec() })
}

/// Wilson's algorithm with the default ordering `0, 1, …`.
pub fn wilson_default<S: Scalar>(chain: &WeightedChain<S>, rng: &mut Rng) -> Result<SpanningTree> {
    let order: Vec<Vertex> = chain.interior().collect();
    wilson(chain, &order, rng)
}

/// `P(T) = p(T) F(A)`.
pub fn tree_probability<S: Scalar>(chain: &WeightedChain<S>, tree: &SpanningTree) -> Result<S> {
    Ok(tree.weight(chain) * chain.f_total()?)
}

/// Every spanning tree of the closure of `A` using edges of nonzero weight.
pub fn enumerate_spanning_trees<S: Scalar>(chain: &WeightedChain<S>) -> Result<Vec<SpanningTree>> {
    let n = chain.n_interior();
    let choices: Vec<Vec<Vertex>> = (0..n)
        .map(|x| chain.out_edges(x).iter().filter(|(v, w)| *v != x && !w.is_zero()).map(|(v, _)| *v).collect())
        .collect();
    let total: f64 = choices.iter().map(|c| c.len() as f64).product();
    if total > 1e7 {
        return Err(Error::Size(format!("{total:.0} parent assignments to check")));
    }
    let mut out = Vec::new();
    let mut parent = vec![0; n];
    fn rec<S: Scalar>(i: usize, choices: &[Vec<Vertex>], parent: &mut Vec<Vertex>, chain: &WeightedChain<S>, out: &mut Vec<SpanningTree>) {
        if i == choices.len() {
            let t = SpanningTree { parent: parent.clone() };
            if t.is_valid(chain) {
                out.push(t);
            }
            return;
        }
        for &p in &choices[i] {
            parent[i] = p;
            rec(i + 1, choices, parent, chain, out);
        }
    }
    rec(0, &choices, &mut parent, chain, &mut out);
    Ok(out)
}

/// Number of spanning trees from the determinant of the Laplacian with one
/// row and column deleted. The floating determinant carries a Hadamard-type
/// error bound; the result is refused unless rounding is unambiguous.
pub fn matrix_tree_count(graph: &Multigraph) -> Result<u128> {
    let n = graph.n_vertices();
    if n <= 1 {
        return Ok(1);
    }
    let keep: Vec<usize> = (0..n - 1).collect();
    let reduced = graph.laplacian().submatrix(&keep, &keep);
    let det = reduced.det();
    let hadamard: f64 = (0..n - 1).map(|i| reduced.row(i).iter().map(|x| x * x).sum::<f64>().sqrt()).product();
    let m = (n - 1) as f64;
    let bound = 4.0 * m * m * m * f64::EPSILON * hadamard.max(1.0);
    let rounded = det.round();
    if bound + (det - rounded).abs() >= 0.5 || rounded < 0.0 || !det.is_finite() {
        return Err(Error::Precision(format!("determinant {det} with error bound {bound:e}")));
    }
    Ok(rounded as u128)
}

/// Number of spanning trees by checking every `(n-1)`-subset of distinct
/// edges for acyclicity; parallel edges multiply the count.
pub fn brute_force_tree_count(graph: &Multigraph) -> u128 {
    let n = graph.n_vertices();
    if n <= 1 {
        return 1;
    }
    let edges: Vec<(usize, usize, u32)> = graph.edges().filter(|(u, v, _)| u != v).collect();
    let mut count = 0u128;
    let mut chosen = Vec::with_capacity(n - 1);
    fn rec(start: usize, need: usize, edges: &[(usize, usize, u32)], chosen: &mut Vec<usize>, n: usize, count: &mut u128) {
        if need == 0 {
            let mut uf = UnionFind::new(n);
            let mut mult = 1u128;
            for &i in chosen.iter() {
                let (u, v, m) = edges[i];
                if !uf.union(u, v) {
                    return;
                }
                mult *= m as u128;
            }
            *count += mult;
            return;
        }
        for i in start..edges.len() {
            if edges.len() - i < need {
                break;
            }
            chosen.push(i);
            rec(i + 1, need - 1, edges, chosen, n, count);
            chosen.pop();
        }
    }
    rec(0, n - 1, &edges, &mut chosen, n, &mut count);
    count
}

/// The box `{0, …, side-1}^d` with every outside neighbour collapsed into one
/// wired vertex. Edges to the wired vertex are kept with multiplicity.
#[derive(Clone, Debug)]
pub struct WiredBox {
    d: usize,
    side: usize,
    wired: Vec<u8>,
}

impl WiredBox {
    pub fn new(d: usize, side: usize) -> Result<Self> {
        if !(2..=5).contains(&d) || side == 0 {
            return Err(Error::InvalidInput(format!("box needs d in 2..=5 and side > 0, got d={d}, side={side}")));
        }
        let n = side.checked_pow(d as u32).filter(|&n| n <= 50_000_000).ok_or_else(|| Error::Size(format!("{side}^{d} vertices")))?;
        let mut b = WiredBox { d, side, wired: Vec::new() };
        b.wired = (0..n)
            .map(|x| {
                let mut c = 0;
                for axis in 0..d {
                    let k = b.coordinate(x, axis);
                    c += (k == 0) as u8 + (k + 1 == side) as u8;
                }
                c
            })
            .collect();
        Ok(b)
    }

    pub fn dimension(&self) -> usize {
        self.d
    }

    pub fn n_vertices(&self) -> usize {
        self.wired.len()
    }

    fn coordinate(&self, x: usize, axis: usize) -> usize {
        (x / self.side.pow(axis as u32)) % self.side
    }

    /// Multiplicity of the edge from `x` to the wired vertex.
    pub fn wired_multiplicity(&self, x: usize) -> u8 {
        self.wired[x]
    }

    /// Neighbour of `x` in direction `dir ∈ 0..2d`; `None` is the wired vertex.
    pub fn neighbour(&self, x: usize, dir: usize) -> Option<usize> {
        let axis = dir / 2;
        let stride = self.side.pow(axis as u32);
        let k = self.coordinate(x, axis);
        if dir.is_multiple_of(2) {
            (k + 1 < self.side).then(|| x + stride)
        } else {
            (k > 0).then(|| x - stride)
        }
    }
}

/// Undirected acyclic edge set on `0..n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpanningForest {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
}

impl SpanningForest {
    pub fn is_acyclic(&self) -> bool {
        let mut uf = UnionFind::new(self.n);
        self.edges.iter().all(|&(u, v)| uf.union(u, v))
    }
}

/// Uniform wired spanning tree of the box by Wilson's algorithm for the
/// type II walk with `n = 2d` (every direction equally likely), restricted to
/// edges inside the box.
pub fn wired_uniform_forest(bx: &WiredBox, rng: &mut Rng) -> SpanningForest {
    const WIRED: usize = usize::MAX;
    let n = bx.n_vertices();
    let dirs = 2 * bx.d;
    let mut in_tree = vec![false; n];
    let mut next = vec![WIRED; n];
    for u in 0..n {
        let mut v = u;
        while v != WIRED && !in_tree[v] {
            let w = bx.neighbour(v, rng.random_range(0..dirs)).unwrap_or(WIRED);
            next[v] = w;
            v = w;
        }
        let mut v = u;
        while v != WIRED && !in_tree[v] {
            in_tree[v] = true;
            v = next[v];
        }
    }
    let edges = (0..n).filter(|&x| next[x] != WIRED).map(|x| (x, next[x])).collect();
    SpanningForest { n, edges }
}

/// Components of a forest and the histogram `size → count`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComponentStats {
    pub components: usize,
    pub sizes: BTreeMap<usize, usize>,
}

pub fn forest_component_stats(forest: &SpanningForest) -> ComponentStats {
    let mut uf = UnionFind::new(forest.n);
    for &(u, v) in &forest.edges {
        uf.union(u, v);
    }
    let mut per_root: BTreeMap<usize, usize> = BTreeMap::new();
    for v in 0..forest.n {
        *per_root.entry(uf.find(v)).or_insert(0) += 1;
    }
    let mut sizes = BTreeMap::new();
    for &s in per_root.values() {
        *sizes.entry(s).or_insert(0) += 1;
    }
    ComponentStats { components: per_root.len(), sizes }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_stream;

    #[test]
    fn complete_graph_counts() {
        for n in 2..=7usize {
            let g = Multigraph::complete(n);
            let expect = (n as u128).pow(n as u32 - 2);
            assert_eq!(matrix_tree_count(&g).unwrap(), expect);
            assert_eq!(brute_force_tree_count(&g), expect);
        }
        let path = Multigraph::new(3, &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(matrix_tree_count(&path).unwrap(), 1);
    }

    #[test]
    fn multigraph_counts_parallel_edges() {
        let g = Multigraph::new(3, &[(0, 1), (0, 1), (1, 2), (0, 2), (2, 2)]).unwrap();
        // trees: {01,12} x2, {01,02} x2, {12,02} x1
        assert_eq!(brute_force_tree_count(&g), 5);
        assert_eq!(matrix_tree_count(&g).unwrap(), 5);
    }

    #[test]
    fn tree_probabilities_sum_to_one() {
        let g = Multigraph::new(4, &[(0, 1), (1, 2), (2, 3), (3, 0), (0, 2), (0, 2)]).unwrap();
        for walk in [WalkType::One, WalkType::two_for(&g)] {
            let (c, _) = walk_chain(&g, 3, walk).unwrap();
            let trees = enumerate_spanning_trees(&c).unwrap();
            let total: f64 = trees.iter().map(|t| tree_probability(&c, t).unwrap()).sum();
            assert!((total - 1.0).abs() < 1e-12);
            let det = c.det_i_minus_q_on(&c.interior().collect::<Vec<_>>());
            let weights: f64 = trees.iter().map(|t| t.weight(&c)).sum();
            assert!((weights - det).abs() < 1e-12);
        }
    }

    #[test]
    fn type_two_k4_is_uniform() {
        let g = Multigraph::complete(4);
        let (c, _) = walk_chain(&g, 3, WalkType::Two { n: 4 }).unwrap();
        let trees = enumerate_spanning_trees(&c).unwrap();
        assert_eq!(trees.len(), 16);
        for t in &trees {
            assert!((tree_probability(&c, t).unwrap() - 1.0 / 16.0).abs() < 1e-12);
        }
    }

    #[test]
    fn wilson_outputs_valid_trees() {
        let c = crate::builders::grid_srw(4, 3);
        let mut rng = derive_stream(2, 0);
        for _ in 0..200 {
            assert!(wilson_default(&c, &mut rng).unwrap().is_valid(&c));
        }
        let bad = [0usize, 0, 1];
        assert!(wilson(&c, &bad, &mut rng).is_err());
    }

    #[test]
    fn unreachable_vertex_is_reported() {
        let c = WeightedChain::<f64>::from_labels(&["a", "b"], &["r"], &[("a", "a", 1.0), ("b", "r", 1.0)], Symmetry::General).unwrap();
        let mut rng = derive_stream(2, 0);
        assert!(matches!(wilson_default(&c, &mut rng), Err(Error::Irreducible(_))));
    }

    #[test]
    fn wired_box_basics() {
        let single = WiredBox::new(2, 1).unwrap();
        let mut rng = derive_stream(1, 0);
        let f = wired_uniform_forest(&single, &mut rng);
        assert!(f.edges.is_empty());
        assert_eq!(single.wired_multiplicity(0), 4);
        let bx = WiredBox::new(2, 16).unwrap();
        for _ in 0..20 {
            let f = wired_uniform_forest(&bx, &mut rng);
            assert!(f.is_acyclic());
            // each component touches the wired vertex
            let mut uf = UnionFind::new(f.n);
            for &(u, v) in &f.edges {
                uf.union(u, v);
            }
            let stats = forest_component_stats(&f);
            let touching: std::collections::BTreeSet<usize> =
                (0..f.n).filter(|&x| bx.wired_multiplicity(x) > 0).map(|x| uf.find(x)).collect();
            assert_eq!(touching.len(), stats.components);
        }
    }

    #[test]
    fn component_stats_trivial_cases() {
        let empty = SpanningForest { n: 5, edges: vec![] };
        let s = forest_component_stats(&empty);
        assert_eq!(s.components, 5);
        assert_eq!(s.sizes[&1], 5);
        let path = SpanningForest { n: 4, edges: vec![(0, 1), (1, 2), (2, 3)] };
        assert_eq!(forest_component_stats(&path).components, 1);
    }
}
