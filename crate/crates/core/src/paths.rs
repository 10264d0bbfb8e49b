//! Paths, self-avoiding walks and loops; chronological loop erasure; rooted
//! and unrooted loop measures with truncated-enumeration oracles.

use std::collections::HashMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::chain::{Vertex, WeightedChain};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// A walk `[ω_0, …, ω_n]`; `n` is its length.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Path(pub Vec<Vertex>);

/// A walk visiting each vertex at most once.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Saw(Vec<Vertex>);

/// A closed walk `[l_0, …, l_n]` with `l_0 = l_n`; `[x]` is the trivial loop.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RootedLoop(Vec<Vertex>);

/// Equivalence class of a nontrivial rooted loop under rotation.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UnrootedLoop {
    /// Lexicographically least rotation of the cyclic vertex sequence
    /// (the closing repeat is dropped).
    canonical: Vec<Vertex>,
    /// Number of distinct rotations `s_ℓ`.
    rotations: usize,
}

impl Path {
    pub fn new(vertices: Vec<Vertex>) -> Self {
        assert!(!vertices.is_empty(), "a path has at least one vertex");
        Path(vertices)
    }

    pub fn len(&self) -> usize {
        self.0.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.0
    }

    pub fn start(&self) -> Vertex {
        self.0[0]
    }

    pub fn end(&self) -> Vertex {
        *self.0.last().unwrap()
    }

    pub fn reversed(&self) -> Path {
        Path(self.0.iter().rev().copied().collect())
    }

    /// `self ⊕ other`; the end of `self` must be the start of `other`.
    pub fn concat(&self, other: &Path) -> Path {
        assert_eq!(self.end(), other.start(), "concatenation endpoints differ");
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0[1..]);
        Path(v)
    }

    pub fn weight<S: Scalar>(&self, chain: &WeightedChain<S>) -> S {
        chain.path_weight(&self.0)
    }

    pub fn is_self_avoiding(&self) -> bool {
        let mut seen = std::collections::HashSet::with_capacity(self.0.len());
        self.0.iter().all(|v| seen.insert(*v))
    }
}

impl Saw {
    pub fn new(vertices: Vec<Vertex>) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::InvalidInput("empty walk".into()));
        }
        if !Path(vertices.clone()).is_self_avoiding() {
            return Err(Error::InvalidInput(format!("walk {vertices:?} is not self-avoiding")));
        }
        Ok(Saw(vertices))
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn end(&self) -> Vertex {
        *self.0.last().unwrap()
    }

    pub fn as_path(&self) -> Path {
        Path(self.0.clone())
    }

    pub fn into_vec(self) -> Vec<Vertex> {
        self.0
    }
}

impl RootedLoop {
    pub fn new(vertices: Vec<Vertex>) -> Result<Self> {
        match (vertices.first(), vertices.last()) {
            (Some(a), Some(b)) if a == b => Ok(RootedLoop(vertices)),
            _ => Err(Error::InvalidInput(format!("{vertices:?} is not a closed walk"))),
        }
    }

    pub fn trivial(x: Vertex) -> Self {
        RootedLoop(vec![x])
    }

    pub fn root(&self) -> Vertex {
        self.0[0]
    }

    pub fn len(&self) -> usize {
        self.0.len() - 1
    }

    pub fn is_trivial(&self) -> bool {
        self.0.len() == 1
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.0
    }

    pub fn as_path(&self) -> Path {
        Path(self.0.clone())
    }

    /// Number of returns to the root, i.e. the count of elementary loops.
    pub fn returns(&self) -> usize {
        self.0[1..].iter().filter(|&&v| v == self.0[0]).count()
    }

    /// Splits into elementary loops (each returns to the root exactly once).
    pub fn elementary_parts(&self) -> Vec<RootedLoop> {
        let mut parts = Vec::new();
        let mut start = 0;
        for (i, &v) in self.0.iter().enumerate().skip(1) {
            if v == self.0[0] {
                parts.push(RootedLoop(self.0[start..=i].to_vec()));
                start = i;
            }
        }
        parts
    }

    /// `self ⊕ other` for loops with the same root.
    pub fn concat(&self, other: &RootedLoop) -> RootedLoop {
        assert_eq!(self.root(), other.root());
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0[1..]);
        RootedLoop(v)
    }
}

impl UnrootedLoop {
    pub fn from_rooted(l: &RootedLoop) -> Result<Self> {
        if l.is_trivial() {
            return Err(Error::InvalidInput("trivial loops have no unrooted class".into()));
        }
        Ok(Self::from_cycle(&l.0[..l.0.len() - 1]))
    }

    /// From the cyclic sequence `[v_0, …, v_{n-1}]` (no closing repeat).
    pub fn from_cycle(cycle: &[Vertex]) -> Self {
        let n = cycle.len();
        assert!(n > 0);
        let mut best = 0;
        for r in 1..n {
            let better = (0..n)
                .map(|i| (cycle[(r + i) % n], cycle[(best + i) % n]))
                .find(|(a, b)| a != b)
                .is_some_and(|(a, b)| a < b);
            if better {
                best = r;
            }
        }
        let canonical: Vec<Vertex> = (0..n).map(|i| cycle[(best + i) % n]).collect();
        let rotations = (1..=n)
            .find(|&p| n.is_multiple_of(p) && (0..n).all(|i| canonical[i] == canonical[(i + p) % n]))
            .unwrap_or(n);
        UnrootedLoop { canonical, rotations }
    }

    pub fn len(&self) -> usize {
        self.canonical.len()
    }

    pub fn is_empty(&self) -> bool {
        self.canonical.is_empty()
    }

    /// `s_ℓ`.
    pub fn rotations(&self) -> usize {
        self.rotations
    }

    pub fn canonical(&self) -> &[Vertex] {
        &self.canonical
    }

    /// The canonical representative as a rooted loop.
    pub fn representative(&self) -> RootedLoop {
        let mut v = self.canonical.clone();
        v.push(v[0]);
        RootedLoop(v)
    }

    /// All distinct rooted representatives.
    pub fn representatives(&self) -> Vec<RootedLoop> {
        let n = self.len();
        (0..self.rotations)
            .map(|r| {
                let mut v: Vec<Vertex> = (0..n).map(|i| self.canonical[(r + i) % n]).collect();
                v.push(v[0]);
                RootedLoop(v)
            })
            .collect()
    }

    pub fn visits(&self, x: Vertex) -> bool {
        self.canonical.contains(&x)
    }
}

/// Chronological loop erasure: `j_0` is the last visit to `ω_0` and
/// `j_{i+1}` the last visit to `ω_{j_i + 1}`.
pub fn loop_erase(path: &[Vertex]) -> Saw {
    assert!(!path.is_empty(), "loop erasure of an empty walk");
    let last = last_visits(path);
    let mut out = Vec::new();
    let mut j = last[&path[0]];
    out.push(path[0]);
    while j + 1 < path.len() {
        let v = path[j + 1];
        out.push(v);
        j = last[&v];
    }
    Saw(out)
}

fn last_visits(path: &[Vertex]) -> HashMap<Vertex, usize> {
    let mut last = HashMap::with_capacity(path.len());
    for (i, v) in path.iter().enumerate() {
        last.insert(*v, i);
    }
    last
}

/// Splits `path` as `l⁰ ⊕ [η_0, η_1] ⊕ l¹ ⊕ … ⊕ lᵐ`, returning the loops.
pub fn decompose_by_saw(path: &[Vertex], eta: &Saw) -> Result<Vec<RootedLoop>> {
    if loop_erase(path) != *eta {
        return Err(Error::Mismatch);
    }
    let last = last_visits(path);
    let mut loops = Vec::with_capacity(eta.0.len());
    let mut start = 0;
    for &v in &eta.0 {
        let j = last[&v];
        loops.push(RootedLoop(path[start..=j].to_vec()));
        start = j + 1;
    }
    Ok(loops)
}

/// Inverse of [`decompose_by_saw`].
pub fn recompose(eta: &Saw, loops: &[RootedLoop]) -> Result<Path> {
    if loops.len() != eta.0.len() || loops.iter().zip(&eta.0).any(|(l, v)| l.root() != *v) {
        return Err(Error::InvalidInput("loops do not match the walk".into()));
    }
    let mut v = Vec::new();
    for l in loops {
        v.extend_from_slice(&l.0);
    }
    Ok(Path(v))
}

/// `m̃(l) = q(l) / |l|`.
pub fn rooted_loop_mass<S: Scalar>(chain: &WeightedChain<S>, l: &RootedLoop) -> Result<S> {
    if l.is_trivial() {
        return Err(Error::InvalidInput("the rooted loop measure lives on nontrivial loops".into()));
    }
    Ok(chain.path_weight(&l.0) / S::from_f64(l.len() as f64))
}

/// `m(ℓ) = s_ℓ q(ℓ) / |ℓ|`.
pub fn unrooted_mass<S: Scalar>(chain: &WeightedChain<S>, ell: &UnrootedLoop) -> S {
    chain.path_weight(&ell.representative().0) * S::from_f64(ell.rotations as f64) / S::from_f64(ell.len() as f64)
}

/// Depth-first enumeration of nontrivial loops rooted at `x` inside `subset`
/// with at most `max_len` steps; branches whose weight modulus drops below
/// `prune` are cut.
pub fn enumerate_rooted_loops<S: Scalar>(
    chain: &WeightedChain<S>,
    subset: &[Vertex],
    x: Vertex,
    max_len: usize,
    prune: f64,
) -> Vec<RootedLoop> {
    let mut allowed = vec![false; chain.n_vertices()];
    for &v in subset {
        allowed[v] = true;
    }
    let mut out = Vec::new();
    let mut path = vec![x];
    fn dfs<S: Scalar>(
        chain: &WeightedChain<S>,
        allowed: &[bool],
        path: &mut Vec<Vertex>,
        w: S,
        max_len: usize,
        prune: f64,
        out: &mut Vec<RootedLoop>,
    ) {
        if path.len() > max_len {
            return;
        }
        let v = *path.last().unwrap();
        for (u, q) in chain.out_edges(v) {
            if !allowed[*u] {
                continue;
            }
            let nw = w.clone() * q.clone();
            if nw.modulus() < prune {
                continue;
            }
            path.push(*u);
            if *u == path[0] {
                out.push(RootedLoop(path.clone()));
            }
            dfs(chain, allowed, path, nw, max_len, prune, out);
            path.pop();
        }
    }
    if allowed.get(x).copied().unwrap_or(false) {
        dfs(chain, &allowed, &mut path, S::one(), max_len, prune, &mut out);
    }
    out
}

/// Truncated loop mass with a certified tail bound.
#[derive(Clone, Debug)]
pub struct TruncatedMass<S> {
    pub value: S,
    /// Upper bound on the modulus of the omitted terms.
    pub tail_bound: f64,
}

/// `Σ_{n ≤ max_len} n⁻¹ Σ q(l)` over rooted loops `l` of length `n` inside
/// `subset` whose label is accepted.
///
/// Labels form a finite automaton read along the loop: `start(x)` labels the
/// root and `step(label, u, v)` updates it on each edge. Summing `m̃` over all
/// rooted representatives gives the unrooted loop measure of the accepted set.
#[allow(clippy::too_many_arguments)]
pub fn labelled_loop_mass<S: Scalar>(
    chain: &WeightedChain<S>,
    subset: &[Vertex],
    max_len: usize,
    n_labels: usize,
    start: impl Fn(Vertex) -> usize,
    step: impl Fn(usize, Vertex, Vertex) -> usize,
    accept: impl Fn(Vertex, usize) -> bool,
) -> S {
    let n = chain.n_vertices();
    let mut pos = vec![usize::MAX; n];
    for (i, &v) in subset.iter().enumerate() {
        pos[v] = i;
    }
    let m = subset.len();
    let mut total = S::zero();
    for &x in subset {
        let mut cur = vec![S::zero(); m * n_labels];
        cur[pos[x] * n_labels + start(x)] = S::one();
        for len in 1..=max_len {
            let mut next = vec![S::zero(); m * n_labels];
            for (i, &v) in subset.iter().enumerate() {
                for lab in 0..n_labels {
                    let w = &cur[i * n_labels + lab];
                    if w.is_zero() {
                        continue;
                    }
                    for (u, q) in chain.out_edges(v) {
                        let j = pos[*u];
                        if j == usize::MAX {
                            continue;
                        }
                        let nl = step(lab, v, *u);
                        next[j * n_labels + nl] += w.clone() * q.clone();
                    }
                }
            }
            let mut at_root = S::zero();
            for lab in 0..n_labels {
                if accept(x, lab) {
                    at_root += next[pos[x] * n_labels + lab].clone();
                }
            }
            total += at_root / S::from_f64(len as f64);
            cur = next;
        }
    }
    total
}

/// Certified bound on `Σ_{n > max_len} n⁻¹ tr(|Q_S|ⁿ)` from the absolute
/// Green's function: the omitted trace mass equals `tr|G| - Σ_{n ≤ L} tr|Q|ⁿ`.
pub fn loop_tail_bound<S: Scalar>(chain: &WeightedChain<S>, subset: &[Vertex], max_len: usize) -> f64 {
    let a = chain.abs_chain().matrix_on(subset);
    let g = match a.identity_minus().inverse() {
        Ok(g) => g,
        Err(_) => return f64::INFINITY,
    };
    let trace_g: f64 = (0..a.rows()).map(|i| g[(i, i)]).sum();
    if !trace_g.is_finite() || trace_g < 0.0 {
        return f64::INFINITY;
    }
    let mut p = Matrix::<f64>::identity(a.rows());
    let mut partial = a.rows() as f64;
    for _ in 0..max_len {
        p = p.mul(&a);
        partial += (0..a.rows()).map(|i| p[(i, i)]).sum::<f64>();
    }
    let rem = (trace_g - partial).max(0.0) + 1e-14 * trace_g;
    rem / (max_len + 1) as f64
}

/// Three evaluations of `m[𝓛(A; x)]`, the unrooted mass of loops through `x`.
#[derive(Clone, Debug)]
pub struct VertexLoopMass<S> {
    /// `log G(x, x)`.
    pub exact: Complex64,
    /// `Σ_{k ≤ max_len} f_x^k / k`.
    pub series: S,
    /// Loops rooted at `x` of length `≤ max_len`, weighted by `q(l)/(number of returns)`.
    pub enumerated: S,
    /// Bound on the modulus of the enumeration's omitted terms.
    pub tail_bound: f64,
}

pub fn loop_mass_at_vertex<S: Scalar>(chain: &WeightedChain<S>, x: Vertex, max_len: usize) -> Result<VertexLoopMass<S>> {
    let class = chain.classify();
    if !class.is_integrable() {
        return Err(Error::Refused("loop masses need an integrable weight".into()));
    }
    if !chain.is_interior(x) {
        return Err(Error::InvalidInput(format!("{} is not interior", chain.label(x))));
    }
    let all: Vec<Vertex> = chain.interior().collect();
    let green = chain.green_on(&all)?;
    let f = chain.first_return_mass(&green, x)?;
    let mut series = S::zero();
    let mut fk = S::one();
    for k in 1..=max_len {
        fk *= f.clone();
        series += fk.clone() / S::from_f64(k as f64);
    }

    // paths from x indexed by (vertex, returns so far)
    let n = chain.n_interior();
    let width = max_len + 1;
    let mut cur = vec![S::zero(); n * width];
    cur[x * width] = S::one();
    let mut enumerated = S::zero();
    for _ in 0..max_len {
        let mut next = vec![S::zero(); n * width];
        for v in 0..n {
            for k in 0..max_len {
                let w = &cur[v * width + k];
                if w.is_zero() {
                    continue;
                }
                for (u, q) in chain.out_edges(v) {
                    if !chain.is_interior(*u) {
                        continue;
                    }
                    let nw = w.clone() * q.clone();
                    if *u == x {
                        enumerated += nw.clone() / S::from_f64((k + 1) as f64);
                        next[x * width + k + 1] += nw;
                    } else {
                        next[*u * width + k] += nw;
                    }
                }
            }
        }
        cur = next;
    }

    let abs = chain.abs_chain();
    let ag = abs.green_on(&all)?;
    let mut p = vec![0.0; n];
    p[x] = 1.0;
    let mut partial = 1.0;
    for _ in 0..max_len {
        let mut np = vec![0.0; n];
        for v in 0..n {
            if p[v] == 0.0 {
                continue;
            }
            for (u, q) in abs.out_edges(v) {
                if abs.is_interior(*u) {
                    np[*u] += p[v] * q;
                }
            }
        }
        partial += np[x];
        p = np;
    }
    let gxx = ag.entry(x, x);
    let tail_bound = (gxx - partial).max(0.0) + 1e-14 * gxx;
    Ok(VertexLoopMass { exact: green.entry(x, x).to_complex().ln(), series, enumerated, tail_bound })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::Symmetry;

    #[test]
    fn erasure_examples() {
        assert_eq!(loop_erase(&[7]).vertices(), &[7]);
        assert_eq!(loop_erase(&[0, 1, 0, 2]).vertices(), &[0, 2]);
        assert_eq!(loop_erase(&[0, 1, 2, 1, 3, 0, 4]).vertices(), &[0, 4]);
        assert_eq!(loop_erase(&[0, 1, 2, 3, 1, 4]).vertices(), &[0, 1, 4]);
    }

    #[test]
    fn reversal_does_not_commute_with_erasure() {
        // Scan every walk of length ≤ 5 on a triangle.
        let mut found = false;
        let mut stack = vec![vec![0usize], vec![1], vec![2]];
        while let Some(w) = stack.pop() {
            let fwd: Vec<Vertex> = loop_erase(&w).vertices().iter().rev().copied().collect();
            let rev_walk: Vec<Vertex> = w.iter().rev().copied().collect();
            if loop_erase(&rev_walk).vertices() != fwd.as_slice() {
                found = true;
                break;
            }
            if w.len() <= 5 {
                for v in 0..3 {
                    if v != *w.last().unwrap() {
                        let mut n = w.clone();
                        n.push(v);
                        stack.push(n);
                    }
                }
            }
        }
        assert!(found);
    }

    #[test]
    fn decomposition_examples() {
        let eta = Saw::new(vec![0, 2]).unwrap();
        let loops = decompose_by_saw(&[0, 1, 0, 2], &eta).unwrap();
        assert_eq!(loops, vec![RootedLoop(vec![0, 1, 0]), RootedLoop(vec![2])]);
        let straight = Saw::new(vec![3, 4, 5]).unwrap();
        let loops = decompose_by_saw(&[3, 4, 5], &straight).unwrap();
        assert!(loops.iter().all(RootedLoop::is_trivial));
        assert_eq!(decompose_by_saw(&[0, 1], &eta), Err(Error::Mismatch));
    }

    #[test]
    fn unrooted_canonical_and_rotations() {
        let l = RootedLoop::new(vec![1, 0, 1, 0, 1]).unwrap();
        let u = UnrootedLoop::from_rooted(&l).unwrap();
        assert_eq!(u.canonical(), &[0, 1, 0, 1]);
        assert_eq!(u.rotations(), 2);
        let tri = UnrootedLoop::from_cycle(&[2, 0, 1]);
        assert_eq!(tri.canonical(), &[0, 1, 2]);
        assert_eq!(tri.rotations(), 3);
        assert_eq!(tri.representatives().len(), 3);
        assert!(UnrootedLoop::from_rooted(&RootedLoop::trivial(0)).is_err());
    }

    #[test]
    fn loop_masses_by_formula() {
        let c = WeightedChain::<f64>::from_labels(&["x", "y"], &[], &[("x", "y", 0.5), ("x", "x", 0.3)], Symmetry::Symmetric).unwrap();
        let self_loop = RootedLoop::new(vec![0, 0]).unwrap();
        assert!((rooted_loop_mass(&c, &self_loop).unwrap() - 0.3).abs() < 1e-15);
        let back = RootedLoop::new(vec![0, 1, 0]).unwrap();
        assert!((rooted_loop_mass(&c, &back).unwrap() - 0.125).abs() < 1e-15);
        assert!(rooted_loop_mass(&c, &RootedLoop::trivial(0)).is_err());
        let u = UnrootedLoop::from_rooted(&RootedLoop::new(vec![0, 1, 0, 1, 0]).unwrap()).unwrap();
        assert!((unrooted_mass(&c, &u) - 2.0 * 0.0625 / 4.0).abs() < 1e-15);
    }

    #[test]
    fn two_point_vertex_mass_is_log_four_thirds() {
        let c = WeightedChain::<f64>::from_labels(&["x", "y"], &[], &[("x", "y", 0.5)], Symmetry::Symmetric).unwrap();
        let m = loop_mass_at_vertex(&c, 0, 40).unwrap();
        let target = (4.0f64 / 3.0).ln();
        assert!((m.exact.re - target).abs() < 1e-14);
        assert!((m.series - target).abs() < 1e-12);
        assert!((m.enumerated - target).abs() <= m.tail_bound + 1e-14);
    }

    #[test]
    fn zero_return_mass_gives_zero() {
        let c = WeightedChain::<f64>::from_labels(&["x"], &["z"], &[("x", "z", 1.0)], Symmetry::General).unwrap();
        let m = loop_mass_at_vertex(&c, 0, 10).unwrap();
        assert_eq!(m.series, 0.0);
        assert_eq!(m.enumerated, 0.0);
    }
}
