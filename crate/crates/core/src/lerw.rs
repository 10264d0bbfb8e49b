//! Loop-erased random walk: samplers, the exact law on finite sets, the
//! Laplacian-walk transition, and the law of the erased loops.

use std::collections::HashMap;

use crate::chain::{Vertex, WeightedChain};
use crate::error::{Error, Result};
use crate::paths::{enumerate_rooted_loops, loop_erase, RootedLoop, Saw};
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::walk::TransitionTable;

/// Largest interior for which SAW enumeration is attempted.
pub const MAX_ENUM_INTERIOR: usize = 12;

/// `F_B(A)` for subsets `B` of the interior, memoized by bitmask.
///
/// Uses `F_B(A) = det(I - Q_{A∖B}) / det(I - Q_A)`.
pub struct FCache<'a, S> {
    chain: &'a WeightedChain<S>,
    det_a: S,
    memo: HashMap<u64, S>,
}

impl<'a, S: Scalar> FCache<'a, S> {
    pub fn new(chain: &'a WeightedChain<S>) -> Result<Self> {
        if chain.n_interior() > 63 {
            return Err(Error::Size(format!("{} interior vertices exceed the bitmask cache", chain.n_interior())));
        }
        let all: Vec<Vertex> = chain.interior().collect();
        let det_a = chain.det_i_minus_q_on(&all);
        if det_a.is_zero() {
            return Err(Error::NotGreen("I - Q is singular".into()));
        }
        Ok(FCache { chain, det_a, memo: HashMap::new() })
    }

    pub fn mask_of(&self, vertices: &[Vertex]) -> u64 {
        vertices.iter().filter(|&&v| self.chain.is_interior(v)).fold(0, |m, &v| m | (1u64 << v))
    }

    /// `F_B(A)` for `B` given as a bitmask over interior indices.
    pub fn f(&mut self, mask: u64) -> S {
        if let Some(v) = self.memo.get(&mask) {
            return v.clone();
        }
        let rest: Vec<Vertex> = self.chain.interior().filter(|&v| mask & (1u64 << v) == 0).collect();
        let v = self.chain.det_i_minus_q_on(&rest) / self.det_a.clone();
        self.memo.insert(mask, v.clone());
        v
    }

    pub fn f_of(&mut self, vertices: &[Vertex]) -> S {
        let m = self.mask_of(vertices);
        self.f(m)
    }
}

/// `φ_η` and the escape function `Es_η` on the closure of the interior.
#[derive(Clone, Debug)]
pub struct HarmonicSolution<S> {
    /// Zero on `η`, harmonic on `A ∖ η`, one on `∂A`.
    pub values: Vec<S>,
    /// `Δφ` on `η` and `φ` elsewhere.
    pub escape: Vec<S>,
}

/// Solves the boundary problem for `φ_η`. `eta` lists interior vertices.
pub fn harmonic_solution<S: Scalar>(chain: &WeightedChain<S>, eta: &[Vertex]) -> Result<HarmonicSolution<S>> {
    let n = chain.n_vertices();
    let mut on_eta = vec![false; n];
    for &v in eta {
        if !chain.is_interior(v) {
            return Err(Error::InvalidInput(format!("{} is not interior", chain.label(v))));
        }
        on_eta[v] = true;
    }
    let free: Vec<Vertex> = chain.interior().filter(|&v| !on_eta[v]).collect();
    let mut values = vec![S::zero(); n];
    for z in chain.boundary() {
        values[z] = S::one();
    }
    if !free.is_empty() {
        let rhs: Vec<S> = free
            .iter()
            .map(|&z| {
                let mut r = S::zero();
                for (w, q) in chain.out_edges(z) {
                    if chain.is_boundary(*w) {
                        r += q.clone();
                    }
                }
                r
            })
            .collect();
        let lu = chain.matrix_on(&free).identity_minus().lu();
        let phi = lu.solve(&rhs).map_err(|_| Error::NotGreen("I - Q singular off the walk".into()))?;
        for (v, p) in free.iter().zip(phi) {
            values[*v] = p;
        }
    }
    let escape = (0..n)
        .map(|y| {
            if on_eta[y] {
                let mut s = S::zero();
                for (w, q) in chain.out_edges(y) {
                    s += q.clone() * values[*w].clone();
                }
                s - values[y].clone()
            } else {
                values[y].clone()
            }
        })
        .collect();
    Ok(HarmonicSolution { values, escape })
}

/// Next-step law of the Laplacian walk after the partial walk `eta`:
/// `P(z) ∝ p(x_n, z) φ_η(z)`.
pub fn laplacian_step<S: Scalar>(chain: &WeightedChain<S>, eta: &[Vertex]) -> Result<Vec<(Vertex, f64)>> {
    let last = *eta.last().ok_or_else(|| Error::InvalidInput("empty partial walk".into()))?;
    let phi = harmonic_solution(chain, eta)?;
    let mut out = Vec::new();
    let mut total = 0.0;
    for (z, p) in chain.out_edges(last) {
        let w = p.to_complex().re * phi.values[*z].to_complex().re;
        if w > 0.0 {
            out.push((*z, w));
            total += w;
        }
    }
    if total <= 0.0 {
        return Err(Error::Trapped(last));
    }
    for e in &mut out {
        e.1 /= total;
    }
    Ok(out)
}

fn check_start<S: Scalar>(chain: &WeightedChain<S>, x: Vertex) -> Result<()> {
    if !chain.is_interior(x) {
        return Err(Error::InvalidInput(format!("start {} is not interior", chain.label(x))));
    }
    Ok(())
}

/// Runs the chain from `x` to the boundary and erases loops on the fly.
pub fn sample_lerw_with(table: &TransitionTable, chain_n: usize, x: Vertex, rng: &mut Rng, is_boundary: impl Fn(Vertex) -> bool) -> Saw {
    let mut path = vec![x];
    let mut pos: Vec<usize> = vec![usize::MAX; chain_n];
    pos[x] = 0;
    let mut v = x;
    while !is_boundary(v) {
        let u = table.step(v, rng).expect("Markov chains are never killed");
        if pos[u] != usize::MAX {
            for w in path.drain(pos[u] + 1..) {
                pos[w] = usize::MAX;
            }
        } else {
            pos[u] = path.len();
            path.push(u);
        }
        v = u;
    }
    Saw::new(path).expect("online erasure yields a self-avoiding walk")
}

/// LERW from `x` to the boundary.
pub fn sample_lerw<S: Scalar>(chain: &WeightedChain<S>, x: Vertex, rng: &mut Rng) -> Result<Saw> {
    check_start(chain, x)?;
    let table = TransitionTable::markov(chain)?;
    Ok(sample_lerw_with(&table, chain.n_vertices(), x, rng, |v| chain.is_boundary(v)))
}

/// LERW built step by step from [`laplacian_step`].
pub fn sample_laplacian_walk<S: Scalar>(chain: &WeightedChain<S>, x: Vertex, rng: &mut Rng) -> Result<Saw> {
    use rand::Rng as _;
    check_start(chain, x)?;
    if !chain.is_markov() {
        return Err(Error::Refused("the Laplacian walk requires Markov weights".into()));
    }
    let mut eta = vec![x];
    loop {
        let law = laplacian_step(chain, &eta)?;
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut next = law.last().unwrap().0;
        for (z, p) in &law {
            acc += p;
            if u < acc {
                next = *z;
                break;
            }
        }
        eta.push(next);
        if chain.is_boundary(next) {
            return Saw::new(eta);
        }
    }
}

/// `q̂(η) = q(η) F_η(A)`; boundary vertices of `η` contribute no factor.
pub fn lerw_law<S: Scalar>(chain: &WeightedChain<S>, eta: &Saw) -> Result<S> {
    let v = eta.vertices();
    if let Some(bad) = v[..v.len() - 1].iter().find(|&&u| !chain.is_interior(u)) {
        return Err(Error::InvalidInput(format!("{} is not interior", chain.label(*bad))));
    }
    Ok(chain.path_weight(v) * chain.f_ordered(v)?)
}

/// Every SAW from `x` through the interior to the boundary with its
/// weight `q̂(η)`.
pub fn enumerate_lerw_law<S: Scalar>(chain: &WeightedChain<S>, x: Vertex) -> Result<Vec<(Saw, S)>> {
    check_start(chain, x)?;
    if chain.n_interior() > MAX_ENUM_INTERIOR {
        return Err(Error::Size(format!(
            "{} interior vertices exceed the enumeration cap {MAX_ENUM_INTERIOR}",
            chain.n_interior()
        )));
    }
    let mut cache = FCache::new(chain)?;
    let mut out = Vec::new();
    let mut path = vec![x];
    fn dfs<S: Scalar>(
        chain: &WeightedChain<S>,
        cache: &mut FCache<S>,
        path: &mut Vec<Vertex>,
        mask: u64,
        w: S,
        out: &mut Vec<(Saw, S)>,
    ) {
        let v = *path.last().unwrap();
        for (u, q) in chain.out_edges(v) {
            let u = *u;
            if chain.is_boundary(u) {
                let mut p = path.clone();
                p.push(u);
                let f = cache.f(mask);
                out.push((Saw::new(p).unwrap(), w.clone() * q.clone() * f));
            } else if mask & (1u64 << u) == 0 {
                path.push(u);
                dfs(chain, cache, path, mask | (1u64 << u), w.clone() * q.clone(), out);
                path.pop();
            }
        }
    }
    dfs(chain, &mut cache, &mut path, 1u64 << x, S::one(), &mut out);
    Ok(out)
}

/// Interior vertices allowed for the `j`-th erased loop: `A ∖ {η_0, …, η_{j-1}}`.
fn erased_loop_domain<S: Scalar>(chain: &WeightedChain<S>, eta: &Saw, j: usize) -> Result<(Vertex, Vec<Vertex>)> {
    let v = eta.vertices();
    let x = *v.get(j).ok_or_else(|| Error::InvalidInput(format!("index {j} beyond the walk")))?;
    if !chain.is_interior(x) {
        return Err(Error::InvalidInput(format!("{} is not interior", chain.label(x))));
    }
    let removed = &v[..j];
    Ok((x, chain.interior().filter(|u| !removed.contains(u)).collect()))
}

/// The loop erased at `η_j`: run from `η_j` until leaving `A_j` and keep the
/// path up to the last visit to `η_j`.
pub fn sample_erased_loop<S: Scalar>(chain: &WeightedChain<S>, eta: &Saw, j: usize, rng: &mut Rng) -> Result<RootedLoop> {
    let table = TransitionTable::markov(chain)?;
    let (x, domain) = erased_loop_domain(chain, eta, j)?;
    let mut inside = vec![false; chain.n_vertices()];
    for &u in &domain {
        inside[u] = true;
    }
    Ok(sample_erased_loop_with(&table, &inside, x, rng))
}

pub fn sample_erased_loop_with(table: &TransitionTable, inside: &[bool], x: Vertex, rng: &mut Rng) -> RootedLoop {
    let mut path = vec![x];
    let mut last = 0;
    let mut v = x;
    loop {
        match table.step(v, rng) {
            Some(u) if inside[u] => {
                path.push(u);
                if u == x {
                    last = path.len() - 1;
                }
                v = u;
            }
            _ => break,
        }
    }
    path.truncate(last + 1);
    RootedLoop::new(path).expect("truncated at a visit to the root")
}

/// `p(l) / G_{A_j}(x_j, x_j)`; zero for loops leaving `A_j`.
pub fn erased_loop_pmf<S: Scalar>(chain: &WeightedChain<S>, eta: &Saw, j: usize, l: &RootedLoop) -> Result<S> {
    let (x, domain) = erased_loop_domain(chain, eta, j)?;
    if l.root() != x || l.vertices().iter().any(|u| !domain.contains(u)) {
        return Ok(S::zero());
    }
    let g = chain.green_diagonal_on(&domain, x)?;
    Ok(chain.path_weight(l.vertices()) / g)
}

/// Exact erased-loop law over loops of length at most `cutoff`.
#[derive(Clone, Debug)]
pub struct ErasedLoopLaw {
    pub loops: Vec<(RootedLoop, f64)>,
    pub coverage: f64,
    /// Set when the enumerated mass falls short of `1 - 1e-6`.
    pub warning: Option<String>,
}

pub fn erased_loop_law<S: Scalar>(chain: &WeightedChain<S>, eta: &Saw, j: usize, cutoff: usize) -> Result<ErasedLoopLaw> {
    let (x, domain) = erased_loop_domain(chain, eta, j)?;
    let g = chain.green_diagonal_on(&domain, x)?.to_complex().re;
    let mut loops = vec![(RootedLoop::trivial(x), 1.0 / g)];
    for l in enumerate_rooted_loops(chain, &domain, x, cutoff, 0.0) {
        let p = chain.path_weight(l.vertices()).to_complex().re / g;
        loops.push((l, p));
    }
    let coverage: f64 = loops.iter().map(|(_, p)| p).sum();
    let warning = (coverage < 1.0 - 1e-6)
        .then(|| format!("loops up to length {cutoff} cover only {coverage:.8} of the mass"));
    Ok(ErasedLoopLaw { loops, coverage, warning })
}

/// Walk obtained from `η` by re-inserting `loops[j]` at `η_j`.
pub fn reconstruct_walk(eta: &Saw, loops: &[RootedLoop]) -> Result<Vec<Vertex>> {
    Ok(crate::paths::recompose(eta, loops)?.0)
}

/// LERW obtained by running the chain and erasing afterwards; used as an
/// independent check of the online erasure in [`sample_lerw`].
pub fn sample_lerw_offline<S: Scalar>(chain: &WeightedChain<S>, x: Vertex, rng: &mut Rng) -> Result<(Vec<Vertex>, Saw)> {
    check_start(chain, x)?;
    let table = TransitionTable::markov(chain)?;
    let mut path = vec![x];
    let mut v = x;
    while !chain.is_boundary(v) {
        v = table.step(v, rng).expect("Markov chains are never killed");
        path.push(v);
    }
    let eta = loop_erase(&path);
    Ok((path, eta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::Symmetry;
    use crate::rng::derive_stream;

    fn path3() -> WeightedChain<f64> {
        WeightedChain::from_labels(
            &["1", "2", "3"],
            &["0", "4"],
            &[("1", "0", 0.5), ("1", "2", 0.5), ("2", "1", 0.5), ("2", "3", 0.5), ("3", "2", 0.5), ("3", "4", 0.5)],
            Symmetry::General,
        )
        .unwrap()
    }

    #[test]
    fn single_vertex_lerw_is_one_step() {
        let c = WeightedChain::<f64>::from_labels(&["x"], &["a", "b"], &[("x", "a", 0.5), ("x", "b", 0.5)], Symmetry::General).unwrap();
        let mut rng = derive_stream(0, 0);
        for _ in 0..20 {
            assert_eq!(sample_lerw(&c, 0, &mut rng).unwrap().len(), 1);
        }
        let eta = Saw::new(vec![0, 1]).unwrap();
        assert!((lerw_law(&c, &eta).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn total_lerw_mass_is_one() {
        let c = path3();
        let law = enumerate_lerw_law(&c, 1).unwrap();
        let total: f64 = law.iter().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-12);
        for (eta, p) in &law {
            assert!((lerw_law(&c, eta).unwrap() - p).abs() < 1e-12);
        }
    }

    #[test]
    fn harmonic_residual_vanishes() {
        let c = path3();
        let h = harmonic_solution(&c, &[1]).unwrap();
        for z in [0usize, 2] {
            let mut lap = -h.values[z];
            for (w, q) in c.out_edges(z) {
                lap += q * h.values[*w];
            }
            assert!(lap.abs() < 1e-12);
        }
        assert_eq!(h.values[1], 0.0);
        // indices: interior 1,2,3 -> 0,1,2 and boundary 0,4 -> 3,4; from "3"
        // with "2" occupied the only continuation is the boundary "4"
        let law = laplacian_step(&c, &[1, 2]).unwrap();
        assert_eq!(law, vec![(4, 1.0)]);
    }

    #[test]
    fn trapped_walk_errors() {
        let c = path3();
        // 3 -> 2 -> 1 with 1 and 3 occupied: vertex 2's only continuation is blocked
        assert_eq!(laplacian_step(&c, &[0, 2, 1]), Err(Error::Trapped(1)));
    }

    #[test]
    fn trivial_erased_loop_when_green_is_one() {
        let c = WeightedChain::<f64>::from_labels(&["x"], &["a"], &[("x", "a", 1.0)], Symmetry::General).unwrap();
        let eta = Saw::new(vec![0, 1]).unwrap();
        let law = erased_loop_law(&c, &eta, 0, 10).unwrap();
        assert_eq!(law.loops.len(), 1);
        assert!((law.coverage - 1.0).abs() < 1e-15);
        assert!(law.warning.is_none());
    }
}
