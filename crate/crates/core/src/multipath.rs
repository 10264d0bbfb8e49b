//! Measures on tuples of mutually avoiding self-avoiding walks and the
//! Fomin determinant identities, checked by exhaustive enumeration on small
//! sets.
//!
//! Every enumeration takes a `domain`: a set of interior vertices that the
//! walks may pass through. Endpoints may be any vertices of the chain; an
//! endpoint inside the domain is part of its walk.

use std::collections::HashMap;

use crate::chain::{GreenData, Vertex, WeightedChain};
use crate::error::{Error, Result};
use crate::lerw::MAX_ENUM_INTERIOR;
use crate::linalg::Matrix;
use crate::paths::{labelled_loop_mass, loop_tail_bound, Saw};
use crate::scalar::Scalar;

/// Ordered tuple of self-avoiding walks.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PathTuple {
    pub walks: Vec<Saw>,
}

impl PathTuple {
    pub fn is_mutually_avoiding(&self) -> bool {
        let mut seen = std::collections::HashSet::new();
        self.walks.iter().flat_map(|w| w.vertices()).all(|v| seen.insert(*v))
    }

    pub fn vertices(&self) -> impl Iterator<Item = Vertex> + '_ {
        self.walks.iter().flat_map(|w| w.vertices().iter().copied())
    }

    pub fn weight<S: Scalar>(&self, chain: &WeightedChain<S>) -> S {
        let mut w = S::one();
        for s in &self.walks {
            w *= chain.path_weight(s.vertices());
        }
        w
    }
}

/// `F_B(D) = det(I - Q_{D∖B}) / det(I - Q_D)` for subsets `B` of a fixed
/// domain `D`, memoized by bitmask.
pub struct DomainF<'a, S> {
    chain: &'a WeightedChain<S>,
    domain: Vec<Vertex>,
    in_domain: Vec<bool>,
    det_d: S,
    memo: HashMap<u64, S>,
}

impl<'a, S: Scalar> DomainF<'a, S> {
    pub fn new(chain: &'a WeightedChain<S>, domain: &[Vertex]) -> Result<Self> {
        if chain.n_vertices() > 64 {
            return Err(Error::Size(format!("{} vertices exceed the bitmask cache", chain.n_vertices())));
        }
        let mut in_domain = vec![false; chain.n_vertices()];
        for &v in domain {
            if !chain.is_interior(v) {
                return Err(Error::InvalidInput(format!("{} is not interior", chain.label(v))));
            }
            in_domain[v] = true;
        }
        let det_d = chain.det_i_minus_q_on(domain);
        if det_d.is_zero() {
            return Err(Error::NotGreen("I - Q is singular on the domain".into()));
        }
        Ok(DomainF { chain, domain: domain.to_vec(), in_domain, det_d, memo: HashMap::new() })
    }

    pub fn f_of(&mut self, vertices: impl IntoIterator<Item = Vertex>) -> S {
        let mask = vertices.into_iter().filter(|&v| self.in_domain[v]).fold(0u64, |m, v| m | (1 << v));
        if let Some(s) = self.memo.get(&mask) {
            return s.clone();
        }
        let rest: Vec<Vertex> = self.domain.iter().copied().filter(|v| mask & (1 << v) == 0).collect();
        let val = self.chain.det_i_minus_q_on(&rest) / self.det_d.clone();
        self.memo.insert(mask, val.clone());
        val
    }
}

fn check_domain<S: Scalar>(chain: &WeightedChain<S>, domain: &[Vertex]) -> Result<()> {
    if domain.len() > MAX_ENUM_INTERIOR {
        return Err(Error::Size(format!("{} domain vertices exceed the enumeration cap {MAX_ENUM_INTERIOR}", domain.len())));
    }
    if domain.iter().any(|&v| !chain.is_interior(v)) {
        return Err(Error::InvalidInput("domain vertices must be interior".into()));
    }
    Ok(())
}

/// Self-avoiding walks `x → y` whose intermediate vertices lie in the
/// domain and avoid `blocked`.
fn saws_between<S: Scalar>(chain: &WeightedChain<S>, in_domain: &[bool], blocked: &mut [bool], x: Vertex, y: Vertex, out: &mut Vec<Saw>) {
    let mut path = vec![x];
    fn dfs<S: Scalar>(chain: &WeightedChain<S>, in_domain: &[bool], blocked: &mut [bool], y: Vertex, path: &mut Vec<Vertex>, out: &mut Vec<Saw>) {
        let v = *path.last().unwrap();
        for (u, w) in chain.out_edges(v) {
            let u = *u;
            if w.is_zero() {
                continue;
            }
            if u == y {
                path.push(u);
                out.push(Saw::new(path.clone()).expect("distinct by construction"));
                path.pop();
            } else if in_domain[u] && !blocked[u] {
                blocked[u] = true;
                path.push(u);
                dfs(chain, in_domain, blocked, y, path, out);
                path.pop();
                blocked[u] = false;
            }
        }
    }
    let was = blocked[x];
    blocked[x] = true;
    dfs(chain, in_domain, blocked, y, &mut path, out);
    blocked[x] = was;
}

/// Self-avoiding walks from `x` to `y` through `domain`.
pub fn enumerate_saws<S: Scalar>(chain: &WeightedChain<S>, domain: &[Vertex], x: Vertex, y: Vertex) -> Result<Vec<Saw>> {
    check_domain(chain, domain)?;
    if x == y {
        return Err(Error::InvalidInput("endpoints must differ".into()));
    }
    let mut in_domain = vec![false; chain.n_vertices()];
    for &v in domain {
        in_domain[v] = true;
    }
    let mut blocked = vec![false; chain.n_vertices()];
    blocked[y] = true;
    let mut out = Vec::new();
    saws_between(chain, &in_domain, &mut blocked, x, y, &mut out);
    Ok(out)
}

/// All mutually avoiding tuples `η^i : x_i → y_i` through `domain`.
pub fn enumerate_avoiding_tuples<S: Scalar>(chain: &WeightedChain<S>, domain: &[Vertex], xs: &[Vertex], ys: &[Vertex]) -> Result<Vec<PathTuple>> {
    check_domain(chain, domain)?;
    if xs.len() != ys.len() {
        return Err(Error::InvalidInput("endpoint vectors differ in length".into()));
    }
    let mut blocked = vec![false; chain.n_vertices()];
    for &v in xs.iter().chain(ys) {
        if v >= chain.n_vertices() || std::mem::replace(&mut blocked[v], true) {
            return Err(Error::InvalidInput("endpoints must be distinct vertices".into()));
        }
    }
    let mut in_domain = vec![false; chain.n_vertices()];
    for &v in domain {
        in_domain[v] = true;
    }
    let mut out = Vec::new();
    let mut current = Vec::new();
    fn rec<S: Scalar>(
        chain: &WeightedChain<S>,
        in_domain: &[bool],
        blocked: &mut Vec<bool>,
        xs: &[Vertex],
        ys: &[Vertex],
        current: &mut Vec<Saw>,
        out: &mut Vec<PathTuple>,
    ) {
        let i = current.len();
        if i == xs.len() {
            out.push(PathTuple { walks: current.clone() });
            return;
        }
        let mut saws = Vec::new();
        saws_between(chain, in_domain, blocked, xs[i], ys[i], &mut saws);
        for s in saws {
            let inner: Vec<Vertex> = s.vertices()[1..s.len()].to_vec();
            for &v in &inner {
                blocked[v] = true;
            }
            current.push(s);
            rec(chain, in_domain, blocked, xs, ys, current, out);
            current.pop();
            for &v in &inner {
                blocked[v] = false;
            }
        }
    }
    rec(chain, &in_domain, &mut blocked, xs, ys, &mut current, &mut out);
    Ok(out)
}

/// `Ĥ_D(x⃗, y⃗) = Σ q(η⃗) F_{η¹ ∪ … ∪ ηᵏ}(D)` over mutually avoiding tuples.
pub fn hat_h_on<S: Scalar>(chain: &WeightedChain<S>, domain: &[Vertex], xs: &[Vertex], ys: &[Vertex]) -> Result<S> {
    let tuples = enumerate_avoiding_tuples(chain, domain, xs, ys)?;
    let mut f = DomainF::new(chain, domain)?;
    let mut total = S::zero();
    for t in &tuples {
        total += t.weight(chain) * f.f_of(t.vertices());
    }
    Ok(total)
}

/// [`hat_h_on`] with the whole interior as domain.
pub fn hat_h<S: Scalar>(chain: &WeightedChain<S>, xs: &[Vertex], ys: &[Vertex]) -> Result<S> {
    let all: Vec<Vertex> = chain.interior().collect();
    hat_h_on(chain, &all, xs, ys)
}

/// `H_D(x, y)`: total mass of walks `x → y` of length at least one whose
/// intermediate vertices lie in the set of `green`; `G(x, y)` when both
/// endpoints are in the set.
pub fn path_mass<S: Scalar>(chain: &WeightedChain<S>, green: &GreenData<S>, x: Vertex, y: Vertex) -> S {
    match (green.contains(x), green.contains(y)) {
        (true, true) => green.entry(x, y),
        (true, false) => {
            let mut s = S::zero();
            for &b in &green.vertices {
                if let Some(w) = chain.weight(b, y) {
                    s += green.entry(x, b) * w.clone();
                }
            }
            s
        }
        (false, true) => {
            let mut s = S::zero();
            for (a, w) in chain.out_edges(x) {
                if green.contains(*a) {
                    s += w.clone() * green.entry(*a, y);
                }
            }
            s
        }
        (false, false) => chain.walk_mass(green, x, y),
    }
}

/// `[H_D(x_i, y_j)]`.
pub fn kernel_matrix<S: Scalar>(chain: &WeightedChain<S>, domain: &[Vertex], xs: &[Vertex], ys: &[Vertex]) -> Result<Matrix<S>> {
    let g = chain.green_on(domain)?;
    Ok(Matrix::from_fn(xs.len(), ys.len(), |i, j| path_mass(chain, &g, xs[i], ys[j])))
}

/// `(Ĥ(x⃗, y⃗) - Ĥ(x⃗, y⃗^σ), H(x₁,y₁)H(x₂,y₂) - H(x₁,y₂)H(x₂,y₁))` with `σ`
/// the transposition.
pub fn fomin_two_path_check<S: Scalar>(chain: &WeightedChain<S>, x1: Vertex, x2: Vertex, y1: Vertex, y2: Vertex) -> Result<(S, S)> {
    let lhs = hat_h(chain, &[x1, x2], &[y1, y2])? - hat_h(chain, &[x1, x2], &[y2, y1])?;
    let all: Vec<Vertex> = chain.interior().collect();
    let h = kernel_matrix(chain, &all, &[x1, x2], &[y1, y2])?;
    let rhs = h[(0, 0)].clone() * h[(1, 1)].clone() - h[(0, 1)].clone() * h[(1, 0)].clone();
    Ok((lhs, rhs))
}

/// Permutations of `0..k` with their signs.
pub fn permutations(k: usize) -> Vec<(Vec<usize>, i8)> {
    if k == 0 {
        return vec![(Vec::new(), 1)];
    }
    let mut out = Vec::new();
    for (p, s) in permutations(k - 1) {
        // insert k-1 at position i: moving it past k-1-i entries
        for i in 0..k {
            let mut q = p.clone();
            q.insert(i, k - 1);
            let sign = if (k - 1 - i).is_multiple_of(2) { s } else { -s };
            out.push((q, sign));
        }
    }
    out
}

/// `(Σ_σ sgn σ Ĥ(x⃗, y⃗^σ), det[H(x_i, y_j)])`.
pub fn fomin_det_check<S: Scalar>(chain: &WeightedChain<S>, xs: &[Vertex], ys: &[Vertex]) -> Result<(S, S)> {
    if xs.len() != ys.len() || xs.is_empty() || xs.len() > 4 {
        return Err(Error::InvalidInput("need 1 to 4 endpoint pairs".into()));
    }
    let mut signed = S::zero();
    for (p, s) in permutations(xs.len()) {
        let yp: Vec<Vertex> = p.iter().map(|&i| ys[i]).collect();
        let h = hat_h(chain, xs, &yp)?;
        if s > 0 {
            signed += h;
        } else {
            signed -= h;
        }
    }
    let all: Vec<Vertex> = chain.interior().collect();
    Ok((signed, kernel_matrix(chain, &all, xs, ys)?.det()))
}

fn check_symmetric<S: Scalar>(chain: &WeightedChain<S>) -> Result<()> {
    for (u, v, w) in chain.edges() {
        if (chain.q(v, u) - w.clone()).modulus() > 1e-12 * w.modulus().max(1.0) {
            return Err(Error::Refused(format!("weight is not symmetric at {} -> {}", chain.label(u), chain.label(v))));
        }
    }
    Ok(())
}

/// The expected signed traversal count of the directed edge `z → w` by the
/// loop-erased walk from `x` to `y`, computed three ways (unnormalized).
#[derive(Clone, Debug)]
pub struct EdgeTraversal<S> {
    /// `q_e F_e(A) [H_{A'}(x,z) H_{A'}(y,w) - H_{A'}(x,w) H_{A'}(y,z)]`.
    pub closed: S,
    /// `Σ_η q̂(η) (I_e - I_{e^R})` over SAWs.
    pub enumerated: S,
    /// `Σ_ω q(ω) (Y_e - Y_{e^R})` over walks of length at most `max_len`.
    pub path_sum: S,
    /// Certified bound on the walks omitted from `path_sum`.
    pub tail: f64,
}

pub fn edge_traversal_expectation<S: Scalar>(
    chain: &WeightedChain<S>,
    x: Vertex,
    y: Vertex,
    z: Vertex,
    w: Vertex,
    max_len: usize,
) -> Result<EdgeTraversal<S>> {
    check_symmetric(chain)?;
    if x == y || !chain.is_boundary(x) || !chain.is_boundary(y) {
        return Err(Error::InvalidInput("x and y must be distinct boundary vertices".into()));
    }
    if z == w || !chain.is_interior(z) || !chain.is_interior(w) {
        return Err(Error::InvalidInput("z and w must be distinct interior vertices".into()));
    }
    if !chain.classify().is_integrable() {
        return Err(Error::NotGreen("the path sum needs an integrable weight".into()));
    }
    let all: Vec<Vertex> = chain.interior().collect();
    let qe = chain.q(z, w);

    let reduced: Vec<Vertex> = all.iter().copied().filter(|&v| v != z && v != w).collect();
    let closed = if qe.is_zero() {
        S::zero()
    } else {
        let fe = chain.f_set(&[z, w])?;
        let g = chain.green_on(&reduced)?;
        let h = |a, b| path_mass(chain, &g, a, b);
        qe.clone() * fe * (h(x, z) * h(y, w) - h(x, w) * h(y, z))
    };

    let mut f = DomainF::new(chain, &all)?;
    let mut enumerated = S::zero();
    for eta in enumerate_saws(chain, &all, x, y)? {
        let v = eta.vertices();
        let fwd = v.windows(2).any(|p| p[0] == z && p[1] == w);
        let bwd = v.windows(2).any(|p| p[0] == w && p[1] == z);
        if fwd != bwd {
            let val = chain.path_weight(v) * f.f_of(v.iter().copied());
            if fwd {
                enumerated += val;
            } else {
                enumerated -= val;
            }
        }
    }

    let path_sum = traversal_path_sum(chain, &all, (x, y), (z, w), -1.0, max_len);
    let abs = chain.abs_chain();
    let partial_abs = traversal_path_sum(&abs, &all, (x, y), (z, w), 1.0, max_len);
    let full_abs = {
        let g = abs.green_on(&all)?;
        let h = |a, b| path_mass(&abs, &g, a, b);
        let qa = abs.q(z, w);
        qa * (h(x, z) * h(w, y) + h(x, w) * h(z, y))
    };
    let tail = (full_abs - partial_abs).max(0.0) + 1e-14 * full_abs;
    Ok(EdgeTraversal { closed, enumerated, path_sum, tail })
}

/// `Σ_ω q(ω) (Y_e + reverse · Y_{e^R})` over walks `x → y` of length at
/// most `max_len`, `e = z → w`.
fn traversal_path_sum<S: Scalar>(
    chain: &WeightedChain<S>,
    domain: &[Vertex],
    (x, y): (Vertex, Vertex),
    (z, w): (Vertex, Vertex),
    reverse: f64,
    max_len: usize,
) -> S {
    let m = chain.matrix_on(domain);
    let pos = |v: Vertex| domain.iter().position(|&u| u == v).expect("vertex in domain");
    let (iz, iw) = (pos(z), pos(w));
    let n = domain.len();
    // fwd[a][i]: walks x → domain[i] of length a; bwd[b][i]: domain[i] → y of length b.
    let mut fwd = vec![domain.iter().map(|&v| chain.q(x, v)).collect::<Vec<S>>()];
    let mut bwd = vec![domain.iter().map(|&v| chain.q(v, y)).collect::<Vec<S>>()];
    for _ in 2..max_len {
        let last = fwd.last().unwrap();
        fwd.push((0..n).map(|j| (0..n).fold(S::zero(), |s, i| s + last[i].clone() * m[(i, j)].clone())).collect());
        let last = bwd.last().unwrap();
        bwd.push((0..n).map(|i| (0..n).fold(S::zero(), |s, j| s + m[(i, j)].clone() * last[j].clone())).collect());
    }
    let (qzw, qwz) = (chain.q(z, w), chain.q(w, z) * S::from_f64(reverse));
    let mut total = S::zero();
    for a in 1..max_len {
        for b in 1..max_len - a {
            total += fwd[a - 1][iz].clone() * qzw.clone() * bwd[b - 1][iw].clone();
            total += fwd[a - 1][iw].clone() * qwz.clone() * bwd[b - 1][iz].clone();
        }
    }
    total
}

/// Two-path Radon–Nikodym factorization:
/// `(q̂(η¹, η²), q̂(η¹) q̂(η²) exp{-m[loops hitting both]}, tail)`, the loop
/// mass truncated at `max_len` with its certified tail.
pub fn radon_nikodym_check<S: Scalar>(chain: &WeightedChain<S>, eta1: &Saw, eta2: &Saw, max_len: usize) -> Result<(S, S, f64)> {
    let all: Vec<Vertex> = chain.interior().collect();
    let tuple = PathTuple { walks: vec![eta1.clone(), eta2.clone()] };
    if !tuple.is_mutually_avoiding() {
        return Err(Error::InvalidInput("walks intersect".into()));
    }
    let mut f = DomainF::new(chain, &all)?;
    let joint = tuple.weight(chain) * f.f_of(tuple.vertices());
    let single = |e: &Saw, f: &mut DomainF<S>| chain.path_weight(e.vertices()) * f.f_of(e.vertices().iter().copied());
    let product = single(eta1, &mut f) * single(eta2, &mut f);
    let mut mark = vec![0usize; chain.n_vertices()];
    for &v in eta1.vertices() {
        mark[v] |= 1;
    }
    for &v in eta2.vertices() {
        mark[v] |= 2;
    }
    let m = labelled_loop_mass(chain, &all, max_len, 4, |v| mark[v], |l, _, v| l | mark[v], |_, l| l == 3);
    let rhs = product * S::from_complex((-m.to_complex()).exp()).ok_or_else(|| Error::Numerical("complex loop mass on a real chain".into()))?;
    Ok((joint, rhs, loop_tail_bound(chain, &all, max_len)))
}

/// `(Ĥ_A(x⃗, y⃗), F_B(A) Ĥ_{A∖B}(x⃗, y⃗))` with `B` the interior endpoints.
pub fn interior_reduction_check<S: Scalar>(chain: &WeightedChain<S>, xs: &[Vertex], ys: &[Vertex]) -> Result<(S, S)> {
    let all: Vec<Vertex> = chain.interior().collect();
    let lhs = hat_h_on(chain, &all, xs, ys)?;
    let b: Vec<Vertex> = xs.iter().chain(ys).copied().filter(|&v| chain.is_interior(v)).collect();
    let rest: Vec<Vertex> = all.iter().copied().filter(|v| !b.contains(v)).collect();
    let rhs = if rest.is_empty() {
        let direct = enumerate_avoiding_tuples(chain, &[], xs, ys)?;
        direct.iter().fold(S::zero(), |s, t| s + t.weight(chain)) * chain.f_set(&b)?
    } else {
        chain.f_set(&b)? * hat_h_on(chain, &rest, xs, ys)?
    };
    Ok((lhs, rhs))
}

/// `(q̂(V), q_e F_e(A) Ĥ_{A'}((x₁, x₂), (y₁, y₂)))` where `V` is the set of
/// SAWs `x₁ → y₂` through the directed edge `e = x₂ → y₁` and
/// `A' = A ∖ {x₂, y₁}`.
pub fn edge_probability_check<S: Scalar>(chain: &WeightedChain<S>, x1: Vertex, y2: Vertex, x2: Vertex, y1: Vertex) -> Result<(S, S)> {
    if !chain.is_interior(x2) || !chain.is_interior(y1) {
        return Err(Error::InvalidInput("the edge must join interior vertices".into()));
    }
    let all: Vec<Vertex> = chain.interior().collect();
    let mut f = DomainF::new(chain, &all)?;
    let mut lhs = S::zero();
    for eta in enumerate_saws(chain, &all, x1, y2)? {
        let v = eta.vertices();
        if v.windows(2).any(|p| p[0] == x2 && p[1] == y1) {
            lhs += chain.path_weight(v) * f.f_of(v.iter().copied());
        }
    }
    let reduced: Vec<Vertex> = all.iter().copied().filter(|&v| v != x2 && v != y1).collect();
    let h = if reduced.is_empty() {
        enumerate_avoiding_tuples(chain, &[], &[x1, x2], &[y1, y2])?.iter().fold(S::zero(), |s, t| s + t.weight(chain))
    } else {
        hat_h_on(chain, &reduced, &[x1, x2], &[y1, y2])?
    };
    let rhs = chain.q(x2, y1) * chain.f_set(&[x2, y1])? * h;
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builders::grid_srw;

    fn v(c: &WeightedChain<f64>, l: &str) -> Vertex {
        c.index_of(l).unwrap()
    }

    #[test]
    fn single_path_gives_poisson_kernel() {
        let c = grid_srw(3, 3);
        let (a, b) = (v(&c, "-1,0"), v(&c, "3,2"));
        let g = c.green().unwrap();
        let lhs = hat_h(&c, &[a], &[b]).unwrap();
        assert!((lhs - c.boundary_poisson_kernel(&g, a, b).unwrap()).abs() < 1e-13);
        let inner = v(&c, "1,1");
        let lhs = hat_h(&c, &[inner], &[b]).unwrap();
        assert!((lhs - c.poisson_kernel(&g, inner, b).unwrap()).abs() < 1e-13);
    }

    #[test]
    fn permutations_have_correct_signs() {
        let perms = permutations(3);
        assert_eq!(perms.len(), 6);
        for (p, s) in perms {
            let inversions = (0..3).flat_map(|i| (i + 1..3).map(move |j| (i, j))).filter(|&(i, j)| p[i] > p[j]).count();
            assert_eq!(s, if inversions % 2 == 0 { 1 } else { -1 });
        }
    }

    #[test]
    fn fomin_on_grid() {
        let c = grid_srw(3, 3);
        let (x1, x2, y1, y2) = (v(&c, "-1,0"), v(&c, "-1,2"), v(&c, "3,0"), v(&c, "3,2"));
        let (l, r) = fomin_two_path_check(&c, x1, x2, y1, y2).unwrap();
        assert!((l - r).abs() < 1e-12);
        let (s, d) = fomin_det_check(&c, &[x1, x2], &[y1, y2]).unwrap();
        assert!((s - d).abs() < 1e-12);
        // crossing pairing has no avoiding tuples
        assert_eq!(hat_h(&c, &[x1, x2], &[y2, y1]).unwrap(), 0.0);
    }

    #[test]
    fn edge_traversal_three_ways() {
        let c = grid_srw(3, 3);
        let (x, y) = (v(&c, "-1,1"), v(&c, "3,1"));
        let (z, w) = (v(&c, "1,1"), v(&c, "2,1"));
        let t = edge_traversal_expectation(&c, x, y, z, w, 120).unwrap();
        assert!((t.closed - t.enumerated).abs() < 1e-12);
        assert!((t.path_sum - t.closed).abs() <= t.tail + 1e-12);
        assert!(t.tail < 1e-3);
        assert!(edge_traversal_expectation(&c, x, x, z, w, 10).is_err());
    }

    #[test]
    fn reductions_hold() {
        let c = grid_srw(3, 3);
        let (x, y) = (v(&c, "1,1"), v(&c, "3,2"));
        let (a, b) = (v(&c, "-1,0"), v(&c, "0,-1"));
        let (l, r) = interior_reduction_check(&c, &[x, a], &[y, b]).unwrap();
        assert!((l - r).abs() < 1e-13);
        let (l, r) = edge_probability_check(&c, v(&c, "-1,1"), v(&c, "3,1"), v(&c, "1,1"), v(&c, "1,2")).unwrap();
        assert!((l - r).abs() < 1e-13 && l > 0.0);
    }

    #[test]
    fn radon_nikodym_factorization() {
        let c = grid_srw(3, 2);
        let e1 = Saw::new(vec![v(&c, "-1,0"), v(&c, "0,0"), v(&c, "1,0"), v(&c, "1,-1")]).unwrap();
        let e2 = Saw::new(vec![v(&c, "-1,1"), v(&c, "0,1"), v(&c, "1,1"), v(&c, "2,1"), v(&c, "3,1")]).unwrap();
        let (l, r, tail) = radon_nikodym_check(&c, &e1, &e2, 40).unwrap();
        assert!(tail < 1e-7);
        assert!((l - r).abs() < 1e-6 * l.abs());
    }
}
