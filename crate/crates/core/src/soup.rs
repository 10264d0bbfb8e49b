//! Growing loops, the bubble soup, the unrooted loop soup, currents and the
//! current law at intensity one half.
//!
//! The two combinatorial identities behind the current law are checked in
//! exact arithmetic: [`graph_identity_sides`] returns both sides as a
//! rational multiple of a power of `√π`, and [`pairing_identity_sides`]
//! works over big integers.

use std::collections::BTreeMap;

use num_bigint::{BigInt, BigUint};
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng as _;
use rand_distr::Poisson;
use statrs::function::gamma::{digamma, ln_gamma};

use crate::chain::{Symmetry, Vertex, WeightedChain};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::paths::{RootedLoop, UnrootedLoop};
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::walk::TransitionTable;

/// Attempts allowed to the elementary-loop rejection sampler.
pub const MAX_ATTEMPTS: u64 = 1_000_000;

// ---------------------------------------------------------------------------
// Negative binomial

/// `Γ(k + t) / (k! Γ(t))`.
fn nb_coefficient(t: f64, k: u64) -> f64 {
    (ln_gamma(k as f64 + t) - ln_gamma(k as f64 + 1.0) - ln_gamma(t)).exp()
}

/// `Γ(k + t) / (k! Γ(t)) f^k (1 - f)^t`, with the principal power for
/// complex `f`.
pub fn negbin_pmf(f: Complex64, t: f64, k: u64) -> Result<Complex64> {
    if f.norm() >= 1.0 {
        return Err(Error::Divergent { radius: f.norm() });
    }
    if !(t > 0.0) {
        return Err(Error::InvalidInput(format!("intensity must be positive, got {t}")));
    }
    Ok(f.powu(k as u32) * ((1.0 - f).ln() * t).exp() * nb_coefficient(t, k))
}

fn negbin_real(f: f64, t: f64, k: u64) -> f64 {
    if f == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    (ln_gamma(k as f64 + t) - ln_gamma(k as f64 + 1.0) - ln_gamma(t) + k as f64 * f.ln() + t * (1.0 - f).ln()).exp()
}

/// Residual of `∂_t q(t, r) = log(1 - z) q(t, r) + Σ_{k=1}^r q(t, r - k) z^k / k`
/// for `q(t, r) = negbin_pmf(z, t, r)` and real `0 ≤ z < 1`; the left side
/// uses `∂_t log q = ψ(r + t) - ψ(t) + log(1 - z)`.
pub fn negbin_ode_residual(z: f64, t: f64, r: u64) -> f64 {
    let q = |k: u64| negbin_real(z, t, k);
    let lhs = q(r) * (digamma(r as f64 + t) - digamma(t) + (1.0 - z).ln());
    let mut rhs = (1.0 - z).ln() * q(r);
    let mut zk = 1.0;
    for k in 1..=r {
        zk *= z;
        rhs += q(r - k) * zk / k as f64;
    }
    (lhs - rhs).abs()
}

/// One draw from the logarithmic series law `P(k) = f^k / (k L)`,
/// `L = -log(1 - f)`, by sequential inversion.
fn log_series(f: f64, rng: &mut Rng) -> u64 {
    let l = -(1.0 - f).ln();
    let mut u: f64 = rng.random();
    let mut p = f / l;
    let mut k = 1;
    while u > p && p > 0.0 {
        u -= p;
        p *= f * k as f64 / (k + 1) as f64;
        k += 1;
    }
    k
}

/// Jumps of the negative binomial process on `[0, t]`: a Poisson process of
/// rate `-log(1 - f)` with logarithmic-series jump sizes. Returns sorted
/// `(time, size)` pairs.
pub fn negbin_process(f: f64, t: f64, rng: &mut Rng) -> Vec<(f64, u64)> {
    if f <= 0.0 {
        return Vec::new();
    }
    let rate = -t * (1.0 - f).ln();
    let n = Poisson::new(rate).map(|p| p.sample(rng) as usize).unwrap_or(0);
    let mut jumps: Vec<(f64, u64)> = (0..n).map(|_| (rng.random::<f64>() * t, 0)).collect();
    jumps.sort_by(|a, b| a.0.total_cmp(&b.0));
    for j in &mut jumps {
        j.1 = log_series(f, rng);
    }
    jumps
}

/// `K ~ negbin(f, t)` as the value at time `t` of [`negbin_process`].
pub fn sample_negbin(f: f64, t: f64, rng: &mut Rng) -> u64 {
    negbin_process(f, t, rng).iter().map(|j| j.1).sum()
}

// ---------------------------------------------------------------------------
// Growing loops and the bubble soup

/// Loop from a soup process: arrival time, loop, and the ordering position of
/// its root for bubble soups (`None` for the unrooted soup).
#[derive(Clone, Debug, PartialEq)]
pub struct Arrival {
    pub time: f64,
    pub lp: RootedLoop,
    pub site: Option<usize>,
}

/// Time-ordered loops of a soup on `[0, t]`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SoupRealization {
    pub intensity: f64,
    pub arrivals: Vec<Arrival>,
}

impl SoupRealization {
    fn new(intensity: f64, mut arrivals: Vec<Arrival>) -> Self {
        arrivals.sort_by(|a, b| a.time.total_cmp(&b.time));
        SoupRealization { intensity, arrivals }
    }

    pub fn is_valid(&self) -> bool {
        self.arrivals.windows(2).all(|w| w[0].time < w[1].time) && self.arrivals.iter().all(|a| !a.lp.is_trivial())
    }

    /// Loops that arrived by time `s`.
    pub fn until(&self, s: f64) -> impl Iterator<Item = &Arrival> {
        self.arrivals.iter().take_while(move |a| a.time <= s)
    }

    /// Sorted multiset of unrooted classes, keeping loops with at most
    /// `max_len` steps.
    pub fn unrooted(&self, max_len: usize) -> Vec<UnrootedLoop> {
        let mut v: Vec<UnrootedLoop> = self
            .arrivals
            .iter()
            .filter(|a| a.lp.len() <= max_len)
            .map(|a| UnrootedLoop::from_rooted(&a.lp).expect("soup loops are nontrivial"))
            .collect();
        v.sort();
        v
    }

    /// Concatenation of the loops rooted at each ordering position, in
    /// arrival order: the bubble soup as a tuple of rooted loops.
    pub fn bubbles(&self, ordering: &[Vertex]) -> Vec<RootedLoop> {
        let mut out: Vec<RootedLoop> = ordering.iter().map(|&x| RootedLoop::trivial(x)).collect();
        for a in &self.arrivals {
            if let Some(j) = a.site {
                out[j] = out[j].concat(&a.lp);
            }
        }
        out
    }
}

/// Rejection sampler for `p(l) / f_x` on elementary loops at `x` inside the
/// marked set: walks from `x` that leave the set or are killed are retried.
pub fn sample_elementary_loop(table: &TransitionTable, inside: &[bool], x: Vertex, rng: &mut Rng) -> Result<RootedLoop> {
    for _ in 0..MAX_ATTEMPTS {
        let mut path = vec![x];
        let mut v = x;
        loop {
            match table.step(v, rng) {
                Some(u) if inside[u] => {
                    path.push(u);
                    if u == x {
                        return Ok(RootedLoop::new(path).expect("closed at the root"));
                    }
                    v = u;
                }
                _ => break,
            }
        }
    }
    Err(Error::Starvation(MAX_ATTEMPTS))
}

fn inside_mask<S: Scalar>(chain: &WeightedChain<S>, subset: &[Vertex]) -> Result<Vec<bool>> {
    let mut inside = vec![false; chain.n_vertices()];
    for &v in subset {
        if !chain.is_interior(v) {
            return Err(Error::InvalidInput(format!("{} is not an interior vertex", chain.label(v))));
        }
        inside[v] = true;
    }
    Ok(inside)
}

/// `f_x = 1 - 1 / G_{subset}(x, x)` for real nonnegative weights.
fn return_probability<S: Scalar>(chain: &WeightedChain<S>, subset: &[Vertex], x: Vertex) -> Result<f64> {
    let g = chain.green_diagonal_on(subset, x)?.to_complex().re;
    Ok((1.0 - 1.0 / g).max(0.0))
}

fn growing_arrivals(
    table: &TransitionTable,
    inside: &[bool],
    x: Vertex,
    f: f64,
    t: f64,
    site: usize,
    rng: &mut Rng,
) -> Result<Vec<Arrival>> {
    let mut out = Vec::new();
    for (time, size) in negbin_process(f, t, rng) {
        let mut lp = RootedLoop::trivial(x);
        for _ in 0..size {
            lp = lp.concat(&sample_elementary_loop(table, inside, x, rng)?);
        }
        out.push(Arrival { time, lp, site: Some(site) });
    }
    Ok(out)
}

/// Growing loop at `x` in `subset` at time `t`: `K ~ negbin(f_x, t)`
/// elementary loops concatenated in arrival order.
pub fn sample_growing_loop<S: Scalar>(chain: &WeightedChain<S>, x: Vertex, subset: &[Vertex], t: f64, rng: &mut Rng) -> Result<RootedLoop> {
    let table = TransitionTable::new(chain)?;
    let inside = inside_mask(chain, subset)?;
    if !inside.get(x).copied().unwrap_or(false) {
        return Err(Error::InvalidInput("root must lie in the subset".into()));
    }
    let f = return_probability(chain, subset, x)?;
    let k = sample_negbin(f, t, rng);
    let mut lp = RootedLoop::trivial(x);
    for _ in 0..k {
        lp = lp.concat(&sample_elementary_loop(&table, &inside, x, rng)?);
    }
    Ok(lp)
}

/// `μ_t(l) = G(x, x)^{-t} Γ(k + t) / (k! Γ(t)) q(l)` with `k` the number of
/// returns; zero for loops not rooted at `x` or leaving `subset`.
pub fn growing_loop_pmf<S: Scalar>(chain: &WeightedChain<S>, x: Vertex, subset: &[Vertex], l: &RootedLoop, t: f64) -> Result<Complex64> {
    if l.root() != x || l.vertices().iter().any(|v| !subset.contains(v)) {
        return Ok(Complex64::zero());
    }
    let g = chain.green_diagonal_on(subset, x)?.to_complex();
    let q = chain.path_weight(l.vertices()).to_complex();
    Ok((-t * g.ln()).exp() * nb_coefficient(t, l.returns() as u64) * q)
}

fn check_ordering<S: Scalar>(chain: &WeightedChain<S>, ordering: &[Vertex]) -> Result<()> {
    let mut seen = vec![false; chain.n_interior()];
    for &v in ordering {
        if v >= seen.len() || std::mem::replace(&mut seen[v], true) {
            return Err(Error::InvalidInput("ordering must list every interior vertex once".into()));
        }
    }
    if ordering.len() != seen.len() {
        return Err(Error::InvalidInput("ordering must list every interior vertex once".into()));
    }
    Ok(())
}

/// Bubble-soup sampler with the per-site return probabilities and domains
/// precomputed.
#[derive(Clone, Debug)]
pub struct BubbleSampler {
    table: TransitionTable,
    ordering: Vec<Vertex>,
    /// Domain `A_j` and return probability `f_{x_j}` per ordering position.
    sites: Vec<(Vec<bool>, f64)>,
    intensity: f64,
}

impl BubbleSampler {
    pub fn new<S: Scalar>(chain: &WeightedChain<S>, ordering: &[Vertex], t: f64) -> Result<Self> {
        check_ordering(chain, ordering)?;
        if !(t > 0.0) {
            return Err(Error::InvalidInput(format!("intensity must be positive, got {t}")));
        }
        let table = TransitionTable::new(chain)?;
        let mut sites = Vec::with_capacity(ordering.len());
        for (j, &x) in ordering.iter().enumerate() {
            let subset = &ordering[j..];
            sites.push((inside_mask(chain, subset)?, return_probability(chain, subset, x)?));
        }
        Ok(BubbleSampler { table, ordering: ordering.to_vec(), sites, intensity: t })
    }

    pub fn ordering(&self) -> &[Vertex] {
        &self.ordering
    }

    pub fn sample(&self, rng: &mut Rng) -> Result<SoupRealization> {
        let mut arrivals = Vec::new();
        for (j, (inside, f)) in self.sites.iter().enumerate() {
            arrivals.extend(growing_arrivals(&self.table, inside, self.ordering[j], *f, self.intensity, j, rng)?);
        }
        Ok(SoupRealization::new(self.intensity, arrivals))
    }

    /// Current of a fresh bubble soup, without keeping the loops.
    pub fn sample_current(&self, rng: &mut Rng) -> Result<Current> {
        let mut k: BTreeMap<(Vertex, Vertex), u64> = BTreeMap::new();
        for (j, (inside, f)) in self.sites.iter().enumerate() {
            let x = self.ordering[j];
            for _ in 0..sample_negbin(*f, self.intensity, rng) {
                let l = sample_elementary_loop(&self.table, inside, x, rng)?;
                for w in l.vertices().windows(2) {
                    *k.entry((w[0].min(w[1]), w[0].max(w[1]))).or_insert(0) += 1;
                }
            }
        }
        Ok(Current::new(k).expect("closed walks project to currents"))
    }
}

/// Bubble soup at intensity `t` with its arrival times: independent growing
/// loops at `x_j` in `A_j = A ∖ {x_1, …, x_{j-1}}`.
pub fn sample_bubble_realization<S: Scalar>(chain: &WeightedChain<S>, ordering: &[Vertex], t: f64, rng: &mut Rng) -> Result<SoupRealization> {
    BubbleSampler::new(chain, ordering, t)?.sample(rng)
}

/// The bubble soup as a tuple of rooted loops, one per ordering position.
pub fn sample_bubble_soup<S: Scalar>(chain: &WeightedChain<S>, ordering: &[Vertex], t: f64, rng: &mut Rng) -> Result<Vec<RootedLoop>> {
    Ok(sample_bubble_realization(chain, ordering, t, rng)?.bubbles(ordering))
}

/// `∏_j μ_t(l_j)` for the growing loops at `x_j` in `A_j`. Complex weights
/// are accepted: this is the complex soup as a measure.
pub fn bubble_soup_pmf<S: Scalar>(chain: &WeightedChain<S>, ordering: &[Vertex], loops: &[RootedLoop], t: f64) -> Result<Complex64> {
    check_ordering(chain, ordering)?;
    if loops.len() != ordering.len() {
        return Err(Error::InvalidInput("one loop per ordering position".into()));
    }
    let mut p = Complex64::new(1.0, 0.0);
    for (j, l) in loops.iter().enumerate() {
        p *= growing_loop_pmf(chain, ordering[j], &ordering[j..], l, t)?;
    }
    Ok(p)
}

// ---------------------------------------------------------------------------
// Unrooted soup

fn real_interior_matrix<S: Scalar>(chain: &WeightedChain<S>) -> Result<Matrix<f64>> {
    let m = chain.interior_matrix();
    let mut out = Matrix::zeros(m.rows(), m.cols());
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            let z = m[(i, j)].to_complex();
            if z.im != 0.0 || z.re < 0.0 {
                return Err(Error::Refused("sampling needs nonnegative real weights".into()));
            }
            out[(i, j)] = z.re;
        }
    }
    Ok(out)
}

/// Loop soup at intensity `t` restricted to loops of at most `max_len`
/// steps, sampled directly: `Poisson(t M)` loops with `M = Σ_n tr(Pⁿ) / n`,
/// each given a length `n ∝ tr(Pⁿ)/n`, a root `x ∝ Pⁿ(x, x)`, and a bridge
/// from `x` to `x` drawn step by step.
pub fn sample_loop_soup<S: Scalar>(chain: &WeightedChain<S>, t: f64, max_len: usize, rng: &mut Rng) -> Result<SoupRealization> {
    let p = real_interior_matrix(chain)?;
    let n = p.rows();
    let mut powers = vec![Matrix::<f64>::identity(n)];
    for k in 1..=max_len {
        powers.push(powers[k - 1].mul(&p));
    }
    let trace = |m: &Matrix<f64>| (0..n).map(|i| m[(i, i)]).sum::<f64>();
    let masses: Vec<f64> = (1..=max_len).map(|k| trace(&powers[k]) / k as f64).collect();
    let total: f64 = masses.iter().sum();
    if total <= 0.0 {
        return Ok(SoupRealization::new(t, Vec::new()));
    }
    let count = Poisson::new(t * total).map_err(|e| Error::Numerical(e.to_string()))?.sample(rng) as usize;
    let lengths = WeightedIndex::new(&masses).map_err(|e| Error::Numerical(e.to_string()))?;
    let mut arrivals = Vec::with_capacity(count);
    for _ in 0..count {
        let len = lengths.sample(rng) + 1;
        let diag: Vec<f64> = (0..n).map(|i| powers[len][(i, i)]).collect();
        let x = WeightedIndex::new(&diag).map_err(|e| Error::Numerical(e.to_string()))?.sample(rng);
        let mut path = vec![x];
        let mut v = x;
        for step in 1..=len {
            let rest = &powers[len - step];
            let w: Vec<f64> = (0..n).map(|u| p[(v, u)] * rest[(u, x)]).collect();
            v = WeightedIndex::new(&w).map_err(|e| Error::Numerical(e.to_string()))?.sample(rng);
            path.push(v);
        }
        arrivals.push(Arrival { time: rng.random::<f64>() * t, lp: RootedLoop::new(path)?, site: None });
    }
    Ok(SoupRealization::new(t, arrivals))
}

// ---------------------------------------------------------------------------
// Currents

/// Nonnegative integer labels on undirected edges `(u, v)`, `u ≤ v`, with
/// integer local times `n_x = ½ Σ_e k_e n_e(x)` (a self-edge counts twice).
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Current {
    k: BTreeMap<(Vertex, Vertex), u64>,
}

impl Current {
    /// Validates the parity condition; zero entries are dropped.
    pub fn new(k: impl IntoIterator<Item = ((Vertex, Vertex), u64)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for ((u, v), c) in k {
            if c > 0 {
                *map.entry((u.min(v), u.max(v))).or_insert(0) += c;
            }
        }
        let cur = Current { k: map };
        let mut odd: BTreeMap<Vertex, u64> = BTreeMap::new();
        for (&(u, v), &c) in &cur.k {
            if u != v {
                *odd.entry(u).or_insert(0) += c;
                *odd.entry(v).or_insert(0) += c;
            }
        }
        if let Some((x, _)) = odd.iter().find(|(_, c)| *c % 2 == 1) {
            return Err(Error::InvalidInput(format!("vertex {x} has odd incidence")));
        }
        Ok(cur)
    }

    pub fn zero() -> Self {
        Current::default()
    }

    pub fn get(&self, u: Vertex, v: Vertex) -> u64 {
        self.k.get(&(u.min(v), u.max(v))).copied().unwrap_or(0)
    }

    pub fn entries(&self) -> impl Iterator<Item = ((Vertex, Vertex), u64)> + '_ {
        self.k.iter().map(|(&e, &c)| (e, c))
    }

    pub fn is_zero(&self) -> bool {
        self.k.is_empty()
    }

    /// `n_x`.
    pub fn local_time(&self, x: Vertex) -> u64 {
        let twice: u64 = self
            .k
            .iter()
            .map(|(&(u, v), &c)| if u == v && u == x { 2 * c } else if u == x || v == x { c } else { 0 })
            .sum();
        twice / 2
    }

    /// `S(k̄)`: total count on non-self edges.
    pub fn s(&self) -> u64 {
        self.k.iter().filter(|((u, v), _)| u != v).map(|(_, c)| c).sum()
    }

    pub fn total(&self) -> u64 {
        self.k.values().sum()
    }
}

/// Undirected traversal counts of a collection of loops.
pub fn project_current<'a>(loops: impl IntoIterator<Item = &'a RootedLoop>) -> Current {
    let mut k: BTreeMap<(Vertex, Vertex), u64> = BTreeMap::new();
    for l in loops {
        for w in l.vertices().windows(2) {
            *k.entry((w[0].min(w[1]), w[0].max(w[1]))).or_insert(0) += 1;
        }
    }
    Current::new(k).expect("closed walks project to currents")
}

/// `θ_e` for the undirected edge `{u, v}`: `2 q(u, v)` off the diagonal and
/// `q(u, u)` on it.
pub fn edge_theta<S: Scalar>(chain: &WeightedChain<S>, u: Vertex, v: Vertex) -> S {
    if u == v {
        chain.q(u, u)
    } else {
        chain.q(u, v) * S::from_f64(2.0)
    }
}

fn check_symmetric<S: Scalar>(chain: &WeightedChain<S>) -> Result<()> {
    let ok = chain.symmetry() == Symmetry::Symmetric
        || chain.edges().all(|(u, v, w)| !chain.is_interior(u) || !chain.is_interior(v) || chain.q(v, u) == *w);
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidInput("the current law needs symmetric weights".into()))
    }
}

/// `Γ(n + ½) / √π`.
fn half_gamma_ratio(n: u64) -> f64 {
    (ln_gamma(n as f64 + 0.5) - ln_gamma(0.5)).exp()
}

/// Law of the current of the loop soup at intensity ½:
/// `√D ∏_x Γ(n_x + ½)/√π ∏_e θ_e^{k_e} / k_e!`, `D = det(I - Q)`.
pub fn current_pmf_half<S: Scalar>(chain: &WeightedChain<S>, k: &Current) -> Result<Complex64> {
    check_symmetric(chain)?;
    if !chain.classify().is_integrable() {
        return Err(Error::NotGreen("the current law needs an integrable weight".into()));
    }
    let all: Vec<Vertex> = chain.interior().collect();
    let d = chain.det_i_minus_q_on(&all).to_complex();
    let mut p = d.sqrt();
    let mut n = vec![0u64; chain.n_interior()];
    for ((u, v), c) in k.entries() {
        if !chain.is_interior(u) || !chain.is_interior(v) {
            return Err(Error::InvalidInput("current on a non-interior edge".into()));
        }
        n[u] += c;
        n[v] += c;
        p *= edge_theta(chain, u, v).to_complex().powu(c as u32) / (ln_gamma(c as f64 + 1.0)).exp();
    }
    for nx in n {
        p *= half_gamma_ratio(nx / 2);
    }
    Ok(p)
}

/// Interior edges `{u, v}` with nonzero weight, `u ≤ v`.
pub fn interior_edges<S: Scalar>(chain: &WeightedChain<S>) -> Vec<(Vertex, Vertex)> {
    let mut e: Vec<(Vertex, Vertex)> = chain
        .edges()
        .filter(|(u, v, w)| u <= v && chain.is_interior(*u) && chain.is_interior(*v) && !w.is_zero())
        .map(|(u, v, _)| (u, v))
        .collect();
    e.dedup();
    e
}

/// Every current with `k_e ≤ max_k` on the interior edges.
pub fn enumerate_currents<S: Scalar>(chain: &WeightedChain<S>, max_k: u64) -> Result<Vec<Current>> {
    let edges = interior_edges(chain);
    let count = ((max_k + 1) as f64).powi(edges.len() as i32);
    if count > 5e6 {
        return Err(Error::Size(format!("{count:.0} label vectors")));
    }
    let mut out = Vec::new();
    let mut k = vec![0u64; edges.len()];
    loop {
        if let Ok(c) = Current::new(edges.iter().copied().zip(k.iter().copied())) {
            out.push(c);
        }
        let mut i = 0;
        while i < k.len() && k[i] == max_k {
            k[i] = 0;
            i += 1;
        }
        if i == k.len() {
            break;
        }
        k[i] += 1;
    }
    Ok(out)
}

/// Exact current law of the bubble soup at intensity ½ on a two-vertex chain
/// with ordering `(x, y) = (0, 1)`, for every current with `k_xx ≤ max_k`,
/// `k_xy ≤ 2 max_k` and `k_yy ≤ max_k`.
///
/// At `x` the growing loop has `K₁ = a + b` elementary loops: `a` self-loops
/// and `b` excursions `x → y → … → x` that wait `s` steps at `y` in total.
/// At `y` the growing loop is `K₂` self-loops. The law of `(a, b, s)` is
/// `NB(K₁) C(K₁, a) q_xx^a (q_xy q_yx)^b C(s+b-1, b-1) q_yy^s / f_x^{K₁}`, and
/// the resulting current is `(a, 2b, s + K₂)`.
pub fn bubble_current_law_two_point(chain: &WeightedChain<f64>, max_k: u64) -> Result<Vec<(Current, f64)>> {
    if chain.n_interior() != 2 {
        return Err(Error::InvalidInput("two interior vertices required".into()));
    }
    TransitionTable::new(chain)?;
    let (qxx, qyy) = (chain.q(0, 0), chain.q(1, 1));
    let qxyx = chain.q(0, 1) * chain.q(1, 0);
    let fx = return_probability(chain, &[0, 1], 0)?;
    let ln_choose = |n: u64, k: u64| ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0);
    // NB(n; f_x, ½) / f_x^n
    let head = |n: u64| nb_coefficient(0.5, n) * (1.0 - fx).sqrt();
    let pow = |q: f64, e: u64| if e == 0 { 1.0 } else { q.powi(e as i32) };
    let mut out = Vec::new();
    for a in 0..=max_k {
        for b in 0..=max_k {
            let n = a + b;
            let x_part = head(n) * ln_choose(n, a).exp() * pow(qxx, a) * pow(qxyx, b);
            for c in 0..=max_k {
                let mut p = 0.0;
                for s in 0..=c {
                    let waits = match (b, s) {
                        (0, 0) => 1.0,
                        (0, _) => 0.0,
                        _ => ln_choose(s + b - 1, b - 1).exp() * pow(qyy, s),
                    };
                    p += x_part * waits * negbin_real(qyy, 0.5, c - s);
                }
                let cur = Current::new([((0, 0), a), ((0, 1), 2 * b), ((1, 1), c)]).expect("even by construction");
                out.push((cur, p));
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Exact identities

/// `coef · (√π)^power` with a rational coefficient.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SqrtPiRational {
    pub coef: BigRational,
    pub power: u32,
}

impl SqrtPiRational {
    pub fn to_f64(&self) -> f64 {
        use num_traits::ToPrimitive;
        self.coef.to_f64().unwrap_or(f64::NAN) * std::f64::consts::PI.sqrt().powi(self.power as i32)
    }
}

fn factorial(n: u64) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, i| acc * BigInt::from(i))
}

/// `Γ(n + ½) / √π = (2n)! / (4ⁿ n!)`.
pub fn half_gamma_exact(n: u64) -> BigRational {
    BigRational::new(factorial(2 * n), BigInt::from(4u8).pow(n as u32) * factorial(n))
}

/// Both sides of the graph identity for a multigraph on `0..n` whose edges
/// (self-edges allowed, parallel edges distinct) carry the current `k`:
///
/// `2^{-S(k)} Σ_{π(ω̄)=k} ∏_j Γ(N_j+½)/N_j!  =  ∏_x Γ(n_x+½) ∏_e 1/k_e!`
///
/// where `ω_j` is a closed edge walk at `ordering[j]` avoiding earlier
/// vertices, `N_j` its number of returns, and `π` counts edge traversals.
pub fn graph_identity_sides(n: usize, edges: &[(usize, usize)], k: &[u64], ordering: &[usize]) -> Result<(SqrtPiRational, SqrtPiRational)> {
    if edges.len() != k.len() || edges.iter().any(|&(u, v)| u >= n || v >= n) {
        return Err(Error::InvalidInput("edges and labels do not match the vertex set".into()));
    }
    let mut sorted = ordering.to_vec();
    sorted.sort_unstable();
    if sorted != (0..n).collect::<Vec<_>>() {
        return Err(Error::InvalidInput("ordering must be a permutation of the vertices".into()));
    }
    let mut twice_n = vec![0u64; n];
    for (&(u, v), &c) in edges.iter().zip(k) {
        twice_n[u] += c;
        twice_n[v] += c;
    }
    if twice_n.iter().enumerate().any(|(x, &t)| {
        let self_part: u64 = edges.iter().zip(k).filter(|((u, v), _)| *u == x && *v == x).map(|(_, c)| 2 * c).sum();
        (t - self_part) % 2 == 1
    }) {
        return Err(Error::InvalidInput("labels are not a current".into()));
    }

    let mut rhs = BigRational::one();
    for &t in &twice_n {
        rhs *= half_gamma_exact(t / 2);
    }
    for &c in k {
        rhs /= BigRational::from_integer(factorial(c));
    }

    let mut incident: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (e, &(u, v)) in edges.iter().enumerate() {
        incident[u].push((e, v));
        if u != v {
            incident[v].push((e, u));
        }
    }
    let mut walker = Walker {
        incident,
        ordering: ordering.to_vec(),
        removed: vec![false; n],
        remaining: k.to_vec(),
        weights: Vec::new(),
        sum: BigRational::zero(),
        steps: 0,
    };
    walker.site(0)?;
    let s: u64 = edges.iter().zip(k).filter(|((u, v), _)| u != v).map(|(_, c)| c).sum();
    let lhs = walker.sum / BigRational::from_integer(BigInt::from(2u8).pow(s as u32));
    Ok((SqrtPiRational { coef: lhs, power: n as u32 }, SqrtPiRational { coef: rhs, power: n as u32 }))
}

const MAX_WALK_STEPS: u64 = 200_000_000;

struct Walker {
    incident: Vec<Vec<(usize, usize)>>,
    ordering: Vec<usize>,
    removed: Vec<bool>,
    remaining: Vec<u64>,
    /// Return counts `N_j` of the loops chosen so far.
    weights: Vec<u64>,
    sum: BigRational,
    steps: u64,
}

impl Walker {
    fn site(&mut self, j: usize) -> Result<()> {
        if j == self.ordering.len() {
            if self.remaining.iter().all(|&c| c == 0) {
                let mut term = BigRational::one();
                for &nj in &self.weights {
                    term *= half_gamma_exact(nj) / BigRational::from_integer(factorial(nj));
                }
                self.sum += term;
            }
            return Ok(());
        }
        let x = self.ordering[j];
        self.walk(j, x, x, 0)
    }

    fn walk(&mut self, j: usize, x: usize, v: usize, returns: u64) -> Result<()> {
        self.steps += 1;
        if self.steps > MAX_WALK_STEPS {
            return Err(Error::Size("loop enumeration exceeded its step budget".into()));
        }
        if v == x && self.incident[x].iter().all(|&(e, _)| self.remaining[e] == 0) {
            self.removed[x] = true;
            self.weights.push(returns);
            self.site(j + 1)?;
            self.weights.pop();
            self.removed[x] = false;
        }
        for i in 0..self.incident[v].len() {
            let (e, u) = self.incident[v][i];
            if self.remaining[e] == 0 || self.removed[u] {
                continue;
            }
            self.remaining[e] -= 1;
            self.walk(j, x, u, returns + (u == x) as u64)?;
            self.remaining[e] += 1;
        }
        Ok(())
    }
}

/// Both sides of the pairing identity for `k_1, …, k_n` with `Σ k_j = 2K`:
/// `Σ 2^B K! / (∏ a_j! ∏ b_ij!) = (2K)! / ∏ k_j!`, summing over `a_j ≥ 0`,
/// `b_ij ≥ 0` (`i < j`) with `k_j = 2a_j + Σ_{i≠j} b_ij` and `B = Σ b_ij`.
pub fn pairing_identity_sides(big_k: u64, k: &[u64]) -> Result<(BigUint, BigUint)> {
    if k.iter().sum::<u64>() != 2 * big_k {
        return Err(Error::InvalidInput(format!("labels must sum to 2K = {}", 2 * big_k)));
    }
    let fact = |n: u64| (1..=n).fold(BigUint::one(), |acc, i| acc * BigUint::from(i));
    let rhs = k.iter().fold(fact(2 * big_k), |acc, &c| acc / fact(c));
    let pairs: Vec<(usize, usize)> = (0..k.len()).flat_map(|i| (i + 1..k.len()).map(move |j| (i, j))).collect();
    let kf = fact(big_k);
    let mut lhs = BigUint::zero();
    let mut rem = k.to_vec();
    let mut b = vec![0u64; pairs.len()];
    fn rec(
        p: usize,
        pairs: &[(usize, usize)],
        rem: &mut Vec<u64>,
        b: &mut Vec<u64>,
        kf: &BigUint,
        fact: &dyn Fn(u64) -> BigUint,
        lhs: &mut BigUint,
    ) {
        if p == pairs.len() {
            if rem.iter().any(|r| r % 2 == 1) {
                return;
            }
            let big_b: u64 = b.iter().sum();
            let mut den = BigUint::one();
            for r in rem.iter() {
                den *= fact(r / 2);
            }
            for &x in b.iter() {
                den *= fact(x);
            }
            *lhs += (BigUint::one() << big_b) * kf / den;
            return;
        }
        let (i, j) = pairs[p];
        for x in 0..=rem[i].min(rem[j]) {
            rem[i] -= x;
            rem[j] -= x;
            b[p] = x;
            rec(p + 1, pairs, rem, b, kf, fact, lhs);
            rem[i] += x;
            rem[j] += x;
        }
        b[p] = 0;
    }
    rec(0, &pairs, &mut rem, &mut b, &kf, &fact, &mut lhs);
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builders::{two_point, two_point_theta};
    use crate::rng::derive_stream;

    #[test]
    fn negbin_examples() {
        let f = Complex64::new(0.25, 0.0);
        assert!((negbin_pmf(f, 0.5, 0).unwrap().re - 0.75f64.sqrt()).abs() < 1e-15);
        assert!((negbin_pmf(f, 0.5, 1).unwrap().re - 0.5 * 0.25 * 0.75f64.sqrt()).abs() < 1e-15);
        for k in 0..10 {
            let geo = 0.25f64.powi(k as i32) * 0.75;
            assert!((negbin_pmf(f, 1.0, k).unwrap().re - geo).abs() < 1e-15);
        }
        assert!(negbin_pmf(Complex64::new(1.0, 0.0), 0.5, 0).is_err());
        let z = Complex64::from_polar(0.6, 1.0);
        let total: Complex64 = (0..200).map(|k| negbin_pmf(z, 0.7, k).unwrap()).sum();
        assert!((total - 1.0).norm() < 1e-12);
    }

    #[test]
    fn negbin_solves_its_ode() {
        for &z in &[0.1, 0.25, 0.6, 0.9] {
            for i in 1..=20 {
                let t = 0.1 * i as f64;
                for r in 0..12 {
                    assert!(negbin_ode_residual(z, t, r) < 1e-8, "z={z} t={t} r={r}");
                }
            }
        }
    }

    #[test]
    fn negbin_sampler_mean() {
        let mut rng = derive_stream(3, 0);
        let n = 40_000;
        let m: f64 = (0..n).map(|_| sample_negbin(0.25, 0.5, &mut rng) as f64).sum::<f64>() / n as f64;
        // mean t f / (1 - f) = 1/6
        assert!((m - 1.0 / 6.0).abs() < 0.01);
    }

    #[test]
    fn projection_examples() {
        assert!(project_current(std::iter::empty()).is_zero());
        let l = RootedLoop::new(vec![0, 1, 0]).unwrap();
        let c = project_current([&l]);
        assert_eq!(c.get(0, 1), 2);
        assert_eq!((c.local_time(0), c.local_time(1)), (1, 1));
        let self_loop = RootedLoop::new(vec![0, 0]).unwrap();
        let c = project_current([&self_loop]);
        assert_eq!(c.local_time(0), 1);
        assert!(Current::new([((0, 1), 1)]).is_err());
    }

    #[test]
    fn two_point_pmf_values() {
        let c = two_point(0.5);
        let zero = current_pmf_half(&c, &Current::zero()).unwrap();
        assert!((zero.re - 0.75f64.sqrt()).abs() < 1e-14);
        let k = Current::new([((0, 1), 2)]).unwrap();
        let p = current_pmf_half(&c, &k).unwrap();
        assert!((p.re - 0.75f64.sqrt() * 0.25 * 0.5).abs() < 1e-14);
    }

    #[test]
    fn current_law_matches_bubble_dp() {
        for c in [two_point(0.5), two_point_theta(0.2, 0.6, 0.3), two_point_theta(0.0, 0.9, 0.4)] {
            let law = bubble_current_law_two_point(&c, 40).unwrap();
            let coverage: f64 = law.iter().map(|(_, p)| p).sum();
            assert!(coverage > 1.0 - 1e-8, "coverage {coverage}");
            for (k, p) in &law {
                let f = current_pmf_half(&c, k).unwrap().re;
                assert!((f - p).abs() < 1e-12, "{k:?} formula {f} dp {p}");
            }
        }
    }

    #[test]
    fn graph_identity_small_cases() {
        let (l, r) = graph_identity_sides(1, &[(0, 0)], &[1], &[0]).unwrap();
        assert_eq!(l, r);
        assert!((l.to_f64() - std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-15);
        let (l, r) = graph_identity_sides(2, &[(0, 1), (0, 1), (1, 1)], &[1, 3, 2], &[1, 0]).unwrap();
        assert_eq!(l, r);
        assert!(graph_identity_sides(2, &[(0, 1)], &[1], &[0, 1]).is_err());
    }

    #[test]
    fn pairing_small_cases() {
        let (l, r) = pairing_identity_sides(1, &[1, 1]).unwrap();
        assert_eq!((l.clone(), r), (BigUint::from(2u8), BigUint::from(2u8)));
        let (l, r) = pairing_identity_sides(3, &[6]).unwrap();
        assert_eq!(l, r);
        assert!(pairing_identity_sides(2, &[1, 2]).is_err());
    }

    #[test]
    fn trivial_growing_loop_without_returns() {
        let c = WeightedChain::<f64>::from_labels(&["x"], &["z"], &[("x", "z", 1.0)], Symmetry::General).unwrap();
        let mut rng = derive_stream(1, 0);
        for _ in 0..50 {
            assert!(sample_growing_loop(&c, 0, &[0], 0.5, &mut rng).unwrap().is_trivial());
        }
    }

    #[test]
    fn bubble_pmf_at_unit_intensity() {
        let c = two_point(0.5);
        let loops = vec![RootedLoop::new(vec![0, 1, 0]).unwrap(), RootedLoop::trivial(1)];
        let p = bubble_soup_pmf(&c, &[0, 1], &loops, 1.0).unwrap();
        // q(l̄) / det G with det G = 4/3
        assert!((p.re - 0.25 * 0.75).abs() < 1e-15);
    }
}
