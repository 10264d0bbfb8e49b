//! Gaussian fields with covariance `G`, the soup construction of their
//! squares, the conditional sign law, and Lupu's cluster-sign sampler.

use std::collections::BTreeMap;

use petgraph::unionfind::UnionFind;
use rand::Rng as _;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};

use crate::chain::{Symmetry, Vertex, WeightedChain};
use crate::error::{Error, Result};
use crate::linalg::{cholesky, Matrix};
use crate::rng::Rng;
use crate::soup::{edge_theta, interior_edges, BubbleSampler, Current};
use crate::stats::{ks_two_sample, Moments};

/// Symmetric edge function `θ` on undirected edges of `A`, self-edges
/// included. The matching weight is `q(x, y) = θ_xy / 2`, `q(x, x) = θ_xx`.
#[derive(Clone, Debug, PartialEq)]
pub struct Theta {
    pub labels: Vec<String>,
    pub theta: BTreeMap<(Vertex, Vertex), f64>,
}

impl Theta {
    pub fn new(labels: Vec<String>, theta: impl IntoIterator<Item = ((Vertex, Vertex), f64)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for ((u, v), th) in theta {
            if u >= labels.len() || v >= labels.len() {
                return Err(Error::InvalidInput(format!("edge ({u},{v}) outside the vertex set")));
            }
            if th != 0.0 {
                *map.entry((u.min(v), u.max(v))).or_insert(0.0) += th;
            }
        }
        Ok(Theta { labels, theta: map })
    }

    /// Reads `θ` off the interior of a symmetric real chain.
    pub fn from_chain(chain: &WeightedChain<f64>) -> Self {
        let theta = interior_edges(chain).into_iter().map(|(u, v)| ((u, v), edge_theta(chain, u, v))).collect();
        Theta { labels: chain.interior().map(|v| chain.label(v).to_string()).collect(), theta }
    }

    /// Symmetric chain on `A` with no boundary.
    pub fn to_chain(&self) -> Result<WeightedChain<f64>> {
        let edges = self.theta.iter().map(|(&(u, v), &th)| (u, v, if u == v { th } else { th / 2.0 })).collect();
        WeightedChain::new(self.labels.clone(), Vec::new(), edges, Symmetry::Symmetric)
    }

    pub fn get(&self, u: Vertex, v: Vertex) -> f64 {
        self.theta.get(&(u.min(v), u.max(v))).copied().unwrap_or(0.0)
    }

    /// `ρ_e = θ_e √t_e` with `t_e = t_x t_y` (`t_x²` on a self-edge).
    pub fn rho(&self, t: &[f64]) -> BTreeMap<(Vertex, Vertex), f64> {
        self.theta.iter().map(|(&(u, v), &th)| ((u, v), th * (t[u] * t[v]).sqrt())).collect()
    }
}

/// Field values `Z_x`; `T_x = Z_x² / 2` and `J_x = sign(Z_x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldSample {
    pub z: Vec<f64>,
}

impl FieldSample {
    pub fn from_parts(t: &[f64], j: &[i8]) -> Self {
        FieldSample { z: t.iter().zip(j).map(|(t, &j)| j as f64 * (2.0 * t).sqrt()).collect() }
    }

    pub fn t(&self) -> Vec<f64> {
        self.z.iter().map(|z| z * z / 2.0).collect()
    }

    pub fn j(&self) -> Vec<i8> {
        self.z.iter().map(|&z| if z < 0.0 { -1 } else { 1 }).collect()
    }
}

fn real_green(chain: &WeightedChain<f64>) -> Result<Matrix<f64>> {
    Ok(chain.green()?.g)
}

/// Centered Gaussian sampler with covariance `G = (I - Q)⁻¹` through a
/// Cholesky factor of `G`.
#[derive(Clone, Debug)]
pub struct GffSampler {
    factor: Matrix<f64>,
}

impl GffSampler {
    pub fn new(chain: &WeightedChain<f64>) -> Result<Self> {
        Ok(GffSampler { factor: cholesky(&real_green(chain)?)? })
    }

    pub fn sample(&self, rng: &mut Rng) -> FieldSample {
        let xi: Vec<f64> = (0..self.factor.rows()).map(|_| rng.sample(StandardNormal)).collect();
        FieldSample { z: self.factor.mul_vec(&xi) }
    }
}

pub fn sample_gff(chain: &WeightedChain<f64>, rng: &mut Rng) -> Result<FieldSample> {
    Ok(GffSampler::new(chain)?.sample(rng))
}

/// `φ(z) √D exp{½ Σ_e θ_e z_e}` with `φ` the standard normal density on
/// `R^A`, `D = det(I - Q)`, and `z_e = z_x z_y` (`z_x²` on a self-edge).
/// Signed `θ` is accepted.
pub fn field_density(theta: &Theta, z: &[f64]) -> Result<f64> {
    let chain = theta.to_chain()?;
    let all: Vec<Vertex> = chain.interior().collect();
    let d = chain.det_i_minus_q_on(&all);
    if d <= 0.0 {
        return Err(Error::NotGreen(format!("det(I - Q) = {d}")));
    }
    let n = z.len() as f64;
    let quad: f64 = z.iter().map(|x| x * x).sum();
    let pair: f64 = theta.theta.iter().map(|(&(u, v), th)| th * z[u] * z[v]).sum();
    Ok((2.0 * std::f64::consts::PI).powf(-n / 2.0) * d.sqrt() * (-quad / 2.0 + pair / 2.0).exp())
}

/// Normal density with covariance `G`, evaluated through its Cholesky factor;
/// an independent route to [`field_density`].
pub fn normal_density(g: &Matrix<f64>, z: &[f64]) -> Result<f64> {
    let l = cholesky(g)?;
    let n = z.len();
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[(i, k)] * y[k]).sum();
        y[i] = (z[i] - s) / l[(i, i)];
    }
    let log_det: f64 = (0..n).map(|i| l[(i, i)].ln()).sum();
    let q: f64 = y.iter().map(|v| v * v).sum();
    Ok((-(n as f64) / 2.0 * (2.0 * std::f64::consts::PI).ln() - log_det - q / 2.0).exp())
}

/// `Gamma(n, 1)` as a sum of `n` exponentials for `n ≤ 64`.
fn gamma_integer(n: u64, rng: &mut Rng) -> f64 {
    if n == 0 {
        0.0
    } else if n <= 64 {
        (0..n).map(|_| rng.sample::<f64, _>(Exp1)).sum()
    } else {
        Gamma::new(n as f64, 1.0).expect("positive shape").sample(rng)
    }
}

/// Soup construction of the squared field: a bubble soup at intensity ½
/// gives the current `k̄` and local times `n_x`; then
/// `t_x = N_x²/2 + Gamma(n_x, 1)` with independent standard normals `N_x`.
#[derive(Clone, Debug)]
pub struct SoupFieldSampler {
    soup: BubbleSampler,
}

impl SoupFieldSampler {
    pub fn new(chain: &WeightedChain<f64>) -> Result<Self> {
        let order: Vec<Vertex> = chain.interior().collect();
        Ok(SoupFieldSampler { soup: BubbleSampler::new(chain, &order, 0.5)? })
    }

    pub fn sample(&self, rng: &mut Rng) -> Result<(Current, Vec<f64>)> {
        let k = self.soup.sample_current(rng)?;
        let t = (0..self.soup.ordering().len())
            .map(|x| {
                let r: f64 = rng.sample(StandardNormal);
                r * r / 2.0 + gamma_integer(k.local_time(x), rng)
            })
            .collect();
        Ok((k, t))
    }
}

pub fn sample_t_from_soup(chain: &WeightedChain<f64>, rng: &mut Rng) -> Result<(Current, Vec<f64>)> {
    SoupFieldSampler::new(chain)?.sample(rng)
}

/// Minimum sample count for [`le_jan_marginal_check`].
pub const MIN_MARGINAL_SAMPLES: usize = 10_000;

/// Comparison of two samples of `t̄`.
#[derive(Clone, Debug)]
pub struct MarginalReport {
    /// Two-sample Kolmogorov–Smirnov p-value per vertex.
    pub ks_p: Vec<f64>,
    /// Two-sample z-scores of `E[t_x]` and `E[t_x t_y]`, `x ≤ y`.
    pub moment_z: Vec<f64>,
}

impl MarginalReport {
    pub fn min_ks_p(&self) -> f64 {
        self.ks_p.iter().cloned().fold(1.0, f64::min)
    }

    pub fn max_abs_z(&self) -> f64 {
        self.moment_z.iter().map(|z| z.abs()).fold(0.0, f64::max)
    }

    pub fn passes(&self, min_p: f64, max_z: f64) -> bool {
        self.min_ks_p() > min_p && self.max_abs_z() < max_z
    }
}

fn two_sample_z(a: &Moments, b: &Moments) -> f64 {
    let se = (a.std_error().powi(2) + b.std_error().powi(2)).sqrt();
    if se == 0.0 {
        if a.mean == b.mean {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (a.mean - b.mean) / se
    }
}

/// Per-vertex KS tests and first/second moment comparisons between two
/// samples of `t̄` (one vector per draw).
pub fn le_jan_marginal_check(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<MarginalReport> {
    let got = a.len().min(b.len());
    if got < MIN_MARGINAL_SAMPLES {
        return Err(Error::InsufficientSamples { got, need: MIN_MARGINAL_SAMPLES });
    }
    let n = a[0].len();
    let column = |s: &[Vec<f64>], x: usize| s.iter().map(|v| v[x]).collect::<Vec<f64>>();
    let ks_p = (0..n).map(|x| ks_two_sample(&column(a, x), &column(b, x)).p_value).collect();
    let mut moment_z = Vec::new();
    for x in 0..n {
        let ma: Moments = a.iter().map(|v| v[x]).collect();
        let mb: Moments = b.iter().map(|v| v[x]).collect();
        moment_z.push(two_sample_z(&ma, &mb));
        for y in x..n {
            let ma: Moments = a.iter().map(|v| v[x] * v[y]).collect();
            let mb: Moments = b.iter().map(|v| v[x] * v[y]).collect();
            moment_z.push(two_sample_z(&ma, &mb));
        }
    }
    Ok(MarginalReport { ks_p, moment_z })
}

/// Largest vertex set for exact sign enumeration.
pub const MAX_SIGN_VERTICES: usize = 20;

/// Law of `J̄` given `T̄ = t̄`: proportional to `exp{Σ_e θ_e J_e √t_e}` with
/// `J_e = J_x J_y`, over all `2^|A|` sign vectors (bit `x` set means
/// `J_x = -1`).
pub fn sign_conditional_law(theta: &Theta, t: &[f64]) -> Result<Vec<f64>> {
    let n = theta.labels.len();
    if n > MAX_SIGN_VERTICES {
        return Err(Error::Size(format!("{n} vertices; use lupu_sample")));
    }
    let rho: Vec<((Vertex, Vertex), f64)> = theta.rho(t).into_iter().filter(|((u, v), _)| u != v).collect();
    let logw: Vec<f64> = (0..1u64 << n)
        .map(|m| rho.iter().map(|&((u, v), r)| if ((m >> u) ^ (m >> v)) & 1 == 0 { r } else { -r }).sum())
        .collect();
    let top = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logw.iter().map(|l| (l - top).exp()).collect();
    let z: f64 = w.iter().sum();
    Ok(w.into_iter().map(|x| x / z).collect())
}

/// Lupu's construction: soup at ½ → `(k̄, t̄)`; an edge is open if `k_e ≥ 1`,
/// otherwise independently with probability `1 - e^{-ρ_e}`; each open
/// cluster gets a uniform sign, drawn in increasing order of the cluster's
/// smallest vertex; `Z_x = J_U √(2 t_x)`.
#[derive(Clone, Debug)]
pub struct LupuSampler {
    soup: SoupFieldSampler,
    theta: Theta,
}

impl LupuSampler {
    pub fn new(chain: &WeightedChain<f64>) -> Result<Self> {
        let theta = Theta::from_chain(chain);
        if theta.theta.values().any(|&th| th < 0.0) {
            return Err(Error::Refused("Lupu's sampler needs nonnegative θ".into()));
        }
        Ok(LupuSampler { soup: SoupFieldSampler::new(chain)?, theta })
    }

    pub fn sample(&self, rng: &mut Rng) -> Result<FieldSample> {
        let (k, t) = self.soup.sample(rng)?;
        let n = t.len();
        let mut uf = UnionFind::new(n);
        for (&(u, v), &th) in &self.theta.theta {
            if u == v {
                continue;
            }
            let open = k.get(u, v) >= 1 || rng.random::<f64>() < 1.0 - (-th * (t[u] * t[v]).sqrt()).exp();
            if open {
                uf.union(u, v);
            }
        }
        let mut sign: Vec<i8> = vec![0; n];
        let mut cluster_sign: BTreeMap<usize, i8> = BTreeMap::new();
        for x in 0..n {
            let root = uf.find(x);
            let s = *cluster_sign.entry(root).or_insert_with(|| if rng.random::<bool>() { 1 } else { -1 });
            sign[x] = s;
        }
        Ok(FieldSample::from_parts(&t, &sign))
    }
}

pub fn lupu_sample(chain: &WeightedChain<f64>, rng: &mut Rng) -> Result<FieldSample> {
    LupuSampler::new(chain)?.sample(rng)
}

/// `E[exp Σ_e J_e ρ_e]` for independent uniform signs, by enumeration.
pub fn jj_expectation(n: usize, rho: &BTreeMap<(Vertex, Vertex), f64>) -> Result<f64> {
    if n > MAX_SIGN_VERTICES {
        return Err(Error::Size(format!("{n} vertices")));
    }
    let total: f64 = (0..1u64 << n)
        .map(|m| rho.iter().map(|(&(u, v), &r)| if ((m >> u) ^ (m >> v)) & 1 == 0 { r } else { -r }).sum::<f64>().exp())
        .sum();
    Ok(total / (1u64 << n) as f64)
}

/// `Ψ(k̄, ρ̄) = ∏_e ρ_e^{k_e} / k_e!`.
pub fn psi(k: &Current, rho: &BTreeMap<(Vertex, Vertex), f64>) -> f64 {
    k.entries()
        .map(|(e, c)| {
            let r = rho.get(&e).copied().unwrap_or(0.0);
            r.powi(c as i32) / (1..=c).map(|i| i as f64).product::<f64>()
        })
        .product()
}

/// Both sides of `E[exp Σ_e J_e ρ_e] = Σ_{k̄ current} Ψ(k̄, ρ̄)`, the right
/// side summed over `k_e ≤ cutoff`. Fails when the certified tail of the
/// truncation exceeds `tol`.
pub fn jj_current_sum(n: usize, rho: &BTreeMap<(Vertex, Vertex), f64>, cutoff: u64, tol: f64) -> Result<(f64, f64)> {
    let lhs = jj_expectation(n, rho)?;
    let edges: Vec<((Vertex, Vertex), f64)> = rho.iter().map(|(&e, &r)| (e, r)).collect();
    // Σ over all label vectors of ∏|ρ|^k/k! is exp Σ|ρ|; the truncated box
    // sum is a product of partial exponential series.
    let full: f64 = edges.iter().map(|(_, r)| r.abs()).sum::<f64>().exp();
    let partial: f64 = edges
        .iter()
        .map(|(_, r)| {
            let mut term = 1.0;
            let mut s = 1.0;
            for k in 1..=cutoff {
                term *= r.abs() / k as f64;
                s += term;
            }
            s
        })
        .product();
    let tail = (full - partial).max(0.0);
    if tail > tol {
        return Err(Error::Tail { tail, tol });
    }
    let count = ((cutoff + 1) as f64).powi(edges.len() as i32);
    if count > 5e7 {
        return Err(Error::Size(format!("{count:.0} label vectors")));
    }
    let mut k = vec![0u64; edges.len()];
    let mut rhs = 0.0;
    loop {
        if let Ok(c) = Current::new(edges.iter().map(|(e, _)| *e).zip(k.iter().copied())) {
            rhs += psi(&c, rho);
        }
        let mut i = 0;
        while i < k.len() && k[i] == cutoff {
            k[i] = 0;
            i += 1;
        }
        if i == k.len() {
            break;
        }
        k[i] += 1;
    }
    Ok((lhs, rhs))
}

/// Conditional law of the current given `t̄`: `Ψ(k̄, ρ̄) / E[exp Σ J_e ρ_e]`.
pub fn current_conditional_pmf(theta: &Theta, t: &[f64], k: &Current) -> Result<f64> {
    let rho = theta.rho(t);
    Ok(psi(k, &rho) / jj_expectation(theta.labels.len(), &rho)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builders::{two_point, two_point_theta};
    use crate::rng::derive_stream;

    #[test]
    fn theta_round_trip() {
        let c = two_point_theta(0.2, 0.6, 0.3);
        let th = Theta::from_chain(&c);
        assert_eq!(th.get(0, 1), 0.6);
        assert_eq!(th.get(1, 1), 0.3);
        let back = Theta::from_chain(&th.to_chain().unwrap());
        assert_eq!(back, th);
    }

    #[test]
    fn density_matches_normal() {
        let c = two_point_theta(0.2, 0.6, 0.3);
        let th = Theta::from_chain(&c);
        let g = c.green().unwrap().g;
        for z in [[0.0, 0.0], [1.0, -0.5], [-2.0, 1.5]] {
            let a = field_density(&th, &z).unwrap();
            let b = normal_density(&g, &z).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn density_integrates_to_one() {
        let th = Theta::from_chain(&two_point(0.5));
        let h = 0.02;
        let mut total = 0.0;
        let m = 600;
        for i in -m..=m {
            for j in -m..=m {
                total += field_density(&th, &[i as f64 * h, j as f64 * h]).unwrap();
            }
        }
        assert!((total * h * h - 1.0).abs() < 1e-6);
    }

    #[test]
    fn sign_law_two_vertices() {
        let th = Theta::from_chain(&two_point(0.5));
        let t = [0.7, 1.3];
        let law = sign_conditional_law(&th, &t).unwrap();
        let rho = (0.7f64 * 1.3).sqrt();
        let same = law[0] + law[3];
        assert!((same - rho.exp() / (rho.exp() + (-rho).exp())).abs() < 1e-14);
        assert!((law[0] - law[3]).abs() < 1e-15);
    }

    #[test]
    fn jj_single_edge_and_triangle() {
        let rho: BTreeMap<_, _> = [((0, 1), 0.8)].into_iter().collect();
        let (l, r) = jj_current_sum(2, &rho, 30, 1e-13).unwrap();
        assert!((l - 0.8f64.cosh()).abs() < 1e-14 && (l - r).abs() < 1e-12);
        let rho: BTreeMap<_, _> = [((0, 1), 0.5), ((1, 2), -0.3), ((0, 2), 0.7), ((1, 1), -0.2)].into_iter().collect();
        let (l, r) = jj_current_sum(3, &rho, 25, 1e-12).unwrap();
        assert!((l - r).abs() < 1e-10);
        assert!(matches!(jj_current_sum(3, &rho, 3, 1e-12), Err(Error::Tail { .. })));
    }

    #[test]
    fn zero_theta_gives_independent_halves() {
        let c = WeightedChain::<f64>::from_labels(&["a", "b"], &[], &[], Symmetry::Symmetric).unwrap();
        let mut rng = derive_stream(4, 0);
        let s = SoupFieldSampler::new(&c).unwrap();
        for _ in 0..100 {
            let (k, _) = s.sample(&mut rng).unwrap();
            assert!(k.is_zero());
        }
        let law = sign_conditional_law(&Theta::from_chain(&c), &[1.0, 2.0]).unwrap();
        assert!(law.iter().all(|p| (p - 0.25).abs() < 1e-15));
    }

    #[test]
    fn lupu_and_direct_second_moments() {
        let c = two_point(0.5);
        let mut rng = derive_stream(8, 0);
        let lupu = LupuSampler::new(&c).unwrap();
        let direct = GffSampler::new(&c).unwrap();
        let n = 50_000;
        let (mut a, mut b) = (Moments::default(), Moments::default());
        for _ in 0..n {
            let z = lupu.sample(&mut rng).unwrap().z;
            a.push(z[0] * z[1]);
            let z = direct.sample(&mut rng).z;
            b.push(z[0] * z[1]);
        }
        assert!(a.z_score(2.0 / 3.0).abs() < 5.0);
        assert!(b.z_score(2.0 / 3.0).abs() < 5.0);
    }
}
