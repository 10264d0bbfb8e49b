//! Verification suites. Each numbered check reproduces one acceptance
//! criterion; `Scale::Full` uses the criterion's sample sizes and
//! `Scale::Quick` smaller ones for interactive runs.

use std::collections::{BTreeMap, HashMap};
use std::time::{Duration, Instant};

use loopforge_core::builders::{grid_killed, grid_srw, random_integrable, two_point, two_point_theta};
use loopforge_core::chain::{Vertex, WeightedChain};
use loopforge_core::isomorphism::{le_jan_marginal_check, GffSampler, LupuSampler, SoupFieldSampler};
use loopforge_core::lerw::{enumerate_lerw_law, sample_laplacian_walk, sample_lerw_with};
use loopforge_core::multipath::{edge_traversal_expectation, fomin_det_check, fomin_two_path_check, hat_h};
use loopforge_core::rng::{chunked_map, default_workers, derive_stream, Rng};
use loopforge_core::soup::{
    bubble_current_law_two_point, current_pmf_half, graph_identity_sides, negbin_pmf, pairing_identity_sides, sample_growing_loop,
};
use loopforge_core::spanning::{brute_force_tree_count, enumerate_spanning_trees, matrix_tree_count, walk_chain, wilson_default, Multigraph, WalkType};
use loopforge_core::stats::{binomial_z, chi_square_gof, Moments};
use loopforge_core::walk::TransitionTable;
use loopforge_core::z2::{crossing_exponent, grid, odd_loop_slope, DomainKind, LatticeDomain, Point};
use loopforge_core::{Error, Result};
use num_complex::Complex64;
use rand::seq::SliceRandom;

use crate::report::{Check, Report};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Scale {
    Quick,
    Full,
}

impl Scale {
    fn pick(self, full: usize, quick: usize) -> usize {
        match self {
            Scale::Full => full,
            Scale::Quick => quick,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scale::Full => "full",
            Scale::Quick => "quick",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    All,
    Determinant,
    Spanning,
    Lerw,
    Soup,
    SoupIdentities,
    Isomorphism,
    Fomin,
    Zipper,
    Z2,
    Determinism,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::All => "all",
            Suite::Determinant => "determinant",
            Suite::Spanning => "spanning",
            Suite::Lerw => "lerw",
            Suite::Soup => "soup",
            Suite::SoupIdentities => "soup-identities",
            Suite::Isomorphism => "isomorphism",
            Suite::Fomin => "fomin",
            Suite::Zipper => "zipper",
            Suite::Z2 => "z2",
            Suite::Determinism => "determinism",
        }
    }

    /// Suites whose report lists every instance.
    pub fn lists_instances(self) -> bool {
        matches!(self, Suite::SoupIdentities)
    }
}

/// Independent seed for check number `k` of a run seeded with `seed`.
pub fn check_seed(seed: u64, k: u64) -> u64 {
    seed.wrapping_add(k.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Chunk size used by every sampling check; fixed so results do not depend
/// on the worker count.
pub const CHUNK: usize = 10_000;

pub fn run_suite(suite: Suite, seed: u64, scale: Scale) -> Report {
    let checks: Vec<fn(u64, Scale) -> Check> = match suite {
        Suite::All => vec![
            c01_determinant_identity,
            c02_permutation_invariance,
            c03_kirchhoff,
            c04_wilson_uniformity,
            c05_lerw_law,
            c06_negative_binomial,
            c07_graph_identity,
            c08_current_law,
            c09_le_jan,
            c10_lupu,
            c11_fomin,
            c12_zipper,
            c13_odd_loop_slope,
            c14_crossing_exponent,
            c15_worker_independence,
        ],
        Suite::Determinant => vec![c01_determinant_identity, c02_permutation_invariance],
        Suite::Spanning => vec![c03_kirchhoff, c04_wilson_uniformity],
        Suite::Lerw => vec![c05_lerw_law],
        Suite::Soup => vec![c06_negative_binomial, c08_current_law],
        Suite::SoupIdentities => vec![c07_graph_identity],
        Suite::Isomorphism => vec![c09_le_jan, c10_lupu],
        Suite::Fomin => vec![c11_fomin],
        Suite::Zipper => vec![c12_zipper],
        Suite::Z2 => vec![c13_odd_loop_slope, c14_crossing_exponent],
        Suite::Determinism => vec![c15_worker_independence],
    };
    Report { suite: suite.name().into(), seed, scale: scale.name().into(), checks: checks.iter().map(|c| c(seed, scale)).collect() }
}

fn timed(id: &str, limit: Option<Duration>, f: impl FnOnce() -> Result<Check>) -> Check {
    let start = Instant::now();
    let mut c = f().unwrap_or_else(|e| Check::failed(id, e));
    c.elapsed = start.elapsed();
    c.time_limit = limit;
    c
}

fn sci(x: f64) -> String {
    format!("{x:.2e}")
}

fn random_chains(seed: u64) -> Vec<WeightedChain<Complex64>> {
    (0..200u64)
        .map(|i| {
            let mut rng = derive_stream(seed, i);
            random_integrable(1 + (i % 10) as usize, i % 2 == 0, &mut rng)
        })
        .collect()
}

/// `F(A) det(I - Q) = 1` on 200 random integrable chains.
pub fn c01_determinant_identity(seed: u64, _scale: Scale) -> Check {
    let id = "c01-determinant-identity";
    timed(id, Some(Duration::from_secs(10)), || {
        let mut worst = 0.0f64;
        let chains = random_chains(check_seed(seed, 1));
        for c in &chains {
            let all: Vec<Vertex> = c.interior().collect();
            let f = c.f_ordered(&all)?;
            let d = c.det_i_minus_q_on(&all);
            worst = worst.max((f * d - 1.0).norm());
        }
        Ok(Check::new(id, worst < 1e-10, format!("max |F(A) det(I-Q) - 1| = {} over {} chains (tol 1e-10)", sci(worst), chains.len())))
    })
}

/// `F` is unchanged by reordering the vertices.
pub fn c02_permutation_invariance(seed: u64, _scale: Scale) -> Check {
    let id = "c02-permutation-invariance";
    timed(id, None, || {
        let mut worst = 0.0f64;
        let chains = random_chains(check_seed(seed, 1));
        for (i, c) in chains.iter().enumerate() {
            let mut rng = derive_stream(check_seed(seed, 2), i as u64);
            let mut order: Vec<Vertex> = c.interior().collect();
            let base = c.f_ordered(&order)?;
            for _ in 0..50 {
                order.shuffle(&mut rng);
                let f = c.f_ordered(&order)?;
                worst = worst.max((f - base).norm() / base.norm());
            }
        }
        Ok(Check::new(id, worst < 1e-10, format!("max relative spread {} over 50 orderings of {} chains (tol 1e-10)", sci(worst), chains.len())))
    })
}

/// Every simple graph on `n` labelled vertices, as edge lists.
fn simple_graphs(n: usize) -> impl Iterator<Item = Vec<(usize, usize)>> {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
    (0u64..1 << pairs.len()).map(move |mask| pairs.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, p)| *p).collect())
}

/// Matrix-tree count equals brute-force enumeration on all connected graphs
/// with at most six vertices.
pub fn c03_kirchhoff(_seed: u64, _scale: Scale) -> Check {
    let id = "c03-kirchhoff";
    timed(id, Some(Duration::from_secs(300)), || {
        let (mut graphs, mut mismatches) = (0usize, 0usize);
        for n in 1..=6 {
            for edges in simple_graphs(n) {
                let g = Multigraph::new(n, &edges)?;
                if !g.is_connected() {
                    continue;
                }
                graphs += 1;
                if matrix_tree_count(&g)? != brute_force_tree_count(&g) {
                    mismatches += 1;
                }
            }
        }
        Ok(Check::new(id, mismatches == 0, format!("{graphs} connected labelled graphs on <= 6 vertices, {mismatches} mismatches")))
    })
}

/// Uniform spanning trees of `K₄` from Wilson's algorithm.
pub fn c04_wilson_uniformity(seed: u64, scale: Scale) -> Check {
    let id = "c04-wilson-uniformity";
    timed(id, None, || {
        let n = scale.pick(160_000, 40_000);
        let (chain, order) = walk_chain(&Multigraph::complete(4), 3, WalkType::One)?;
        let key = |t: &loopforge_core::spanning::SpanningTree| {
            let mut e: Vec<(usize, usize)> = t.edges().map(|(u, v)| (order[u].min(order[v]), order[u].max(order[v]))).collect();
            e.sort_unstable();
            e
        };
        let trees: Vec<Vec<(usize, usize)>> = enumerate_spanning_trees(&chain)?.iter().map(key).collect();
        let index: HashMap<Vec<(usize, usize)>, usize> = trees.iter().cloned().enumerate().map(|(i, t)| (t, i)).collect();
        let parts = chunked_map(check_seed(seed, 4), n, CHUNK, default_workers(), |rng, m| -> Result<Vec<u64>> {
            let mut counts = vec![0u64; index.len()];
            for _ in 0..m {
                let t = wilson_default(&chain, rng)?;
                let i = *index.get(&key(&t)).ok_or_else(|| Error::Numerical("sampled tree is not a spanning tree".into()))?;
                counts[i] += 1;
            }
            Ok(counts)
        });
        let mut counts = vec![0u64; index.len()];
        for p in parts {
            for (c, x) in counts.iter_mut().zip(p?) {
                *c += x;
            }
        }
        let p = 1.0 / trees.len() as f64;
        let band = 5.0 * (n as f64 * p * (1.0 - p)).sqrt();
        let worst = counts.iter().map(|&c| (c as f64 - n as f64 * p).abs()).fold(0.0, f64::max);
        let chi = chi_square_gof(&counts, &vec![p; trees.len()]);
        let ok = trees.len() == 16 && worst <= band && chi.p_value > 0.001;
        Ok(Check::new(
            id,
            ok,
            format!("{} trees, N = {n}, max |count - N/16| = {worst:.0} (band {band:.0}), chi2 p = {:.4}", trees.len(), chi.p_value),
        ))
    })
}

fn lerw_counts(seed: u64, n: usize, sample: impl Fn(&mut Rng) -> Result<Vec<Vertex>> + Sync) -> Result<HashMap<Vec<Vertex>, u64>> {
    let parts = chunked_map(seed, n, CHUNK, default_workers(), |rng, m| -> Result<HashMap<Vec<Vertex>, u64>> {
        let mut h = HashMap::new();
        for _ in 0..m {
            *h.entry(sample(rng)?).or_insert(0) += 1;
        }
        Ok(h)
    });
    let mut total = HashMap::new();
    for p in parts {
        for (k, v) in p? {
            *total.entry(k).or_insert(0) += v;
        }
    }
    Ok(total)
}

/// LERW law on the 3×3 grid, for the chronological sampler and the
/// Laplacian walk.
pub fn c05_lerw_law(seed: u64, scale: Scale) -> Check {
    let id = "c05-lerw-law";
    timed(id, None, || {
        let n = scale.pick(100_000, 20_000);
        let chain = grid_srw(3, 3);
        let x = chain.index_of("1,1").expect("grid centre");
        let exact = enumerate_lerw_law(&chain, x)?;
        let table = TransitionTable::new(&chain)?;
        let nv = chain.n_vertices();
        let chrono = lerw_counts(check_seed(seed, 5), n, |rng| Ok(sample_lerw_with(&table, nv, x, rng, |v| chain.is_boundary(v)).into_vec()))?;
        let laplacian = lerw_counts(check_seed(seed, 50), n, |rng| Ok(sample_laplacian_walk(&chain, x, rng)?.into_vec()))?;
        let mut parts = Vec::new();
        let mut ok = true;
        for (name, counts) in [("chronological", &chrono), ("laplacian", &laplacian)] {
            let (mut tested, mut worst) = (0usize, 0.0f64);
            for (eta, p) in &exact {
                if *p >= 1e-3 {
                    tested += 1;
                    let c = counts.get(eta.vertices()).copied().unwrap_or(0);
                    worst = worst.max(binomial_z(c, n as u64, *p).abs());
                }
            }
            let support = counts.keys().all(|k| exact.iter().any(|(e, _)| e.vertices() == k.as_slice()));
            ok &= worst < 4.0 && support;
            parts.push(format!("{name}: {tested} paths, max |z| = {worst:.2}"));
        }
        Ok(Check::new(id, ok, format!("N = {n}; {} (tol 4)", parts.join("; "))))
    })
}

/// Elementary-loop count of the growing loop at `t = 1/2` on the two-point
/// chain against the negative binomial law.
pub fn c06_negative_binomial(seed: u64, scale: Scale) -> Check {
    let id = "c06-negative-binomial";
    timed(id, None, || {
        let n = scale.pick(1_000_000, 100_000);
        let chain = two_point(0.5);
        let parts = chunked_map(check_seed(seed, 6), n, CHUNK, default_workers(), |rng, m| -> Result<BTreeMap<usize, u64>> {
            let mut h = BTreeMap::new();
            for _ in 0..m {
                *h.entry(sample_growing_loop(&chain, 0, &[0, 1], 0.5, rng)?.returns()).or_insert(0) += 1;
            }
            Ok(h)
        });
        let mut counts: BTreeMap<usize, u64> = BTreeMap::new();
        for p in parts {
            for (k, v) in p? {
                *counts.entry(k).or_insert(0) += v;
            }
        }
        let kmax = *counts.keys().last().unwrap_or(&0);
        let f = Complex64::new(0.25, 0.0);
        let (mut tv, mut mass) = (0.0, 0.0);
        for k in 0..=kmax {
            let p = negbin_pmf(f, 0.5, k as u64)?.re;
            mass += p;
            tv += (counts.get(&k).copied().unwrap_or(0) as f64 / n as f64 - p).abs();
        }
        let tv = 0.5 * (tv + (1.0 - mass).max(0.0));
        Ok(Check::new(id, tv < 0.01, format!("N = {n}, total variation {tv:.5} (tol 0.01)")))
    })
}

fn permutations_of(n: usize) -> Vec<Vec<usize>> {
    loopforge_core::multipath::permutations(n).into_iter().map(|(p, _)| p).collect()
}

/// Multisets of at most `max_edges` edges on `n` vertices, self-edges
/// included.
fn edge_multisets(n: usize, max_edges: usize) -> Vec<Vec<(usize, usize)>> {
    let slots: Vec<(usize, usize)> = (0..n).flat_map(|u| (u..n).map(move |v| (u, v))).collect();
    let mut out = vec![Vec::new()];
    fn rec(start: usize, left: usize, slots: &[(usize, usize)], cur: &mut Vec<(usize, usize)>, out: &mut Vec<Vec<(usize, usize)>>) {
        if left == 0 {
            return;
        }
        for i in start..slots.len() {
            cur.push(slots[i]);
            out.push(cur.clone());
            rec(i, left - 1, slots, cur, out);
            cur.pop();
        }
    }
    rec(0, max_edges, &slots, &mut Vec::new(), &mut out);
    out
}

fn labelings(m: usize, max: u64) -> Vec<Vec<u64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..m {
        out = out.into_iter().flat_map(|v| (1..=max).map(move |k| [v.clone(), vec![k]].concat())).collect();
    }
    out
}

fn compositions(n: usize, total: u64) -> Vec<Vec<u64>> {
    if n == 1 {
        return vec![vec![total]];
    }
    (0..=total).flat_map(|k| compositions(n - 1, total - k).into_iter().map(move |mut v| { v.push(k); v })).collect()
}

/// Exact graph identity and pairing lemma.
pub fn c07_graph_identity(_seed: u64, _scale: Scale) -> Check {
    let id = "c07-graph-identity";
    timed(id, Some(Duration::from_secs(600)), || {
        let mut instances = Vec::new();
        let (mut cases, mut failures) = (0usize, 0usize);
        for n in 1..=3 {
            let orders = permutations_of(n);
            for edges in edge_multisets(n, 3) {
                if edges.is_empty() {
                    continue;
                }
                for k in labelings(edges.len(), 3) {
                    for ord in &orders {
                        match graph_identity_sides(n, &edges, &k, ord) {
                            Ok((l, r)) => {
                                cases += 1;
                                let ok = l == r;
                                failures += !ok as usize;
                                instances.push(format!("{} graph n={n} edges={edges:?} k={k:?} order={ord:?}", if ok { "PASS" } else { "FAIL" }));
                            }
                            Err(Error::InvalidInput(_)) => {}
                            Err(e) => return Err(e),
                        }
                    }
                }
            }
        }
        let graph_cases = cases;
        for n in 1..=4 {
            for big_k in 0..=5u64 {
                for k in compositions(n, 2 * big_k) {
                    let (l, r) = pairing_identity_sides(big_k, &k)?;
                    cases += 1;
                    let ok = l == r;
                    failures += !ok as usize;
                    instances.push(format!("{} pairing K={big_k} k={k:?}", if ok { "PASS" } else { "FAIL" }));
                }
            }
        }
        let mut c = Check::new(
            id,
            failures == 0,
            format!("{graph_cases} graph instances and {} pairing instances exact, {failures} failures", cases - graph_cases),
        );
        c.instances = instances;
        Ok(c)
    })
}

/// Current law at `t = 1/2` against the exact bubble-soup distribution on
/// two-vertex chains.
pub fn c08_current_law(_seed: u64, _scale: Scale) -> Check {
    let id = "c08-current-law";
    timed(id, None, || {
        let (mut worst, mut min_cover) = (0.0f64, 1.0f64);
        let chains = [two_point(0.5), two_point_theta(0.2, 0.6, 0.3), two_point_theta(0.0, 0.9, 0.4)];
        for c in &chains {
            let law = bubble_current_law_two_point(c, 40)?;
            min_cover = min_cover.min(law.iter().map(|(_, p)| p).sum());
            for (k, p) in &law {
                worst = worst.max((current_pmf_half(c, k)?.re - p).abs());
            }
        }
        Ok(Check::new(
            id,
            worst < 1e-10 && min_cover >= 1.0 - 1e-8,
            format!("{} chains, max |formula - bubble| = {} (tol 1e-10), min coverage 1 - {}", chains.len(), sci(worst), sci(1.0 - min_cover)),
        ))
    })
}

fn iso_chains() -> [(&'static str, WeightedChain<f64>); 2] {
    [("two-point", two_point(0.5)), ("grid3x3", grid_killed(3, 3, 0.25))]
}

/// Local times from the loop soup at intensity 1/2 against squared Gaussian
/// fields.
pub fn c09_le_jan(seed: u64, scale: Scale) -> Check {
    let id = "c09-le-jan";
    timed(id, None, || {
        let n = scale.pick(1_000_000, 20_000);
        let mut ok = true;
        let mut parts = Vec::new();
        for (i, (name, chain)) in iso_chains().iter().enumerate() {
            let soup = SoupFieldSampler::new(chain)?;
            let direct = GffSampler::new(chain)?;
            let s = check_seed(seed, 9 + 100 * i as u64);
            let a: Vec<Vec<f64>> = chunked_map(s, n, CHUNK, default_workers(), |rng, m| -> Result<Vec<Vec<f64>>> {
                (0..m).map(|_| Ok(soup.sample(rng)?.1)).collect()
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?
            .concat();
            let b: Vec<Vec<f64>> =
                chunked_map(s.wrapping_add(1), n, CHUNK, default_workers(), |rng, m| (0..m).map(|_| direct.sample(rng).t()).collect::<Vec<_>>())
                    .concat();
            let r = le_jan_marginal_check(&a, &b)?;
            ok &= r.passes(0.001, 5.0);
            parts.push(format!("{name}: min KS p = {:.4}, max |z| = {:.2}", r.min_ks_p(), r.max_abs_z()));
        }
        Ok(Check::new(id, ok, format!("N = {n}; {} (KS p > 0.001, |z| < 5)", parts.join("; "))))
    })
}

/// Covariance of fields with Lupu signs against the Green's function.
pub fn c10_lupu(seed: u64, scale: Scale) -> Check {
    let id = "c10-lupu";
    timed(id, None, || {
        let n = scale.pick(1_000_000, 20_000);
        let mut ok = true;
        let mut parts = Vec::new();
        for (i, (name, chain)) in iso_chains().iter().enumerate() {
            let g = chain.green()?.g;
            let m = chain.n_interior();
            let sampler = LupuSampler::new(chain)?;
            let chunks = chunked_map(check_seed(seed, 10 + 100 * i as u64), n, CHUNK, default_workers(), |rng, c| -> Result<Vec<Moments>> {
                let mut mom = vec![Moments::default(); m * m];
                for _ in 0..c {
                    let z = sampler.sample(rng)?.z;
                    for x in 0..m {
                        for y in x..m {
                            mom[x * m + y].push(z[x] * z[y]);
                        }
                    }
                }
                Ok(mom)
            });
            let mut mom = vec![Moments::default(); m * m];
            for c in chunks {
                for (a, b) in mom.iter_mut().zip(c?) {
                    a.merge(&b);
                }
            }
            let mut worst = 0.0f64;
            for x in 0..m {
                for y in x..m {
                    worst = worst.max(mom[x * m + y].z_score(g[(x, y)]));
                }
            }
            ok &= worst < 5.0;
            parts.push(format!("{name}: max |z| = {worst:.2}"));
        }
        Ok(Check::new(id, ok, format!("N = {n}; {} (tol 5)", parts.join("; "))))
    })
}

fn vertex(c: &WeightedChain<f64>, label: &str) -> Result<Vertex> {
    c.index_of(label).ok_or_else(|| Error::InvalidInput(format!("unknown vertex {label:?}")))
}

/// Fomin's two-path identity for labelled boundary points of a chain.
pub fn fomin_points(chain: &WeightedChain<f64>, points: &[&str]) -> Result<(f64, f64)> {
    if points.len() != 4 {
        return Err(Error::InvalidInput("need four points x1,x2,y1,y2".into()));
    }
    let v: Vec<Vertex> = points.iter().map(|p| vertex(chain, p)).collect::<Result<_>>()?;
    fomin_two_path_check(chain, v[0], v[1], v[2], v[3])
}

/// Fomin identities and the edge-traversal formula.
pub fn c11_fomin(_seed: u64, _scale: Scale) -> Check {
    let id = "c11-fomin";
    timed(id, None, || {
        let grid = grid_srw(3, 3);
        let configs: [[&str; 4]; 4] = [
            ["-1,0", "-1,2", "3,0", "3,2"],
            ["0,-1", "2,-1", "0,3", "2,3"],
            ["-1,1", "1,-1", "3,1", "1,3"],
            ["-1,0", "0,3", "3,2", "2,-1"],
        ];
        let mut two_path = 0.0f64;
        for cfg in &configs {
            let (l, r) = fomin_points(&grid, cfg)?;
            two_path = two_path.max((l - r).abs());
        }
        let rect = grid_srw(4, 3);
        let xs = [vertex(&rect, "-1,0")?, vertex(&rect, "-1,2")?];
        let ys = [vertex(&rect, "4,0")?, vertex(&rect, "4,2")?];
        let (signed, det) = fomin_det_check(&rect, &xs, &ys)?;
        let direct = hat_h(&rect, &xs, &ys)?;
        let det_err = (signed - det).abs().max((direct - det).abs());
        let t = edge_traversal_expectation(&grid, vertex(&grid, "-1,1")?, vertex(&grid, "3,1")?, vertex(&grid, "1,1")?, vertex(&grid, "2,1")?, 60)?;
        let edge_err = (t.closed - t.enumerated).abs();
        Ok(Check::new(
            id,
            two_path < 1e-8 && det_err < 1e-8 && edge_err < 1e-10,
            format!("two-path max err {} (tol 1e-8), k=2 determinant err {} (tol 1e-8), edge traversal err {} (tol 1e-10)", sci(two_path), sci(det_err), sci(edge_err)),
        ))
    })
}

/// Small simply connected domains containing `0` and `1`.
pub fn zipper_domains() -> Vec<(&'static str, Vec<Point>)> {
    let rect = |x0: i64, x1: i64, y0: i64, y1: i64| -> Vec<Point> { (y0..=y1).flat_map(|y| (x0..=x1).map(move |x| (x, y))).collect() };
    let disc = LatticeDomain::build(DomainKind::Disc { r: 2.0 }).expect("disc").interior().to_vec();
    let ell: Vec<Point> = rect(-1, 1, -2, 0).into_iter().chain([(-1, 1), (-1, 2), (-1, 3)]).collect();
    let tee: Vec<Point> = rect(-1, 2, 0, 0).into_iter().chain(rect(0, 1, -3, -1)).chain([(0, 1)]).collect();
    vec![
        ("block 2x2", rect(0, 1, -1, 0)),
        ("block 3x3", rect(-1, 1, -1, 1)),
        ("block 4x3", rect(-1, 2, -1, 1)),
        ("block 3x4", rect(-1, 1, -2, 1)),
        ("disc r=2", disc),
        ("ell", ell),
        ("tee", tee),
    ]
}

/// Zipper formula against SAW enumeration on small domains.
pub fn c12_zipper(_seed: u64, _scale: Scale) -> Check {
    let id = "c12-zipper";
    timed(id, None, || {
        let (mut worst, mut pairs, mut sign_ok, mut in_range) = (0.0f64, 0usize, true, true);
        let domains = zipper_domains();
        for (_, pts) in &domains {
            let d = LatticeDomain::from_points(pts)?;
            let b = d.boundary().to_vec();
            for (i, &a) in b.iter().enumerate() {
                for &c in &b[i + 1..] {
                    let p = d.lerw_edge_probability(a, c)?;
                    let e = p.enumerated.ok_or_else(|| Error::Size("domain too large for enumeration".into()))?;
                    worst = worst.max((p.closed - e).abs());
                    in_range &= (-1e-12..=1.0 + 1e-12).contains(&p.closed);
                    if p.delta.abs() > 1e-12 {
                        sign_ok &= d.zipper_sign_structure(a, c)? == Some(p.positively_ordered());
                    }
                    pairs += 1;
                }
            }
        }
        Ok(Check::new(
            id,
            worst < 1e-8 && sign_ok && in_range,
            format!(
                "{} domains, {pairs} boundary pairs, max |closed - enumerated| = {} (tol 1e-8), sign structure {}",
                domains.len(),
                sci(worst),
                if sign_ok { "consistent" } else { "violated" }
            ),
        ))
    })
}

pub const ODD_LOOP_RADII: [f64; 5] = [8.0, 12.0, 16.0, 24.0, 32.0];

/// Slope of the odd-loop mass against `log r`.
pub fn c13_odd_loop_slope(_seed: u64, _scale: Scale) -> Check {
    let id = "c13-odd-loop-slope";
    timed(id, Some(Duration::from_secs(600)), || {
        let fit = odd_loop_slope(&ODD_LOOP_RADII)?;
        let (lo, hi) = (0.125 * 0.85, 0.125 * 1.15);
        Ok(Check::new(id, (lo..=hi).contains(&fit.slope), format!("slope {:.4} over r = 8..32 (window [{lo:.5}, {hi:.5}])", fit.slope)))
    })
}

/// Crossing exponent of the strip kernel and the two-path constant.
pub fn c14_crossing_exponent(_seed: u64, _scale: Scale) -> Check {
    let id = "c14-crossing-exponent";
    timed(id, Some(Duration::from_secs(1)), || {
        let rs = grid(3.0, 6.0, 30);
        let mut ok = true;
        let mut parts = Vec::new();
        for n in 1..=3 {
            let c = crossing_exponent(n, &rs, None, 200)?;
            let rel = (c.slope - c.expected).abs() / c.expected;
            ok &= rel < 0.01;
            parts.push(format!("n={n} slope {:.4} (expected {})", c.slope, c.expected));
        }
        let c = crossing_exponent(2, &rs, Some(&[1.0, 2.0]), 200)?;
        let t = c.two_path.expect("n = 2 reports the ratio");
        let rel = (t.scaled_sin2 - t.c).abs() / t.c;
        ok &= rel < 0.01;
        parts.push(format!("ratio e^r sin^2 y1 sin^2 y2 at r=6: {:.4} vs c = {:.4}", t.scaled_sin2, t.c));
        Ok(Check::new(id, ok, parts.join("; ")))
    })
}

/// Chunked sampling gives identical results for one and several workers.
pub fn c15_worker_independence(seed: u64, _scale: Scale) -> Check {
    let id = "c15-worker-independence";
    timed(id, None, || {
        let chain = grid_srw(3, 3);
        let x = chain.index_of("1,1").expect("grid centre");
        let table = TransitionTable::new(&chain)?;
        let nv = chain.n_vertices();
        let run = |workers| {
            chunked_map(check_seed(seed, 15), 5_000, 500, workers, |rng, m| {
                (0..m).map(|_| sample_lerw_with(&table, nv, x, rng, |v| chain.is_boundary(v)).into_vec()).collect::<Vec<_>>()
            })
        };
        let same = run(1) == run(4);
        Ok(Check::new(id, same, format!("5000 LERW samples with 1 and 4 workers {}", if same { "identical" } else { "differ" })))
    })
}
