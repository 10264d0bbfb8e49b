//! Exact and statistical checks that go beyond single modules.

use std::collections::{BTreeMap, HashMap};

use loopforge_core::builders::{grid_srw, random_integrable, two_point, two_point_theta};
use loopforge_core::chain::{Symmetry, WeightedChain};
use loopforge_core::isomorphism::{current_conditional_pmf, field_density, jj_expectation, psi, normal_density, SoupFieldSampler, Theta};
use loopforge_core::lerw::{enumerate_lerw_law, sample_lerw_offline};
use loopforge_core::paths::decompose_by_saw;
use loopforge_core::rng::derive_stream;
use loopforge_core::soup::{enumerate_currents, negbin_process, project_current, sample_loop_soup, sample_negbin, BubbleSampler, Current};
use loopforge_core::spanning::{enumerate_spanning_trees, walk_chain, wilson, Multigraph, WalkType};
use loopforge_core::stats::{chi_square_independence, chi_square_two_sample, chi2_sf};
use loopforge_core::RealChain;
use rand::Rng as _;

fn positive_chain(seed: u64, n: usize) -> RealChain {
    random_integrable(n, false, &mut derive_stream(seed, 0)).abs_chain()
}

/// [`positive_chain`] with each row's deficit moved onto the boundary vertex.
fn markov_chain(seed: u64, n: usize) -> RealChain {
    let chain = positive_chain(seed, n);
    let z = chain.boundary().start;
    let mut edges = Vec::new();
    for u in chain.interior() {
        let deficit = 1.0 - chain.out_edges(u).iter().map(|(_, w)| w).sum::<f64>();
        edges.extend(chain.out_edges(u).iter().filter(|(v, _)| *v != z).map(|&(v, w)| (u, v, w)));
        edges.push((u, z, chain.q(u, z) + deficit));
    }
    WeightedChain::new(chain.labels()[..n].to_vec(), vec![chain.label(z).to_string()], edges, Symmetry::General).unwrap()
}

#[test]
fn lerw_mass_from_x_is_the_exit_probability() {
    for seed in 0..20 {
        let chain = positive_chain(seed, 6);
        let g = chain.green().unwrap();
        for x in chain.interior() {
            let total: f64 = enumerate_lerw_law(&chain, x).unwrap().iter().map(|(_, p)| p).sum();
            let exit: f64 = chain.boundary().map(|z| chain.poisson_kernel(&g, x, z).unwrap()).sum();
            assert!((total - exit).abs() < 1e-12 * exit.max(1e-300), "seed {seed}: {total} vs {exit}");
        }
    }
}

#[test]
fn lerw_domain_markov_on_grid() {
    let chain = grid_srw(3, 3);
    let x = chain.index_of("1,1").unwrap();
    let law = enumerate_lerw_law(&chain, x).unwrap();
    let labels = |c: &RealChain, v: &[usize]| v.iter().map(|&u| c.label(u).to_string()).collect::<Vec<_>>();
    // Every initial segment that stays in the interior.
    let mut prefixes: BTreeMap<Vec<String>, f64> = BTreeMap::new();
    for (eta, p) in &law {
        let v = eta.vertices();
        for j in 1..v.len() - 1 {
            *prefixes.entry(labels(&chain, &v[..=j])).or_default() += p;
        }
    }
    let mut checked = 0;
    for (prefix, mass) in &prefixes {
        let idx: Vec<usize> = prefix.iter().map(|l| chain.index_of(l).unwrap()).collect();
        let keep: Vec<usize> = chain.interior().filter(|v| !idx[..idx.len() - 1].contains(v)).collect();
        let (sub, _) = chain.restrict(&keep).unwrap();
        let start = sub.index_of(prefix.last().unwrap()).unwrap();
        // The continuation is the LERW in the smaller domain, conditioned to
        // leave through the original boundary rather than the erased prefix.
        let sub_law: HashMap<Vec<String>, f64> = enumerate_lerw_law(&sub, start)
            .unwrap()
            .into_iter()
            .filter(|(e, _)| chain.is_boundary(chain.index_of(sub.label(e.end())).unwrap()))
            .map(|(e, p)| (labels(&sub, e.vertices()), p))
            .collect();
        let sub_total: f64 = sub_law.values().sum();
        for (eta, p) in &law {
            let full = labels(&chain, eta.vertices());
            if full.starts_with(prefix) {
                let tail = full[prefix.len() - 1..].to_vec();
                let cond = p / mass;
                assert!((cond - sub_law[&tail] / sub_total).abs() < 1e-12, "{prefix:?} {tail:?}");
                checked += 1;
            }
        }
    }
    assert!(checked > 100);
}

#[test]
fn erased_loops_are_conditionally_independent() {
    let chain = grid_srw(3, 3);
    let x = chain.index_of("1,1").unwrap();
    let mut rng = derive_stream(41, 0);
    // Condition on the most likely SAW and tabulate the first two erased loop lengths.
    let target = enumerate_lerw_law(&chain, x).unwrap().into_iter().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap().0;
    let mut table = vec![vec![0u64; 4]; 4];
    let mut kept = 0;
    while kept < 100_000 {
        let (walk, eta) = sample_lerw_offline(&chain, x, &mut rng).unwrap();
        if eta != target {
            continue;
        }
        let loops = decompose_by_saw(&walk, &eta).unwrap();
        let bin = |n: usize| (n / 2).min(3);
        table[bin(loops[0].len())][bin(loops[1].len())] += 1;
        kept += 1;
    }
    let r = chi_square_independence(&table);
    assert!(r.p_value > 0.001, "{r:?}");
}

#[test]
fn wilson_law_does_not_depend_on_ordering() {
    let (chain, _) = walk_chain(&Multigraph::complete(4), 0, WalkType::One).unwrap();
    let trees = enumerate_spanning_trees(&chain).unwrap();
    let index: HashMap<Vec<usize>, usize> = trees.iter().enumerate().map(|(i, t)| (t.parents().to_vec(), i)).collect();
    let orders = [vec![0, 1, 2], vec![2, 0, 1]];
    let mut counts = vec![vec![0u64; trees.len()]; 2];
    for (o, order) in orders.iter().enumerate() {
        let mut rng = derive_stream(5, o as u64);
        for _ in 0..50_000 {
            let t = wilson(&chain, order, &mut rng).unwrap();
            counts[o][index[t.parents()]] += 1;
        }
    }
    let r = chi_square_two_sample(&counts[0], &counts[1]);
    assert!(r.p_value > 0.001, "{r:?}");
}

#[test]
fn rooted_tree_weights_sum_to_the_determinant() {
    for seed in 0..30 {
        let chain = markov_chain(seed, 1 + seed as usize % 6);
        let total: f64 = enumerate_spanning_trees(&chain).unwrap().iter().map(|t| t.weight(&chain)).sum();
        let all: Vec<usize> = chain.interior().collect();
        let det = chain.det_i_minus_q_on(&all);
        assert!((total - det).abs() < 1e-12, "seed {seed}: {total} vs {det}");
    }
}

#[test]
fn growing_loop_counts_have_stationary_independent_increments() {
    let (f, t, s) = (0.25, 0.5, 0.7);
    let mut rng = derive_stream(17, 0);
    let bin = |k: u64| k.min(4) as usize;
    let mut incr = vec![0u64; 5];
    let mut direct = vec![0u64; 5];
    let mut joint = vec![vec![0u64; 5]; 5];
    for _ in 0..100_000 {
        let jumps = negbin_process(f, t + s, &mut rng);
        let before: u64 = jumps.iter().filter(|j| j.0 <= t).map(|j| j.1).sum();
        let after: u64 = jumps.iter().filter(|j| j.0 > t).map(|j| j.1).sum();
        incr[bin(after)] += 1;
        joint[bin(before)][bin(after)] += 1;
        direct[bin(sample_negbin(f, s, &mut rng))] += 1;
    }
    assert!(chi_square_two_sample(&incr, &direct).p_value > 0.001);
    assert!(chi_square_independence(&joint).p_value > 0.001);
}

/// Symmetric triangle, killed at rate 0.4 per vertex.
fn triangle() -> RealChain {
    WeightedChain::from_labels(&["a", "b", "c"], &[], &[("a", "b", 0.3), ("b", "c", 0.3), ("a", "c", 0.3)], Symmetry::Symmetric).unwrap()
}

#[test]
fn loop_soup_and_bubble_soup_project_to_the_same_current() {
    let chain = triangle();
    let order: Vec<usize> = chain.interior().collect();
    let bubble = BubbleSampler::new(&chain, &order, 0.5).unwrap();
    let mut rng = derive_stream(23, 0);
    let key = |k: &Current| {
        let e: Vec<u64> = [(0, 1), (1, 2), (0, 2)].iter().map(|&(u, v)| k.get(u, v).min(3)).collect();
        (e[0] * 16 + e[1] * 4 + e[2]) as usize
    };
    let mut a = vec![0u64; 64];
    let mut b = vec![0u64; 64];
    for _ in 0..50_000 {
        let soup = sample_loop_soup(&chain, 0.5, 60, &mut rng).unwrap();
        a[key(&project_current(soup.arrivals.iter().map(|x| &x.lp)))] += 1;
        b[key(&bubble.sample_current(&mut rng).unwrap())] += 1;
    }
    let r = chi_square_two_sample(&a, &b);
    assert!(r.p_value > 0.001, "{r:?}");
}

/// Pearson statistic for draws whose category probabilities vary with a
/// covariate. `Σ (O - E)² / E` over categories, with `E = Σ_i p_i(c)`, is
/// stochastically smaller than chi-square with one fewer degree of freedom
/// than the category count, so the p-value is conservative.
fn conditional_pearson(observed: &[u64], expected: &[f64]) -> f64 {
    let stat: f64 = observed.iter().zip(expected).map(|(&o, &e)| (o as f64 - e).powi(2) / e).sum();
    chi2_sf(stat, (observed.len() - 1) as f64)
}

#[test]
fn current_given_occupation_times_follows_the_conditional_law() {
    for (name, chain) in [("two-point", two_point(0.5)), ("self-edges", two_point_theta(0.2, 0.6, 0.3))] {
        let theta = Theta::from_chain(&chain);
        let sampler = SoupFieldSampler::new(&chain).unwrap();
        let currents = enumerate_currents(&chain, 8).unwrap();
        let t0 = [0.7, 1.3];
        let direct = current_conditional_pmf(&theta, &t0, &currents[3]).unwrap();
        assert!((direct - psi(&currents[3], &theta.rho(&t0)) / jj_expectation(2, &theta.rho(&t0)).unwrap()).abs() < 1e-15);
        // Categories `3 * (k_xy / 2) + (k_xx + k_yy)` for `k_xy < 6` and
        // `k_xx + k_yy < 2`; everything else is the tail category `tail`. All
        // currents in the finite categories are enumerated.
        let tail = 9;
        let category = |k: &Current| {
            let xy = (k.get(0, 1) / 2) as usize;
            let self_edges = (k.get(0, 0) + k.get(1, 1)) as usize;
            if xy < 3 && self_edges < 2 {
                xy * 3 + self_edges
            } else {
                tail
            }
        };
        let mut observed = vec![0u64; tail + 1];
        let mut expected = vec![0.0; tail + 1];
        let mut rng = derive_stream(29, 0);
        for _ in 0..100_000 {
            let (k, t) = sampler.sample(&mut rng).unwrap();
            observed[category(&k)] += 1;
            let rho = theta.rho(&t);
            let norm = jj_expectation(2, &rho).unwrap();
            let mut finite = 0.0;
            for c in currents.iter().filter(|c| category(c) != tail) {
                let p = psi(c, &rho) / norm;
                expected[category(c)] += p;
                finite += p;
            }
            expected[tail] += 1.0 - finite;
        }
        // Categories that are impossible for this chain carry no information.
        let (o, e): (Vec<u64>, Vec<f64>) = observed.iter().zip(&expected).filter(|(&o, &e)| o > 0 || e > 1e-9).map(|(&o, &e)| (o, e)).unzip();
        let p = conditional_pearson(&o, &e);
        assert!(p > 0.001, "{name}: p = {p}, observed {observed:?}, expected {expected:?}");
    }
}

#[test]
fn field_density_is_the_gaussian_density() {
    let mut rng = derive_stream(31, 0);
    for n in 1..=6 {
        let mut theta = Vec::new();
        for u in 0..n {
            theta.push(((u, u), rng.random_range(0.0..0.2)));
            for v in u + 1..n {
                if rng.random::<bool>() {
                    theta.push(((u, v), rng.random_range(0.0..0.6 / n as f64)));
                }
            }
        }
        let th = Theta::new((0..n).map(|i| i.to_string()).collect(), theta).unwrap();
        let chain = th.to_chain().unwrap();
        let g = chain.green().unwrap().g;
        for _ in 0..20 {
            let z: Vec<f64> = (0..n).map(|_| rng.random_range(-2.5..2.5)).collect();
            let a = field_density(&th, &z).unwrap();
            let b = normal_density(&g, &z).unwrap();
            assert!((a - b).abs() < 1e-10 * b.max(1e-300), "n = {n}: {a} vs {b}");
        }
    }
}

#[test]
fn real_and_complex_paths_agree() {
    for seed in 0..40 {
        let real = positive_chain(seed, 1 + seed as usize % 9);
        let complex = real.to_complex();
        let (gr, gc) = (real.green().unwrap(), complex.green().unwrap());
        for x in real.interior() {
            for y in real.interior() {
                assert!((gr.entry(x, y) - gc.entry(x, y).re).abs() < 1e-12 * gr.entry(x, y).abs().max(1.0));
                assert!(gc.entry(x, y).im.abs() < 1e-12);
            }
        }
        let all: Vec<usize> = real.interior().collect();
        let (fr, fc) = (real.f_ordered(&all).unwrap(), complex.f_ordered(&all).unwrap());
        assert!((fr - fc.re).abs() < 1e-12 * fr.abs());
    }
}
