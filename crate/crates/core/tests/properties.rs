use loopforge_core::builders::random_integrable;
use loopforge_core::chain::{Symmetry, WeightedChain};
use loopforge_core::isomorphism::Theta;
use loopforge_core::paths::{loop_erase, rooted_loop_mass, unrooted_mass, RootedLoop, UnrootedLoop};
use loopforge_core::rng::{chunked_map, derive_stream};
use loopforge_core::soup::{negbin_pmf, project_current};
use loopforge_core::spanning::{wilson, wilson_default};
use loopforge_core::Chain;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng as _;

fn chain_from(seed: u64, n: usize, complex: bool) -> Chain {
    random_integrable(n, complex, &mut derive_stream(seed, 0))
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(1e-300)
}

/// Complete graph on `n` interior vertices plus one boundary vertex, with
/// `q(y, x) = conj q(x, y)` and rows of `|Q|` summing to at most `0.9`.
fn hermitian_chain(seed: u64, n: usize) -> Chain {
    let mut rng = derive_stream(seed, 1);
    let mut edges = Vec::new();
    for u in 0..n {
        edges.push((u, u, Complex64::new(rng.random_range(-0.2..0.2), 0.0)));
        for v in u + 1..n {
            let w = Complex64::from_polar(rng.random_range(0.0..1.0) * 0.7 / n as f64, rng.random_range(0.0..std::f64::consts::TAU));
            edges.push((u, v, w));
            edges.push((v, u, w.conj()));
        }
        edges.push((u, n, Complex64::new(0.1, 0.0)));
    }
    WeightedChain::new((0..n).map(|i| format!("v{i}")).collect(), vec!["z".into()], edges, Symmetry::Hermitian).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ordered_f_is_permutation_invariant(seed: u64, n in 1usize..=8, complex: bool, perm: u64) {
        let chain = chain_from(seed, n, complex);
        let mut order: Vec<usize> = chain.interior().collect();
        let base = chain.f_ordered(&order).unwrap();
        let mut rng = derive_stream(perm, 0);
        for i in (1..order.len()).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        let k = rng.random_range(0..=n);
        prop_assert!(rel(base, chain.f_ordered(&order).unwrap()) < 1e-10);
        prop_assert!(rel(chain.f_ordered(&order[..k]).unwrap(), chain.f_set(&order[..k]).unwrap()) < 1e-10);
    }

    #[test]
    fn full_f_inverts_the_determinant(seed: u64, n in 1usize..=10, complex: bool) {
        let chain = chain_from(seed, n, complex);
        let all: Vec<usize> = chain.interior().collect();
        let prod = chain.f_ordered(&all).unwrap() * chain.det_i_minus_q_on(&all);
        prop_assert!((prod - 1.0).norm() < 1e-10);
    }

    #[test]
    fn f_factorizes_over_disjoint_unions(seed: u64, n in 2usize..=8, split in 0.0f64..1.0) {
        let chain = chain_from(seed, n, true);
        let k = ((n as f64) * split) as usize;
        let b1: Vec<usize> = (0..k).collect();
        let b2: Vec<usize> = (k..n).step_by(2).collect();
        let rest: Vec<usize> = (k..n).collect();
        let (sub, order) = chain.restrict(&rest).unwrap();
        let b2_sub: Vec<usize> = b2.iter().map(|v| order.iter().position(|o| o == v).unwrap()).collect();
        let union: Vec<usize> = b1.iter().chain(&b2).copied().collect();
        let lhs = chain.f_set(&union).unwrap();
        let rhs = chain.f_set(&b1).unwrap() * sub.f_set(&b2_sub).unwrap();
        prop_assert!(rel(lhs, rhs) < 1e-10);
    }

    #[test]
    fn hermitian_green_diagonal_exceeds_half(seed: u64, n in 1usize..=6) {
        let chain = hermitian_chain(seed, n);
        let g = chain.green().unwrap();
        for x in chain.interior() {
            for y in chain.interior() {
                prop_assert!((g.entry(x, y) - g.entry(y, x).conj()).norm() < 1e-12);
            }
            let d = g.entry(x, x);
            prop_assert!(d.im.abs() < 1e-12 && d.re > 0.5, "G({x},{x}) = {d}");
        }
    }

    #[test]
    fn loop_erasure_is_a_self_avoiding_subsequence(walk in prop::collection::vec(0usize..6, 1..60)) {
        let eta = loop_erase(&walk);
        let v = eta.vertices();
        prop_assert_eq!(v.first(), walk.first());
        prop_assert_eq!(v.last(), walk.last());
        let mut seen = std::collections::HashSet::new();
        prop_assert!(v.iter().all(|x| seen.insert(*x)));
        let mut it = walk.iter();
        prop_assert!(v.iter().all(|x| it.any(|w| w == x)));
    }

    #[test]
    fn unrooted_mass_is_representative_free(seed: u64, body in prop::collection::vec(0usize..4, 1..9)) {
        let chain = chain_from(seed, 4, true);
        let mut cycle = body.clone();
        cycle.push(body[0]);
        let rooted = RootedLoop::new(cycle).unwrap();
        let ell = UnrootedLoop::from_rooted(&rooted).unwrap();
        prop_assert_eq!(ell.len() % ell.rotations(), 0);
        let m = unrooted_mass(&chain, &ell);
        let w = rooted.as_path().weight(&chain);
        prop_assert!((m - w * ell.rotations() as f64 / ell.len() as f64).norm() < 1e-12 * w.norm().max(1e-300));
        for r in ell.representatives() {
            let again = UnrootedLoop::from_rooted(&r).unwrap();
            prop_assert_eq!(again.canonical(), ell.canonical());
            let mr = rooted_loop_mass(&chain, &r).unwrap();
            prop_assert!((mr - rooted_loop_mass(&chain, &ell.representative()).unwrap()).norm() < 1e-12 * mr.norm().max(1e-300));
        }
    }

    #[test]
    fn projected_currents_have_integer_local_times(loops in prop::collection::vec(prop::collection::vec(0usize..5, 1..7), 0..6)) {
        let rooted: Vec<RootedLoop> = loops
            .iter()
            .map(|b| {
                let mut c = b.clone();
                c.push(b[0]);
                RootedLoop::new(c).unwrap()
            })
            .collect();
        let k = project_current(&rooted);
        let steps: u64 = rooted.iter().map(|l| l.len() as u64).sum();
        prop_assert_eq!(k.total(), steps);
        prop_assert_eq!((0..5).map(|x| k.local_time(x)).sum::<u64>(), steps);
    }

    #[test]
    fn theta_round_trips_through_q(entries in prop::collection::vec((0usize..4, 0usize..4, 0.01f64..2.0), 0..10)) {
        let labels: Vec<String> = (0..4).map(|i| i.to_string()).collect();
        let theta = Theta::new(labels, entries.iter().map(|&(u, v, t)| ((u, v), t))).unwrap();
        let back = Theta::from_chain(&theta.to_chain().unwrap());
        prop_assert_eq!(theta.theta.len(), back.theta.len());
        for (e, t) in &theta.theta {
            prop_assert!((back.theta[e] - t).abs() <= 1e-15 * t.abs());
        }
    }

    #[test]
    fn negative_binomial_pmf_sums_to_one(f in 0.0f64..0.95, t in 0.05f64..4.0) {
        let mut total = 0.0;
        let mut k = 0;
        let tail = loop {
            let p = negbin_pmf(Complex64::new(f, 0.0), t, k).unwrap().re;
            prop_assert!(p >= 0.0);
            total += p;
            k += 1;
            // Later term ratios f (j + t) / (j + 1) never exceed this bound.
            let ratio = (f * (k as f64 + t) / (k as f64 + 1.0)).max(f);
            if ratio < 1.0 && p * ratio / (1.0 - ratio) < 1e-13 && k > 5 {
                break p * ratio / (1.0 - ratio);
            }
        };
        prop_assert!((total - 1.0).abs() < 1e-10 + tail);
    }

    #[test]
    fn wilson_trees_are_structurally_valid(seed: u64, n in 1usize..=7) {
        let chain = chain_from(seed, n, false).abs_chain();
        let mut rng = derive_stream(seed, 2);
        // Top up each row's boundary weight so the walk is Markov.
        let markov = {
            let mut edges = Vec::new();
            for u in chain.interior() {
                let s: f64 = chain.out_edges(u).iter().map(|(_, w)| w).sum();
                let direct = chain.q(u, n);
                for &(v, w) in chain.out_edges(u) {
                    let w = if v == n { w + (1.0 - s) } else { w };
                    edges.push((u, v, w));
                }
                if direct == 0.0 {
                    edges.push((u, n, 1.0 - s));
                }
            }
            WeightedChain::new(chain.labels()[..n].to_vec(), vec!["z".into()], edges, Symmetry::General).unwrap()
        };
        let tree = wilson_default(&markov, &mut rng).unwrap();
        prop_assert!(tree.is_valid(&markov));
        prop_assert_eq!(tree.edges().count(), n);
        let mut order: Vec<usize> = (0..n).rev().collect();
        order.rotate_left(n / 2);
        prop_assert!(wilson(&markov, &order, &mut rng).unwrap().is_valid(&markov));
    }

    #[test]
    fn chunking_is_worker_independent(seed: u64, total in 0usize..300, chunk in 1usize..50) {
        let draw = |rng: &mut loopforge_core::rng::Rng, m: usize| (0..m).map(|_| rng.random::<u64>()).collect::<Vec<_>>();
        let one = chunked_map(seed, total, chunk, 1, draw).concat();
        let three = chunked_map(seed, total, chunk, 3, draw).concat();
        prop_assert_eq!(one.len(), total);
        prop_assert_eq!(one, three);
    }
}
