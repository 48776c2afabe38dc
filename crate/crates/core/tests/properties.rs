use std::collections::HashMap;

use ncgossip_core::capacity::{brute_force_feasible, feasible, validate_paths};
use ncgossip_core::coding::{GlobalView, NodeState};
use ncgossip_core::linalg::FVector;
use ncgossip_core::rng::{stream, Domain};
use ncgossip_core::{
    CapacityDemand, CapacityVector, FieldSpec, JointSource, Rate, RowSpace, TimeExpandedGraph,
};
use proptest::prelude::*;

fn normalize(w: Vec<f64>) -> Vec<f64> {
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// Entropy of the marginal of `pmf` (over digits with `alphabets`) on `keep`.
fn marginal_entropy(pmf: &[f64], alphabets: &[u32], keep: &[usize]) -> f64 {
    let mut m: HashMap<Vec<u32>, f64> = HashMap::new();
    for (mut idx, &p) in pmf.iter().enumerate() {
        let mut digits = vec![0u32; alphabets.len()];
        for (slot, &a) in digits.iter_mut().zip(alphabets).rev() {
            *slot = (idx % a as usize) as u32;
            idx /= a as usize;
        }
        let key = keep.iter().map(|&i| digits[i]).collect();
        *m.entry(key).or_default() += p;
    }
    m.values()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum()
}

fn small_pmf() -> impl Strategy<Value = (u32, u32, u32, Vec<f64>)> {
    (2u32..=3, 2u32..=3, 2u32..=3).prop_flat_map(|(a, b, c)| {
        let cells = (a * b * c) as usize;
        (
            Just(a),
            Just(b),
            Just(c),
            prop::collection::vec(0.0f64..1.0, cells),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn chain_rule((a, b, c, w) in small_pmf()) {
        prop_assume!(w.iter().sum::<f64>() > 1e-6);
        let pmf = normalize(w);
        let src = JointSource::dense(vec![a, b], vec![c], pmf.clone()).unwrap();
        let al = [a, b, c];
        let h_all = marginal_entropy(&pmf, &al, &[0, 1, 2]);
        let h_x2y = marginal_entropy(&pmf, &al, &[1, 2]);
        let h_y = marginal_entropy(&pmf, &al, &[2]);
        let h1_given = h_all - h_x2y;
        let h2_given = h_x2y - h_y;
        let joint = src.cond_entropy(&[0, 1], 0).unwrap();
        prop_assert!((joint - (h1_given + h2_given)).abs() < 1e-9);
        prop_assert!((src.cond_entropy(&[0], 0).unwrap() - h1_given).abs() < 1e-9);
    }

    #[test]
    fn side_information_never_hurts((a, b, c, w) in small_pmf()) {
        prop_assume!(w.iter().sum::<f64>() > 1e-6);
        let pmf = normalize(w);
        let with = JointSource::dense(vec![a, b], vec![c], pmf.clone()).unwrap();
        let without: Vec<f64> = pmf.chunks(c as usize).map(|ch| ch.iter().sum()).collect();
        let without = JointSource::dense(vec![a, b], vec![], normalize(without)).unwrap();
        for s in [&[0usize][..], &[1], &[0, 1]] {
            prop_assert!(with.cond_entropy(s, 0).unwrap() <= without.cond_entropy(s, 0).unwrap() + 1e-9);
        }
    }

    #[test]
    fn sufficiency_is_monotone((a, b, c, w) in small_pmf(), c1 in 0.0f64..2.0, c2 in 0.0f64..2.0, e1 in 0.0f64..1.0, e2 in 0.0f64..1.0) {
        prop_assume!(w.iter().sum::<f64>() > 1e-6);
        let src = JointSource::dense(vec![a, b], vec![c], normalize(w)).unwrap();
        let low = src.sw_sufficient(0, &CapacityVector(vec![c1, c2])).unwrap();
        let high = src.sw_sufficient(0, &CapacityVector(vec![c1 + e1, c2 + e2])).unwrap();
        prop_assert!(!low || high);
        let big = CapacityVector(vec![(a as f64).log2(), (b as f64).log2()]);
        prop_assert!(src.sw_sufficient(0, &big).unwrap());
    }

    #[test]
    fn row_space_rank_tracks_membership(seed in any::<u64>(), d in 1usize..8, count in 0usize..12) {
        let f = FieldSpec::new(2, 2).unwrap();
        let mut rng = stream(seed, Domain::Trial, 0);
        let mut s = RowSpace::new(f.clone(), d);
        for _ in 0..count {
            let v = if rand::Rng::gen_bool(&mut rng, 0.3) { s.random_member(&mut rng) } else { FVector::random(&f, d, &mut rng) };
            let before = s.rank();
            let inside = s.contains(&v).unwrap();
            let grew = s.insert(&v).unwrap();
            prop_assert_eq!(grew, !inside);
            prop_assert_eq!(s.rank(), before + grew as usize);
            prop_assert!(s.contains(&v).unwrap());
            prop_assert!(s.rank() <= d);
        }
        let m = s.random_member(&mut rng);
        prop_assert!(s.contains(&m).unwrap());
    }

    #[test]
    fn packets_consistent_with_true_blocks(seed in any::<u64>(), dim in 1usize..6, relays in 1usize..4) {
        let f = FieldSpec::new(2, 4).unwrap();
        let mut rng = stream(seed, Domain::Coding, 0);
        let blocks: Vec<_> = (0..dim).map(|_| FVector::random(&f, 3, &mut rng).0).collect();
        let view = GlobalView::new(f.clone(), blocks.clone());
        let mut src = NodeState::new(0, f.clone(), dim, 3);
        src.add_source_blocks(0, &blocks).unwrap();
        let mut chain = vec![src];
        for r in 1..=relays {
            let mut node = NodeState::new(r, f.clone(), dim, 3);
            for _ in 0..dim {
                let p = chain[r - 1].make_packet(&mut rng);
                prop_assert!(view.consistent(&p));
                prop_assert!(chain[r - 1].space().contains(&p.coeffs).unwrap());
                node.receive(&p).unwrap();
            }
            prop_assert!(node.rank() <= chain[r - 1].rank());
            chain.push(node);
        }
    }
}

fn random_instance(seed: u64) -> (TimeExpandedGraph, CapacityDemand) {
    use rand::Rng;
    let mut rng = stream(seed, Domain::Trial, 0);
    let n = rng.gen_range(2..=5usize);
    let t = rng.gen_range(0..=4usize);
    let rounds = (0..t)
        .map(|_| {
            let mut edges = Vec::new();
            for u in 0..n as u32 {
                for v in 0..n as u32 {
                    if u != v && rng.gen_bool(0.35) {
                        edges.push((u, v));
                    }
                }
            }
            edges
        })
        .collect();
    let k = rng.gen_range(1..=2usize);
    let sink = rng.gen_range(0..n);
    let sources = (0..k).map(|_| rng.gen_range(0..n)).collect();
    let demands = (0..k)
        .map(|_| {
            if rng.gen_bool(0.5) {
                Rate::new(1, 2)
            } else {
                Rate::new(1, 1)
            }
        })
        .collect();
    (
        TimeExpandedGraph::new(n, rounds).unwrap(),
        CapacityDemand::new(sources, demands, sink).unwrap(),
    )
}

#[test]
fn max_flow_matches_path_packing() {
    let mut feasible_count = 0;
    for seed in 0..300 {
        let (g, d) = random_instance(seed);
        let f = feasible(&g, &d, 1024).unwrap();
        assert_eq!(
            f.feasible,
            brute_force_feasible(&g, &d, 1024).unwrap(),
            "seed {seed}"
        );
        if f.feasible {
            feasible_count += 1;
            assert!(validate_paths(&f.paths, &g, &d), "seed {seed}");
        }
    }
    assert!(
        feasible_count > 30 && feasible_count < 270,
        "{feasible_count}"
    );
}

#[test]
fn feasibility_persists_with_more_rounds() {
    for seed in 0..200 {
        let (g, d) = random_instance(seed);
        if feasible(&g, &d, 1024).unwrap().feasible {
            let mut longer = g.clone();
            longer.push_round(vec![]).unwrap();
            longer.push_round(vec![(0, 1)]).unwrap();
            assert!(feasible(&longer, &d, 1024).unwrap().feasible, "seed {seed}");
        }
    }
}

#[test]
fn integral_demands_give_unit_disjoint_paths() {
    for seed in 0..200 {
        let (g, mut d) = random_instance(seed);
        d.demands.iter_mut().for_each(|c| *c = Rate::new(1, 1));
        let f = feasible(&g, &d, 1024).unwrap();
        if !f.feasible {
            continue;
        }
        let mut used = std::collections::HashSet::new();
        for p in &f.paths {
            assert_eq!(*p.weight.denom(), 1);
            for t in 1..p.nodes.len() {
                if p.nodes[t - 1] != p.nodes[t] {
                    assert_eq!(
                        p.weight,
                        Rate::new(1, 1),
                        "a shared hop would exceed capacity"
                    );
                    assert!(used.insert((t, p.nodes[t - 1], p.nodes[t])), "seed {seed}");
                }
            }
        }
    }
}
