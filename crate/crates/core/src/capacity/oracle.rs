//! Exhaustive path packing, independent of the max-flow code. Only usable on
//! tiny instances.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use super::{CapacityDemand, CapacityError, TimeExpandedGraph};

type Hop = (usize, u32, u32);

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Edge sets of all paths from `s` to `d`, keeping only inclusion-minimal ones.
fn minimal_paths(graph: &TimeExpandedGraph, s: usize, d: usize) -> Vec<Vec<Hop>> {
    fn walk(
        g: &TimeExpandedGraph,
        t: usize,
        at: usize,
        d: usize,
        hops: &mut Vec<Hop>,
        out: &mut Vec<Vec<Hop>>,
    ) {
        if t == g.horizon() {
            if at == d {
                out.push(hops.clone());
            }
            return;
        }
        walk(g, t + 1, at, d, hops, out);
        for &(u, v) in &g.rounds()[t] {
            if u as usize == at {
                hops.push((t + 1, u, v));
                walk(g, t + 1, v as usize, d, hops, out);
                hops.pop();
            }
        }
    }
    let mut all = Vec::new();
    walk(graph, 0, s, d, &mut Vec::new(), &mut all);
    all.sort();
    all.dedup();
    let subset = |a: &[Hop], b: &[Hop]| a.iter().all(|h| b.contains(h));
    all.iter()
        .filter(|p| !all.iter().any(|o| o.len() < p.len() && subset(o, p)))
        .cloned()
        .collect()
}

/// Whether integer multiples of `1/D` can be assigned to paths so that every
/// demand is met and no edge carries more than `D` units in any round.
pub fn brute_force_feasible(
    graph: &TimeExpandedGraph,
    demand: &CapacityDemand,
    max_denominator: u64,
) -> Result<bool, CapacityError> {
    let n = graph.node_count();
    for &node in demand.sources.iter().chain([&demand.sink]) {
        if node >= n {
            return Err(CapacityError::NodeOutOfRange { node, n });
        }
    }
    let den = demand
        .demands
        .iter()
        .fold(1u64, |acc, c| acc / gcd(acc, *c.denom()) * *c.denom());
    if den > max_denominator {
        return Err(CapacityError::DenominatorTooLarge {
            den,
            max: max_denominator,
        });
    }
    let needs: Vec<u64> = demand
        .demands
        .iter()
        .map(|c| c.numer() * (den / c.denom()))
        .collect();
    let paths: Vec<Vec<Vec<Hop>>> = demand
        .sources
        .iter()
        .map(|&s| minimal_paths(graph, s, demand.sink))
        .collect();

    // one task per unit of demand, tagged with its source
    let mut tasks = Vec::new();
    for (i, &need) in needs.iter().enumerate() {
        for _ in 0..need {
            tasks.push(i);
        }
    }
    let mut load: BTreeMap<Hop, u64> = BTreeMap::new();
    Ok(place(&tasks, 0, 0, &paths, den, &mut load))
}

fn place(
    tasks: &[usize],
    at: usize,
    min_choice: usize,
    paths: &[Vec<Vec<Hop>>],
    cap: u64,
    load: &mut BTreeMap<Hop, u64>,
) -> bool {
    let Some(&i) = tasks.get(at) else { return true };
    // units of the same source are interchangeable: choose paths in order
    let start = if at > 0 && tasks[at - 1] == i {
        min_choice
    } else {
        0
    };
    for (j, p) in paths[i].iter().enumerate().skip(start) {
        if p.iter().any(|h| load.get(h).copied().unwrap_or(0) >= cap) {
            continue;
        }
        for h in p {
            *load.entry(*h).or_insert(0) += 1;
        }
        if place(tasks, at + 1, j, paths, cap, load) {
            return true;
        }
        for h in p {
            *load.get_mut(h).unwrap() -= 1;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capacity::Rate;
    use alloc::vec;

    #[test]
    fn small_cases() {
        let g = TimeExpandedGraph::new(3, vec![vec![(0, 1), (1, 2)]; 2]).unwrap();
        let d = CapacityDemand::uniform(vec![0], Rate::new(1, 1), 2);
        assert!(brute_force_feasible(&g, &d, 1024).unwrap());
        let g1 = TimeExpandedGraph::new(3, vec![vec![(0, 1), (1, 2)]]).unwrap();
        assert!(!brute_force_feasible(&g1, &d, 1024).unwrap());
        let shared = TimeExpandedGraph::new(3, vec![vec![(0, 1)], vec![(1, 2)]]).unwrap();
        let half = CapacityDemand::uniform(vec![0, 1], Rate::new(1, 2), 2);
        assert!(brute_force_feasible(&shared, &half, 1024).unwrap());
        let full = CapacityDemand::uniform(vec![0, 1], Rate::new(1, 1), 2);
        assert!(!brute_force_feasible(&shared, &full, 1024).unwrap());
    }

    #[test]
    fn minimal_paths_drop_detours() {
        // 0 -> 1 in round 1 directly, or 0 -> 2 -> 1 across rounds
        let g =
            TimeExpandedGraph::new(3, vec![vec![(0, 1), (0, 2)], vec![(2, 1), (0, 1)]]).unwrap();
        let p = minimal_paths(&g, 0, 1);
        assert_eq!(p.len(), 3);
        assert!(p.iter().all(|x| x.len() <= 2));
    }
}
