//! Every subspace of GF(q)^d for small q and d, found by closure rather than
//! by row reduction, checked against the RowSpace queries.

use std::collections::BTreeSet;

use ncgossip_core::{FieldElement, FieldSpec, RowSpace};

type Members = BTreeSet<Vec<u32>>;

fn field(q: u32) -> FieldSpec {
    match q {
        2 | 3 => FieldSpec::prime(q).unwrap(),
        4 => FieldSpec::new(2, 2).unwrap(),
        _ => unreachable!(),
    }
}

fn all_vectors(q: u32, d: usize) -> Vec<Vec<u32>> {
    (0..q.pow(d as u32))
        .map(|mut i| {
            let mut v = vec![0; d];
            for slot in v.iter_mut() {
                *slot = i % q;
                i /= q;
            }
            v
        })
        .collect()
}

fn elems(f: &FieldSpec, v: &[u32]) -> Vec<FieldElement> {
    v.iter().map(|&x| f.element(x).unwrap()).collect()
}

fn raw(v: &[FieldElement]) -> Vec<u32> {
    v.iter().map(|x| x.value()).collect()
}

/// {s + c·g : s in S, c in F}
fn extend(f: &FieldSpec, s: &Members, g: &[u32]) -> Members {
    let g = elems(f, g);
    let mut out = Members::new();
    for m in s {
        let m = elems(f, m);
        for c in f.elements() {
            let v: Vec<FieldElement> = m
                .iter()
                .zip(&g)
                .map(|(&a, &b)| f.add(a, f.mul(c, b)))
                .collect();
            out.insert(raw(&v));
        }
    }
    out
}

fn all_subspaces(f: &FieldSpec, d: usize) -> BTreeSet<Members> {
    let q = f.order();
    let vectors = all_vectors(q, d);
    let zero: Members = [vec![0; d]].into_iter().collect();
    let mut seen: BTreeSet<Members> = [zero.clone()].into_iter().collect();
    let mut frontier = vec![zero];
    while let Some(s) = frontier.pop() {
        for v in &vectors {
            if !s.contains(v) {
                let t = extend(f, &s, v);
                if seen.insert(t.clone()) {
                    frontier.push(t);
                }
            }
        }
    }
    seen
}

fn gaussian_total(q: u64, d: u32) -> u64 {
    (0..=d)
        .map(|k| {
            let num: u64 = (0..k).map(|i| q.pow(d - i) - 1).product();
            let den: u64 = (0..k).map(|i| q.pow(k - i) - 1).product();
            num / den
        })
        .sum()
}

fn inner(f: &FieldSpec, a: &[u32], b: &[u32]) -> FieldElement {
    a.iter().zip(b).fold(FieldElement::ZERO, |acc, (&x, &y)| {
        f.add(acc, f.mul(f.element(x).unwrap(), f.element(y).unwrap()))
    })
}

#[test]
fn knows_and_complement_agree_with_brute_force() {
    for q in [2u32, 3, 4] {
        let f = field(q);
        for d in 1..=4usize {
            let subspaces = all_subspaces(&f, d);
            assert_eq!(
                subspaces.len() as u64,
                gaussian_total(q as u64, d as u32),
                "q={q} d={d}"
            );
            let vectors = all_vectors(q, d);
            for s in &subspaces {
                let mut space = RowSpace::new(f.clone(), d);
                for m in s {
                    space.insert(&elems(&f, m)).unwrap();
                }
                let rank = space.rank();
                assert_eq!((q as usize).pow(rank as u32), s.len());
                let perp = space.orthogonal_complement();
                assert_eq!(perp.rank(), d - rank);
                for mu in &vectors {
                    let e = elems(&f, mu);
                    let brute_knows = s.iter().any(|m| !inner(&f, m, mu).is_zero());
                    assert_eq!(
                        space.knows(&e).unwrap(),
                        brute_knows,
                        "q={q} d={d} mu={mu:?}"
                    );
                    assert_eq!(perp.contains(&e).unwrap(), !brute_knows);
                    assert_eq!(space.contains(&e).unwrap(), s.contains(mu));
                }
                assert_eq!(perp.orthogonal_complement(), space);
            }
        }
    }
}
