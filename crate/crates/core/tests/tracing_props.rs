mod common;

use common::{random_dag, random_dag_shuffled, seeded};
use pathwright::pathspec::{parse_model, render_model, topological_order, PathModel};
use pathwright::tracing::{enumerate_treks, reproduced_matrix, TrekKind};
use rand::Rng;

/// Every simple path in the skeleton from `i` to `j` with no collider,
/// found by trying every ordered selection of intermediate variables.
fn collider_free_paths(m: &PathModel, i: usize, j: usize) -> Vec<Vec<usize>> {
    let k = m.k();
    let others: Vec<usize> = (0..k).filter(|&v| v != i && v != j).collect();
    let adjacent = |a: usize, b: usize| m.has_arrow(a, b) || m.has_arrow(b, a);
    let mut out = Vec::new();
    let mut stack: Vec<Vec<usize>> = vec![vec![i]];
    while let Some(prefix) = stack.pop() {
        let last = *prefix.last().unwrap();
        if adjacent(last, j) {
            let mut path = prefix.clone();
            path.push(j);
            let collider = path
                .windows(3)
                .any(|w| m.has_arrow(w[0], w[1]) && m.has_arrow(w[2], w[1]));
            if !collider {
                out.push(path);
            }
        }
        for &v in &others {
            if !prefix.contains(&v) && adjacent(last, v) {
                let mut next = prefix.clone();
                next.push(v);
                stack.push(next);
            }
        }
    }
    out.sort();
    out
}

fn edge_product(m: &PathModel, path: &[usize]) -> f64 {
    path.windows(2)
        .map(|w| {
            m.arrow(w[0], w[1])
                .or_else(|| m.arrow(w[1], w[0]))
                .and_then(|a| a.coefficient)
                .unwrap()
        })
        .product()
}

#[test]
fn trek_enumeration_matches_brute_force() {
    let mut rng = seeded(21);
    for _ in 0..150 {
        let k = rng.random_range(2..=6);
        let density = rng.random_range(0.2..0.9);
        let m = random_dag_shuffled(&mut rng, k, density);
        let ranks = topological_order(&m).ranks();
        for i in 0..k {
            for j in i + 1..k {
                let treks = enumerate_treks(&m, i, j).unwrap();
                let (a, b) = if ranks[i] <= ranks[j] { (i, j) } else { (j, i) };
                let brute = collider_free_paths(&m, a, b);
                let mut found: Vec<Vec<usize>> = treks.iter().map(|t| t.nodes.clone()).collect();
                found.sort();
                assert_eq!(found, brute, "pair ({i}, {j}) in\n{}", render_model(&m));
                for t in &treks {
                    assert!((t.product - edge_product(&m, &t.nodes)).abs() < 1e-15);
                    let forward_only = t.nodes.windows(2).all(|w| m.has_arrow(w[0], w[1]));
                    let expected = match (forward_only, t.nodes.len()) {
                        (true, 2) => TrekKind::Direct,
                        (true, _) => TrekKind::Indirect,
                        (false, _) => TrekKind::Spurious,
                    };
                    assert_eq!(t.kind, expected);
                }
            }
        }
    }
}

#[test]
fn treks_are_listed_in_lexicographic_order() {
    let mut rng = seeded(22);
    for _ in 0..50 {
        let m = random_dag(&mut rng, 6, 0.7);
        let rep = reproduced_matrix(&m).unwrap();
        for pair in rep.treks.as_ref().unwrap() {
            let nodes: Vec<&Vec<usize>> = pair.treks.iter().map(|t| &t.nodes).collect();
            assert!(nodes.windows(2).all(|w| w[0] < w[1]));
        }
    }
}

#[test]
fn render_parse_round_trip() {
    let mut rng = seeded(23);
    for _ in 0..500 {
        let k = rng.random_range(1..=9);
        let density = rng.random_range(0.0..1.0);
        let m = random_dag_shuffled(&mut rng, k, density);
        let text = render_model(&m);
        let parsed = parse_model(&text).unwrap();
        assert!(parsed.warnings.is_empty());
        assert_eq!(parsed.model, m, "{text}");
        assert_eq!(render_model(&parsed.model), text);
    }
}

#[test]
fn causal_order_respects_every_arrow() {
    let mut rng = seeded(24);
    for _ in 0..200 {
        let m = random_dag_shuffled(&mut rng, 8, 0.4);
        let ranks = topological_order(&m).ranks();
        assert!(m.arrows().iter().all(|a| ranks[a.from] < ranks[a.to]));
    }
}
