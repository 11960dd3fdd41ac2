#![allow(dead_code)]

use std::path::PathBuf;

use pathwright::correlation::{load_correlation_csv, CorrelationMatrix};
use pathwright::numeric::SquareMatrix;
use pathwright::pathspec::{parse_model, PathModel, Variable};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}

pub fn table1() -> CorrelationMatrix {
    load_correlation_csv(fixture("table1.csv"), 240).unwrap()
}

pub fn model(name: &str) -> PathModel {
    parse_model(&std::fs::read_to_string(fixture(name)).unwrap())
        .unwrap()
        .model
}

/// Random DAG over `k` variables named V0..; arrows only go from lower to
/// higher index. Coefficients are scaled so that Σ|β| ≤ 0.8 per equation,
/// which keeps every residual variance positive.
pub fn random_dag(rng: &mut StdRng, k: usize, density: f64) -> PathModel {
    let vars = (0..k).map(|i| Variable::new(format!("V{i}"))).collect();
    let mut arrows = Vec::new();
    for to in 1..k {
        let parents: Vec<usize> = (0..to).filter(|_| rng.random_bool(density)).collect();
        let budget = 0.8 / parents.len().max(1) as f64;
        for from in parents {
            let mag = rng.random_range(0.05..1.0) * budget;
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            arrows.push((format!("V{from}"), format!("V{to}"), Some(sign * mag)));
        }
    }
    PathModel::new(vars, arrows).unwrap()
}

/// Random positive-definite correlation matrix from a random factor loading.
pub fn random_correlation(rng: &mut StdRng, k: usize, n: usize) -> CorrelationMatrix {
    let cols = k + 2;
    let w: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..cols).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let mut s = SquareMatrix::zeros(k);
    for i in 0..k {
        for j in 0..k {
            s[(i, j)] = w[i].iter().zip(&w[j]).map(|(a, b)| a * b).sum::<f64>()
                + if i == j { 0.3 } else { 0.0 };
        }
    }
    let rows = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| s[(i, j)] / (s[(i, i)] * s[(j, j)]).sqrt())
                .collect()
        })
        .collect();
    let names = (0..k).map(|i| format!("V{i}")).collect();
    CorrelationMatrix::from_entries(names, rows, n).unwrap()
}

pub fn seeded(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub fn random_dataset(rng: &mut StdRng, k: usize, n: usize) -> pathwright::data::Dataset {
    let columns = (0..k)
        .map(|_| (0..n).map(|_| standard_normal(rng)).collect())
        .collect();
    pathwright::data::Dataset::new((0..k).map(|i| format!("V{i}")).collect(), columns).unwrap()
}

/// Same as [`random_dag`] with variables declared in a shuffled order, so
/// causal order and declaration order disagree.
pub fn random_dag_shuffled(rng: &mut StdRng, k: usize, density: f64) -> PathModel {
    use rand::seq::SliceRandom;
    let base = random_dag(rng, k, density);
    let mut perm: Vec<usize> = (0..k).collect();
    perm.shuffle(rng);
    let vars = (0..k).map(|i| Variable::new(format!("V{i}"))).collect();
    let arrows = base
        .arrows()
        .iter()
        .map(|a| {
            (
                format!("V{}", perm[a.from]),
                format!("V{}", perm[a.to]),
                a.coefficient,
            )
        })
        .collect();
    PathModel::new(vars, arrows).unwrap()
}
