#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spinnet::network::{Edge, SpinNetwork};

pub type CMat = DMatrix<Complex64>;

fn pauli() -> (CMat, CMat) {
    let x = CMat::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0].map(|v| Complex64::new(v, 0.0)));
    let y = CMat::from_row_slice(
        2,
        2,
        &[Complex64::new(0.0, 0.0), Complex64::new(0.0, -1.0), Complex64::new(0.0, 1.0), Complex64::new(0.0, 0.0)],
    );
    (x, y)
}

/// Operator acting as `op` on spin `site` (1-based; spin 1 is the most
/// significant tensor factor) and as identity elsewhere.
fn embed(op: &CMat, site: usize, n: usize) -> CMat {
    let mut out = CMat::identity(1, 1);
    for s in 1..=n {
        let f = if s == site { op.clone() } else { CMat::identity(2, 2) };
        out = out.kronecker(&f);
    }
    out
}

/// Full 2^n Hamiltonian sum_e w/2 (X_i X_j + Y_i Y_j).
pub fn full_hamiltonian(n: usize, edges: &[Edge]) -> CMat {
    let (x, y) = pauli();
    let dim = 1 << n;
    let mut h = CMat::zeros(dim, dim);
    for e in edges {
        let xx = embed(&x, e.i, n) * embed(&x, e.j, n);
        let yy = embed(&y, e.i, n) * embed(&y, e.j, n);
        h += (xx + yy) * Complex64::new(e.w / 2.0, 0.0);
    }
    h
}

/// Computational-basis index of the state with spins in `set` flipped;
/// spin 1 is the most significant bit.
pub fn state_index(n: usize, set: &[usize]) -> usize {
    set.iter().map(|&s| 1usize << (n - s)).sum()
}

/// Random connected pendant network on n spins: spanning tree on 2..=n plus
/// extra edges, weights in (0.5, 2).
pub fn random_pendant(rng: &mut ChaCha8Rng, n: usize, extra: usize) -> SpinNetwork {
    let mut drift = Vec::new();
    let mut pairs = std::collections::BTreeSet::new();
    for v in 3..=n {
        let u = rng.random_range(2..v);
        pairs.insert((u, v));
    }
    for _ in 0..extra {
        let a = rng.random_range(2..=n);
        let b = rng.random_range(2..=n);
        if a != b {
            pairs.insert((a.min(b), a.max(b)));
        }
    }
    for (a, b) in pairs {
        drift.push((a, b, rng.random_range(0.5..2.0)));
    }
    SpinNetwork::pendant(n, &drift).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Odd-cycle oracle: a connected graph is bipartite iff every odd power of
/// its 0/1 adjacency matrix has zero trace.
pub fn bipartite_by_traces(n: usize, edges: &[(usize, usize)], vertices: &[usize]) -> bool {
    let idx = |v: usize| vertices.iter().position(|&x| x == v).unwrap();
    let m = vertices.len();
    let mut a = DMatrix::<f64>::zeros(m, m);
    for &(i, j) in edges {
        if vertices.contains(&i) && vertices.contains(&j) {
            a[(idx(i), idx(j))] = 1.0;
            a[(idx(j), idx(i))] = 1.0;
        }
    }
    let a2 = &a * &a;
    let mut p = a.clone();
    for _ in 0..=m {
        if p.trace().abs() > 1e-9 {
            return false;
        }
        p = &p * &a2;
    }
    let _ = n;
    true
}
