//! Commuting and anticommuting symmetry operators from stacked Liouvillian
//! null spaces, invariant-subspace decomposition, and Lie closure dimension.

use std::collections::VecDeque;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    c, columns, commutator, frobenius, group_degenerate, hermitian_eigen, normalize_sign, null_space,
    orthonormalize, projector, rank, trace, unvectorize, vectorize, CMat, CVec, I,
};

/// Largest combined dimension accepted by the null-space finders.
pub const MAX_DIM: usize = 70;
pub const RANK_TOL: f64 = 1e-10;
const DEGENERACY_TOL: f64 = 1e-8;
const DECOMPOSE_SEED: u64 = 0x5eed_cafe;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SymmetryKind {
    #[serde(rename = "CSO")]
    Cso,
    #[serde(rename = "ASO")]
    Aso,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryOperator {
    pub kind: SymmetryKind,
    pub matrix: CMat,
    /// Whether the operator squares to the identity once its spectrum is
    /// scaled to unit modulus. Only meaningful for ASOs.
    pub involutory: bool,
}

impl SymmetryOperator {
    /// Largest relative (anti)commutator residual against `hams`.
    pub fn residual(&self, hams: &[CMat]) -> f64 {
        let jn = frobenius(&self.matrix);
        match self.kind {
            SymmetryKind::Cso => relative_residual(&self.matrix, hams, jn, false),
            SymmetryKind::Aso => {
                let traceless: Vec<CMat> = hams.iter().map(remove_trace).collect();
                relative_residual(&self.matrix, &traceless, jn, true)
            }
        }
    }
}

fn relative_residual(j: &CMat, hams: &[CMat], jn: f64, anti: bool) -> f64 {
    let hmax = hams.iter().map(frobenius).fold(0.0, f64::max);
    if hmax == 0.0 || jn == 0.0 {
        return 0.0;
    }
    hams.iter()
        .map(|h| {
            let r = if anti { h * j + j * h } else { commutator(h, j) };
            frobenius(&r)
        })
        .fold(0.0, f64::max)
        / (jn * hmax)
}

pub fn remove_trace(h: &CMat) -> CMat {
    let n = h.nrows();
    h - CMat::identity(n, n) * (trace(h) / c(n as f64, 0.0))
}

fn check_inputs(hams: &[CMat]) -> Result<usize> {
    let n = hams.first().map(|h| h.nrows()).ok_or_else(|| Error::Invalid("no Hamiltonians supplied".into()))?;
    if hams.iter().any(|h| h.nrows() != n || h.ncols() != n) {
        return Err(Error::Invalid("Hamiltonians must share one square basis".into()));
    }
    if n > MAX_DIM {
        return Err(Error::Budget(format!("dimension {n} exceeds {MAX_DIM}")));
    }
    Ok(n)
}

/// Stack one Liouvillian per Hamiltonian and return its null vectors.
fn stacked_null_space(hams: &[CMat], n: usize, build: impl Fn(&CMat) -> CMat) -> Vec<CVec> {
    let n2 = n * n;
    let mut stacked = CMat::zeros(hams.len() * n2, n2);
    for (m, h) in hams.iter().enumerate() {
        stacked.view_mut((m * n2, 0), (n2, n2)).copy_from(&build(h));
    }
    null_space(&stacked, RANK_TOL)
}

/// Hermitian representatives of a †-closed null space, orthonormalized in
/// the Frobenius inner product.
fn hermitian_basis(null: &[CVec], n: usize, drop_identity: bool) -> Vec<CMat> {
    let id = CMat::identity(n, n);
    let mut candidates: Vec<CVec> = Vec::new();
    if drop_identity {
        candidates.push(vectorize(&id));
    }
    for x in null {
        let m = unvectorize(x, n);
        let herm = (&m + m.adjoint()).scale(0.5);
        let anti = (&m - m.adjoint()) * (-I * 0.5);
        candidates.push(vectorize(&herm));
        candidates.push(vectorize(&anti));
    }
    let ortho = orthonormalize(&candidates, 1e-7);
    ortho
        .into_iter()
        .skip(usize::from(drop_identity))
        .map(|v| {
            let m = unvectorize(&v, n);
            normalize_sign(&(&m + m.adjoint()).scale(0.5))
        })
        .collect()
}

/// Basis of the commutant of `hams` with the identity direction removed.
pub fn find_csos(hams: &[CMat]) -> Result<Vec<SymmetryOperator>> {
    let n = check_inputs(hams)?;
    let id = CMat::identity(n, n);
    let null = stacked_null_space(hams, n, |h| id.kronecker(h) - h.transpose().kronecker(&id));
    Ok(hermitian_basis(&null, n, true)
        .into_iter()
        .map(|matrix| SymmetryOperator { kind: SymmetryKind::Cso, matrix, involutory: false })
        .collect())
}

/// Basis of Hermitian `J` with `H^T J + J H = 0` for every traceless `H`.
pub fn find_asos(hams: &[CMat]) -> Result<Vec<SymmetryOperator>> {
    let n = check_inputs(hams)?;
    let id = CMat::identity(n, n);
    let traceless: Vec<CMat> = hams.iter().map(remove_trace).collect();
    let null = stacked_null_space(&traceless, n, |h| {
        let ht = h.transpose();
        id.kronecker(&ht) + ht.kronecker(&id)
    });
    Ok(hermitian_basis(&null, n, false)
        .into_iter()
        .map(|matrix| {
            let involutory = is_involutory(&matrix);
            SymmetryOperator { kind: SymmetryKind::Aso, matrix, involutory }
        })
        .collect())
}

fn is_involutory(m: &CMat) -> bool {
    let (vals, _) = hermitian_eigen(m);
    let top = vals.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if top == 0.0 {
        return false;
    }
    let scaled = m.scale(1.0 / top);
    let n = m.nrows();
    frobenius(&(&scaled * &scaled - CMat::identity(n, n))) < 1e-9 * (n as f64).sqrt()
}

/// Compress every matrix onto the span of orthonormal columns.
pub fn restrict_to(hams: &[CMat], basis: &CMat) -> Vec<CMat> {
    hams.iter().map(|h| basis.adjoint() * h * basis).collect()
}

#[derive(Debug, Clone)]
pub struct Block {
    /// Orthonormal columns spanning the block.
    pub basis: CMat,
}

impl Block {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn projector(&self) -> CMat {
        projector(&self.basis)
    }
}

#[derive(Debug, Clone)]
pub struct Decomposition {
    pub blocks: Vec<Block>,
    /// Block carrying the first basis state (|1> in the pendant setting).
    pub accessible_index: usize,
    /// For each block, indices into `csos` of the operators separating it
    /// from some other block.
    pub provenance: Vec<Vec<usize>>,
    pub csos: Vec<SymmetryOperator>,
}

impl Decomposition {
    pub fn accessible(&self) -> &Block {
        &self.blocks[self.accessible_index]
    }

    /// Largest off-block Frobenius norm of `h` in the concatenated basis.
    pub fn off_block_norm(&self, h: &CMat) -> f64 {
        let p: Vec<CMat> = self.blocks.iter().map(Block::projector).collect();
        let diag = p.iter().fold(CMat::zeros(h.nrows(), h.ncols()), |acc, pd| acc + pd * h * pd);
        frobenius(&(h - diag))
    }
}

/// Split the space into isotypic blocks of the algebra generated by `hams`.
///
/// The eigenspaces of a random element of the commutant are irreducible
/// pieces; pieces linked by some commutant element carry equivalent
/// representations and are merged.
pub fn decompose(hams: &[CMat]) -> Result<Decomposition> {
    let n = check_inputs(hams)?;
    let csos = find_csos(hams)?;
    if csos.is_empty() {
        return Ok(Decomposition {
            blocks: vec![Block { basis: CMat::identity(n, n) }],
            accessible_index: 0,
            provenance: vec![Vec::new()],
            csos,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(DECOMPOSE_SEED);
    let generic = csos
        .iter()
        .fold(CMat::zeros(n, n), |acc, j| acc + j.matrix.scale(rng.random_range(0.5..1.5) * if rng.random_bool(0.5) { 1.0 } else { -1.0 }));
    let (vals, vecs) = hermitian_eigen(&generic);
    let scale = vals.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-300);
    let pieces: Vec<CMat> = group_degenerate(&vals, DEGENERACY_TOL * scale)
        .into_iter()
        .map(|g| vecs.columns(g[0], g.len()).into_owned())
        .collect();

    let mut parent: Vec<usize> = (0..pieces.len()).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        p[x] = r;
        r
    }
    for a in 0..pieces.len() {
        for b in (a + 1)..pieces.len() {
            let linked = csos.iter().any(|j| {
                let m = frobenius(&j.matrix);
                frobenius(&(pieces[a].adjoint() * &j.matrix * &pieces[b])) > 1e-8 * m
            });
            if linked {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                parent[rb] = ra;
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut roots: Vec<usize> = Vec::new();
    for k in 0..pieces.len() {
        let r = find(&mut parent, k);
        match roots.iter().position(|&x| x == r) {
            Some(p) => groups[p].push(k),
            None => {
                roots.push(r);
                groups.push(vec![k]);
            }
        }
    }
    let mut blocks: Vec<Block> = groups
        .iter()
        .map(|g| {
            let cols: Vec<CVec> = g.iter().flat_map(|&k| pieces[k].column_iter().map(|c| c.into_owned()).collect::<Vec<_>>()).collect();
            Block { basis: columns(&cols, n) }
        })
        .collect();
    let first_support = |b: &Block| {
        let p = b.projector();
        (0..n).find(|&k| p[(k, k)].re > 1e-9).unwrap_or(n)
    };
    blocks.sort_by_key(|b| (first_support(b), std::cmp::Reverse(b.dim())));

    let accessible_index = (0..blocks.len())
        .max_by(|&a, &b| {
            let wa = blocks[a].basis.row(0).norm();
            let wb = blocks[b].basis.row(0).norm();
            wa.total_cmp(&wb)
        })
        .unwrap();

    // a CSO separates a block when its mean value there differs elsewhere
    let means: Vec<Vec<f64>> = csos
        .iter()
        .map(|j| blocks.iter().map(|b| (trace(&(b.basis.adjoint() * &j.matrix * &b.basis)).re) / b.dim() as f64).collect())
        .collect();
    let provenance = (0..blocks.len())
        .map(|d| {
            (0..csos.len())
                .filter(|&k| (0..blocks.len()).any(|e| e != d && (means[k][d] - means[k][e]).abs() > 1e-8))
                .collect()
        })
        .collect();

    Ok(Decomposition { blocks, accessible_index, provenance, csos })
}

/// Dimension of the real Lie algebra generated by `{i H_m}`.
///
/// New elements are commuted with every generator until no direction
/// survives Gram-Schmidt; the result is confirmed by an SVD rank.
pub fn lie_closure_dimension(generators: &[CMat], max_dim: usize) -> Result<usize> {
    let n = check_inputs(generators)?;
    let as_real = |m: &CMat| DVector::from_iterator(2 * n * n, m.iter().map(|z| z.re).chain(m.iter().map(|z| z.im)));
    let gens: Vec<CMat> = generators.iter().map(|h| h * I).collect();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut kept: Vec<CMat> = Vec::new();
    let mut queue: VecDeque<CMat> = VecDeque::new();

    // `scale` bounds the norm of `x` so vanishing commutators are recognized
    let try_add = |x: CMat, scale: f64, basis: &mut Vec<DVector<f64>>, kept: &mut Vec<CMat>| -> Option<CMat> {
        let v = as_real(&x);
        let n0 = v.norm();
        if n0 <= 1e-10 * scale || n0 == 0.0 {
            return None;
        }
        let mut w = v / n0;
        for _ in 0..2 {
            for q in basis.iter() {
                let p = q.dot(&w);
                w -= q * p;
            }
        }
        let r = w.norm();
        if r < 1e-9 {
            return None;
        }
        basis.push(w / r);
        let normed = x.scale(1.0 / n0);
        kept.push(normed.clone());
        Some(normed)
    };

    for g in &gens {
        if let Some(x) = try_add(g.clone(), 0.0, &mut basis, &mut kept) {
            queue.push_back(x);
        }
    }
    while let Some(x) = queue.pop_front() {
        for g in &gens {
            if let Some(y) = try_add(commutator(g, &x), 2.0 * frobenius(g) * frobenius(&x), &mut basis, &mut kept) {
                if basis.len() > max_dim {
                    return Err(Error::ClosureCap(max_dim));
                }
                queue.push_back(y);
            }
        }
    }
    let stacked = CMat::from_fn(2 * n * n, kept.len(), |r, k| c(as_real(&kept[k])[r], 0.0));
    Ok(rank(&stacked, RANK_TOL))
}
