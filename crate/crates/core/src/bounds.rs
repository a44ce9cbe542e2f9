//! Spectral data of the accessible subspace, maximum transfer fidelities,
//! bipartite phase constraints and dark-state classification.

use std::collections::{BTreeSet, VecDeque};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    basis_vector, c, columns, group_degenerate, orthonormalize, symmetric_eigen, to_complex, CMat, CVec, C64, I,
};
use crate::network::{automorphisms, bipartition, Permutation, SpinNetwork, Which};
use crate::operators::{excitation_basis, restrict};
use crate::symmetries::{find_asos, restrict_to};

/// Overlaps below this are exact zeros.
pub const DARK_TOL: f64 = 1e-9;
const PHASE_TOL: f64 = 1e-9;
const DEGENERACY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Serialize)]
pub struct DarkMode {
    pub eigenvalue: f64,
    #[serde(skip)]
    pub vector: CVec,
    /// Symmetric under every drift automorphism fixing spins 1 and 2.
    pub symmetric: bool,
}

/// Eigen-data of `A` on `H_a` together with `|1>`.
///
/// Column 0 of `eigenvectors` is `|1>` itself (eigenvalue 0, overlap 0);
/// the remaining columns are the accessible eigenvectors sorted by
/// eigenvalue, phased so that `<2|lambda_n> > 0`.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub n: usize,
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMat,
    pub overlaps: Vec<f64>,
    pub paired_with: Vec<Option<usize>>,
    /// ASO of `(A, C)` on `H_a`, written in the vertex basis.
    pub aso: Option<CMat>,
    pub dark: Vec<DarkMode>,
}

impl SpectralData {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn vector(&self, k: usize) -> CVec {
        self.eigenvectors.column(k).into_owned()
    }

    /// Accessible eigenvector indices (excluding `|1>`).
    pub fn accessible(&self) -> std::ops::Range<usize> {
        1..self.len()
    }

    pub fn ha_projector(&self) -> CMat {
        &self.eigenvectors * self.eigenvectors.adjoint()
    }

    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues.iter().map(|l| l.abs()).fold(0.0, f64::max)
    }
}

fn real_adjacency(net: &SpinNetwork, which: Which) -> DMatrix<f64> {
    let m = restrict(net, which, 1).expect("k=1 is valid").entries;
    m.map(|z| z.re)
}

fn symmetrizer(net: &SpinNetwork) -> Result<Option<CMat>> {
    let perms = automorphisms(net, &BTreeSet::from([1, 2]))?;
    if perms.is_empty() {
        return Ok(None);
    }
    let n = net.n;
    let mut p = CMat::identity(n, n);
    for perm in &perms {
        p += permutation_matrix(perm);
    }
    Ok(Some(p / c((perms.len() + 1) as f64, 0.0)))
}

fn permutation_matrix(perm: &Permutation) -> CMat {
    let n = perm.images.len();
    let mut m = CMat::zeros(n, n);
    for v in 1..=n {
        m[(perm.apply(v) - 1, v - 1)] = c(1.0, 0.0);
    }
    m
}

fn canonical_phase(v: CVec) -> CVec {
    let lead = v.iter().copied().fold(c(0.0, 0.0), |best, z| if z.norm() > best.norm() + 1e-12 { z } else { best });
    if lead.norm() == 0.0 {
        return v;
    }
    v * (lead.conj() / lead.norm())
}

/// Eigendecomposition of `A` on the accessible subspace.
///
/// Within each degenerate eigenspace only the direction of `Pi_k |2>` is
/// accessible; its orthogonal complement is dark.
pub fn spectral(net: &SpinNetwork) -> Result<SpectralData> {
    net.require_pendant()?;
    let n = net.n;
    let a = real_adjacency(net, Which::Drift);
    let sub = a.view((1, 1), (n - 1, n - 1)).into_owned();
    let (vals, vecs) = symmetric_eigen(&sub);
    let radius = vals.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let tol = DEGENERACY_TOL * radius.max(1e-12);
    let sym = if n <= 12 { symmetrizer(net)? } else { None };

    let embed = |v: &[f64]| {
        let mut out = CVec::zeros(n);
        for (k, &x) in v.iter().enumerate() {
            out[k + 1] = c(x, 0.0);
        }
        out
    };

    let mut accessible: Vec<(f64, f64, CVec)> = Vec::new();
    let mut dark: Vec<DarkMode> = Vec::new();
    for group in group_degenerate(&vals, tol) {
        let lambda = group.iter().map(|&k| vals[k]).sum::<f64>() / group.len() as f64;
        let q = vecs.columns(group[0], group.len());
        let coeffs = q.row(0).transpose();
        let alpha = coeffs.norm();
        let cols: Vec<CVec> = (0..group.len()).map(|k| embed(q.column(k).as_slice())).collect();
        let mut spanning = Vec::new();
        if alpha > DARK_TOL {
            let v = q * &coeffs / alpha;
            let bright = embed(v.as_slice());
            accessible.push((lambda, alpha, bright.clone()));
            spanning.push(bright);
        }
        let prefix = spanning.len();
        // split the dark complement by automorphism symmetry where possible
        let mut candidates = spanning.clone();
        if let Some(p) = &sym {
            let pc: Vec<CVec> = cols.iter().map(|v| p * v).collect();
            candidates.extend(pc);
        }
        candidates.extend(cols.iter().cloned());
        let ortho = orthonormalize(&candidates, 1e-8);
        for v in ortho.into_iter().skip(prefix) {
            let v = canonical_phase(v);
            let symmetric = match &sym {
                Some(p) => (p * &v - &v).norm() < 1e-8,
                None => true,
            };
            dark.push(DarkMode { eigenvalue: lambda, vector: v, symmetric });
        }
    }
    accessible.sort_by(|x, y| x.0.total_cmp(&y.0));

    let mut eigenvalues = vec![0.0];
    let mut overlaps = vec![0.0];
    let mut vectors = vec![basis_vector(n, 0)];
    for (l, al, v) in accessible {
        eigenvalues.push(l);
        overlaps.push(al);
        vectors.push(v);
    }
    let eigenvectors = columns(&vectors, n);

    let hams = restrict_to(&[to_complex(&a), to_complex(&real_adjacency(net, Which::Control))], &eigenvectors);
    let asos = find_asos(&hams)?;
    let aso = asos.first().map(|m| &eigenvectors * &m.matrix * eigenvectors.adjoint());
    let mut paired_with = vec![None; eigenvalues.len()];
    if aso.is_some() {
        for p in 1..eigenvalues.len() {
            if eigenvalues[p].abs() <= tol {
                continue;
            }
            paired_with[p] = (1..eigenvalues.len()).find(|&q| q != p && (eigenvalues[p] + eigenvalues[q]).abs() <= tol.max(1e-9));
        }
    }
    Ok(SpectralData { n, eigenvalues, eigenvectors, overlaps, paired_with, aso, dark })
}

#[derive(Debug, Clone, Serialize)]
pub struct DarkComponent {
    /// Index into `SpectralData::dark`.
    pub index: usize,
    pub eigenvalue: f64,
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub struct FidelityBound {
    pub value: f64,
    pub dark_components: Vec<DarkComponent>,
    pub phase_attainable: bool,
    pub phase: Option<f64>,
    /// `beta_n = <lambda_n|psi>` over the columns of the spectral data.
    pub target_decomposition: Vec<C64>,
    /// Normalized projection of the target onto `H_a`.
    pub optimal_output: CVec,
}

pub fn validate_target(n: usize, target: &CVec) -> Result<()> {
    if target.len() != n {
        return Err(Error::Target(format!("expected {n} amplitudes, got {}", target.len())));
    }
    let norm = target.norm();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::NotNormalized(norm));
    }
    let w = target[0].norm_sqr();
    if w > 1e-12 {
        return Err(Error::OverlapsPendant(w));
    }
    Ok(())
}

/// Maximum fidelity for producing `target` from `|1>`.
pub fn max_fidelity(net: &SpinNetwork, target: &CVec) -> Result<FidelityBound> {
    let spec = spectral(net)?;
    max_fidelity_with(net, &spec, target)
}

pub fn max_fidelity_with(net: &SpinNetwork, spec: &SpectralData, target: &CVec) -> Result<FidelityBound> {
    validate_target(spec.n, target)?;
    let beta: Vec<C64> = (0..spec.len()).map(|k| spec.eigenvectors.column(k).dotc(target)).collect();
    let dark_components: Vec<DarkComponent> = spec
        .dark
        .iter()
        .enumerate()
        .map(|(index, d)| DarkComponent { index, eigenvalue: d.eigenvalue, weight: d.vector.dotc(target).norm_sqr() })
        .filter(|d| d.weight > 0.0)
        .collect();
    let lost: f64 = dark_components.iter().map(|d| d.weight).sum();
    let value = (1.0 - lost).clamp(0.0, 1.0);
    let projected = &spec.eigenvectors * CVec::from_vec(beta.clone());
    let pn = projected.norm();
    let optimal_output = if pn > 0.0 { projected / c(pn, 0.0) } else { projected };
    let reach = if pn > 0.0 { phase_reachability(net, &optimal_output)? } else { PhaseReach { reachable: true, phase: Some(0.0) } };
    Ok(FidelityBound {
        value,
        dark_components,
        phase_attainable: reach.reachable,
        phase: reach.phase,
        target_decomposition: beta,
        optimal_output,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseReach {
    pub reachable: bool,
    /// Global phase `g` such that `e^{ig} psi` is real on part A and
    /// imaginary on part B.
    pub phase: Option<f64>,
}

/// Signed colouring of the drift component of spin 2 (and spin 1 through
/// the control edge): `+1` on part A, `-1` on part B, `None` if not bipartite.
pub fn partition_signs(net: &SpinNetwork) -> Result<Option<Vec<(usize, bool)>>> {
    if net.n < 2 {
        return Err(Error::NotPendant("need at least two spins".into()));
    }
    let comp = net.drift_component(2);
    let Some(bp) = bipartition(net, &comp)? else {
        return Ok(None);
    };
    let mut out: Vec<(usize, bool)> = bp.part_a.iter().map(|&v| (v, true)).chain(bp.part_b.iter().map(|&v| (v, false))).collect();
    if !comp.contains(&1) && net.weight(Which::Control, 1, 2) != 0.0 {
        out.push((1, !bp.part_a.contains(&2)));
    }
    out.sort();
    Ok(Some(out))
}

/// Whether a global phase makes the target real on part A and imaginary on
/// part B of the drift bipartition.
pub fn phase_reachability(net: &SpinNetwork, target: &CVec) -> Result<PhaseReach> {
    let Some(signs) = partition_signs(net)? else {
        return Ok(PhaseReach { reachable: true, phase: Some(0.0) });
    };
    let w: Vec<C64> = signs.iter().map(|&(v, a)| if a { target[v - 1] } else { -I * target[v - 1] }).collect();
    let s: C64 = w.iter().map(|z| z * z).sum();
    let total: f64 = w.iter().map(|z| z.norm_sqr()).sum();
    if total == 0.0 {
        return Ok(PhaseReach { reachable: true, phase: Some(0.0) });
    }
    if total - s.norm() > PHASE_TOL * total {
        return Ok(PhaseReach { reachable: false, phase: None });
    }
    Ok(PhaseReach { reachable: true, phase: Some(-s.arg() / 2.0) })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum Blocker {
    /// A drift automorphism fixing spins 1 and 2 under which the vector is
    /// not symmetric; the antisymmetric sector persists in every
    /// excitation number.
    Permutation { permutation: String, images: Vec<usize> },
    /// The catalyst states do not connect to the accessible component of
    /// the two-excitation graph.
    Disconnected,
    /// Connected, but outside the invariant subspace reached from the
    /// accessible two-excitation states.
    HigherSectorDark,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "class")]
pub enum DarkClass {
    TrulyDark { blocker: Blocker },
    CatalyticallyAccessible,
}

/// Decide whether a dark vector can be reached with a catalytic excitation
/// on spin 1.
pub fn classify_dark(net: &SpinNetwork, dark_vector: &CVec) -> Result<DarkClass> {
    let spec = spectral(net)?;
    classify_dark_with(net, &spec, dark_vector)
}

pub fn classify_dark_with(net: &SpinNetwork, spec: &SpectralData, dark_vector: &CVec) -> Result<DarkClass> {
    let n = net.n;
    if dark_vector.len() != n {
        return Err(Error::NotDark(format!("expected {n} amplitudes")));
    }
    let norm = dark_vector.norm();
    if norm == 0.0 {
        return Err(Error::NotDark("zero vector".into()));
    }
    let v = dark_vector / c(norm, 0.0);
    let leak = (spec.ha_projector() * &v).norm();
    if leak > 1e-8 {
        return Err(Error::NotDark(format!("weight {:.3e} inside the accessible subspace", leak * leak)));
    }

    let perms = if n <= 12 { automorphisms(net, &BTreeSet::from([1, 2]))? } else { Vec::new() };
    if !perms.is_empty() {
        let mut avg = v.clone();
        for p in &perms {
            avg += permutation_matrix(p) * &v;
        }
        avg /= c((perms.len() + 1) as f64, 0.0);
        if (&v - &avg).norm() > 1e-9 {
            let worst = perms
                .iter()
                .max_by(|a, b| {
                    let da = (permutation_matrix(a) * &v - &v).norm();
                    let db = (permutation_matrix(b) * &v - &v).norm();
                    da.total_cmp(&db)
                })
                .unwrap();
            return Ok(DarkClass::TrulyDark {
                blocker: Blocker::Permutation { permutation: worst.to_string(), images: worst.images.clone() },
            });
        }
    }

    let basis2 = excitation_basis(n, 2)?;
    let a2 = restrict(net, Which::Drift, 2)?.entries;
    let c2 = restrict(net, Which::Control, 2)?.entries;
    let pair_index = |x: usize| basis2.index_of(&[1, x]).expect("x >= 2");

    // connectivity of the nonzero pattern from |1,2>
    let dim = basis2.len();
    let mut seen = vec![false; dim];
    let start = pair_index(2);
    seen[start] = true;
    let mut queue = VecDeque::from([start]);
    while let Some(s) = queue.pop_front() {
        for t in 0..dim {
            if !seen[t] && (a2[(s, t)].norm() > 0.0 || c2[(s, t)].norm() > 0.0) {
                seen[t] = true;
                queue.push_back(t);
            }
        }
    }
    let support: Vec<usize> = (1..n).filter(|&k| v[k].norm() > 1e-12).map(|k| k + 1).collect();
    if support.iter().any(|&x| !seen[pair_index(x)]) {
        return Ok(DarkClass::TrulyDark { blocker: Blocker::Disconnected });
    }

    // invariant subspace generated from the accessible catalyst states
    let lift = |u: &CVec| {
        let mut out = CVec::zeros(dim);
        for k in 1..n {
            out[pair_index(k + 1)] = u[k];
        }
        out
    };
    let seeds: Vec<CVec> = spec.accessible().map(|k| lift(&spec.vector(k))).collect();
    let krylov = invariant_span(&seeds, &[&a2, &c2]);
    let target = lift(&v);
    let k_mat = columns(&krylov, dim);
    let residual = (&target - &k_mat * (k_mat.adjoint() * &target)).norm();
    if residual < 1e-8 {
        Ok(DarkClass::CatalyticallyAccessible)
    } else {
        Ok(DarkClass::TrulyDark { blocker: Blocker::HigherSectorDark })
    }
}

/// Orthonormal basis of the smallest subspace containing `seeds` and
/// invariant under every operator in `ops`.
pub fn invariant_span(seeds: &[CVec], ops: &[&CMat]) -> Vec<CVec> {
    let mut basis = orthonormalize(seeds, 1e-10);
    let mut next = 0;
    while next < basis.len() {
        let v = basis[next].clone();
        next += 1;
        let mut cand = basis.clone();
        let before = cand.len();
        for op in ops {
            cand.push(*op * &v);
        }
        let grown = orthonormalize(&cand, 1e-10);
        if grown.len() > before {
            basis = grown;
        }
    }
    basis
}

/// Odd-power walk sums `<2|A^{2k+1}|2>` for `k = 0..=kmax`.
pub fn odd_power_sums(net: &SpinNetwork, kmax: usize) -> Vec<f64> {
    let a = real_adjacency(net, Which::Drift);
    let a2 = &a * &a;
    let mut p = a.clone();
    let mut out = Vec::with_capacity(kmax + 1);
    for _ in 0..=kmax {
        out.push(p[(1, 1)]);
        p = &p * &a2;
    }
    out
}
