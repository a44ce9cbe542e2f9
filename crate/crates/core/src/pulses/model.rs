//! Rotating-wave model of a driven sector in the drift eigenbasis.
//!
//! Amplitudes are interaction-picture coefficients `c_p` with
//! `psi(t) = sum_p c_p exp(-i E_p t) |p>`. A segment's tones produce a
//! time-independent effective Hamiltonian: resonant couplings at first
//! order, Stark shifts and two-photon couplings at second order.

use crate::bounds::SpectralData;
use crate::error::{Error, Result};
use crate::linalg::{c, expm_hermitian, hermitian_eigen, CMat, CVec, C64, I};
use crate::network::{SpinNetwork, Which};
use crate::operators::{excitation_basis, restrict, ExcitationBasis};

use super::schedule::{Segment, SegmentKind, Tone};

/// Detunings below this count as resonant.
pub const RESONANCE_TOL: f64 = 1e-7;
const COUPLING_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct SectorModel {
    pub k: usize,
    pub basis: ExcitationBasis,
    /// Model levels as columns in the site basis of the sector.
    pub vectors: CMat,
    pub energies: Vec<f64>,
    /// Control operator between model levels.
    pub coupling: CMat,
}

impl SectorModel {
    /// Model from explicit drift eigenvectors (columns, site basis).
    pub fn from_vectors(net: &SpinNetwork, k: usize, vectors: CMat) -> Result<Self> {
        let basis = excitation_basis(net.n, k)?;
        let h0 = restrict(net, Which::Drift, k)?.entries;
        let hc = restrict(net, Which::Control, k)?.entries;
        if vectors.nrows() != basis.len() || vectors.ncols() != basis.len() {
            return Err(Error::Invalid(format!("need {} model levels in sector {k}", basis.len())));
        }
        let gram = vectors.adjoint() * &vectors;
        if (gram - CMat::identity(basis.len(), basis.len())).norm() > 1e-8 {
            return Err(Error::Invalid("model levels are not orthonormal".into()));
        }
        let rotated = vectors.adjoint() * &h0 * &vectors;
        let energies: Vec<f64> = (0..basis.len()).map(|p| rotated[(p, p)].re).collect();
        let off: f64 = (0..basis.len())
            .flat_map(|p| (0..basis.len()).map(move |q| (p, q)))
            .filter(|(p, q)| p != q)
            .map(|(p, q)| rotated[(p, q)].norm_sqr())
            .sum();
        if off.sqrt() > 1e-8 * (1.0 + h0.norm()) {
            return Err(Error::Invalid("model levels are not drift eigenvectors".into()));
        }
        let coupling = vectors.adjoint() * hc * &vectors;
        Ok(SectorModel { k, basis, vectors, energies, coupling })
    }

    /// Single-excitation model: level 0 is `|1>`, levels `1..spec.len()`
    /// follow the spectral indices, then the dark vectors. `dark`
    /// optionally replaces the dark vectors.
    pub fn single(net: &SpinNetwork, spec: &SpectralData, dark: Option<&[CVec]>) -> Result<Self> {
        let mut cols: Vec<CVec> = (0..spec.len()).map(|k| spec.vector(k)).collect();
        match dark {
            Some(d) => cols.extend(d.iter().cloned()),
            None => cols.extend(spec.dark.iter().map(|d| d.vector.clone())),
        }
        Self::from_vectors(net, 1, crate::linalg::columns(&cols, net.n))
    }

    /// Two-excitation model: `|1> (x) v` for each non-pendant level of the
    /// single model (same order, offset by -1), then bulk eigenvectors with
    /// spin 1 empty.
    pub fn catalytic(net: &SpinNetwork, spec: &SpectralData, dark: Option<&[CVec]>) -> Result<Self> {
        let basis = excitation_basis(net.n, 2)?;
        let dim = basis.len();
        let mut singles: Vec<CVec> = (1..spec.len()).map(|k| spec.vector(k)).collect();
        match dark {
            Some(d) => singles.extend(d.iter().cloned()),
            None => singles.extend(spec.dark.iter().map(|d| d.vector.clone())),
        }
        let mut cols: Vec<CVec> = Vec::with_capacity(dim);
        for v in &singles {
            let mut out = CVec::zeros(dim);
            for x in 2..=net.n {
                out[basis.index_of(&[1, x]).expect("pair state")] = v[x - 1];
            }
            cols.push(out);
        }
        let bulk: Vec<usize> = (0..dim).filter(|&i| basis.states[i][0] != 1).collect();
        let h0 = restrict(net, Which::Drift, 2)?.entries;
        let sub = CMat::from_fn(bulk.len(), bulk.len(), |r, s| h0[(bulk[r], bulk[s])]);
        let (_, vecs) = hermitian_eigen(&sub);
        for j in 0..bulk.len() {
            let mut out = CVec::zeros(dim);
            for (r, &i) in bulk.iter().enumerate() {
                out[i] = vecs[(r, j)];
            }
            cols.push(out);
        }
        Self::from_vectors(net, 2, crate::linalg::columns(&cols, dim))
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// Interaction-picture amplitudes of a site-basis state at time `t`.
    pub fn to_interaction(&self, psi: &CVec, t: f64) -> CVec {
        let c0 = self.vectors.adjoint() * psi;
        CVec::from_iterator(self.dim(), c0.iter().zip(&self.energies).map(|(z, &e)| z * (I * e * t).exp()))
    }

    /// Site-basis state at time `t` from interaction-picture amplitudes.
    pub fn to_lab(&self, amps: &CVec, t: f64) -> CVec {
        let rotated = CVec::from_iterator(self.dim(), amps.iter().zip(&self.energies).map(|(z, &e)| z * (-I * e * t).exp()));
        &self.vectors * rotated
    }

    /// Effective Hamiltonian of a set of tones.
    pub fn effective_hamiltonian(&self, tones: &[Tone]) -> CMat {
        let m = self.dim();
        let mut h = CMat::zeros(m, m);
        // (p, q, v, d): element [p][q] gains v exp(i d t)
        let mut terms: Vec<(usize, usize, C64, f64)> = Vec::new();
        for p in 0..m {
            for q in 0..m {
                let g = self.coupling[(p, q)];
                if g.norm() < COUPLING_FLOOR {
                    continue;
                }
                let gap = self.energies[p] - self.energies[q];
                for tone in tones {
                    for sgn in [-1.0, 1.0] {
                        let v = g * tone.amplitude * (I * sgn * tone.phase).exp();
                        let d = gap + sgn * tone.frequency;
                        if d.abs() < RESONANCE_TOL {
                            h[(p, q)] += v;
                        } else {
                            terms.push((p, q, v, d));
                        }
                    }
                }
            }
        }
        let mut by_source: Vec<Vec<usize>> = vec![Vec::new(); m];
        for (idx, t) in terms.iter().enumerate() {
            by_source[t.0].push(idx);
        }
        for &(p, q, v1, d1) in &terms {
            for &idx in &by_source[q] {
                let (_, r, v2, d2) = terms[idx];
                if (d1 + d2).abs() < RESONANCE_TOL {
                    h[(p, r)] += v1 * v2 * (0.5 * (1.0 / d1 - 1.0 / d2));
                }
            }
        }
        (&h + h.adjoint()).scale(0.5)
    }

    /// Propagate amplitudes through one timed segment.
    pub fn propagate(&self, amps: &CVec, segment: &Segment) -> CVec {
        if segment.kind == SegmentKind::Free || segment.tones.is_empty() {
            return amps.clone();
        }
        let h = self.effective_hamiltonian(&segment.tones);
        expm_hermitian(&h, segment.duration) * amps
    }

    pub fn unit(&self, level: usize) -> CVec {
        let mut v = CVec::zeros(self.dim());
        v[level] = c(1.0, 0.0);
        v
    }
}

/// Amplitudes of `|1> (x) psi` in the catalytic model from single-model
/// amplitudes (pendant component dropped). `dim` is the catalytic model size.
pub fn inject_amplitudes(single: &CVec, dim: usize) -> (CVec, f64) {
    let lost = single[0].norm_sqr();
    let mut out = CVec::zeros(dim);
    out.rows_mut(0, single.len() - 1).copy_from(&single.rows(1, single.len() - 1));
    (out, lost)
}

/// Inverse of [`inject_amplitudes`]; bulk amplitudes are lost.
pub fn extract_amplitudes(two: &CVec, singles: usize) -> (CVec, f64) {
    let mut out = CVec::zeros(singles + 1);
    out.rows_mut(1, singles).copy_from(&two.rows(0, singles));
    let lost = two.rows(singles, two.len() - singles).norm_squared();
    (out, lost)
}
