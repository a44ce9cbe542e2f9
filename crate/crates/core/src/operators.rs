//! Drift and control Hamiltonians restricted to fixed excitation number.

use std::collections::HashMap;

use itertools::Itertools;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::linalg::{c, CMat};
use crate::network::{SpinNetwork, Which};

/// Lexicographic basis of k-excitation states, each an ascending tuple
/// of 1-based spin indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExcitationBasis {
    pub n: usize,
    pub k: usize,
    pub states: Vec<Vec<usize>>,
}

impl ExcitationBasis {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, state: &[usize]) -> Option<usize> {
        self.states.binary_search_by(|s| s.as_slice().cmp(state)).ok()
    }

    pub fn label(&self, idx: usize) -> String {
        let s = &self.states[idx];
        if s.is_empty() {
            "0".to_string()
        } else {
            s.iter().join(",")
        }
    }
}

pub fn excitation_basis(n: usize, k: usize) -> Result<ExcitationBasis> {
    if k > n {
        return Err(Error::ExcitationOutOfRange { n, k });
    }
    let states = (1..=n).combinations(k).collect();
    Ok(ExcitationBasis { n, k, states })
}

/// Dense operator on one or more concatenated excitation sectors.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    pub sectors: Vec<ExcitationBasis>,
    pub entries: CMat,
}

impl OperatorMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn labels(&self) -> Vec<String> {
        self.sectors
            .iter()
            .flat_map(|b| (0..b.len()).map(move |i| b.label(i)))
            .collect()
    }

    /// Nested `[re, im]` pairs.
    pub fn to_json(&self) -> Value {
        matrix_json(&self.entries)
    }

    /// `row,col,value` triplets (0-based) of the nonzero real entries.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(["row", "col", "value"]).map_err(io)?;
        for (r, k) in (0..self.dim()).cartesian_product(0..self.dim()) {
            let z = self.entries[(r, k)];
            if z.im != 0.0 {
                return Err(Error::Invalid("CSV export requires a real matrix".into()));
            }
            if z.re != 0.0 {
                w.serialize((r, k, z.re)).map_err(io)?;
            }
        }
        String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.to_string()))?).map_err(|e| Error::Io(e.to_string()))
    }
}

pub fn matrix_json(m: &CMat) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|r| Value::Array((0..m.ncols()).map(|k| json!([m[(r, k)].re, m[(r, k)].im])).collect()))
            .collect(),
    )
}

/// Hopping matrix between k-excitation states: an element is `d_ij` when the
/// two occupation sets differ exactly by the pair {i, j} and (i, j) is an edge.
pub fn restrict(net: &SpinNetwork, which: Which, k: usize) -> Result<OperatorMatrix> {
    let basis = excitation_basis(net.n, k)?;
    let entries = hopping(net, which, &basis);
    Ok(OperatorMatrix { sectors: vec![basis], entries })
}

fn hopping(net: &SpinNetwork, which: Which, basis: &ExcitationBasis) -> CMat {
    let dim = basis.len();
    let mut m = CMat::zeros(dim, dim);
    let index: HashMap<&[usize], usize> = basis.states.iter().enumerate().map(|(k, s)| (s.as_slice(), k)).collect();
    for (row, s) in basis.states.iter().enumerate() {
        for e in net.edges(which) {
            let (hi, hj) = (s.contains(&e.i), s.contains(&e.j));
            if hi == hj {
                continue;
            }
            let (from, to) = if hi { (e.i, e.j) } else { (e.j, e.i) };
            let mut t: Vec<usize> = s.iter().map(|&v| if v == from { to } else { v }).collect();
            t.sort_unstable();
            let col = index[t.as_slice()];
            m[(row, col)] = c(e.w, 0.0);
        }
    }
    m
}

/// Block-diagonal drift and control over the concatenated sectors `ks`.
pub fn direct_sum_sector(net: &SpinNetwork, ks: &[usize]) -> Result<(OperatorMatrix, OperatorMatrix)> {
    if ks.iter().duplicates().next().is_some() {
        return Err(Error::Invalid("excitation counts must be distinct".into()));
    }
    let sectors: Vec<ExcitationBasis> = ks.iter().map(|&k| excitation_basis(net.n, k)).collect::<Result<_>>()?;
    let dim: usize = sectors.iter().map(|b| b.len()).sum();
    let mut drift = CMat::zeros(dim, dim);
    let mut control = CMat::zeros(dim, dim);
    let mut off = 0;
    for b in &sectors {
        let len = b.len();
        drift.view_mut((off, off), (len, len)).copy_from(&hopping(net, Which::Drift, b));
        control.view_mut((off, off), (len, len)).copy_from(&hopping(net, Which::Control, b));
        off += len;
    }
    Ok((
        OperatorMatrix { sectors: sectors.clone(), entries: drift },
        OperatorMatrix { sectors, entries: control },
    ))
}
