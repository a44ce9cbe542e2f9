//! Lab-frame propagation of `i d/dt psi = (H0 + f(t) Hc) psi`.
//!
//! Each sub-step is a Strang splitting with the drift half-steps merged
//! across steps, carried out in the eigenbasis of the control operator.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::bounds::{max_fidelity, FidelityBound};
use crate::error::{Error, Result};
use crate::linalg::{expm_hermitian, hermitian_eigen, CMat, CVec, I};
use crate::network::SpinNetwork;
use crate::operators::{direct_sum_sector, ExcitationBasis};

use super::schedule::{PulseSchedule, Segment, SegmentKind};

/// Default step as a fraction of `1/||H||`.
pub const DEFAULT_STEP: f64 = 0.01;
/// Largest admissible step as a fraction of `1/||H||`.
pub const STEP_CAP: f64 = 0.1;
const NORM_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct SimOptions {
    pub dt: Option<f64>,
    /// Approximate number of trajectory samples.
    pub samples: usize,
    pub target: Option<CVec>,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { dt: None, samples: 2000, target: None }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub labels: Vec<String>,
    pub times: Vec<f64>,
    pub populations: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(e.to_string());
        let mut header = vec!["time".to_string()];
        header.extend(self.labels.iter().cloned());
        w.write_record(&header).map_err(io)?;
        for (t, row) in self.times.iter().zip(&self.populations) {
            let mut rec = vec![format!("{t:.12e}")];
            rec.extend(row.iter().map(|p| format!("{p:.12e}")));
            w.write_record(&rec).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct SimulationResult {
    pub final_state: CVec,
    pub final_sectors: Vec<usize>,
    pub fidelity: Option<f64>,
    /// Fidelity maximized over the relative phase between sectors.
    pub phase_optimized: bool,
    pub trajectory: Trajectory,
    /// In-sector bound, present for single-excitation schedules without
    /// catalyst markers.
    pub bound: Option<FidelityBound>,
    pub extraction_loss: f64,
    pub norm_error: f64,
    pub dt: f64,
    pub duration: f64,
}

/// State space made of concatenated excitation sectors.
#[derive(Debug, Clone)]
struct Space {
    ks: Vec<usize>,
    bases: Vec<ExcitationBasis>,
    drift: CMat,
    control: CMat,
}

impl Space {
    fn new(net: &SpinNetwork, ks: &[usize]) -> Result<Self> {
        let (d, c) = direct_sum_sector(net, ks)?;
        Ok(Space { ks: ks.to_vec(), bases: d.sectors, drift: d.entries, control: c.entries })
    }

    fn dim(&self) -> usize {
        self.drift.nrows()
    }

    fn states(&self) -> impl Iterator<Item = &Vec<usize>> {
        self.bases.iter().flat_map(|b| b.states.iter())
    }

    fn labels(&self) -> Vec<String> {
        self.bases.iter().flat_map(|b| (0..b.len()).map(move |i| b.label(i))).collect()
    }
}

/// Relabel into the neighbouring sector space: inject adds spin 1, extract
/// removes it. Returns the new state and the weight lost.
fn relabel(from: &Space, to: &Space, psi: &CVec, inject: bool) -> (CVec, f64) {
    let mut out = CVec::zeros(to.dim());
    let index: BTreeMap<&Vec<usize>, usize> = to.states().enumerate().map(|(i, s)| (s, i)).collect();
    let mut lost = 0.0;
    for (i, s) in from.states().enumerate() {
        let has_one = s.first() == Some(&1);
        let image: Option<Vec<usize>> = match (inject, has_one) {
            (true, false) => Some(std::iter::once(1).chain(s.iter().copied()).collect()),
            (false, true) => Some(s[1..].to_vec()),
            _ => None,
        };
        match image.and_then(|img| index.get(&img).copied()) {
            Some(j) => out[j] = psi[i],
            None => lost += psi[i].norm_sqr(),
        }
    }
    (out, lost)
}

fn spaces_of(net: &SpinNetwork, schedule: &PulseSchedule) -> Result<Vec<Space>> {
    let mut ks = schedule.sectors.clone();
    let mut out = vec![Space::new(net, &ks)?];
    for s in &schedule.segments {
        match s.kind {
            SegmentKind::InjectCatalyst => {
                if ks.iter().any(|&k| k + 1 > net.n) {
                    return Err(Error::SectorMismatch("cannot inject above the full sector".into()));
                }
                ks = ks.iter().map(|k| k + 1).collect();
                out.push(Space::new(net, &ks)?);
            }
            SegmentKind::ExtractCatalyst => {
                if ks.contains(&0) {
                    return Err(Error::SectorMismatch("cannot extract from the vacuum".into()));
                }
                ks = ks.iter().map(|k| k - 1).collect();
                out.push(Space::new(net, &ks)?);
            }
            _ => {}
        }
    }
    Ok(out)
}

/// Spectral norm bound used for the default step.
pub fn hamiltonian_scale(net: &SpinNetwork, schedule: &PulseSchedule) -> Result<f64> {
    let mut scale: f64 = 0.0;
    for sp in spaces_of(net, schedule)? {
        let h0 = hermitian_eigen(&sp.drift).0.iter().map(|x| x.abs()).fold(0.0, f64::max);
        let hc = hermitian_eigen(&sp.control).0.iter().map(|x| x.abs()).fold(0.0, f64::max);
        let fmax: f64 = schedule.segments.iter().map(|s| s.tones.iter().map(|t| 2.0 * t.amplitude.abs()).sum::<f64>()).fold(0.0, f64::max);
        scale = scale.max(h0 + fmax * hc).max(schedule.max_frequency());
    }
    Ok(scale.max(1e-12))
}

struct Propagator {
    w: CMat,
    cvals: Vec<f64>,
}

impl Propagator {
    fn new(space: &Space) -> Self {
        let (cvals, w) = hermitian_eigen(&space.control);
        Propagator { w, cvals }
    }
}

struct Recorder {
    columns: BTreeMap<String, usize>,
    times: Vec<f64>,
    rows: Vec<Vec<f64>>,
    spacing: f64,
    next: f64,
}

impl Recorder {
    fn record(&mut self, t: f64, space: &Space, psi: &CVec, force: bool) {
        if !force && t + 1e-12 < self.next {
            return;
        }
        let mut row = vec![0.0; self.columns.len()];
        for (label, z) in space.labels().iter().zip(psi.iter()) {
            row[self.columns[label]] = z.norm_sqr();
        }
        self.times.push(t);
        self.rows.push(row);
        while self.next <= t + 1e-12 {
            self.next += self.spacing;
        }
    }
}

/// Simulate `schedule` from `initial`, a state in `schedule.sectors`.
pub fn simulate(net: &SpinNetwork, schedule: &PulseSchedule, initial: &CVec, options: &SimOptions) -> Result<SimulationResult> {
    schedule.validate()?;
    let spaces = spaces_of(net, schedule)?;
    if initial.len() != spaces[0].dim() {
        return Err(Error::SectorMismatch(format!(
            "initial state has {} amplitudes, sectors {:?} have {}",
            initial.len(),
            schedule.sectors,
            spaces[0].dim()
        )));
    }
    let norm = initial.norm();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::NotNormalized(norm));
    }
    let scale = hamiltonian_scale(net, schedule)?;
    let dt = options.dt.unwrap_or(DEFAULT_STEP / scale);
    if !(dt > 0.0) || dt > STEP_CAP / scale {
        return Err(Error::Invalid(format!("dt must lie in (0, {:.6e}]", STEP_CAP / scale)));
    }

    let mut columns = BTreeMap::new();
    let mut labels = Vec::new();
    for sp in &spaces {
        for l in sp.labels() {
            if !columns.contains_key(&l) {
                columns.insert(l.clone(), labels.len());
                labels.push(l);
            }
        }
    }
    let total = schedule.duration();
    let spacing = if total > 0.0 { total / options.samples.max(1) as f64 } else { 1.0 };
    let mut rec = Recorder { columns, times: Vec::new(), rows: Vec::new(), spacing, next: 0.0 };

    let mut which = 0;
    let mut psi = initial.clone();
    let mut expected = 1.0;
    let mut extraction_loss = 0.0;
    let mut norm_error: f64 = 0.0;
    let mut t = 0.0;
    let mut prop = Propagator::new(&spaces[0]);
    rec.record(t, &spaces[0], &psi, true);

    for seg in &schedule.segments {
        match seg.kind {
            SegmentKind::InjectCatalyst | SegmentKind::ExtractCatalyst => {
                let inject = seg.kind == SegmentKind::InjectCatalyst;
                let (next, lost) = relabel(&spaces[which], &spaces[which + 1], &psi, inject);
                psi = next;
                expected -= lost;
                extraction_loss += lost;
                which += 1;
                prop = Propagator::new(&spaces[which]);
                rec.record(t, &spaces[which], &psi, true);
            }
            _ => {
                psi = run_segment(&spaces[which], &prop, seg, psi, t, dt, &mut rec, &mut norm_error, expected)?;
                t += seg.duration;
            }
        }
    }
    rec.record(t, &spaces[which], &psi, true);
    let drift = (psi.norm_squared() - expected).abs();
    norm_error = norm_error.max(drift);
    if norm_error > NORM_TOL {
        return Err(Error::NormalizationDrift(norm_error));
    }

    let space = &spaces[which];
    let (fidelity, phase_optimized) = match &options.target {
        None => (None, false),
        Some(target) => {
            if target.len() != space.dim() {
                return Err(Error::SectorMismatch(format!("target has {} amplitudes, final sectors have {}", target.len(), space.dim())));
            }
            if space.ks.len() == 1 {
                (Some(target.dotc(&psi).norm_sqr()), false)
            } else {
                let mut off = 0;
                let mut sum = 0.0;
                for b in &space.bases {
                    sum += target.rows(off, b.len()).dotc(&psi.rows(off, b.len())).norm();
                    off += b.len();
                }
                (Some(sum * sum), true)
            }
        }
    };
    let in_sector = schedule.sectors == [1] && !schedule.segments.iter().any(|s| s.is_marker());
    let bound = match (&options.target, in_sector) {
        (Some(target), true) => max_fidelity(net, target).ok(),
        _ => None,
    };

    Ok(SimulationResult {
        final_state: psi,
        final_sectors: space.ks.clone(),
        fidelity,
        phase_optimized,
        trajectory: Trajectory { labels, times: rec.times, populations: rec.rows },
        bound,
        extraction_loss,
        norm_error,
        dt,
        duration: total,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_segment(
    space: &Space,
    prop: &Propagator,
    seg: &Segment,
    psi: CVec,
    t0: f64,
    dt: f64,
    rec: &mut Recorder,
    norm_error: &mut f64,
    expected: f64,
) -> Result<CVec> {
    let undriven = seg.tones.iter().all(|t| t.amplitude == 0.0);
    if undriven {
        // exact drift evolution, stepped only for the trajectory
        let steps = ((seg.duration / rec.spacing).ceil() as usize).max(1);
        let h = seg.duration / steps as f64;
        let u = expm_hermitian(&space.drift, h);
        let mut psi = psi;
        for k in 1..=steps {
            psi = &u * psi;
            rec.record(t0 + k as f64 * h, space, &psi, false);
        }
        return Ok(psi);
    }
    let steps = ((seg.duration / dt).ceil() as usize).max(1);
    let h = seg.duration / steps as f64;
    let half = expm_hermitian(&space.drift, 0.5 * h);
    let full = expm_hermitian(&space.drift, h);
    let k_mat = prop.w.adjoint() * full * &prop.w;
    let enter = prop.w.adjoint() * &half;
    let leave = &half * &prop.w;
    let dim = space.dim();
    let active: Vec<usize> = (0..dim).filter(|&j| prop.cvals[j] != 0.0).collect();

    let kick = |y: &mut CVec, t_mid: f64| {
        let f = seg.control(t_mid);
        for &j in &active {
            y[j] *= (-I * (f * h * prop.cvals[j])).exp();
        }
    };

    let mut y = &enter * psi;
    let mut scratch = CVec::zeros(dim);
    kick(&mut y, t0 + 0.5 * h);
    for k in 1..=steps {
        let t_end = t0 + k as f64 * h;
        if t_end + 1e-12 >= rec.next || k == steps {
            let psi_k = &leave * &y;
            let drift = (psi_k.norm_squared() - expected).abs();
            *norm_error = norm_error.max(drift);
            if drift > NORM_TOL {
                return Err(Error::NormalizationDrift(drift));
            }
            if k == steps {
                return Ok(psi_k);
            }
            rec.record(t_end, space, &psi_k, false);
        }
        k_mat.mul_to(&y, &mut scratch);
        std::mem::swap(&mut y, &mut scratch);
        kick(&mut y, t_end + 0.5 * h);
    }
    unreachable!("loop returns on the last step")
}
