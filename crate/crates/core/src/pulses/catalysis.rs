//! Catalytic transfer into weakly dark states.
//!
//! The single-excitation schedule loads an intermediate state whose dark
//! weight has been parked on a donor level. A second excitation is then
//! placed on spin 1, two-excitation pulses move the surplus from
//! `|1> (x) donor` through a bulk bridge eigenvector into `|1> (x) dark`,
//! and the catalyst is removed again.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::Serialize;

use crate::bounds::{classify_dark_with, max_fidelity_with, spectral, validate_target, Blocker, DarkClass, SpectralData};
use crate::error::{Error, Result};
use crate::linalg::{c, orthonormalize, CVec};
use crate::network::SpinNetwork;

use super::model::{extract_amplitudes, inject_amplitudes, SectorModel, RESONANCE_TOL};
use super::optimize::nelder_mead;
use super::schedule::{PulseSchedule, Segment, SegmentKind, Tone};
use super::synth::{feedback, plan_loads, synthesize_with, wrap, SynthOptions};

const COUPLING_MIN: f64 = 1e-6;
const WEIGHT_FLOOR: f64 = 1e-12;
const PHASE_GRID: usize = 32;
const ROUNDS: usize = 3;

#[derive(Debug, Clone, Serialize)]
pub struct BridgeStep {
    /// Spectral index of the donor level.
    pub donor: usize,
    pub donor_energy: f64,
    pub bridge_energy: f64,
    pub dark_energy: f64,
    /// Weight moved into the dark level.
    pub weight: f64,
    /// Drive frequencies of the donor->bridge and bridge->dark pulses.
    pub frequencies: [f64; 2],
}

#[derive(Debug, Clone)]
pub struct CatalyticSchedule {
    pub schedule: PulseSchedule,
    /// Single-excitation state loaded before the catalyst is injected.
    pub intermediate: CVec,
    pub bridges: Vec<BridgeStep>,
    /// Fidelity predicted by the rotating-wave model.
    pub predicted_fidelity: f64,
    /// Best fidelity without catalysis.
    pub single_sector_bound: f64,
}

#[derive(Debug, Clone)]
pub enum CatalysisPlan {
    Feasible(Box<CatalyticSchedule>),
    Infeasible { blocker: Blocker, weight: f64 },
}

struct Component {
    energy: f64,
    /// Index into the replacement dark list.
    dark_index: usize,
    weight: f64,
}

struct Bridge {
    donors: Vec<usize>,
    donor: usize,
    bridge: usize,
    freqs: [f64; 2],
    eps: [f64; 2],
    couplings: [f64; 2],
    dark_norm: f64,
}

/// Plan a catalytic schedule producing `target` from `|1>`.
pub fn plan_catalysis(net: &SpinNetwork, target: &CVec, opts: &SynthOptions) -> Result<CatalysisPlan> {
    validate_target(net.n, target)?;
    let spec = spectral(net)?;
    let bound = max_fidelity_with(net, &spec, target)?.value;
    let tol = 1e-8 * spec.spectral_radius().max(1.0);

    // group the dark vectors by eigenvalue and classify the target's part
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (k, d) in spec.dark.iter().enumerate() {
        match groups.iter_mut().find(|g| (spec.dark[g[0]].eigenvalue - d.eigenvalue).abs() < tol) {
            Some(g) => g.push(k),
            None => groups.push(vec![k]),
        }
    }
    let mut dark_new: Vec<CVec> = Vec::new();
    let mut comps: Vec<Component> = Vec::new();
    for g in &groups {
        let mut u = CVec::zeros(net.n);
        for &k in g {
            let v = &spec.dark[k].vector;
            u += v * v.dotc(target);
        }
        let w = u.norm_squared();
        if w > WEIGHT_FLOOR {
            if let DarkClass::TrulyDark { blocker } = classify_dark_with(net, &spec, &u)? {
                return Ok(CatalysisPlan::Infeasible { blocker, weight: w });
            }
            let mut cand = vec![u.clone() / c(w.sqrt(), 0.0)];
            cand.extend(g.iter().map(|&k| spec.dark[k].vector.clone()));
            let basis = orthonormalize(&cand, 1e-8);
            comps.push(Component { energy: spec.dark[g[0]].eigenvalue, dark_index: dark_new.len(), weight: w });
            dark_new.extend(basis);
        } else {
            dark_new.extend(g.iter().map(|&k| spec.dark[k].vector.clone()));
        }
    }

    if comps.is_empty() {
        let syn = synthesize_with(net, &spec, target, opts)?;
        return Ok(CatalysisPlan::Feasible(Box::new(CatalyticSchedule {
            schedule: syn.schedule,
            intermediate: target.clone(),
            bridges: Vec::new(),
            predicted_fidelity: syn.predicted_fidelity,
            single_sector_bound: bound,
        })));
    }

    let single = SectorModel::single(net, &spec, Some(&dark_new))?;
    let cat = SectorModel::catalytic(net, &spec, Some(&dark_new))?;
    let levels = spec.len();
    let goal = single.vectors.adjoint() * target;

    let bridges: Vec<Bridge> = comps.iter().map(|cp| choose_bridge(&spec, &cat, levels - 1 + cp.dark_index, cp.energy, opts)).collect::<Result<_>>()?;

    // intermediate: accessible part of the target plus donor surplus
    let mut mag2: Vec<f64> = (0..single.dim()).map(|n| if (1..levels).contains(&n) { goal[n].norm_sqr() } else { 0.0 }).collect();
    for (cp, b) in comps.iter().zip(&bridges) {
        for &d in &b.donors {
            mag2[d] += cp.weight / b.donors.len() as f64;
        }
    }
    let mut gamma = CVec::zeros(single.dim());
    for n in 1..levels {
        let phase = if goal[n].norm() > 1e-9 { goal[n] / goal[n].norm() } else { c(1.0, 0.0) };
        gamma[n] = phase * mag2[n].sqrt();
    }
    let gn = gamma.norm();
    gamma /= c(gn, 0.0);

    let plan = plan_loads(&single, &spec, &gamma, opts)?;
    let mut segments = plan.segments.clone();
    let first_tail = segments.len() + 1;
    segments.push(Segment::inject());
    let mut remaining = mag2.clone();
    let mut initial_tail = Vec::new();
    for (cp, b) in comps.iter().zip(&bridges) {
        let share = cp.weight / b.donors.len() as f64;
        let keep = (remaining[b.donor] - share).max(0.0);
        for &d in &b.donors {
            remaining[d] = (remaining[d] - share).max(0.0);
        }
        let theta1 = share.sqrt().atan2(keep.sqrt());
        let tau1 = theta1 / (b.eps[0] * b.couplings[0]);
        let tau2 = FRAC_PI_2 / (b.eps[1] * b.dark_norm);
        initial_tail.push([tau1, tau2]);
        segments.push(Segment::rabi(tau1, Tone { frequency: b.freqs[0], amplitude: b.eps[0], phase: 0.0 }));
        segments.push(Segment::rabi(tau2, Tone { frequency: b.freqs[1], amplitude: b.eps[1], phase: 0.0 }));
    }
    segments.push(Segment::extract());

    let start = single.unit(0);
    let evaluate = |segs: &[Segment]| run_composite(&single, &cat, &start, segs);
    let fidelity = |segs: &[Segment]| {
        let t: f64 = segs.iter().map(|s| s.duration).sum();
        let want = CVec::from_iterator(goal.len(), goal.iter().zip(&single.energies).map(|(z, &e)| z * c(0.0, e * t).exp()));
        want.dotc(&evaluate(segs)).norm_sqr()
    };

    for round in 0..ROUNDS {
        for k in 0..comps.len() {
            let i1 = first_tail + 2 * k;
            let i2 = i1 + 1;
            if round == 0 {
                let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
                for a in 0..PHASE_GRID {
                    for b in 0..PHASE_GRID {
                        let p1 = 2.0 * PI * a as f64 / PHASE_GRID as f64;
                        let p2 = 2.0 * PI * b as f64 / PHASE_GRID as f64;
                        segments[i1].tones[0].phase = p1;
                        segments[i2].tones[0].phase = p2;
                        let f = fidelity(&segments);
                        if f > best.0 {
                            best = (f, p1, p2);
                        }
                    }
                }
                segments[i1].tones[0].phase = best.1;
                segments[i2].tones[0].phase = best.2;
            }
            let [t1, t2] = initial_tail[k];
            let x0 = [segments[i1].duration / t1, segments[i1].tones[0].phase, segments[i2].duration / t2, segments[i2].tones[0].phase];
            let base = segments.clone();
            let apply = |x: &[f64], segs: &mut Vec<Segment>| {
                segs[i1].duration = t1 * x[0].abs().max(1e-6);
                segs[i1].tones[0].phase = wrap(x[1]);
                segs[i2].duration = t2 * x[2].abs().max(1e-6);
                segs[i2].tones[0].phase = wrap(x[3]);
            };
            let cost = |x: &[f64]| {
                let mut segs = base.clone();
                apply(x, &mut segs);
                1.0 - fidelity(&segs)
            };
            let (x, _) = nelder_mead(&cost, &x0, &[0.05, 0.2, 0.05, 0.2], 300);
            apply(&x, &mut segments);
        }
        feedback(&plan.tasks, &mut segments, &single.energies, &goal, &evaluate, 2);
    }
    let predicted = fidelity(&segments);

    let steps = comps
        .iter()
        .zip(&bridges)
        .map(|(cp, b)| BridgeStep {
            donor: b.donor,
            donor_energy: spec.eigenvalues[b.donor],
            bridge_energy: cat.energies[b.bridge],
            dark_energy: cp.energy,
            weight: cp.weight,
            frequencies: b.freqs,
        })
        .collect();
    Ok(CatalysisPlan::Feasible(Box::new(CatalyticSchedule {
        schedule: PulseSchedule { sectors: vec![1], segments, leakage_estimate: opts.quality.min(0.05) },
        intermediate: &single.vectors * &gamma,
        bridges: steps,
        predicted_fidelity: predicted,
        single_sector_bound: bound,
    })))
}

fn run_composite(single: &SectorModel, cat: &SectorModel, start: &CVec, segs: &[Segment]) -> CVec {
    let singles = single.dim() - 1;
    let mut amps = start.clone();
    let mut in_cat = false;
    for s in segs {
        match s.kind {
            SegmentKind::InjectCatalyst => {
                amps = inject_amplitudes(&amps, cat.dim()).0;
                in_cat = true;
            }
            SegmentKind::ExtractCatalyst => {
                amps = extract_amplitudes(&amps, singles).0;
                in_cat = false;
            }
            _ if in_cat => amps = cat.propagate(&amps, s),
            _ => amps = single.propagate(&amps, s),
        }
    }
    amps
}

/// Smallest distance from `w` to any other transition frequency.
fn isolation(freqs: &[f64], w: f64) -> f64 {
    freqs.iter().map(|f| (f - w).abs()).filter(|&d| d > RESONANCE_TOL).fold(f64::INFINITY, f64::min)
}

/// Donor and bridge maximizing the weaker of the two isolated Rabi rates.
fn choose_bridge(spec: &SpectralData, cat: &SectorModel, dark_level: usize, mu: f64, opts: &SynthOptions) -> Result<Bridge> {
    let npl = spec.n - 1;
    let dim = cat.dim();
    let g = |p: usize, q: usize| cat.coupling[(p, q)].norm();
    let mut freqs = vec![0.0];
    for p in 0..dim {
        for q in (p + 1)..dim {
            if g(p, q) > 1e-9 {
                freqs.push((cat.energies[p] - cat.energies[q]).abs());
            }
        }
    }
    let scale = opts.quality.min(0.05);
    let mut best: Option<(f64, Bridge)> = None;
    for a in spec.accessible() {
        let pa = a - 1;
        for j in npl..dim {
            let (ga, gu) = (g(j, pa), g(j, dark_level));
            if ga < COUPLING_MIN || gu < COUPLING_MIN {
                continue;
            }
            let w1 = (cat.energies[j] - spec.eigenvalues[a]).abs();
            let w2 = (cat.energies[j] - mu).abs();
            if w1 < 1e-6 || w2 < 1e-6 {
                continue;
            }
            let (i1, i2) = (isolation(&freqs, w1), isolation(&freqs, w2));
            let merit = (i1 * ga).min(i2 * gu);
            if best.as_ref().is_some_and(|(m, _)| *m >= merit) {
                continue;
            }
            let mut donors = vec![a];
            if let Some(b) = spec.paired_with[a] {
                let co = (npl..dim).any(|q| g(q, b - 1) > 1e-9 && ((cat.energies[q] - spec.eigenvalues[b]).abs() - w1).abs() < RESONANCE_TOL);
                if co {
                    donors.push(b);
                }
            }
            let dark_norm = (npl..dim)
                .filter(|&q| ((cat.energies[q] - mu).abs() - w2).abs() < RESONANCE_TOL)
                .map(|q| g(q, dark_level).powi(2))
                .sum::<f64>()
                .sqrt();
            best = Some((
                merit,
                Bridge { donors, donor: a, bridge: j, freqs: [w1, w2], eps: [scale * i1, scale * i2], couplings: [ga, gu], dark_norm },
            ));
        }
    }
    best.map(|(_, b)| b).ok_or_else(|| Error::Invalid("no two-excitation bridge couples a donor to the dark level".into()))
}
