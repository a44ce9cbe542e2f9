//! Resonant loading of the accessible eigenvectors from `|1>`.
//!
//! Levels are loaded one transition (or one +-pair) at a time with areas
//! `theta = asin(|gamma| / r)`, where `r` is the amplitude left on `|1>`.
//! Tone phases are then fixed against the rotating-wave model so that the
//! phases accumulated by free evolution and Stark shifts are compensated.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::bounds::{phase_reachability, spectral, validate_target, SpectralData};
use crate::error::{Error, Result};
use crate::linalg::{c, CVec};
use crate::network::SpinNetwork;

use super::model::SectorModel;
use super::optimize::nelder_mead;
use super::schedule::{PulseSchedule, Segment, Tone};

const AMP_FLOOR: f64 = 1e-9;
const FEEDBACK_ROUNDS: usize = 5;

#[derive(Debug, Clone, Copy)]
pub struct SynthOptions {
    /// Target off-resonant leakage; sets `eps = min(quality, 0.05) * gap`.
    pub quality: f64,
    /// Allow two-photon transfers for equal-overlap `+-lambda` levels that
    /// are not related by an ASO.
    pub raman: bool,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions { quality: 0.02, raman: true }
    }
}

#[derive(Debug, Clone)]
pub struct Synthesis {
    pub schedule: PulseSchedule,
    pub epsilon: f64,
    /// Smallest spacing between relevant transition frequencies.
    pub gap: f64,
    /// In-sector bound for the target.
    pub bound: f64,
    /// Fidelity predicted by the rotating-wave model.
    pub predicted_fidelity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Load {
    Single(usize),
    Pair(usize, usize),
    Zero(usize),
    Raman { level: usize, via: usize },
    Coincident(usize, usize),
}

/// A loading step and the tone phases that steer its anchor level.
#[derive(Debug, Clone)]
pub(crate) struct Task {
    pub anchor: usize,
    /// `c_anchor ~ exp(-i sign phi)` in the knob phases.
    pub sign: f64,
    /// (segment index, tone index)
    pub knobs: Vec<(usize, usize)>,
    /// Only the sign of the coupling can be chosen (DC drive).
    pub discrete: bool,
}

#[derive(Debug, Clone)]
pub(crate) struct LoadPlan {
    pub segments: Vec<Segment>,
    pub tasks: Vec<Task>,
    pub epsilon: f64,
    pub gap: f64,
}

pub(crate) fn wrap(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y <= -PI {
        y + 2.0 * PI
    } else {
        y
    }
}

pub(crate) fn run_model(model: &SectorModel, start: &CVec, segments: &[Segment]) -> CVec {
    segments.iter().fold(start.clone(), |amps, s| model.propagate(&amps, s))
}

/// Spacing of the distinct transition frequencies `{0} U {|lambda_n|}`.
pub(crate) fn frequency_gap(spec: &SpectralData) -> f64 {
    let tol = 1e-8 * spec.spectral_radius().max(1.0);
    let mut freqs: Vec<f64> = std::iter::once(0.0).chain(spec.accessible().map(|n| spec.eigenvalues[n].abs())).collect();
    freqs.sort_by(f64::total_cmp);
    freqs.dedup_by(|a, b| (*a - *b).abs() < tol);
    let gap = freqs.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    // a lone zero mode has no competing transition
    if gap.is_finite() {
        gap
    } else {
        1.0
    }
}

fn shells(spec: &SpectralData, opts: &SynthOptions) -> Result<Vec<Load>> {
    let tol = 1e-8 * spec.spectral_radius().max(1.0);
    let mut levels: Vec<usize> = spec.accessible().collect();
    levels.sort_by(|&a, &b| spec.eigenvalues[a].abs().total_cmp(&spec.eigenvalues[b].abs()));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for n in levels {
        match groups.last_mut() {
            Some(g) if (spec.eigenvalues[g[0]].abs() - spec.eigenvalues[n].abs()).abs() < tol => g.push(n),
            _ => groups.push(vec![n]),
        }
    }
    let mut out = Vec::new();
    for g in groups {
        let lam = spec.eigenvalues[g[0]].abs();
        match g.as_slice() {
            [n] if lam < tol => out.push(Load::Zero(*n)),
            [n] => out.push(Load::Single(*n)),
            [p, m] => {
                let (plus, minus) = if spec.eigenvalues[*p] > 0.0 { (*p, *m) } else { (*m, *p) };
                if spec.paired_with[plus] == Some(minus) {
                    out.push(Load::Pair(plus, minus));
                } else {
                    let (ap, am) = (spec.overlaps[plus], spec.overlaps[minus]);
                    if (ap - am).abs() <= 1e-3 * ap.max(am) {
                        if !opts.raman {
                            return Err(Error::RamanDisabled(lam));
                        }
                        out.push(Load::Raman { level: plus, via: minus });
                    } else {
                        out.push(Load::Coincident(plus, minus));
                    }
                }
            }
            _ => return Err(Error::Invalid(format!("{} accessible levels share |lambda| = {lam}", g.len()))),
        }
    }
    Ok(out)
}

fn sign_of(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Build the loading segments for model-level amplitudes `gamma`
/// (normalized over the accessible levels, zero elsewhere).
pub(crate) fn plan_loads(model: &SectorModel, spec: &SpectralData, gamma: &CVec, opts: &SynthOptions) -> Result<LoadPlan> {
    if !(opts.quality > 0.0 && opts.quality.is_finite()) {
        return Err(Error::Invalid("quality must be positive".into()));
    }
    let gap = frequency_gap(spec);
    let eps = opts.quality.min(0.05) * gap;
    let amp = |n: usize| gamma[n].norm();
    let g0 = |n: usize| model.coupling[(0, n)].norm();
    let lam = |n: usize| spec.eigenvalues[n];

    // expand Raman shells into one transfer per populated member
    let mut raman = Vec::new();
    let mut rest = Vec::new();
    let all = shells(spec, opts)?;
    let singles: Vec<usize> = all.iter().filter_map(|l| if let Load::Single(n) = l { Some(*n) } else { None }).collect();
    for load in &all {
        match *load {
            Load::Raman { level, via } => {
                let Some(&aux) = singles.iter().max_by(|&&a, &&b| g0(a).total_cmp(&g0(b))) else {
                    return Err(Error::Invalid("two-photon transfer needs an isolated auxiliary level".into()));
                };
                for m in [level, via] {
                    if amp(m) > AMP_FLOOR {
                        raman.push((Load::Raman { level: m, via: aux }, amp(m).powi(2)));
                    }
                }
            }
            other => {
                let w: f64 = match other {
                    Load::Single(n) | Load::Zero(n) => amp(n).powi(2),
                    Load::Pair(p, m) | Load::Coincident(p, m) => amp(p).powi(2) + amp(m).powi(2),
                    Load::Raman { .. } => unreachable!(),
                };
                if w > AMP_FLOOR * AMP_FLOOR {
                    rest.push((other, w));
                }
            }
        }
    }
    raman.sort_by(|a, b| b.1.total_cmp(&a.1));
    rest.sort_by(|a, b| b.1.total_cmp(&a.1));
    let order: Vec<Load> = raman.into_iter().chain(rest).map(|(l, _)| l).collect();

    let mut segments: Vec<Segment> = Vec::new();
    let mut tasks = Vec::new();
    let mut r: f64 = 1.0;
    let count = order.len();
    for (idx, load) in order.into_iter().enumerate() {
        let last = idx + 1 == count;
        let area = |want: f64, r: f64| if last { FRAC_PI_2 } else { (want / r).min(1.0).asin() };
        match load {
            Load::Single(n) => {
                let theta = area(amp(n), r);
                segments.push(Segment::rabi(theta / (eps * g0(n)), Tone { frequency: lam(n).abs(), amplitude: eps, phase: 0.0 }));
                tasks.push(Task { anchor: n, sign: sign_of(lam(n)), knobs: vec![(segments.len() - 1, 0)], discrete: false });
                r *= theta.cos();
            }
            Load::Pair(p, m) => {
                let want = (amp(p).powi(2) + amp(m).powi(2)).sqrt();
                let theta = area(want, r);
                let omega = eps * (g0(p).powi(2) + g0(m).powi(2)).sqrt();
                segments.push(Segment::rabi(theta / omega, Tone { frequency: lam(p).abs(), amplitude: eps, phase: 0.0 }));
                let anchor = if amp(p) >= amp(m) { p } else { m };
                tasks.push(Task { anchor, sign: sign_of(lam(anchor)), knobs: vec![(segments.len() - 1, 0)], discrete: false });
                r *= theta.cos();
            }
            Load::Zero(z) => {
                let theta = area(amp(z), r);
                segments.push(Segment::rabi(theta / (2.0 * eps * g0(z)), Tone { frequency: 0.0, amplitude: eps, phase: 0.0 }));
                tasks.push(Task { anchor: z, sign: 0.0, knobs: vec![(segments.len() - 1, 0)], discrete: true });
                r *= theta.cos();
            }
            Load::Raman { level, via } => {
                let theta = area(amp(level), r);
                segments.push(Segment::rabi(theta / (eps * g0(via)), Tone { frequency: lam(via).abs(), amplitude: eps, phase: 0.0 }));
                r *= theta.cos();
                segments.push(raman_segment(model, level, via, lam(level), lam(via), eps, 0.5 * gap)?);
                tasks.push(Task { anchor: level, sign: sign_of(lam(level)), knobs: vec![(segments.len() - 1, 0)], discrete: false });
            }
            Load::Coincident(p, m) => {
                let before = run_model(model, &model.unit(0), &segments);
                let (s1, s2, hub) = coincident_segments(model, &before, p, m, gamma, eps, lam(p).abs(), last);
                segments.push(s1);
                segments.push(s2);
                let anchor = if amp(p) >= amp(m) { p } else { m };
                let k = segments.len();
                tasks.push(Task { anchor, sign: sign_of(lam(anchor)), knobs: vec![(k - 2, 0), (k - 1, 0)], discrete: false });
                r = hub;
            }
        }
    }
    Ok(LoadPlan { segments, tasks, epsilon: eps, gap })
}

/// Two-photon transfer from `via` to `level` through `|1>`, with tone
/// amplitudes chosen to equalize the Stark shifts of the two levels.
fn raman_segment(model: &SectorModel, level: usize, via: usize, l: f64, k: f64, eps: f64, delta: f64) -> Result<Segment> {
    let tone = |e: f64, a: f64| Tone { frequency: e.abs() - sign_of(e) * delta, amplitude: a, phase: 0.0 };
    let shift = |h: &crate::linalg::CMat| h[(level, level)].re - h[(via, via)].re;
    let da = shift(&model.effective_hamiltonian(&[tone(l, 1.0)]));
    let db = shift(&model.effective_hamiltonian(&[tone(k, 1.0)]));
    let ratio = if da * db < 0.0 {
        (-da / db).sqrt()
    } else {
        model.coupling[(0, level)].norm() / model.coupling[(0, via)].norm()
    };
    let a = eps / ratio.max(1.0);
    let b = ratio * a;
    let tones = [tone(l, a), tone(k, b)];
    let x = model.effective_hamiltonian(&tones)[(level, via)].norm();
    if x < 1e-14 {
        return Err(Error::Invalid("vanishing two-photon coupling".into()));
    }
    Ok(Segment::raman(FRAC_PI_2 / x, tones[0], tones[1]))
}

/// Two pulses on a shared frequency loading `p` and `m` with unequal
/// overlaps; magnitudes and the phase of `c_p c_m` are fitted.
#[allow(clippy::too_many_arguments)]
fn coincident_segments(
    model: &SectorModel,
    before: &CVec,
    p: usize,
    m: usize,
    gamma: &CVec,
    eps: f64,
    freq: f64,
    last: bool,
) -> (Segment, Segment, f64) {
    let omega = eps * (model.coupling[(0, p)].norm_sqr() + model.coupling[(0, m)].norm_sqr()).sqrt();
    let hub = before[0];
    let r = hub.norm();
    let want_p = gamma[p].norm();
    let want_m = gamma[m].norm();
    let target_phase = (gamma[p] * gamma[m]).arg() + 2.0 * hub.arg();
    let build = |x: &[f64]| {
        (
            Segment::rabi(x[0].abs().max(1e-9) / omega, Tone { frequency: freq, amplitude: eps, phase: x[1] }),
            Segment::rabi(x[2].abs().max(1e-9) / omega, Tone { frequency: freq, amplitude: eps, phase: x[3] }),
        )
    };
    let cost = |x: &[f64]| {
        let (a, b) = build(x);
        let out = model.propagate(&model.propagate(before, &a), &b);
        let mut e = (out[p].norm() - want_p).powi(2) + (out[m].norm() - want_m).powi(2);
        e += want_p * want_m * (1.0 - ((out[p] * out[m]).arg() - target_phase).cos());
        if last {
            e += out[0].norm_sqr();
        }
        e
    };
    let total = ((want_p.powi(2) + want_m.powi(2)).sqrt() / r.max(1e-12)).min(1.0).asin();
    let mut best = (vec![0.5 * total, 0.0, 0.5 * total, 0.0], f64::INFINITY);
    for i in 0..8 {
        for j in 0..8 {
            let x = vec![0.5 * total, i as f64 * PI / 4.0, 0.5 * total, j as f64 * PI / 4.0];
            let v = cost(&x);
            if v < best.1 {
                best = (x, v);
            }
        }
    }
    let (x, _) = nelder_mead(&cost, &best.0, &[0.2, 0.5, 0.2, 0.5], 600);
    let (a, b) = build(&x);
    let out = model.propagate(&model.propagate(before, &a), &b);
    (a, b, out[0].norm())
}

/// Align each task's anchor phase with `goal` (lab-frame model amplitudes
/// at the end of the schedule) under the best global phase. Returns the
/// final model fidelity `|<goal|c>|^2` (goal assumed normalized).
pub(crate) fn feedback(
    tasks: &[Task],
    segments: &mut [Segment],
    energies: &[f64],
    goal: &CVec,
    evaluate: &dyn Fn(&[Segment]) -> CVec,
    rounds: usize,
) -> f64 {
    let wanted = |segs: &[Segment]| {
        let t: f64 = segs.iter().map(|s| s.duration).sum();
        CVec::from_iterator(goal.len(), goal.iter().zip(energies).map(|(z, &e)| z * c(0.0, e * t).exp()))
    };
    for _ in 0..rounds {
        let amps = evaluate(segments);
        let want = wanted(segments);
        let g = want.dotc(&amps).arg();
        for task in tasks {
            let a = amps[task.anchor];
            if a.norm() < AMP_FLOOR {
                continue;
            }
            let err = wrap((want[task.anchor] * c(0.0, g).exp()).arg() - a.arg());
            let delta = if task.discrete {
                if err.abs() > FRAC_PI_2 {
                    PI
                } else {
                    0.0
                }
            } else {
                -task.sign * err
            };
            for &(s, t) in &task.knobs {
                segments[s].tones[t].phase = wrap(segments[s].tones[t].phase + delta);
            }
        }
    }
    let amps = evaluate(segments);
    wanted(segments).dotc(&amps).norm_sqr()
}

/// Resonant pulse schedule steering `|1>` toward `target`.
pub fn synthesize_transfer(net: &SpinNetwork, target: &CVec, opts: &SynthOptions) -> Result<Synthesis> {
    let spec = spectral(net)?;
    synthesize_with(net, &spec, target, opts)
}

pub fn synthesize_with(net: &SpinNetwork, spec: &SpectralData, target: &CVec, opts: &SynthOptions) -> Result<Synthesis> {
    validate_target(net.n, target)?;
    let model = SectorModel::single(net, spec, None)?;
    let beta = model.vectors.adjoint() * target;
    let weight: f64 = spec.accessible().map(|n| beta[n].norm_sqr()).sum();
    if weight < 1e-12 {
        return Err(Error::Target("no weight in the accessible subspace".into()));
    }
    let mut gamma = CVec::zeros(model.dim());
    for n in spec.accessible() {
        gamma[n] = beta[n] / c(weight.sqrt(), 0.0);
    }
    let projected = &model.vectors * &gamma;
    if !phase_reachability(net, &projected)?.reachable {
        return Err(Error::PhaseConstraint("no global phase makes the target real on one part and imaginary on the other".into()));
    }
    let mut plan = plan_loads(&model, spec, &gamma, opts)?;
    let start = model.unit(0);
    let evaluate = |segs: &[Segment]| run_model(&model, &start, segs);
    let fid = feedback(&plan.tasks, &mut plan.segments, &model.energies, &gamma, &evaluate, FEEDBACK_ROUNDS);
    let schedule = PulseSchedule { sectors: vec![1], segments: plan.segments, leakage_estimate: plan.epsilon / plan.gap };
    Ok(Synthesis { schedule, epsilon: plan.epsilon, gap: plan.gap, bound: weight, predicted_fidelity: weight * fid })
}
