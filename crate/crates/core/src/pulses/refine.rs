//! Optional polish of a synthesized schedule against the lab-frame simulator.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::linalg::CVec;
use crate::network::SpinNetwork;

use super::schedule::PulseSchedule;
use super::simulate::{simulate, SimOptions};

/// Largest number of simulator runs spent by [`refine`].
pub const REFINE_BUDGET: usize = 200;

#[derive(Debug, Clone, Copy)]
enum Knob {
    Duration(usize),
    Phase(usize, usize),
}

#[derive(Debug, Clone)]
pub struct Refinement {
    pub schedule: PulseSchedule,
    pub initial_fidelity: f64,
    pub fidelity: f64,
    pub evaluations: usize,
}

/// Coordinate descent on segment durations and tone phases. The visiting
/// order is shuffled with `seed`; at most `budget` simulations are run.
pub fn refine(
    net: &SpinNetwork,
    schedule: &PulseSchedule,
    initial: &CVec,
    target: &CVec,
    options: &SimOptions,
    seed: u64,
    budget: usize,
) -> Result<Refinement> {
    let budget = budget.min(REFINE_BUDGET).max(1);
    let opts = SimOptions { target: Some(target.clone()), samples: 1, ..options.clone() };
    let score = |s: &PulseSchedule| -> Result<f64> { Ok(simulate(net, s, initial, &opts)?.fidelity.unwrap_or(0.0)) };

    let mut knobs = Vec::new();
    for (k, seg) in schedule.segments.iter().enumerate() {
        if seg.is_marker() {
            continue;
        }
        knobs.push(Knob::Duration(k));
        for t in 0..seg.tones.len() {
            knobs.push(Knob::Phase(k, t));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    knobs.shuffle(&mut rng);
    let mut steps: Vec<f64> = knobs
        .iter()
        .map(|k| match k {
            Knob::Duration(i) => 0.01 * schedule.segments[*i].duration,
            Knob::Phase(..) => 0.05,
        })
        .collect();

    let mut best = schedule.clone();
    let start = score(&best)?;
    let mut best_f = start;
    let mut evals = 1;
    let nudge = |s: &mut PulseSchedule, k: Knob, d: f64| match k {
        Knob::Duration(i) => s.segments[i].duration = (s.segments[i].duration + d).max(1e-9),
        Knob::Phase(i, t) => s.segments[i].tones[t].phase += d,
    };
    'outer: while evals < budget && !knobs.is_empty() {
        let mut improved = false;
        for (idx, &k) in knobs.iter().enumerate() {
            for dir in [1.0, -1.0] {
                if evals >= budget {
                    break 'outer;
                }
                let mut trial = best.clone();
                nudge(&mut trial, k, dir * steps[idx]);
                let f = score(&trial)?;
                evals += 1;
                if f > best_f {
                    best = trial;
                    best_f = f;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            steps.iter_mut().for_each(|s| *s *= 0.5);
        }
    }
    Ok(Refinement { schedule: best, initial_fidelity: start, fidelity: best_f, evaluations: evals })
}
