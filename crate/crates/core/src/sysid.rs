//! Spectral identification from survival records of the pendant spin.
//!
//! A weak static control `eps` on the pendant edge mixes `|1>` with the
//! accessible eigenvectors. The survival probability of `|1>` then carries
//! lines at `|eta_n - eta_m|`, from which `|lambda_n|` and `alpha_n` are
//! read off. Signs need an interferometric follow-up on the vacuum-plus-one
//! superposition.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{c, hermitian_eigen, CMat, CVec};
use crate::network::{SpinNetwork, Which};
use crate::operators::restrict;
use crate::pulses::{simulate, PulseSchedule, Segment, SimOptions, Tone};

const PAD: usize = 8;
const PEAK_FLOOR: f64 = 3.0;
const LEAKAGE_MARGIN: f64 = 10.0;
const SCAN_PHASES: [f64; 5] = [-0.2, -0.1, 0.0, 0.1, 0.2];

/// The network as seen by an experimenter: evolutions and measurements
/// only.
#[derive(Debug, Clone)]
pub struct BlackBox {
    net: SpinNetwork,
    shift: f64,
}

impl BlackBox {
    pub fn new(net: SpinNetwork) -> Self {
        BlackBox { net, shift: 0.0 }
    }

    /// Same device with `c` times the excitation number added to the drift.
    pub fn shifted(&self, c: f64) -> Self {
        BlackBox { net: self.net.clone(), shift: self.shift + c }
    }

    pub fn spins(&self) -> usize {
        self.net.n
    }

    fn single_hamiltonian(&self, eps: f64) -> Result<CMat> {
        let a = restrict(&self.net, Which::Drift, 1)?.entries;
        let cc = restrict(&self.net, Which::Control, 1)?.entries;
        Ok(a + cc * c(eps, 0.0) + CMat::identity(self.net.n, self.net.n) * c(self.shift, 0.0))
    }

    /// Largest sampling step that resolves every line of the survival
    /// probability under static control `eps`.
    pub fn nyquist_limit(&self, eps: f64) -> Result<f64> {
        let (vals, _) = hermitian_eigen(&self.single_hamiltonian(eps)?);
        let spread = vals[vals.len() - 1] - vals[0];
        Ok(if spread > 0.0 { PI / spread } else { f64::INFINITY })
    }

    /// Exact `|<1|exp(-iHt)|1>|^2` with `H = A + eps C`.
    pub fn survival(&self, eps: f64, times: &[f64]) -> Result<Vec<f64>> {
        let (vals, vecs) = hermitian_eigen(&self.single_hamiltonian(eps)?);
        let weights: Vec<f64> = (0..vals.len()).map(|j| vecs[(0, j)].norm_sqr()).collect();
        Ok(times
            .iter()
            .map(|&t| {
                if t == 0.0 {
                    return 1.0;
                }
                let amp: Complex<f64> = vals.iter().zip(&weights).map(|(&e, &w)| Complex::from_polar(w, -e * t)).sum();
                amp.norm_sqr().clamp(0.0, 1.0)
            })
            .collect())
    }

    /// Run `schedule` on `initial` and return `|<reference|psi(T)>|^2`,
    /// sampled with `shots` repetitions when given.
    pub fn measure(&self, schedule: &PulseSchedule, initial: &CVec, reference: &CVec, shots: Option<(u64, &mut ChaCha8Rng)>) -> Result<f64> {
        let res = simulate(&self.net, schedule, initial, &SimOptions { samples: 1, ..Default::default() })?;
        let mut psi = res.final_state;
        if self.shift != 0.0 {
            let mut off = 0;
            for &k in &schedule.sectors {
                let len = crate::operators::excitation_basis(self.net.n, k)?.len();
                let phase = Complex::from_polar(1.0, -(k as f64) * self.shift * res.duration);
                psi.rows_mut(off, len).iter_mut().for_each(|z| *z *= phase);
                off += len;
            }
        }
        let p = reference.dotc(&psi).norm_sqr().clamp(0.0, 1.0);
        Ok(match shots {
            Some((n, rng)) => sample(p, n, rng)?,
            None => p,
        })
    }
}

fn sample(p: f64, shots: u64, rng: &mut ChaCha8Rng) -> Result<f64> {
    let dist = Binomial::new(shots, p).map_err(|e| Error::Invalid(e.to_string()))?;
    Ok(dist.sample(rng) as f64 / shots as f64)
}

#[derive(Debug, Clone)]
pub struct RecordOptions {
    pub epsilon: f64,
    pub duration: f64,
    pub dt: f64,
    /// Repetitions per sample; exact probabilities when `None`.
    pub shots: Option<u64>,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SurvivalRecord {
    pub epsilon: f64,
    pub dt: f64,
    pub duration: f64,
    pub times: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub shots: Option<u64>,
}

impl SurvivalRecord {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(["time", "probability"]).map_err(io)?;
        for (t, p) in self.times.iter().zip(&self.probabilities) {
            w.write_record([format!("{t:.12e}"), format!("{p:.12e}")]).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
    }
}

pub fn survival_record(bb: &BlackBox, opts: &RecordOptions) -> Result<SurvivalRecord> {
    if !(opts.dt > 0.0 && opts.duration > 0.0 && opts.epsilon.is_finite()) {
        return Err(Error::Invalid("record needs positive dt and duration".into()));
    }
    let limit = bb.nyquist_limit(opts.epsilon)?;
    if opts.dt > limit {
        return Err(Error::Nyquist { dt: opts.dt, limit });
    }
    let count = (opts.duration / opts.dt).round() as usize + 1;
    let times: Vec<f64> = (0..count).map(|k| k as f64 * opts.dt).collect();
    let mut probabilities = bb.survival(opts.epsilon, &times)?;
    if let Some(shots) = opts.shots {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        for p in probabilities.iter_mut() {
            *p = sample(*p, shots, &mut rng)?;
        }
    }
    Ok(SurvivalRecord { epsilon: opts.epsilon, dt: opts.dt, duration: times[count - 1], times, probabilities, shots: opts.shots })
}

#[derive(Debug, Clone, Serialize)]
pub struct Estimate {
    /// Unsigned until resolved.
    pub lambda_hat: f64,
    pub alpha_hat: f64,
    pub sign_resolved: bool,
    /// Member of a `+-lambda` pair that the phase scan cannot tell apart.
    pub paired: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentificationResult {
    pub estimates: Vec<Estimate>,
    /// Frequency resolution `2 pi / T`.
    pub resolution: f64,
    pub epsilon: f64,
    /// Every nonzero level comes as an indistinguishable `+-` pair.
    pub symmetric: bool,
}

#[derive(Debug, Clone, Copy)]
struct Peak {
    freq: f64,
    amp: f64,
}

/// Magnitude of the Hann window's transform `delta` natural bins off
/// centre, relative to its peak.
fn hann_leakage(delta: f64) -> f64 {
    let d = delta.abs();
    if d < 1e-9 {
        return 1.0;
    }
    if (d - 1.0).abs() < 1e-9 {
        return 0.5;
    }
    ((PI * d).sin() / (PI * d) / (1.0 - d * d)).abs()
}

/// Cosine lines of the record: frequency (angular) and amplitude.
fn find_peaks(rec: &SurvivalRecord) -> Result<(Vec<Peak>, f64)> {
    let n = rec.probabilities.len();
    if n < 16 {
        return Err(Error::NoPeaks);
    }
    let win: Vec<f64> = (0..n).map(|k| 0.5 * (1.0 - (2.0 * PI * k as f64 / (n - 1) as f64).cos())).collect();
    let gain: f64 = win.iter().sum();
    let mean = rec.probabilities.iter().zip(&win).map(|(p, w)| p * w).sum::<f64>() / gain;
    let m = (n * PAD).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); m];
    for k in 0..n {
        buf[k] = Complex::new((rec.probabilities[k] - mean) * win[k], 0.0);
    }
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);
    let amp: Vec<f64> = buf[..m / 2].iter().map(|z| 2.0 * z.norm() / gain).collect();
    let fbin = 2.0 * PI / (m as f64 * rec.dt);
    let natural = 2.0 * PI / (n as f64 * rec.dt);

    let mut sorted = amp[1..].to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let lowest = (2.0 * natural / fbin).ceil() as usize;
    let mut cands = Vec::new();
    for j in lowest.max(1)..m / 2 - 1 {
        let (a, b, cc) = (amp[j - 1], amp[j], amp[j + 1]);
        if b > a && b >= cc && b > PEAK_FLOOR * median && b > 1e-14 {
            let denom = a - 2.0 * b + cc;
            let d = if denom.abs() > 0.0 { 0.5 * (a - cc) / denom } else { 0.0 };
            cands.push(Peak { freq: (j as f64 + d) * fbin, amp: b - 0.25 * (a - cc) * d });
        }
    }
    cands.sort_by(|x, y| y.amp.total_cmp(&x.amp));
    // drop sidelobes of stronger lines
    let mut peaks: Vec<Peak> = Vec::new();
    for p in cands {
        let leak: f64 = peaks.iter().map(|q| q.amp * (hann_leakage((p.freq - q.freq) / natural) + hann_leakage((p.freq + q.freq) / natural))).sum();
        if p.amp > LEAKAGE_MARGIN * leak {
            peaks.push(p);
        }
    }
    if peaks.is_empty() {
        return Err(Error::NoPeaks);
    }
    Ok((peaks, natural))
}

/// Read `|lambda_n|` and `alpha_n` off a survival record.
pub fn estimate_spectrum(rec: &SurvivalRecord) -> Result<IdentificationResult> {
    let eps = rec.epsilon;
    if eps <= 0.0 {
        return Err(Error::NoPeaks);
    }
    let spread = rec.probabilities.iter().cloned().fold(f64::INFINITY, f64::min);
    if 1.0 - spread < 1e-12 {
        return Err(Error::NoPeaks);
    }
    let (peaks, natural) = find_peaks(rec)?;
    let tol = 1.5 * natural;
    let strongest = peaks[0];
    // an accessible zero mode splits |1> into a doublet at +-eps alpha_0
    let doublet = strongest.freq <= 2.0 * eps * 1.05 + tol && strongest.amp > 0.05;

    let mut shells: Vec<(f64, f64)> = Vec::new(); // (|lambda|, weight)
    let mut estimates = Vec::new();
    if doublet {
        let split = strongest.freq;
        if split < 4.0 * natural {
            return Err(Error::OverlappingPeaks(split));
        }
        estimates.push(Estimate { lambda_hat: 0.0, alpha_hat: split / (2.0 * eps), sign_resolved: false, paired: false });
        let mut used = vec![false; peaks.len()];
        used[0] = true;
        for i in 1..peaks.len() {
            if used[i] {
                continue;
            }
            let p = peaks[i];
            let partner = (1..peaks.len()).filter(|&j| !used[j] && j != i).find(|&j| {
                let q = peaks[j];
                ((q.freq - p.freq).abs() - split).abs() < tol && q.amp / p.amp > 0.25 && q.amp / p.amp < 4.0
            });
            if let Some(j) = partner {
                used[i] = true;
                used[j] = true;
                shells.push((0.5 * (p.freq + peaks[j].freq), 0.5 * (p.amp + peaks[j].amp)));
            }
        }
    } else {
        for p in &peaks {
            // lines between two excited levels are products of small weights
            let combo = shells.iter().any(|a| {
                shells.iter().any(|b| {
                    let near = |f: f64| (f - p.freq).abs() < 2.0 * tol;
                    (near(a.0 + b.0) || near((a.0 - b.0).abs())) && p.amp < 0.1 * a.1.min(b.1)
                })
            });
            if !combo {
                shells.push((p.freq, 0.5 * p.amp));
            }
        }
    }
    shells.sort_by(|a, b| a.0.total_cmp(&b.0));
    for w in shells.windows(2) {
        if w[1].0 - w[0].0 < 2.0 * natural {
            return Err(Error::OverlappingPeaks(w[1].0 - w[0].0));
        }
    }
    // weights are relative to the carrier weight 1 - sum w_n
    let raw: f64 = shells.iter().map(|s| s.1).sum();
    let carrier = (1.0 - raw).max(0.5);
    for (lam, w) in shells {
        let w = w / carrier;
        estimates.push(Estimate { lambda_hat: lam, alpha_hat: w.sqrt() * lam / eps, sign_resolved: false, paired: false });
    }
    Ok(IdentificationResult { estimates, resolution: 2.0 * PI / rec.duration, epsilon: eps, symmetric: false })
}

#[derive(Debug, Clone, Default)]
pub struct SignOptions {
    pub shots: Option<u64>,
    pub seed: u64,
}

/// Probe amplitude used for transfers in the sign scans.
pub fn probe_amplitude(levels: &[f64]) -> f64 {
    let mut f: Vec<f64> = levels.iter().map(|l| l.abs()).collect();
    f.push(0.0);
    f.sort_by(f64::total_cmp);
    let gap = f.windows(2).map(|w| w[1] - w[0]).filter(|d| *d > 1e-9).fold(f64::INFINITY, f64::min);
    0.05 * if gap.is_finite() { gap } else { 1.0 }
}

/// Phase-scan each level: prepare `(|0> + e^{-i phi}|1>)/sqrt2`, move the
/// excitation into the level, dwell a quarter period, bring it back and
/// project on the `phi = 0` state. `p = cos^2((phi + lambda t)/2)`, so the
/// slope at `phi = 0` carries the sign. A vanishing slope marks a
/// `+-lambda` pair.
pub fn resolve_signs(bb: &BlackBox, est: &IdentificationResult, opts: &SignOptions) -> Result<IdentificationResult> {
    let n = bb.spins();
    let lams: Vec<f64> = est.estimates.iter().map(|e| e.lambda_hat).collect();
    let amp = probe_amplitude(&lams);
    let mean = SCAN_PHASES.iter().sum::<f64>() / SCAN_PHASES.len() as f64;
    let sxx: f64 = SCAN_PHASES.iter().map(|p| (p - mean).powi(2)).sum();
    let sigma = opts.shots.map_or(0.0, |s| (0.25 / s as f64).sqrt() / sxx.sqrt());
    if 3.0 * sigma >= 0.25 {
        return Err(Error::SlopeBelowNoise(3.0 * sigma));
    }
    let threshold = (3.0 * sigma).max(0.1);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut reference = CVec::zeros(n + 1);
    reference[0] = c(0.5f64.sqrt(), 0.0);
    reference[1] = c(0.5f64.sqrt(), 0.0);

    let mut out = Vec::new();
    let mut nonzero = 0;
    let mut paired = 0;
    for e in &est.estimates {
        if e.lambda_hat.abs() < 1e-12 {
            out.push(Estimate { sign_resolved: true, ..e.clone() });
            continue;
        }
        nonzero += 1;
        let w = e.lambda_hat.abs();
        let tau = FRAC_PI_2 / (amp * e.alpha_hat.max(1e-6));
        let dwell = FRAC_PI_2 / w;
        let sched = PulseSchedule::new(
            vec![0, 1],
            vec![
                Segment::rabi(tau, Tone { frequency: w, amplitude: amp, phase: 0.0 }),
                Segment::free(dwell),
                // carrier held during the dwell so only the level's phase shows
                Segment::rabi(tau, Tone { frequency: w, amplitude: amp, phase: PI - w * dwell }),
            ],
        );
        let mut ps = Vec::new();
        for &phi in &SCAN_PHASES {
            let mut init = CVec::zeros(n + 1);
            init[0] = c(0.5f64.sqrt(), 0.0);
            init[1] = Complex::from_polar(0.5f64.sqrt(), -phi);
            let shots = opts.shots.map(|s| (s, &mut rng));
            ps.push(bb.measure(&sched, &init, &reference, shots)?);
        }
        let pm = ps.iter().sum::<f64>() / ps.len() as f64;
        let slope = SCAN_PHASES.iter().zip(&ps).map(|(x, p)| (x - mean) * (p - pm)).sum::<f64>() / sxx;
        if slope.abs() < threshold {
            paired += 1;
            let a = e.alpha_hat / 2f64.sqrt();
            for s in [1.0, -1.0] {
                out.push(Estimate { lambda_hat: s * w, alpha_hat: a, sign_resolved: false, paired: true });
            }
        } else {
            out.push(Estimate { lambda_hat: -slope.signum() * w, alpha_hat: e.alpha_hat, sign_resolved: true, paired: false });
        }
    }
    out.sort_by(|a, b| a.lambda_hat.total_cmp(&b.lambda_hat));
    Ok(IdentificationResult { estimates: out, resolution: est.resolution, epsilon: est.epsilon, symmetric: nonzero > 0 && paired == nonzero })
}
