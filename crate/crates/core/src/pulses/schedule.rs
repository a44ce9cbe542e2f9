use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    Rabi,
    Raman,
    Free,
    InjectCatalyst,
    ExtractCatalyst,
}

/// One term `2 a cos(w t + phi)` of the control field, `t` absolute time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tone {
    pub frequency: f64,
    pub amplitude: f64,
    pub phase: f64,
}

impl Tone {
    pub fn value(&self, t: f64) -> f64 {
        2.0 * self.amplitude * (self.frequency * t + self.phase).cos()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub kind: SegmentKind,
    pub duration: f64,
    #[serde(default)]
    pub tones: Vec<Tone>,
}

impl Segment {
    pub fn rabi(duration: f64, tone: Tone) -> Self {
        Segment { kind: SegmentKind::Rabi, duration, tones: vec![tone] }
    }

    pub fn raman(duration: f64, a: Tone, b: Tone) -> Self {
        Segment { kind: SegmentKind::Raman, duration, tones: vec![a, b] }
    }

    pub fn free(duration: f64) -> Self {
        Segment { kind: SegmentKind::Free, duration, tones: vec![] }
    }

    pub fn inject() -> Self {
        Segment { kind: SegmentKind::InjectCatalyst, duration: 0.0, tones: vec![] }
    }

    pub fn extract() -> Self {
        Segment { kind: SegmentKind::ExtractCatalyst, duration: 0.0, tones: vec![] }
    }

    pub fn is_marker(&self) -> bool {
        matches!(self.kind, SegmentKind::InjectCatalyst | SegmentKind::ExtractCatalyst)
    }

    pub fn control(&self, t: f64) -> f64 {
        self.tones.iter().map(|tone| tone.value(t)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSchedule {
    /// Excitation sectors the initial state lives in.
    pub sectors: Vec<usize>,
    pub segments: Vec<Segment>,
    /// First-order off-resonant leakage estimate `max eps / gap`.
    #[serde(default)]
    pub leakage_estimate: f64,
}

impl PulseSchedule {
    pub fn new(sectors: Vec<usize>, segments: Vec<Segment>) -> Self {
        PulseSchedule { sectors, segments, leakage_estimate: 0.0 }
    }

    pub fn duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    pub fn max_amplitude(&self) -> f64 {
        self.segments.iter().flat_map(|s| s.tones.iter()).map(|t| t.amplitude.abs()).fold(0.0, f64::max)
    }

    pub fn max_frequency(&self) -> f64 {
        self.segments.iter().flat_map(|s| s.tones.iter()).map(|t| t.frequency.abs()).fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sectors.is_empty() {
            return Err(Error::Invalid("schedule has no sectors".into()));
        }
        for (k, s) in self.segments.iter().enumerate() {
            if !s.duration.is_finite() || s.duration < 0.0 {
                return Err(Error::Invalid(format!("segment {k}: duration must be finite and non-negative")));
            }
            if s.is_marker() && (s.duration != 0.0 || !s.tones.is_empty()) {
                return Err(Error::Invalid(format!("segment {k}: catalyst markers take no time and no tones")));
            }
            if !s.is_marker() && s.duration == 0.0 {
                return Err(Error::Invalid(format!("segment {k}: duration must be positive")));
            }
            for t in &s.tones {
                if !(t.frequency.is_finite() && t.amplitude.is_finite() && t.phase.is_finite()) {
                    return Err(Error::Invalid(format!("segment {k}: non-finite tone")));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("schedule serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: PulseSchedule = serde_json::from_str(text).map_err(|e| Error::Schema { field: "schedule".into(), reason: e.to_string() })?;
        s.validate()?;
        Ok(s)
    }
}
