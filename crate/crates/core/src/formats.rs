//! Text formats shared by the library and the command line.
//!
//! Spike trains are one event per line, `t<TAB>layer<TAB>neuron`, sorted by
//! time, layer and neuron. The same format is read back as input, so a run's
//! output can feed the next invocation.

use std::fmt::Write as _;

use thiserror::Error;

use crate::runtime::{SpikeTrain, VSample};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormatError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("neuron {neuron} at t={t} is outside width {width}")]
    NeuronOutOfRange {
        t: usize,
        neuron: usize,
        width: usize,
    },
    #[error("event at t={t} beyond {timesteps} timesteps")]
    TimeOutOfRange { t: usize, timesteps: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct SpikeEvent {
    pub t: usize,
    pub layer: usize,
    pub neuron: usize,
}

/// Writes the events of `layers` in (t, layer, neuron) order.
pub fn write_spike_events(train: &SpikeTrain, layers: std::ops::Range<usize>) -> String {
    let mut out = String::new();
    for (t, layer, neuron) in train.events() {
        if layers.contains(&layer) {
            let _ = writeln!(out, "{t}\t{layer}\t{neuron}");
        }
    }
    out
}

/// Blank lines and lines starting with `#` are skipped.
pub fn parse_spike_events(text: &str) -> Result<Vec<SpikeEvent>, FormatError> {
    let mut events = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |reason: String| FormatError::Parse {
            line: i + 1,
            reason,
        };
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(err(format!(
                "expected 3 tab-separated fields, got {}",
                fields.len()
            )));
        }
        let mut nums = [0usize; 3];
        for (n, f) in nums.iter_mut().zip(&fields) {
            *n = f
                .parse()
                .map_err(|_| err(format!("`{f}` is not a non-negative integer")))?;
        }
        events.push(SpikeEvent {
            t: nums[0],
            layer: nums[1],
            neuron: nums[2],
        });
    }
    Ok(events)
}

/// Builds an input train from the events tagged `layer`. Other layers are
/// ignored. Without `timesteps` the train ends at the last event.
pub fn input_train(
    events: &[SpikeEvent],
    layer: usize,
    width: usize,
    timesteps: Option<usize>,
) -> Result<SpikeTrain, FormatError> {
    let selected: Vec<&SpikeEvent> = events.iter().filter(|e| e.layer == layer).collect();
    let steps = timesteps.unwrap_or_else(|| selected.iter().map(|e| e.t + 1).max().unwrap_or(0));
    let mut frames = vec![vec![false; width]; steps];
    for e in selected {
        if e.t >= steps {
            return Err(FormatError::TimeOutOfRange {
                t: e.t,
                timesteps: steps,
            });
        }
        if e.neuron >= width {
            return Err(FormatError::NeuronOutOfRange {
                t: e.t,
                neuron: e.neuron,
                width,
            });
        }
        frames[e.t][e.neuron] = true;
    }
    if frames.is_empty() {
        return Ok(SpikeTrain::new(vec![width], 0));
    }
    Ok(SpikeTrain::from_input(frames))
}

pub fn v_trace_csv(samples: &[VSample]) -> String {
    let mut out = String::from("t,layer,neuron,v_value\n");
    for s in samples {
        let _ = writeln!(out, "{},{},{},{}", s.t, s.layer, s.neuron, s.v);
    }
    out
}
