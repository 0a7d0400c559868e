//! Event-driven inference over mapped layers.
//!
//! Every spiking input issues one odd and one even AccW2V into each context
//! that sees it; silent inputs issue nothing. At the end of a timestep each
//! context runs its neuron microsequence. Layers run in order within a
//! timestep, so a layer consumes the spikes its predecessor produced in the
//! same timestep.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::isa::{
    neuron_update, InstrKind, Instruction, IsaError, MacroExecutor, TraceEvent, VContext,
};
use crate::macro_core::{MacroConfig, MacroError, Parity, RowAddr, SlotLayout};
use crate::mapper::{
    AllocRole, LayerShape, LayerSpec, MacroAllocation, NetworkMapping, PixelSchedule,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RuntimeError {
    #[error("layer {layer}: spike vector width {got}, expected {expected}")]
    WidthMismatch {
        layer: usize,
        expected: usize,
        got: usize,
    },
    #[error("network has no mapped layers")]
    Unmapped,
    #[error("no neuron {neuron} in layer {layer}")]
    NoSuchNeuron { layer: usize, neuron: usize },
    #[error("input train covers {got} timesteps, expected at least 1")]
    NoTimesteps { got: usize },
    #[error(transparent)]
    Isa(#[from] IsaError),
    #[error(transparent)]
    Macro(#[from] MacroError),
}

/// Binary spikes per (timestep, layer). Layer 0 is the network input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpikeTrain {
    widths: Vec<usize>,
    frames: Vec<Vec<Vec<bool>>>,
}

impl SpikeTrain {
    pub fn new(widths: Vec<usize>, timesteps: usize) -> Self {
        let frame: Vec<Vec<bool>> = widths.iter().map(|&w| vec![false; w]).collect();
        SpikeTrain {
            frames: vec![frame; timesteps],
            widths,
        }
    }

    /// A train with only the input layer populated.
    pub fn from_input(frames: Vec<Vec<bool>>) -> Self {
        let width = frames.first().map_or(0, Vec::len);
        SpikeTrain {
            widths: vec![width],
            frames: frames.into_iter().map(|f| vec![f]).collect(),
        }
    }

    pub fn timesteps(&self) -> usize {
        self.frames.len()
    }

    pub fn layers(&self) -> usize {
        self.widths.len()
    }

    pub fn width(&self, layer: usize) -> usize {
        self.widths[layer]
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn layer(&self, t: usize, layer: usize) -> &[bool] {
        &self.frames[t][layer]
    }

    pub fn layer_mut(&mut self, t: usize, layer: usize) -> &mut Vec<bool> {
        &mut self.frames[t][layer]
    }

    pub fn set(&mut self, t: usize, layer: usize, neuron: usize, spike: bool) {
        self.frames[t][layer][neuron] = spike;
    }

    /// All spikes as (t, layer, neuron), ordered by t, then layer, then neuron.
    pub fn events(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        self.frames.iter().enumerate().flat_map(|(t, frame)| {
            frame.iter().enumerate().flat_map(move |(l, bits)| {
                bits.iter()
                    .enumerate()
                    .filter(|(_, &s)| s)
                    .map(move |(n, _)| (t, l, n))
            })
        })
    }
}

/// One executed instruction, tagged with where and when it ran.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunEvent {
    pub t: usize,
    pub layer: usize,
    pub macro_id: usize,
    #[serde(flatten)]
    pub event: TraceEvent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VSample {
    pub t: usize,
    pub layer: usize,
    pub neuron: usize,
    pub v: i16,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunStats {
    /// Width of each layer, layer 0 being the input.
    pub widths: Vec<usize>,
    /// `spikes[layer][t]`
    pub spikes: Vec<Vec<usize>>,
    pub instr_counts: BTreeMap<InstrKind, u64>,
    pub overflow_events: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparsityTable {
    /// `per_layer[layer][t]`, layer 0 being the input.
    pub per_layer: Vec<Vec<f64>>,
    pub overall: f64,
}

/// Fraction of silent neurons per layer and timestep. `overall` pools every
/// (layer, timestep) cell, weighting each by its width.
pub fn compute_sparsity(stats: &RunStats) -> SparsityTable {
    let per_layer = stats
        .spikes
        .iter()
        .zip(&stats.widths)
        .map(|(counts, &w)| {
            counts
                .iter()
                .map(|&s| {
                    if w == 0 {
                        1.0
                    } else {
                        1.0 - s as f64 / w as f64
                    }
                })
                .collect()
        })
        .collect();
    let (spikes, slots) = stats
        .spikes
        .iter()
        .zip(&stats.widths)
        .fold((0usize, 0usize), |(s, n), (counts, &w)| {
            (s + counts.iter().sum::<usize>(), n + w * counts.len())
        });
    SparsityTable {
        per_layer,
        overall: if slots == 0 {
            1.0
        } else {
            1.0 - spikes as f64 / slots as f64
        },
    }
}

struct LayerRuntime {
    spec: LayerSpec,
    allocs: Vec<MacroAllocation>,
    macros: Vec<MacroExecutor>,
    schedule: Option<PixelSchedule>,
    /// Conv layers with more positions than contexts keep each position's
    /// (odd, even) rows here between batches: `saved[macro][position]`.
    saved: Option<Vec<Vec<[u128; 2]>>>,
}

impl LayerRuntime {
    fn new(
        spec: &LayerSpec,
        allocs: &[MacroAllocation],
        schedule: Option<&PixelSchedule>,
        config: MacroConfig,
    ) -> Result<Self, RuntimeError> {
        let macros = allocs
            .iter()
            .map(|a| {
                let mut ex = MacroExecutor::new(config);
                for (r, &bits) in a.w_image.0.iter().enumerate() {
                    ex.state_mut().write_row(RowAddr::W(r), bits)?;
                }
                a.reserved_values.install(ex.state_mut(), &a.reserved)?;
                Ok(ex)
            })
            .collect::<Result<Vec<_>, RuntimeError>>()?;
        let saved = schedule.filter(|s| s.batches.len() > 1).map(|s| {
            let positions = s.batches.iter().map(Vec::len).sum();
            vec![vec![[0u128; 2]; positions]; allocs.len()]
        });
        Ok(LayerRuntime {
            spec: spec.clone(),
            allocs: allocs.to_vec(),
            macros,
            schedule: schedule.cloned(),
            saved,
        })
    }

    fn step(&mut self, input: &[bool]) -> Result<Vec<bool>, RuntimeError> {
        match self.spec.shape {
            LayerShape::Fc { .. } => self.step_fc(input),
            LayerShape::Conv { .. } => self.step_conv(input),
        }
    }

    fn step_fc(&mut self, input: &[bool]) -> Result<Vec<bool>, RuntimeError> {
        let mut out = vec![false; self.spec.shape.out_width()];
        for (alloc, ex) in self.allocs.iter().zip(&mut self.macros) {
            let ctx = alloc.v_contexts[0];
            for &(i, w_row) in &alloc.input_map {
                if input[i] {
                    accumulate(ex, w_row, ctx)?;
                }
            }
        }
        for a in 0..self.allocs.len() {
            if let AllocRole::PartialOwner { donors, scratch } = &self.allocs[a].role {
                let owner_ctx = self.allocs[a].v_contexts[0];
                let (scratch, first) = (*scratch, self.allocs[a].macro_id);
                for &donor_id in donors {
                    let d = donor_id - first + a;
                    let donor_ctx = self.allocs[d].v_contexts[0];
                    merge_partial(&mut self.macros, d, donor_ctx, a, owner_ctx, scratch)?;
                }
            }
        }
        for (alloc, ex) in self.allocs.iter().zip(&mut self.macros) {
            if matches!(alloc.role, AllocRole::PartialDonor { .. }) {
                continue;
            }
            let spikes = neuron_update(
                ex,
                self.spec.neuron.kind,
                alloc.v_contexts[0],
                &alloc.reserved,
            )?;
            for &(o, g) in &alloc.output_map {
                out[o] = spikes[g];
            }
        }
        Ok(out)
    }

    fn step_conv(&mut self, input: &[bool]) -> Result<Vec<bool>, RuntimeError> {
        let LayerShape::Conv {
            in_channels,
            in_h,
            in_w,
            kernel_w,
            stride,
            padding,
            ..
        } = self.spec.shape
        else {
            unreachable!()
        };
        let (oh, ow) = self.spec.shape.out_hw();
        let schedule = self
            .schedule
            .as_ref()
            .expect("conv layers carry a pixel schedule");
        let mut out = vec![false; self.spec.shape.out_width()];
        for (m, (alloc, ex)) in self.allocs.iter().zip(&mut self.macros).enumerate() {
            let mut first_pos = 0;
            for batch in &schedule.batches {
                if let Some(saved) = &self.saved {
                    for (k, ctx) in alloc.v_contexts.iter().take(batch.len()).enumerate() {
                        let [odd, even] = saved[m][first_pos + k];
                        ex.exec(&Instruction::write(RowAddr::V(ctx.odd_row), odd))?;
                        ex.exec(&Instruction::write(RowAddr::V(ctx.even_row), even))?;
                    }
                }
                for (&(oy, ox), ctx) in batch.iter().zip(&alloc.v_contexts) {
                    for &(r, w_row) in &alloc.input_map {
                        let c = r % in_channels;
                        let kw = (r / in_channels) % kernel_w;
                        let kh = r / (in_channels * kernel_w);
                        let (Some(iy), Some(ix)) = (
                            (oy * stride + kh)
                                .checked_sub(padding)
                                .filter(|&y| y < in_h),
                            (ox * stride + kw)
                                .checked_sub(padding)
                                .filter(|&x| x < in_w),
                        ) else {
                            continue;
                        };
                        if input[(c * in_h + iy) * in_w + ix] {
                            accumulate(ex, w_row, *ctx)?;
                        }
                    }
                    let spikes = neuron_update(ex, self.spec.neuron.kind, *ctx, &alloc.reserved)?;
                    for &(o, g) in &alloc.output_map {
                        out[(o * oh + oy) * ow + ox] = spikes[g];
                    }
                }
                if let Some(saved) = &mut self.saved {
                    for (k, ctx) in alloc.v_contexts.iter().take(batch.len()).enumerate() {
                        let odd = ex
                            .exec(&Instruction::read(RowAddr::V(ctx.odd_row)))?
                            .read_data;
                        let even = ex
                            .exec(&Instruction::read(RowAddr::V(ctx.even_row)))?
                            .read_data;
                        saved[m][first_pos + k] = [odd.unwrap_or(0), even.unwrap_or(0)];
                    }
                }
                first_pos += batch.len();
            }
        }
        Ok(out)
    }

    fn potential(&self, neuron: usize) -> Result<i16, RuntimeError> {
        let decode = |bits: [u128; 2], g: usize| {
            let slot = SlotLayout::for_group(g);
            slot.decode(bits[slot.parity.index()])
        };
        match self.spec.shape {
            LayerShape::Fc { .. } => {
                let (a, g) = self
                    .allocs
                    .iter()
                    .enumerate()
                    .filter(|(_, a)| !matches!(a.role, AllocRole::PartialDonor { .. }))
                    .find_map(|(i, a)| {
                        a.output_map
                            .iter()
                            .find(|&&(o, _)| o == neuron)
                            .map(|&(_, g)| (i, g))
                    })
                    .ok_or(RuntimeError::NoSuchNeuron { layer: 0, neuron })?;
                let ctx = self.allocs[a].v_contexts[0];
                Ok(decode(rows_of(&self.macros[a], ctx)?, g))
            }
            LayerShape::Conv { .. } => {
                let (oh, ow) = self.spec.shape.out_hw();
                let (o, p) = (neuron / (oh * ow), neuron % (oh * ow));
                let (m, g) = (o / 12, o % 12);
                if m >= self.allocs.len() {
                    return Err(RuntimeError::NoSuchNeuron { layer: 0, neuron });
                }
                let bits = match &self.saved {
                    Some(saved) => saved[m][p],
                    None => rows_of(&self.macros[m], self.allocs[m].v_contexts[p])?,
                };
                Ok(decode(bits, g))
            }
        }
    }
}

fn rows_of(ex: &MacroExecutor, ctx: VContext) -> Result<[u128; 2], MacroError> {
    Ok([
        ex.state().read_row(RowAddr::V(ctx.odd_row))?,
        ex.state().read_row(RowAddr::V(ctx.even_row))?,
    ])
}

fn accumulate(ex: &mut MacroExecutor, w_row: usize, ctx: VContext) -> Result<(), IsaError> {
    for p in Parity::BOTH {
        let row = ctx.row(p);
        ex.exec(&Instruction::acc_w2v(w_row, p, row, row))?;
    }
    Ok(())
}

/// Moves a donor's partial sums into the owner's context and clears the donor.
fn merge_partial(
    macros: &mut [MacroExecutor],
    donor: usize,
    donor_ctx: VContext,
    owner: usize,
    owner_ctx: VContext,
    scratch: VContext,
) -> Result<(), IsaError> {
    for p in Parity::BOTH {
        let partial = macros[donor]
            .exec(&Instruction::read(RowAddr::V(donor_ctx.row(p))))?
            .read_data
            .unwrap_or(0);
        macros[donor].exec(&Instruction::write(RowAddr::V(donor_ctx.row(p)), 0))?;
        let ex = &mut macros[owner];
        ex.exec(&Instruction::write(RowAddr::V(scratch.row(p)), partial))?;
        let row = owner_ctx.row(p);
        ex.exec(&Instruction::acc_v2v(p, row, scratch.row(p), row, false))?;
    }
    Ok(())
}

/// Stateful simulator for a whole mapped network.
pub struct Engine {
    layers: Vec<LayerRuntime>,
    ids: Vec<Vec<usize>>,
    t: usize,
    trace: Vec<RunEvent>,
    stats: RunStats,
}

impl Engine {
    pub fn new(mapping: &NetworkMapping, config: MacroConfig) -> Result<Self, RuntimeError> {
        if mapping.layers.is_empty() {
            return Err(RuntimeError::Unmapped);
        }
        let layers = mapping
            .layers
            .iter()
            .map(|l| LayerRuntime::new(&l.spec, &l.allocations, l.schedule.as_ref(), config))
            .collect::<Result<Vec<_>, _>>()?;
        let mut widths = vec![mapping.input_width()];
        widths.extend(mapping.layers.iter().map(|l| l.spec.shape.out_width()));
        Ok(Engine {
            ids: mapping
                .layers
                .iter()
                .map(|l| l.allocations.iter().map(|a| a.macro_id).collect())
                .collect(),
            layers,
            t: 0,
            trace: Vec::new(),
            stats: RunStats {
                spikes: vec![Vec::new(); widths.len()],
                widths,
                ..RunStats::default()
            },
        })
    }

    pub fn widths(&self) -> &[usize] {
        &self.stats.widths
    }

    pub fn timestep(&self) -> usize {
        self.t
    }

    /// Advances one timestep. Returns the spikes of every layer, index 0 being
    /// `input` itself.
    pub fn run_timestep(&mut self, input: &[bool]) -> Result<Vec<Vec<bool>>, RuntimeError> {
        if input.len() != self.stats.widths[0] {
            return Err(RuntimeError::WidthMismatch {
                layer: 0,
                expected: self.stats.widths[0],
                got: input.len(),
            });
        }
        let mut frames = vec![input.to_vec()];
        for (l, layer) in self.layers.iter_mut().enumerate() {
            let out = layer.step(&frames[l])?;
            for (ex, &id) in layer.macros.iter_mut().zip(&self.ids[l]) {
                for event in ex.take_trace() {
                    *self.stats.instr_counts.entry(event.kind).or_default() += 1;
                    self.stats.overflow_events += u64::from(event.overflows);
                    self.trace.push(RunEvent {
                        t: self.t,
                        layer: l + 1,
                        macro_id: id,
                        event,
                    });
                }
            }
            frames.push(out);
        }
        for (l, f) in frames.iter().enumerate() {
            self.stats.spikes[l].push(f.iter().filter(|&&s| s).count());
        }
        self.t += 1;
        Ok(frames)
    }

    /// Current potential of `neuron` in `layer` (1-based), read without issuing
    /// instructions.
    pub fn potential(&self, layer: usize, neuron: usize) -> Result<i16, RuntimeError> {
        let rt = layer
            .checked_sub(1)
            .and_then(|l| self.layers.get(l))
            .ok_or(RuntimeError::NoSuchNeuron { layer, neuron })?;
        if neuron >= rt.spec.shape.out_width() {
            return Err(RuntimeError::NoSuchNeuron { layer, neuron });
        }
        rt.potential(neuron).map_err(|e| match e {
            RuntimeError::NoSuchNeuron { neuron, .. } => {
                RuntimeError::NoSuchNeuron { layer, neuron }
            }
            e => e,
        })
    }

    pub fn potentials(&self, layer: usize) -> Result<Vec<i16>, RuntimeError> {
        (0..self.stats.widths.get(layer).copied().unwrap_or(0))
            .map(|n| self.potential(layer, n))
            .collect()
    }

    pub fn trace(&self) -> &[RunEvent] {
        &self.trace
    }

    pub fn stats(&self) -> &RunStats {
        &self.stats
    }

    pub fn into_parts(self) -> (Vec<RunEvent>, RunStats) {
        (self.trace, self.stats)
    }
}

#[derive(Debug, Clone)]
pub struct InferenceResult {
    /// All layers including the input (layer 0).
    pub spikes: SpikeTrain,
    pub v_trace: Vec<VSample>,
    /// `final_v[layer]`, layer 0 being empty.
    pub final_v: Vec<Vec<i16>>,
    pub stats: RunStats,
    pub trace: Vec<RunEvent>,
}

/// Runs every timestep of `input` (layer 0 of the train) through the network.
/// `probes` lists (layer, neuron) pairs whose potential is sampled after each
/// timestep.
pub fn run_inference(
    mapping: &NetworkMapping,
    input: &SpikeTrain,
    probes: &[(usize, usize)],
    config: MacroConfig,
) -> Result<InferenceResult, RuntimeError> {
    if input.timesteps() == 0 {
        return Err(RuntimeError::NoTimesteps { got: 0 });
    }
    let mut engine = Engine::new(mapping, config)?;
    let mut spikes = SpikeTrain::new(engine.widths().to_vec(), input.timesteps());
    let mut v_trace = Vec::with_capacity(probes.len() * input.timesteps());
    for t in 0..input.timesteps() {
        let frames = engine.run_timestep(input.layer(t, 0))?;
        for (l, f) in frames.into_iter().enumerate() {
            *spikes.layer_mut(t, l) = f;
        }
        for &(layer, neuron) in probes {
            v_trace.push(VSample {
                t,
                layer,
                neuron,
                v: engine.potential(layer, neuron)?,
            });
        }
    }
    let mut final_v = vec![Vec::new()];
    for l in 1..engine.widths().len() {
        final_v.push(engine.potentials(l)?);
    }
    let (trace, stats) = engine.into_parts();
    Ok(InferenceResult {
        spikes,
        v_trace,
        final_v,
        stats,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isa::{NeuronKind, NeuronModel};
    use crate::mapper::map_network;

    fn fc_layer(in_dim: usize, out_dim: usize, w: i32, model: NeuronModel) -> LayerSpec {
        LayerSpec::fc(model, &vec![vec![w; out_dim]; in_dim]).unwrap()
    }

    fn count(trace: &[RunEvent], kind: InstrKind) -> usize {
        trace.iter().filter(|e| e.event.kind == kind).count()
    }

    #[test]
    fn silent_input_runs_only_neuron_updates() {
        let net = map_network(&[fc_layer(
            16,
            12,
            1,
            NeuronModel::new(NeuronKind::Lif, 3).with_leak(1),
        )])
        .unwrap();
        let mut eng = Engine::new(&net, MacroConfig::default()).unwrap();
        eng.run_timestep(&[false; 16]).unwrap();
        assert_eq!(count(eng.trace(), InstrKind::AccW2V), 0);
        assert_eq!(eng.trace().len(), 6);
    }

    #[test]
    fn k_spikes_give_2k_accumulates() {
        let net =
            map_network(&[fc_layer(16, 12, 1, NeuronModel::new(NeuronKind::If, 30))]).unwrap();
        let mut eng = Engine::new(&net, MacroConfig::default()).unwrap();
        let mut input = vec![false; 16];
        for i in [1, 4, 9, 15] {
            input[i] = true;
        }
        eng.run_timestep(&input).unwrap();
        assert_eq!(count(eng.trace(), InstrKind::AccW2V), 8);
    }

    #[test]
    fn single_spike_fires_every_neuron() {
        let net = map_network(&[fc_layer(4, 12, 1, NeuronModel::new(NeuronKind::If, 1))]).unwrap();
        let mut eng = Engine::new(&net, MacroConfig::default()).unwrap();
        let frames = eng.run_timestep(&[false, true, false, false]).unwrap();
        assert_eq!(frames[1], vec![true; 12]);
        assert_eq!(eng.potentials(1).unwrap(), vec![0; 12]);
    }

    #[test]
    fn width_mismatch_is_rejected() {
        let net = map_network(&[fc_layer(4, 2, 1, NeuronModel::new(NeuronKind::If, 1))]).unwrap();
        let mut eng = Engine::new(&net, MacroConfig::default()).unwrap();
        assert!(matches!(
            eng.run_timestep(&[true; 5]),
            Err(RuntimeError::WidthMismatch {
                expected: 4,
                got: 5,
                ..
            })
        ));
    }

    #[test]
    fn rmp_sawtooth() {
        let net = map_network(&[fc_layer(1, 1, 3, NeuronModel::new(NeuronKind::Rmp, 4))]).unwrap();
        let input = SpikeTrain::from_input(vec![vec![true]; 6]);
        let res = run_inference(&net, &input, &[(1, 0)], MacroConfig::default()).unwrap();
        let vs: Vec<i16> = res.v_trace.iter().map(|s| s.v).collect();
        // 3, 6-4=2, 5-4=1, 4-4=0, 3, 2
        assert_eq!(vs, vec![3, 2, 1, 0, 3, 2]);
        let spikes: Vec<bool> = (0..6).map(|t| res.spikes.layer(t, 1)[0]).collect();
        assert_eq!(spikes, vec![false, true, true, true, false, true]);
    }

    #[test]
    fn sparsity_table() {
        let stats = RunStats {
            widths: vec![128],
            spikes: vec![vec![19]],
            ..RunStats::default()
        };
        let s = compute_sparsity(&stats);
        assert!((s.per_layer[0][0] - 0.8515625).abs() < 1e-12);
        let none = RunStats {
            widths: vec![8, 4],
            spikes: vec![vec![0, 0], vec![0, 0]],
            ..RunStats::default()
        };
        assert_eq!(compute_sparsity(&none).overall, 1.0);
        let all = RunStats {
            widths: vec![8, 4],
            spikes: vec![vec![8, 8], vec![4, 4]],
            ..RunStats::default()
        };
        assert_eq!(compute_sparsity(&all).overall, 0.0);
    }

    #[test]
    fn input_tiled_fc_matches_direct_sum() {
        // 200 inputs all +1 into 3 neurons with threshold 1000: V = spikes count
        let net =
            map_network(&[fc_layer(200, 3, 1, NeuronModel::new(NeuronKind::If, 1000))]).unwrap();
        let mut eng = Engine::new(&net, MacroConfig::default()).unwrap();
        let input: Vec<bool> = (0..200).map(|i| i % 3 != 0).collect();
        eng.run_timestep(&input).unwrap();
        let expected = input.iter().filter(|&&s| s).count() as i16;
        assert_eq!(eng.potentials(1).unwrap(), vec![expected; 3]);
        eng.run_timestep(&input).unwrap();
        assert_eq!(eng.potentials(1).unwrap(), vec![2 * expected; 3]);
    }

    #[test]
    fn conv_batches_keep_state() {
        use crate::mapper::LayerShape;
        // 1 channel 6x6 input, 2x2 kernel of ones -> 5x5 = 25 positions, two batches
        let shape = LayerShape::Conv {
            in_channels: 1,
            in_h: 6,
            in_w: 6,
            kernel_h: 2,
            kernel_w: 2,
            out_channels: 1,
            stride: 1,
            padding: 0,
        };
        let layer =
            LayerSpec::conv(shape, NeuronModel::new(NeuronKind::If, 100), vec![1; 4]).unwrap();
        let net = map_network(&[layer]).unwrap();
        let mut eng = Engine::new(&net, MacroConfig::default()).unwrap();
        let input: Vec<bool> = (0..36).map(|i| i % 2 == 0).collect();
        eng.run_timestep(&input).unwrap();
        eng.run_timestep(&input).unwrap();
        let v = eng.potentials(1).unwrap();
        for y in 0..5 {
            for x in 0..5 {
                let mut s = 0;
                for (dy, dx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                    s += input[(y + dy) * 6 + x + dx] as i16;
                }
                assert_eq!(v[y * 5 + x], 2 * s, "({y},{x})");
            }
        }
    }
}
