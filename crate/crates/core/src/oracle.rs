//! Plain-integer reference for quantized SNN inference.
//!
//! Nothing here models rows, columns or instructions. It shares only the
//! layer description types with the mapper, so the simulator can be checked
//! against it end to end.

use serde::Serialize;
use thiserror::Error;

use crate::isa::NeuronKind;
use crate::mapper::{LayerShape, LayerSpec};
use crate::runtime::SpikeTrain;

const V_LO: i32 = -1024;
const V_HI: i32 = 1023;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("input width {got}, network expects {expected}")]
    InputWidth { expected: usize, got: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
}

/// Integer arithmetic on 11-bit potentials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct VArith {
    pub saturate: bool,
}

impl VArith {
    pub fn add(self, v: i32, x: i32) -> i32 {
        let s = v + x;
        if self.saturate {
            s.clamp(V_LO, V_HI)
        } else {
            (s - V_LO).rem_euclid(2048) + V_LO
        }
    }

    /// The threshold comparison. Wrapping hardware looks at the sign of
    /// V - theta, which only equals V >= theta when that difference fits.
    pub fn fires(self, v: i32, theta: i32) -> bool {
        if self.saturate {
            v >= theta
        } else {
            self.add(v, -theta) >= 0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefLayer {
    pub shape: LayerShape,
    pub kind: NeuronKind,
    pub threshold: i32,
    pub leak: i32,
    pub v_reset: i32,
    pub weights: Vec<i32>,
    pub v: Vec<i32>,
}

impl RefLayer {
    pub fn from_spec(spec: &LayerSpec) -> Self {
        RefLayer {
            shape: spec.shape,
            kind: spec.neuron.kind,
            threshold: spec.neuron.threshold.into(),
            leak: spec.neuron.leak.into(),
            v_reset: spec.neuron.v_reset.into(),
            weights: spec.weights.clone(),
            v: vec![0; spec.shape.out_width()],
        }
    }

    fn in_width(&self) -> usize {
        match self.shape {
            LayerShape::Fc { in_dim, .. } => in_dim,
            LayerShape::Conv {
                in_channels,
                in_h,
                in_w,
                ..
            } => in_channels * in_h * in_w,
        }
    }

    /// Adds every spiking input's weight into each neuron, one at a time in
    /// the order the hardware would see them.
    fn integrate(&mut self, input: &[bool], ar: VArith) {
        match self.shape {
            LayerShape::Fc { in_dim, out_dim } => {
                for i in (0..in_dim).filter(|&i| input[i]) {
                    for o in 0..out_dim {
                        self.v[o] = ar.add(self.v[o], self.weights[i * out_dim + o]);
                    }
                }
            }
            LayerShape::Conv {
                in_channels,
                in_h,
                in_w,
                kernel_h,
                kernel_w,
                out_channels,
                stride,
                padding,
            } => {
                let oh = (in_h + 2 * padding - kernel_h) / stride + 1;
                let ow = (in_w + 2 * padding - kernel_w) / stride + 1;
                for o in 0..out_channels {
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let n = (o * oh + oy) * ow + ox;
                            for kh in 0..kernel_h {
                                for kw in 0..kernel_w {
                                    for c in 0..in_channels {
                                        let iy = (oy * stride + kh) as isize - padding as isize;
                                        let ix = (ox * stride + kw) as isize - padding as isize;
                                        if iy < 0
                                            || ix < 0
                                            || iy >= in_h as isize
                                            || ix >= in_w as isize
                                        {
                                            continue;
                                        }
                                        if input[(c * in_h + iy as usize) * in_w + ix as usize] {
                                            let w = self.weights[((o * in_channels + c)
                                                * kernel_h
                                                + kh)
                                                * kernel_w
                                                + kw];
                                            self.v[n] = ar.add(self.v[n], w);
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    fn fire(&mut self, ar: VArith) -> Vec<bool> {
        let (theta, leak, reset, kind) = (self.threshold, self.leak, self.v_reset, self.kind);
        self.v
            .iter_mut()
            .map(|v| {
                if kind == NeuronKind::Lif {
                    *v = ar.add(*v, -leak);
                }
                let spike = ar.fires(*v, theta);
                if spike {
                    *v = match kind {
                        NeuronKind::Rmp => ar.add(*v, -theta),
                        NeuronKind::If | NeuronKind::Lif => reset,
                    };
                }
                spike
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefNetwork {
    pub layers: Vec<RefLayer>,
    pub arith: VArith,
}

impl RefNetwork {
    pub fn new(specs: &[LayerSpec], saturate: bool) -> Result<Self, OracleError> {
        let layers: Vec<RefLayer> = specs.iter().map(RefLayer::from_spec).collect();
        if layers.is_empty() {
            return Err(OracleError::Shape("network has no layers".into()));
        }
        for (l, pair) in layers.windows(2).enumerate() {
            let (have, want) = (pair[0].v.len(), pair[1].in_width());
            if have != want {
                return Err(OracleError::Shape(format!(
                    "layer {} emits {have} spikes, layer {} takes {want}",
                    l + 1,
                    l + 2
                )));
            }
        }
        for (l, layer) in layers.iter().enumerate() {
            let expected = match layer.shape {
                LayerShape::Fc { in_dim, out_dim } => in_dim * out_dim,
                LayerShape::Conv {
                    in_channels,
                    kernel_h,
                    kernel_w,
                    out_channels,
                    ..
                } => in_channels * kernel_h * kernel_w * out_channels,
            };
            if layer.weights.len() != expected {
                return Err(OracleError::Shape(format!(
                    "layer {} has {} weights, expected {expected}",
                    l + 1,
                    layer.weights.len()
                )));
            }
        }
        Ok(RefNetwork {
            layers,
            arith: VArith { saturate },
        })
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].in_width()
    }

    /// Spike widths per layer, index 0 the input.
    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.input_width())
            .chain(self.layers.iter().map(|l| l.v.len()))
            .collect()
    }

    /// One timestep; returns the spikes of every layer including the input.
    pub fn ref_step(&mut self, input: &[bool]) -> Result<Vec<Vec<bool>>, OracleError> {
        if input.len() != self.input_width() {
            return Err(OracleError::InputWidth {
                expected: self.input_width(),
                got: input.len(),
            });
        }
        let ar = self.arith;
        let mut frames = vec![input.to_vec()];
        for layer in &mut self.layers {
            layer.integrate(frames.last().expect("nonempty"), ar);
            frames.push(layer.fire(ar));
        }
        Ok(frames)
    }

    pub fn potentials(&self) -> Vec<Vec<i16>> {
        std::iter::once(Vec::new())
            .chain(
                self.layers
                    .iter()
                    .map(|l| l.v.iter().map(|&v| v as i16).collect()),
            )
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefTrace {
    pub spikes: SpikeTrain,
    /// Index 0 empty, as for simulator results.
    pub final_v: Vec<Vec<i16>>,
}

pub fn ref_run(net: &mut RefNetwork, input: &SpikeTrain) -> Result<RefTrace, OracleError> {
    let mut spikes = SpikeTrain::new(net.widths(), input.timesteps());
    for t in 0..input.timesteps() {
        for (l, f) in net.ref_step(input.layer(t, 0))?.into_iter().enumerate() {
            *spikes.layer_mut(t, l) = f;
        }
    }
    Ok(RefTrace {
        spikes,
        final_v: net.potentials(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Comparison {
    Equal,
    Spike {
        t: usize,
        layer: usize,
        neuron: usize,
        sim: bool,
        reference: bool,
    },
    FinalV {
        layer: usize,
        neuron: usize,
        sim: i16,
        reference: i16,
    },
}

impl std::fmt::Display for Comparison {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            Comparison::Equal => write!(f, "equal"),
            Comparison::Spike {
                t,
                layer,
                neuron,
                sim,
                reference,
            } => write!(
                f,
                "spike divergence at t={t} layer={layer} neuron={neuron}: sim={} ref={}",
                u8::from(sim),
                u8::from(reference)
            ),
            Comparison::FinalV {
                layer,
                neuron,
                sim,
                reference,
            } => write!(
                f,
                "final V divergence at layer={layer} neuron={neuron}: sim={sim} ref={reference}"
            ),
        }
    }
}

/// First difference in (t, layer, neuron) order, then in final potentials.
pub fn compare(
    sim_spikes: &SpikeTrain,
    sim_final_v: &[Vec<i16>],
    reference: &RefTrace,
) -> Result<Comparison, OracleError> {
    if sim_spikes.widths() != reference.spikes.widths()
        || sim_spikes.timesteps() != reference.spikes.timesteps()
    {
        return Err(OracleError::Shape("spike trains differ in shape".into()));
    }
    let v_shape = |v: &[Vec<i16>]| v.iter().map(Vec::len).collect::<Vec<_>>();
    if v_shape(sim_final_v) != v_shape(&reference.final_v) {
        return Err(OracleError::Shape(
            "final potentials differ in shape".into(),
        ));
    }
    for t in 0..sim_spikes.timesteps() {
        for layer in 0..sim_spikes.layers() {
            let (a, b) = (sim_spikes.layer(t, layer), reference.spikes.layer(t, layer));
            if let Some(neuron) = (0..a.len()).find(|&n| a[n] != b[n]) {
                return Ok(Comparison::Spike {
                    t,
                    layer,
                    neuron,
                    sim: a[neuron],
                    reference: b[neuron],
                });
            }
        }
    }
    for (layer, (a, b)) in sim_final_v.iter().zip(&reference.final_v).enumerate() {
        if let Some(neuron) = (0..a.len()).find(|&n| a[n] != b[n]) {
            return Ok(Comparison::FinalV {
                layer,
                neuron,
                sim: a[neuron],
                reference: b[neuron],
            });
        }
    }
    Ok(Comparison::Equal)
}
