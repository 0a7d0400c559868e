//! Compiles FC and Conv layers into macro allocations.
//!
//! Each macro holds up to 128 input rows and 12 output neurons. V_MEM rows
//! 0..6 are reserved for negated threshold, negated leak and reset values (one
//! row per parity each), leaving 13 context pairs at rows (6,7)..(30,31).

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::isa::{NeuronModel, ReservedRows, ReservedValues, VContext};
use crate::macro_core::layout::encode_weight;
use crate::macro_core::{V_ROWS, WEIGHTS_PER_ROW, WEIGHT_BITS, W_MAX, W_MIN, W_ROWS};

pub const RESERVED_V_ROWS: usize = 6;
pub const MAX_CONTEXTS: usize = (V_ROWS - RESERVED_V_ROWS) / 2;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MapError {
    #[error("weight {value} at [{row}][{col}] outside [{W_MIN}, {W_MAX}]")]
    Quantization { row: usize, col: usize, value: i32 },
    #[error("{requested} V contexts exceed the {capacity} available per macro; needs {macros_needed} macros")]
    Capacity {
        requested: usize,
        capacity: usize,
        macros_needed: usize,
    },
    #[error("fan-in {fan_in} exceeds the {W_ROWS} rows of one macro")]
    FanInTooLarge { fan_in: usize },
    #[error("weight matrix is {rows}x{cols}; at most {W_ROWS}x{WEIGHTS_PER_ROW} fits one image")]
    ImageTooLarge { rows: usize, cols: usize },
    #[error("layer shape: {0}")]
    Shape(String),
    #[error("layer {layer}: input width {got} does not match previous output width {expected}")]
    Chain {
        layer: usize,
        expected: usize,
        got: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerShape {
    Fc {
        in_dim: usize,
        out_dim: usize,
    },
    Conv {
        in_channels: usize,
        in_h: usize,
        in_w: usize,
        kernel_h: usize,
        kernel_w: usize,
        out_channels: usize,
        stride: usize,
        padding: usize,
    },
}

impl LayerShape {
    pub fn fan_in(&self) -> usize {
        match *self {
            LayerShape::Fc { in_dim, .. } => in_dim,
            LayerShape::Conv {
                in_channels,
                kernel_h,
                kernel_w,
                ..
            } => kernel_h * kernel_w * in_channels,
        }
    }

    pub fn in_width(&self) -> usize {
        match *self {
            LayerShape::Fc { in_dim, .. } => in_dim,
            LayerShape::Conv {
                in_channels,
                in_h,
                in_w,
                ..
            } => in_channels * in_h * in_w,
        }
    }

    /// Output channels (Conv) or neurons (FC).
    pub fn out_features(&self) -> usize {
        match *self {
            LayerShape::Fc { out_dim, .. } => out_dim,
            LayerShape::Conv { out_channels, .. } => out_channels,
        }
    }

    /// Output spatial size; (1, 1) for FC.
    pub fn out_hw(&self) -> (usize, usize) {
        match *self {
            LayerShape::Fc { .. } => (1, 1),
            LayerShape::Conv {
                in_h,
                in_w,
                kernel_h,
                kernel_w,
                stride,
                padding,
                ..
            } => (
                (in_h + 2 * padding - kernel_h) / stride + 1,
                (in_w + 2 * padding - kernel_w) / stride + 1,
            ),
        }
    }

    pub fn out_width(&self) -> usize {
        let (h, w) = self.out_hw();
        self.out_features() * h * w
    }

    pub fn weight_count(&self) -> usize {
        self.fan_in() * self.out_features()
    }

    fn validate(&self) -> Result<(), MapError> {
        if self.fan_in() == 0 || self.out_features() == 0 {
            return Err(MapError::Shape("dimensions must be positive".into()));
        }
        if let LayerShape::Conv {
            in_h,
            in_w,
            kernel_h,
            kernel_w,
            stride,
            padding,
            ..
        } = *self
        {
            if stride == 0 {
                return Err(MapError::Shape("stride must be positive".into()));
            }
            if kernel_h > in_h + 2 * padding || kernel_w > in_w + 2 * padding {
                return Err(MapError::Shape("kernel larger than padded input".into()));
            }
        }
        Ok(())
    }
}

/// A layer with its quantized weights.
///
/// FC weights are stored `[input][output]`; Conv weights
/// `[out_channel][in_channel][kernel_row][kernel_col]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub shape: LayerShape,
    pub neuron: NeuronModel,
    pub weights: Vec<i32>,
}

impl LayerSpec {
    pub fn fc(neuron: NeuronModel, weights: &[Vec<i32>]) -> Result<Self, MapError> {
        let in_dim = weights.len();
        let out_dim = weights.first().map_or(0, Vec::len);
        if weights.iter().any(|r| r.len() != out_dim) {
            return Err(MapError::Shape("ragged FC weight matrix".into()));
        }
        let spec = LayerSpec {
            shape: LayerShape::Fc { in_dim, out_dim },
            neuron,
            weights: weights.concat(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn conv(
        shape: LayerShape,
        neuron: NeuronModel,
        weights: Vec<i32>,
    ) -> Result<Self, MapError> {
        let spec = LayerSpec {
            shape,
            neuron,
            weights,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), MapError> {
        self.shape.validate()?;
        self.neuron.validate().map_err(MapError::Shape)?;
        if self.weights.len() != self.shape.weight_count() {
            return Err(MapError::Shape(format!(
                "expected {} weights, got {}",
                self.shape.weight_count(),
                self.weights.len()
            )));
        }
        let cols = self.shape.out_features();
        if let Some((i, &value)) = self
            .weights
            .iter()
            .enumerate()
            .find(|(_, &w)| !(W_MIN..=W_MAX).contains(&w))
        {
            return Err(MapError::Quantization {
                row: i / cols,
                col: i % cols,
                value,
            });
        }
        Ok(())
    }

    pub fn fc_weight(&self, input: usize, output: usize) -> i32 {
        self.weights[input * self.shape.out_features() + output]
    }

    pub fn conv_weight(&self, out_c: usize, in_c: usize, kh: usize, kw: usize) -> i32 {
        let LayerShape::Conv {
            in_channels,
            kernel_h,
            kernel_w,
            ..
        } = self.shape
        else {
            panic!("conv_weight on an FC layer");
        };
        self.weights[((out_c * in_channels + in_c) * kernel_h + kh) * kernel_w + kw]
    }

    /// Weight from fan-in row `row` to output feature `out`. Conv rows are
    /// ordered (kernel row, kernel col, channel).
    pub fn row_weight(&self, row: usize, out: usize) -> i32 {
        match self.shape {
            LayerShape::Fc { .. } => self.fc_weight(row, out),
            LayerShape::Conv {
                in_channels,
                kernel_w,
                ..
            } => {
                let c = row % in_channels;
                let kw = (row / in_channels) % kernel_w;
                let kh = row / (in_channels * kernel_w);
                self.conv_weight(out, c, kh, kw)
            }
        }
    }
}

/// Packed W_MEM contents: one 72-bit word per row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WImage(pub Vec<u128>);

/// Packs a `fan_in × n_out` matrix: row r = input r, group g = output g.
pub fn pack_w_image(weights: &[Vec<i32>]) -> Result<WImage, MapError> {
    let cols = weights.iter().map(Vec::len).max().unwrap_or(0);
    if weights.len() > W_ROWS || cols > WEIGHTS_PER_ROW {
        return Err(MapError::ImageTooLarge {
            rows: weights.len(),
            cols,
        });
    }
    let mut rows = vec![0u128; W_ROWS];
    for (r, ws) in weights.iter().enumerate() {
        for (g, &w) in ws.iter().enumerate() {
            if !(W_MIN..=W_MAX).contains(&w) {
                return Err(MapError::Quantization {
                    row: r,
                    col: g,
                    value: w,
                });
            }
            rows[r] |= (encode_weight(w as i8) as u128) << (g * WEIGHT_BITS);
        }
    }
    Ok(WImage(rows))
}

pub fn unpack_w_image(image: &WImage, fan_in: usize, n_out: usize) -> Vec<Vec<i32>> {
    image.0[..fan_in]
        .iter()
        .map(|row| {
            (0..n_out)
                .map(|g| {
                    let bits = ((row >> (g * WEIGHT_BITS)) & 0x3f) as u8;
                    crate::macro_core::layout::decode_weight(bits) as i32
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VMemPlan {
    pub contexts: Vec<VContext>,
    pub reserved: ReservedRows,
}

pub fn allocate_vmem(n_contexts: usize) -> Result<VMemPlan, MapError> {
    if n_contexts == 0 {
        return Err(MapError::Shape("at least one V context is required".into()));
    }
    if n_contexts > MAX_CONTEXTS {
        return Err(MapError::Capacity {
            requested: n_contexts,
            capacity: MAX_CONTEXTS,
            macros_needed: n_contexts.div_ceil(MAX_CONTEXTS),
        });
    }
    Ok(VMemPlan {
        contexts: (0..n_contexts)
            .map(|k| VContext {
                odd_row: RESERVED_V_ROWS + 2 * k,
                even_row: RESERVED_V_ROWS + 2 * k + 1,
            })
            .collect(),
        reserved: ReservedRows::default(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum AllocRole {
    Standalone,
    /// Receives partial sums from `donors` into `scratch` before updating.
    PartialOwner {
        donors: Vec<usize>,
        scratch: VContext,
    },
    /// Accumulates a slice of the fan-in; never runs a neuron update.
    PartialDonor {
        owner: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MacroAllocation {
    pub macro_id: usize,
    pub w_image: WImage,
    pub rows_used: usize,
    /// (input neuron or kernel row, w_row)
    pub input_map: Vec<(usize, usize)>,
    /// (output neuron or channel, weight group)
    pub output_map: Vec<(usize, usize)>,
    pub v_contexts: Vec<VContext>,
    pub reserved: ReservedRows,
    pub reserved_values: ReservedValues,
    pub role: AllocRole,
}

impl MacroAllocation {
    pub fn groups_used(&self) -> usize {
        self.output_map.len()
    }
}

/// Output positions held by the contexts of each time-multiplexed batch,
/// raster order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelSchedule {
    pub batches: Vec<Vec<(usize, usize)>>,
}

pub fn map_fc(layer: &LayerSpec, first_macro_id: usize) -> Result<Vec<MacroAllocation>, MapError> {
    let LayerShape::Fc { in_dim, out_dim } = layer.shape else {
        return Err(MapError::Shape("map_fc needs an FC layer".into()));
    };
    layer.validate()?;
    let chunks = in_dim.div_ceil(W_ROWS);
    let slices = out_dim.div_ceil(WEIGHTS_PER_ROW);
    let plan = allocate_vmem(if chunks > 1 { 2 } else { 1 })?;
    let mut out = Vec::with_capacity(chunks * slices);
    for s in 0..slices {
        let outputs = s * WEIGHTS_PER_ROW..((s + 1) * WEIGHTS_PER_ROW).min(out_dim);
        let owner_id = first_macro_id + out.len();
        for c in 0..chunks {
            let inputs = c * W_ROWS..((c + 1) * W_ROWS).min(in_dim);
            let weights: Vec<Vec<i32>> = inputs
                .clone()
                .map(|i| outputs.clone().map(|o| layer.fc_weight(i, o)).collect())
                .collect();
            let role = match (chunks, c) {
                (1, _) => AllocRole::Standalone,
                (_, 0) => AllocRole::PartialOwner {
                    donors: (1..chunks).map(|d| owner_id + d).collect(),
                    scratch: plan.contexts[1],
                },
                _ => AllocRole::PartialDonor { owner: owner_id },
            };
            out.push(MacroAllocation {
                macro_id: owner_id + c,
                w_image: pack_w_image(&weights)?,
                rows_used: inputs.len(),
                input_map: inputs.clone().map(|i| (i, i - inputs.start)).collect(),
                output_map: outputs.clone().map(|o| (o, o - outputs.start)).collect(),
                v_contexts: vec![plan.contexts[0]],
                reserved: plan.reserved,
                reserved_values: layer.neuron.reserved_values(outputs.len()),
                role,
            });
        }
    }
    Ok(out)
}

pub fn map_conv(
    layer: &LayerSpec,
    first_macro_id: usize,
) -> Result<(Vec<MacroAllocation>, PixelSchedule), MapError> {
    let LayerShape::Conv { out_channels, .. } = layer.shape else {
        return Err(MapError::Shape("map_conv needs a Conv layer".into()));
    };
    layer.validate()?;
    let fan_in = layer.shape.fan_in();
    if fan_in > W_ROWS {
        return Err(MapError::FanInTooLarge { fan_in });
    }
    let (oh, ow) = layer.shape.out_hw();
    let positions: Vec<(usize, usize)> =
        (0..oh).flat_map(|y| (0..ow).map(move |x| (y, x))).collect();
    let schedule = PixelSchedule {
        batches: positions.chunks(MAX_CONTEXTS).map(<[_]>::to_vec).collect(),
    };
    let plan = allocate_vmem(positions.len().min(MAX_CONTEXTS))?;
    let allocations = (0..out_channels.div_ceil(WEIGHTS_PER_ROW))
        .map(|m| {
            let outputs = m * WEIGHTS_PER_ROW..((m + 1) * WEIGHTS_PER_ROW).min(out_channels);
            let weights: Vec<Vec<i32>> = (0..fan_in)
                .map(|r| outputs.clone().map(|o| layer.row_weight(r, o)).collect())
                .collect();
            Ok(MacroAllocation {
                macro_id: first_macro_id + m,
                w_image: pack_w_image(&weights)?,
                rows_used: fan_in,
                input_map: (0..fan_in).map(|r| (r, r)).collect(),
                output_map: outputs.clone().map(|o| (o, o - outputs.start)).collect(),
                v_contexts: plan.contexts.clone(),
                reserved: plan.reserved,
                reserved_values: layer.neuron.reserved_values(outputs.len()),
                role: AllocRole::Standalone,
            })
        })
        .collect::<Result<Vec<_>, MapError>>()?;
    Ok((allocations, schedule))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerMapping {
    pub spec: LayerSpec,
    pub allocations: Vec<MacroAllocation>,
    pub schedule: Option<PixelSchedule>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkMapping {
    pub layers: Vec<LayerMapping>,
}

impl NetworkMapping {
    pub fn macro_count(&self) -> usize {
        self.layers.iter().map(|l| l.allocations.len()).sum()
    }

    pub fn input_width(&self) -> usize {
        self.layers.first().map_or(0, |l| l.spec.shape.in_width())
    }

    /// Human-readable summary of macros, row usage and context batches.
    pub fn report(&self) -> String {
        let mut out = String::new();
        for (i, layer) in self.layers.iter().enumerate() {
            let allocs = &layer.allocations;
            let n = allocs.len();
            let last_groups = allocs.last().map_or(0, |a| a.groups_used());
            match layer.spec.shape {
                LayerShape::Fc { in_dim, out_dim } => {
                    let _ = writeln!(
                        out,
                        "layer {}: fc {}->{}: {} macro{}, last uses {}/{} groups",
                        i + 1,
                        in_dim,
                        out_dim,
                        n,
                        if n == 1 { "" } else { "s" },
                        last_groups,
                        WEIGHTS_PER_ROW
                    );
                    let chunks = in_dim.div_ceil(W_ROWS);
                    if chunks > 1 {
                        let sizes: Vec<String> = (0..chunks)
                            .map(|c| (((c + 1) * W_ROWS).min(in_dim) - c * W_ROWS).to_string())
                            .collect();
                        let _ = writeln!(
                            out,
                            "  input-tiled: {} row chunks ({}), host merge of partial sums into owner macro",
                            chunks,
                            sizes.join(" + ")
                        );
                    }
                    let _ = writeln!(out, "  {}/{} rows used", allocs[0].rows_used, W_ROWS);
                }
                LayerShape::Conv {
                    in_channels,
                    kernel_h,
                    kernel_w,
                    out_channels,
                    ..
                } => {
                    let (oh, ow) = layer.spec.shape.out_hw();
                    let _ = writeln!(
                        out,
                        "layer {}: conv {}ch {}x{} -> {}ch ({}x{} outputs): {} macro{}, last uses {}/{} groups",
                        i + 1,
                        in_channels,
                        kernel_h,
                        kernel_w,
                        out_channels,
                        oh,
                        ow,
                        n,
                        if n == 1 { "" } else { "s" },
                        last_groups,
                        WEIGHTS_PER_ROW
                    );
                    let _ = writeln!(out, "  {}/{} rows used", allocs[0].rows_used, W_ROWS);
                    if let Some(schedule) = &layer.schedule {
                        let sizes: Vec<String> = schedule
                            .batches
                            .iter()
                            .map(|b| b.len().to_string())
                            .collect();
                        let _ = writeln!(
                            out,
                            "  v contexts: {} positions in {} batch{} ({})",
                            oh * ow,
                            schedule.batches.len(),
                            if schedule.batches.len() == 1 {
                                ""
                            } else {
                                "es"
                            },
                            sizes.join(" + ")
                        );
                    }
                }
            }
        }
        let _ = writeln!(out, "total: {} macros", self.macro_count());
        out
    }
}

/// Maps every layer in order, numbering macros consecutively.
pub fn map_network(layers: &[LayerSpec]) -> Result<NetworkMapping, MapError> {
    let mut next_id = 0;
    let mut mapped = Vec::with_capacity(layers.len());
    for (i, spec) in layers.iter().enumerate() {
        if i > 0 {
            let expected = layers[i - 1].shape.out_width();
            let got = spec.shape.in_width();
            if expected != got {
                return Err(MapError::Chain {
                    layer: i + 1,
                    expected,
                    got,
                });
            }
        }
        let (allocations, schedule) = match spec.shape {
            LayerShape::Fc { .. } => (map_fc(spec, next_id)?, None),
            LayerShape::Conv { .. } => {
                let (a, s) = map_conv(spec, next_id)?;
                (a, Some(s))
            }
        };
        next_id += allocations.len();
        mapped.push(LayerMapping {
            spec: spec.clone(),
            allocations,
            schedule,
        });
    }
    Ok(NetworkMapping { layers: mapped })
}
