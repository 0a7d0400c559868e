//! Model file parsing and validation.

use impulse_core::energy::EnergyOverride;
use impulse_core::isa::{NeuronKind, NeuronModel};
use impulse_core::macro_core::{MacroConfig, W_MAX, W_MIN};
use impulse_core::mapper::{LayerShape, LayerSpec};
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub layers: Vec<LayerFile>,
    pub timesteps: usize,
    #[serde(default)]
    pub strict_mode: bool,
    #[serde(default)]
    pub saturate: bool,
    #[serde(default)]
    pub energy_table: Option<EnergyOverride>,
}

pub struct NeuronFields {
    pub neuron: NeuronKind,
    pub threshold: i64,
    pub leak: i64,
    pub v_reset: i64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum LayerFile {
    Fc {
        in_dim: usize,
        out_dim: usize,
        neuron: NeuronKind,
        threshold: i64,
        #[serde(default)]
        leak: i64,
        #[serde(default)]
        v_reset: i64,
        /// `[in_dim][out_dim]`
        weights: Vec<Vec<i64>>,
    },
    Conv {
        in_channels: usize,
        in_h: usize,
        in_w: usize,
        kernel_h: usize,
        kernel_w: usize,
        out_channels: usize,
        #[serde(default = "one")]
        stride: usize,
        #[serde(default)]
        padding: usize,
        neuron: NeuronKind,
        threshold: i64,
        #[serde(default)]
        leak: i64,
        #[serde(default)]
        v_reset: i64,
        /// `[out_channels][in_channels][kernel_h][kernel_w]`
        weights: Vec<Vec<Vec<Vec<i64>>>>,
    },
}

fn one() -> usize {
    1
}

#[derive(Debug)]
pub struct Model {
    pub layers: Vec<LayerSpec>,
    pub timesteps: usize,
    pub config: MacroConfig,
    pub energy_table: Option<EnergyOverride>,
}

fn schema(msg: String) -> CliError {
    CliError::Schema(msg)
}

fn weight(v: i64, path: &str) -> Result<i32, CliError> {
    if (i64::from(W_MIN)..=i64::from(W_MAX)).contains(&v) {
        Ok(v as i32)
    } else {
        Err(schema(format!(
            "{path}: weight {v} outside [{W_MIN}, {W_MAX}]"
        )))
    }
}

fn expect_len(len: usize, want: usize, path: &str, what: &str) -> Result<(), CliError> {
    if len == want {
        Ok(())
    } else {
        Err(schema(format!(
            "{path}: expected {want} {what}, found {len}"
        )))
    }
}

fn neuron_model(n: &NeuronFields, path: &str) -> Result<NeuronModel, CliError> {
    let field = |v: i64, name: &str, lo: i64, hi: i64| {
        if (lo..=hi).contains(&v) {
            Ok(v as i16)
        } else {
            Err(schema(format!("{path}.{name}: {v} outside [{lo}, {hi}]")))
        }
    };
    let threshold = field(n.threshold, "threshold", 1, 1023)?;
    let leak = field(n.leak, "leak", 0, 1023)?;
    let v_reset = field(n.v_reset, "v_reset", -1024, 1023)?;
    if leak != 0 && n.neuron != NeuronKind::Lif {
        return Err(schema(format!("{path}.leak: only LIF neurons take a leak")));
    }
    let model = NeuronModel::new(n.neuron, threshold)
        .with_leak(leak)
        .with_reset(v_reset);
    model
        .validate()
        .map_err(|e| schema(format!("{path}: {e}")))?;
    Ok(model)
}

impl LayerFile {
    fn neuron_fields(&self) -> NeuronFields {
        let (LayerFile::Fc {
            neuron,
            threshold,
            leak,
            v_reset,
            ..
        }
        | LayerFile::Conv {
            neuron,
            threshold,
            leak,
            v_reset,
            ..
        }) = self;
        NeuronFields {
            neuron: *neuron,
            threshold: *threshold,
            leak: *leak,
            v_reset: *v_reset,
        }
    }

    fn to_spec(&self, path: &str) -> Result<LayerSpec, CliError> {
        let model = neuron_model(&self.neuron_fields(), path)?;
        match self {
            LayerFile::Fc {
                in_dim,
                out_dim,
                weights,
                ..
            } => {
                if *in_dim == 0 || *out_dim == 0 {
                    return Err(schema(format!(
                        "{path}: in_dim and out_dim must be positive"
                    )));
                }
                expect_len(
                    weights.len(),
                    *in_dim,
                    &format!("{path}.weights"),
                    "rows (in_dim)",
                )?;
                let mut rows = Vec::with_capacity(*in_dim);
                for (i, row) in weights.iter().enumerate() {
                    let p = format!("{path}.weights[{i}]");
                    expect_len(row.len(), *out_dim, &p, "entries (out_dim)")?;
                    rows.push(
                        row.iter()
                            .enumerate()
                            .map(|(o, &v)| weight(v, &format!("{p}[{o}]")))
                            .collect::<Result<Vec<_>, _>>()?,
                    );
                }
                LayerSpec::fc(model, &rows).map_err(|e| schema(format!("{path}: {e}")))
            }
            LayerFile::Conv {
                in_channels,
                in_h,
                in_w,
                kernel_h,
                kernel_w,
                out_channels,
                stride,
                padding,
                weights,
                ..
            } => {
                let shape = LayerShape::Conv {
                    in_channels: *in_channels,
                    in_h: *in_h,
                    in_w: *in_w,
                    kernel_h: *kernel_h,
                    kernel_w: *kernel_w,
                    out_channels: *out_channels,
                    stride: *stride,
                    padding: *padding,
                };
                let mut flat = Vec::with_capacity(shape.weight_count());
                let p0 = format!("{path}.weights");
                expect_len(weights.len(), *out_channels, &p0, "output channels")?;
                for (o, per_out) in weights.iter().enumerate() {
                    let p1 = format!("{p0}[{o}]");
                    expect_len(per_out.len(), *in_channels, &p1, "input channels")?;
                    for (c, kernel) in per_out.iter().enumerate() {
                        let p2 = format!("{p1}[{c}]");
                        expect_len(kernel.len(), *kernel_h, &p2, "kernel rows")?;
                        for (kh, krow) in kernel.iter().enumerate() {
                            let p3 = format!("{p2}[{kh}]");
                            expect_len(krow.len(), *kernel_w, &p3, "kernel columns")?;
                            for (kw, &v) in krow.iter().enumerate() {
                                flat.push(weight(v, &format!("{p3}[{kw}]"))?);
                            }
                        }
                    }
                }
                LayerSpec::conv(shape, model, flat).map_err(|e| schema(format!("{path}: {e}")))
            }
        }
    }
}

impl ModelFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| schema(format!("model file: {e}")))
    }

    pub fn validate(&self) -> Result<Model, CliError> {
        if self.layers.is_empty() {
            return Err(schema("layers: at least one layer required".into()));
        }
        if self.timesteps == 0 {
            return Err(schema("timesteps: must be at least 1".into()));
        }
        let mut layers = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let path = format!("layers[{i}]");
            let spec = layer.to_spec(&path)?;
            if let Some(prev) = layers.last().map(|p: &LayerSpec| p.shape.out_width()) {
                let width = spec.shape.in_width();
                if width != prev {
                    return Err(schema(format!(
                        "{path}: takes {width} inputs but layers[{}] emits {prev}",
                        i - 1
                    )));
                }
            }
            layers.push(spec);
        }
        Ok(Model {
            layers,
            timesteps: self.timesteps,
            config: MacroConfig {
                strict: self.strict_mode,
                saturate: self.saturate,
            },
            energy_table: self.energy_table.clone(),
        })
    }
}

pub fn load(text: &str) -> Result<Model, CliError> {
    ModelFile::parse(text)?.validate()
}
