//! Small feed-forward denoising networks and the `SCW1` weight container.
//!
//! A network maps a `B × n_x × n_y` activation back to the same shape through
//! a sequence of layers:
//!
//! * `conv2d`: cross-correlation with "same" zero padding (odd kernels) and an
//!   optional stride; output spatial size is `ceil(h / stride)`.
//! * `affine`: dense map over the flattened activation, reshaped to the
//!   declared `(c, h, w)`.
//! * `relu`.
//! * `skip_add`: adds the output of an earlier layer (`0` = network input,
//!   `j` = output of layer `j`, 1-based).
//!
//! `SCW1` byte layout, little-endian:
//!
//! ```text
//! magic        "SCW1"
//! layer_count  u32
//! per layer:
//!   kind       u8   0 conv2d | 1 affine | 2 relu | 3 skip_add
//!   name_len   u16, then name_len UTF-8 bytes
//!   conv2d:    in_ch u32, out_ch u32, kernel u32, stride u32,
//!              weight f32[out_ch·in_ch·kernel·kernel] (out, in, ky, kx), bias f32[out_ch]
//!   affine:    in_dim u32, out_c u32, out_h u32, out_w u32,
//!              weight f32[out_dim·in_dim] row-major, bias f32[out_dim]
//!   relu:      nothing
//!   skip_add:  source u32
//! stage        u8
//! ```
//!
//! Weights are kept as `f32` so files round-trip bit-exactly; arithmetic is
//! done in `f64`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Result, SciError};
use crate::tensor::sct::Cursor;
use crate::tensor::DataCube;

pub const MAGIC: [u8; 4] = *b"SCW1";

#[derive(Debug, Clone, PartialEq)]
pub enum LayerKind {
    Conv2d { in_ch: usize, out_ch: usize, kernel: usize, stride: usize, weight: Vec<f32>, bias: Vec<f32> },
    Affine { in_dim: usize, out_shape: (usize, usize, usize), weight: Vec<f32>, bias: Vec<f32> },
    Relu,
    SkipAdd { source: usize },
}

impl LayerKind {
    pub fn tag(&self) -> u8 {
        match self {
            LayerKind::Conv2d { .. } => 0,
            LayerKind::Affine { .. } => 1,
            LayerKind::Relu => 2,
            LayerKind::SkipAdd { .. } => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub name: String,
    pub kind: LayerKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkWeights {
    pub layers: Vec<Layer>,
    /// Unfolding stage this network was trained for.
    pub stage: u8,
}

type Shape = (usize, usize, usize);

impl NetworkWeights {
    pub fn new(layers: Vec<Layer>, stage: u8) -> Self {
        Self { layers, stage }
    }

    /// Walks the shape chain for an input of shape `(c, h, w)`; the output
    /// must come back to the input shape.
    pub fn validate(&self, input: Shape) -> Result<()> {
        let shapes = self.shape_chain(input)?;
        let out = *shapes.last().expect("chain includes input");
        if out != input {
            return Err(SciError::WeightShapeMismatch(format!("network maps {input:?} to {out:?}")));
        }
        Ok(())
    }

    // shapes[0] is the input, shapes[j] the output of layer j
    fn shape_chain(&self, input: Shape) -> Result<Vec<Shape>> {
        let mut shapes = vec![input];
        for (idx, layer) in self.layers.iter().enumerate() {
            let cur = *shapes.last().expect("non-empty");
            let next = match &layer.kind {
                LayerKind::Conv2d { in_ch, out_ch, kernel, stride, weight, bias } => {
                    if *in_ch != cur.0 {
                        return Err(mismatch(idx, &layer.name, format!("expects {in_ch} channels, gets {}", cur.0)));
                    }
                    if *kernel == 0 || kernel % 2 == 0 || *stride == 0 {
                        return Err(mismatch(idx, &layer.name, format!("kernel {kernel} / stride {stride} unsupported")));
                    }
                    if weight.len() != out_ch * in_ch * kernel * kernel || bias.len() != *out_ch {
                        return Err(mismatch(idx, &layer.name, "payload length".into()));
                    }
                    (*out_ch, cur.1.div_ceil(*stride), cur.2.div_ceil(*stride))
                }
                LayerKind::Affine { in_dim, out_shape, weight, bias } => {
                    let flat = cur.0 * cur.1 * cur.2;
                    if *in_dim != flat {
                        return Err(mismatch(idx, &layer.name, format!("expects {in_dim} inputs, gets {flat}")));
                    }
                    let out_dim = out_shape.0 * out_shape.1 * out_shape.2;
                    if weight.len() != out_dim * in_dim || bias.len() != out_dim {
                        return Err(mismatch(idx, &layer.name, "payload length".into()));
                    }
                    *out_shape
                }
                LayerKind::Relu => cur,
                LayerKind::SkipAdd { source } => {
                    let src = shapes
                        .get(*source)
                        .filter(|_| *source <= idx)
                        .ok_or_else(|| mismatch(idx, &layer.name, format!("skip source {source} not yet computed")))?;
                    if *src != cur {
                        return Err(mismatch(idx, &layer.name, format!("skip adds {src:?} to {cur:?}")));
                    }
                    cur
                }
            };
            shapes.push(next);
        }
        Ok(shapes)
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(&MAGIC);
        put_u32(&mut out, self.layers.len())?;
        for layer in &self.layers {
            out.push(layer.kind.tag());
            let name = layer.name.as_bytes();
            let len = u16::try_from(name.len())
                .map_err(|_| SciError::WeightShapeMismatch(format!("layer name {} too long", layer.name)))?;
            out.extend_from_slice(&len.to_le_bytes());
            out.extend_from_slice(name);
            match &layer.kind {
                LayerKind::Conv2d { in_ch, out_ch, kernel, stride, weight, bias } => {
                    for v in [*in_ch, *out_ch, *kernel, *stride] {
                        put_u32(&mut out, v)?;
                    }
                    if weight.len() != out_ch * in_ch * kernel * kernel || bias.len() != *out_ch {
                        return Err(SciError::WeightShapeMismatch(format!("conv layer {} payload length", layer.name)));
                    }
                    put_f32s(&mut out, weight);
                    put_f32s(&mut out, bias);
                }
                LayerKind::Affine { in_dim, out_shape, weight, bias } => {
                    for v in [*in_dim, out_shape.0, out_shape.1, out_shape.2] {
                        put_u32(&mut out, v)?;
                    }
                    let out_dim = out_shape.0 * out_shape.1 * out_shape.2;
                    if weight.len() != out_dim * in_dim || bias.len() != out_dim {
                        return Err(SciError::WeightShapeMismatch(format!("affine layer {} payload length", layer.name)));
                    }
                    put_f32s(&mut out, weight);
                    put_f32s(&mut out, bias);
                }
                LayerKind::Relu => {}
                LayerKind::SkipAdd { source } => put_u32(&mut out, *source)?,
            }
        }
        out.push(self.stage);
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        let magic = cur.array::<4>()?;
        if magic != MAGIC {
            return Err(SciError::BadMagic { expected: MAGIC, found: magic });
        }
        let count = get_u32(&mut cur)?;
        let mut layers = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let tag = cur.array::<1>()?[0];
            let name_len = u16::from_le_bytes(cur.array()?) as usize;
            let name = String::from_utf8(cur.take(name_len)?.to_vec())
                .map_err(|_| SciError::WeightShapeMismatch("layer name is not UTF-8".into()))?;
            let kind = match tag {
                0 => {
                    let (in_ch, out_ch, kernel, stride) =
                        (get_u32(&mut cur)?, get_u32(&mut cur)?, get_u32(&mut cur)?, get_u32(&mut cur)?);
                    let weight = get_f32s(&mut cur, checked_product(&[out_ch, in_ch, kernel, kernel])?)?;
                    let bias = get_f32s(&mut cur, out_ch)?;
                    LayerKind::Conv2d { in_ch, out_ch, kernel, stride, weight, bias }
                }
                1 => {
                    let in_dim = get_u32(&mut cur)?;
                    let out_shape = (get_u32(&mut cur)?, get_u32(&mut cur)?, get_u32(&mut cur)?);
                    let out_dim = checked_product(&[out_shape.0, out_shape.1, out_shape.2])?;
                    let weight = get_f32s(&mut cur, checked_product(&[out_dim, in_dim])?)?;
                    let bias = get_f32s(&mut cur, out_dim)?;
                    LayerKind::Affine { in_dim, out_shape, weight, bias }
                }
                2 => LayerKind::Relu,
                3 => LayerKind::SkipAdd { source: get_u32(&mut cur)? },
                other => return Err(SciError::UnknownLayerKind(other)),
            };
            layers.push(Layer { name, kind });
        }
        let stage = cur.array::<1>()?[0];
        if cur.remaining() != 0 {
            return Err(SciError::WeightShapeMismatch(format!("{} trailing bytes after stage index", cur.remaining())));
        }
        Ok(Self { layers, stage })
    }
}

fn mismatch(idx: usize, name: &str, what: String) -> SciError {
    SciError::WeightShapeMismatch(format!("layer {} ({name}): {what}", idx + 1))
}

fn checked_product(xs: &[usize]) -> Result<usize> {
    xs.iter()
        .try_fold(1usize, |a, &b| a.checked_mul(b))
        .ok_or_else(|| SciError::WeightShapeMismatch("layer size overflows".into()))
}

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| SciError::WeightShapeMismatch(format!("{v} does not fit in u32")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

fn put_f32s(out: &mut Vec<u8>, vals: &[f32]) {
    for v in vals {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn get_u32(cur: &mut Cursor<'_>) -> Result<usize> {
    Ok(u32::from_le_bytes(cur.array()?) as usize)
}

fn get_f32s(cur: &mut Cursor<'_>, n: usize) -> Result<Vec<f32>> {
    let needed = n.checked_mul(4).ok_or_else(|| SciError::WeightShapeMismatch("payload overflows".into()))?;
    if cur.remaining() < needed {
        return Err(SciError::TruncatedPayload { needed: cur.pos + needed, found: cur.bytes.len() });
    }
    (0..n).map(|_| cur.array().map(f32::from_le_bytes)).collect()
}

#[derive(Clone)]
struct Activation {
    shape: Shape,
    data: Vec<f64>,
}

fn conv2d(
    input: &Activation,
    out_ch: usize,
    kernel: usize,
    stride: usize,
    weight: &[f32],
    bias: &[f32],
) -> Activation {
    let (in_ch, h, w) = input.shape;
    let (oh, ow) = (h.div_ceil(stride), w.div_ceil(stride));
    let pad = (kernel / 2) as isize;
    let mut data = vec![0.0; out_ch * oh * ow];
    for o in 0..out_ch {
        for r in 0..oh {
            for c in 0..ow {
                let mut acc = bias[o] as f64;
                for ci in 0..in_ch {
                    for ky in 0..kernel {
                        let ir = (r * stride) as isize + ky as isize - pad;
                        if ir < 0 || ir >= h as isize {
                            continue;
                        }
                        for kx in 0..kernel {
                            let ic = (c * stride) as isize + kx as isize - pad;
                            if ic < 0 || ic >= w as isize {
                                continue;
                            }
                            let wv = weight[((o * in_ch + ci) * kernel + ky) * kernel + kx] as f64;
                            acc += wv * input.data[(ci * h + ir as usize) * w + ic as usize];
                        }
                    }
                }
                data[(o * oh + r) * ow + c] = acc;
            }
        }
    }
    Activation { shape: (out_ch, oh, ow), data }
}

/// Deterministic forward pass over the whole cube (channels = bands).
pub fn run_network(w: &NetworkWeights, x: &DataCube) -> Result<DataCube> {
    let input = (x.bands(), x.nx(), x.ny());
    w.validate(input)?;
    let mut outputs: Vec<Activation> = vec![Activation { shape: input, data: x.as_slice().to_vec() }];
    for layer in &w.layers {
        let cur = outputs.last().expect("non-empty");
        let next = match &layer.kind {
            LayerKind::Conv2d { out_ch, kernel, stride, weight, bias, .. } => {
                conv2d(cur, *out_ch, *kernel, *stride, weight, bias)
            }
            LayerKind::Affine { in_dim, out_shape, weight, bias } => {
                let out_dim = out_shape.0 * out_shape.1 * out_shape.2;
                let data = (0..out_dim)
                    .map(|o| {
                        let row = &weight[o * in_dim..(o + 1) * in_dim];
                        bias[o] as f64 + row.iter().zip(&cur.data).map(|(a, b)| *a as f64 * b).sum::<f64>()
                    })
                    .collect();
                Activation { shape: *out_shape, data }
            }
            LayerKind::Relu => Activation { shape: cur.shape, data: cur.data.iter().map(|v| v.max(0.0)).collect() },
            LayerKind::SkipAdd { source } => {
                let src = &outputs[*source];
                Activation { shape: cur.shape, data: cur.data.iter().zip(&src.data).map(|(a, b)| a + b).collect() }
            }
        };
        outputs.push(next);
    }
    let out = outputs.pop().expect("non-empty");
    DataCube::from_vec(x.nx(), x.ny(), x.bands(), out.data)
}
