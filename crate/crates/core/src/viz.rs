//! Per-filter activation heatmaps.
//!
//! An eval-mode forward pass runs the probe patch through the graph, one
//! channel of the chosen convolutional layer is min-max normalized to
//! [0, 1] (constant maps become all zeros), and the map is bilinearly
//! upsampled to the probe dimensions. Overlays blend a fixed 256-entry
//! blue-to-red colormap over the probe: entry `i` is
//! `(r, g, b) = (i, 0, 255 - i)`.

use thiserror::Error;

use crate::imgio::{quantize_u8, resize, FloatImage, GrayPatch, Patch, ResizeMethod};
use crate::nn::{forward_with_contexts, LayerKind, Mode, ModelGraph, NnError, NodeShape, Tensor};

#[derive(Debug, Error)]
pub enum VizError {
    #[error("unknown layer '{0}'")]
    UnknownLayer(String),
    #[error("layer '{0}' is not convolutional")]
    NotConvolutional(String),
    #[error("filter index {index} out of range, layer '{layer}' has {channels} filters")]
    FilterOutOfRange {
        layer: String,
        index: usize,
        channels: usize,
    },
    #[error("heatmap {0}x{1} does not match probe {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("alpha {0} outside [0, 1]")]
    BadAlpha(f64),
    #[error("probe image {got}x{got_h} does not match graph input {want}x{want_h}")]
    ProbeShape {
        got: usize,
        got_h: usize,
        want: usize,
        want_h: usize,
    },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Img(#[from] crate::imgio::ImgError),
}

/// Normalized activation map of one filter, upsampled to probe size.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub width: usize,
    pub height: usize,
    /// Values in [0, 1].
    pub values: Vec<f32>,
    pub layer: String,
    pub filter_index: usize,
}

impl Heatmap {
    /// Quantize to 8-bit gray (for PGM output).
    pub fn to_gray(&self) -> GrayPatch {
        let data = self.values.iter().map(|&v| quantize_u8(v)).collect();
        GrayPatch::new(self.width, self.height, data).expect("heatmap dims valid")
    }
}

/// The fixed blue-to-red colormap used by overlays.
pub fn colormap_entry(index: u8) -> [u8; 3] {
    [index, 0, 255 - index]
}

/// Extract the activation heatmap of `(layer, filter_index)` for a probe
/// patch.
pub fn activation_heatmap(
    graph: &ModelGraph<f32>,
    probe: &Patch,
    layer: &str,
    filter_index: usize,
) -> Result<Heatmap, VizError> {
    let node = graph
        .node(layer)
        .ok_or_else(|| VizError::UnknownLayer(layer.to_string()))?;
    let out_channels = match node.kind {
        LayerKind::Conv2d { out_channels, .. } => out_channels,
        _ => return Err(VizError::NotConvolutional(layer.to_string())),
    };
    if filter_index >= out_channels {
        return Err(VizError::FilterOutOfRange {
            layer: layer.to_string(),
            index: filter_index,
            channels: out_channels,
        });
    }
    let [_, gh, gw] = graph.input_shape();
    if probe.width() != gw || probe.height() != gh {
        return Err(VizError::ProbeShape {
            got: probe.width(),
            got_h: probe.height(),
            want: gw,
            want_h: gh,
        });
    }

    let float = probe.to_float();
    let (w, h) = (float.width(), float.height());
    let mut chw = vec![0.0f32; 3 * h * w];
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                chw[c * h * w + y * w + x] = float.get(x, y, c);
            }
        }
    }
    let batch = Tensor::new(vec![1, 3, h, w], chw)?;
    let (_, ctxs) = forward_with_contexts(graph, &batch, Mode::Eval, 0)?;
    let activation = ctxs[0]
        .activation(graph, layer)
        .expect("layer exists, checked above");
    let (ah, aw) = match graph.out_shape(layer) {
        Some(NodeShape::Map { h, w, .. }) => (h, w),
        _ => return Err(VizError::NotConvolutional(layer.to_string())),
    };
    let map = &activation[filter_index * ah * aw..(filter_index + 1) * ah * aw];

    // min-max normalize; a constant map carries no spatial signal
    let lo = map.iter().cloned().fold(f32::INFINITY, f32::min);
    let hi = map.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
    let normalized: Vec<f32> = if hi > lo {
        map.iter().map(|&v| (v - lo) / (hi - lo)).collect()
    } else {
        vec![0.0; map.len()]
    };

    let small = FloatImage::new(aw, ah, 1, normalized)?;
    let resized = resize(&small, probe.width(), probe.height(), ResizeMethod::Bilinear)?;
    Ok(Heatmap {
        width: probe.width(),
        height: probe.height(),
        values: resized.data().to_vec(),
        layer: layer.to_string(),
        filter_index,
    })
}

/// Blend the colormapped heatmap over the probe:
/// `alpha * colormap(value) + (1 - alpha) * probe`, rounded per channel.
pub fn overlay(heatmap: &Heatmap, probe: &Patch, alpha: f64) -> Result<Patch, VizError> {
    if heatmap.width != probe.width() || heatmap.height != probe.height() {
        return Err(VizError::DimensionMismatch(
            heatmap.width,
            heatmap.height,
            probe.width(),
            probe.height(),
        ));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(VizError::BadAlpha(alpha));
    }
    let mut out = probe.clone();
    for y in 0..probe.height() {
        for x in 0..probe.width() {
            let v = heatmap.values[y * heatmap.width + x];
            let cm = colormap_entry(quantize_u8(v));
            let base = probe.get(x, y);
            let mut blended = [0u8; 3];
            for c in 0..3 {
                let value = alpha * f64::from(cm[c]) + (1.0 - alpha) * f64::from(base[c]);
                blended[c] = (value + 0.5).floor().clamp(0.0, 255.0) as u8;
            }
            out.set(x, y, blended);
        }
    }
    Ok(out)
}

pub const DEFAULT_OVERLAY_ALPHA: f64 = 0.4;
