//! Raster types, binary PPM/PGM codecs, and resampling primitives.
//!
//! On-disk formats are binary P6 (RGB) and P5 (gray) with maxval 255. The
//! writer always emits the canonical form `P6\n<w> <h>\n255\n` followed by
//! raw samples; the reader additionally tolerates `#` comments and runs of
//! whitespace in the header. Round trips through the canonical form are
//! byte-exact.
//!
//! Coordinate convention: pixel (row `i`, column `j`) sits at real
//! coordinates `(x, y) = (j, i)`, so the image center is
//! `((w-1)/2, (h-1)/2)`. This makes 90-degree rotations exact index
//! permutations.

use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImgError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {reason} at byte offset {offset}")]
    Format {
        path: PathBuf,
        offset: usize,
        reason: String,
    },
    #[error("invalid raster: {0}")]
    BadRaster(String),
    #[error("sample coordinate ({x}, {y}) outside sampleable region [0, {max_x}] x [0, {max_y}]")]
    SampleOutOfRange { x: f64, y: f64, max_x: f64, max_y: f64 },
    #[error("resize target dimension must be >= 1, got {out_w} x {out_h}")]
    ZeroTarget { out_w: usize, out_h: usize },
}

/// Interpolation used by [`resize`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResizeMethod {
    /// Bilinear interpolation of the four nearest source pixels.
    Bilinear,
    /// Box average over the covered source region (anti-aliasing downscale).
    Area,
}

/// 8-bit RGB raster, samples in (row, column, channel) order.
#[derive(Clone, PartialEq, Eq)]
pub struct Patch {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl fmt::Debug for Patch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Patch({}x{}x3)", self.width, self.height)
    }
}

pub const PATCH_CHANNELS: usize = 3;

impl Patch {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, ImgError> {
        if width == 0 || height == 0 {
            return Err(ImgError::BadRaster(format!(
                "dimensions must be >= 1, got {width}x{height}"
            )));
        }
        let expect = width * height * PATCH_CHANNELS;
        if data.len() != expect {
            return Err(ImgError::BadRaster(format!(
                "data length {} != {width} x {height} x {PATCH_CHANNELS} = {expect}",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    /// Constant-colored patch.
    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self, ImgError> {
        let mut data = Vec::with_capacity(width * height * PATCH_CHANNELS);
        for _ in 0..width * height {
            data.extend_from_slice(&rgb);
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        let base = (y * self.width + x) * PATCH_CHANNELS;
        [self.data[base], self.data[base + 1], self.data[base + 2]]
    }

    pub fn set(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let base = (y * self.width + x) * PATCH_CHANNELS;
        self.data[base..base + 3].copy_from_slice(&rgb);
    }

    /// Convert to floats via v/255.
    pub fn to_float(&self) -> FloatImage {
        let data = self.data.iter().map(|&v| f32::from(v) / 255.0).collect();
        FloatImage {
            width: self.width,
            height: self.height,
            channels: PATCH_CHANNELS,
            data,
        }
    }
}

/// 8-bit single-channel raster (PGM side of the codec).
#[derive(Clone, PartialEq, Eq)]
pub struct GrayPatch {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl fmt::Debug for GrayPatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GrayPatch({}x{})", self.width, self.height)
    }
}

impl GrayPatch {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, ImgError> {
        if width == 0 || height == 0 {
            return Err(ImgError::BadRaster(format!(
                "dimensions must be >= 1, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(ImgError::BadRaster(format!(
                "data length {} != {width} x {height}",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }
}

/// Per-pixel geometric validity, dimensions matching the raster it annotates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self, ImgError> {
        if data.len() != width * height {
            return Err(ImgError::BadRaster(format!(
                "mask length {} != {width} x {height}",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.data[y * self.width + x] = value;
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn count_true(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    pub fn fraction_true(&self) -> f64 {
        self.count_true() as f64 / self.data.len() as f64
    }

    pub fn all_true(&self) -> bool {
        self.data.iter().all(|&v| v)
    }
}

/// Real-valued raster, nominal range [0, 1], (row, column, channel) order.
#[derive(Clone, Debug, PartialEq)]
pub struct FloatImage {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

/// Round half up, then clamp to [0, 255].
pub fn quantize_u8(v: f32) -> u8 {
    let f = v * 255.0;
    (f64::from(f) + 0.5).floor().clamp(0.0, 255.0) as u8
}

impl FloatImage {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self, ImgError> {
        if width == 0 || height == 0 || channels == 0 {
            return Err(ImgError::BadRaster(format!(
                "dimensions must be >= 1, got {width}x{height}x{channels}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(ImgError::BadRaster(format!(
                "data length {} != {width} x {height} x {channels}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize, channels: usize) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![0.0; width * height * channels],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f32) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    /// Quantize back to 8-bit RGB (round half up, clamp).
    pub fn to_patch(&self) -> Result<Patch, ImgError> {
        if self.channels != PATCH_CHANNELS {
            return Err(ImgError::BadRaster(format!(
                "expected {PATCH_CHANNELS} channels, got {}",
                self.channels
            )));
        }
        let data = self.data.iter().map(|&v| quantize_u8(v)).collect();
        Patch::new(self.width, self.height, data)
    }

    /// Bilinear sample with coordinates clamped into the pixel-center hull.
    ///
    /// The result is additionally clamped into the range of the four
    /// neighbors, which keeps interpolation of a constant image exact.
    #[inline]
    pub fn sample_clamped(&self, x: f64, y: f64, c: usize) -> f32 {
        let x = x.clamp(0.0, (self.width - 1) as f64);
        let y = y.clamp(0.0, (self.height - 1) as f64);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let v00 = f64::from(self.get(x0, y0, c));
        let v10 = f64::from(self.get(x1, y0, c));
        let v01 = f64::from(self.get(x0, y1, c));
        let v11 = f64::from(self.get(x1, y1, c));
        let top = v00 * (1.0 - fx) + v10 * fx;
        let bot = v01 * (1.0 - fx) + v11 * fx;
        let v = top * (1.0 - fy) + bot * fy;
        let lo = v00.min(v10).min(v01).min(v11);
        let hi = v00.max(v10).max(v01).max(v11);
        v.clamp(lo, hi) as f32
    }
}

/// Bilinear sample at real coordinates inside `[0, w-1] x [0, h-1]`.
///
/// Returns one value per channel; integer coordinates reproduce the pixel
/// exactly, and every result lies within the range of the four neighbors.
pub fn bilinear_sample(img: &FloatImage, x: f64, y: f64) -> Result<Vec<f32>, ImgError> {
    let max_x = (img.width - 1) as f64;
    let max_y = (img.height - 1) as f64;
    if !(0.0..=max_x).contains(&x) || !(0.0..=max_y).contains(&y) {
        return Err(ImgError::SampleOutOfRange { x, y, max_x, max_y });
    }
    Ok((0..img.channels).map(|c| img.sample_clamped(x, y, c)).collect())
}

/// Resample to `out_w x out_h`.
///
/// Identity dimensions return an exact copy. Constant inputs stay constant
/// and no output value escapes the range of its contributing source pixels.
pub fn resize(
    img: &FloatImage,
    out_w: usize,
    out_h: usize,
    method: ResizeMethod,
) -> Result<FloatImage, ImgError> {
    if out_w == 0 || out_h == 0 {
        return Err(ImgError::ZeroTarget { out_w, out_h });
    }
    if out_w == img.width && out_h == img.height {
        return Ok(img.clone());
    }
    let mut out = FloatImage::zeros(out_w, out_h, img.channels);
    match method {
        ResizeMethod::Bilinear => {
            let sx = img.width as f64 / out_w as f64;
            let sy = img.height as f64 / out_h as f64;
            for oy in 0..out_h {
                let src_y = ((oy as f64 + 0.5) * sy - 0.5).clamp(0.0, (img.height - 1) as f64);
                for ox in 0..out_w {
                    let src_x = ((ox as f64 + 0.5) * sx - 0.5).clamp(0.0, (img.width - 1) as f64);
                    for c in 0..img.channels {
                        out.set(ox, oy, c, img.sample_clamped(src_x, src_y, c));
                    }
                }
            }
        }
        ResizeMethod::Area => {
            let sx = img.width as f64 / out_w as f64;
            let sy = img.height as f64 / out_h as f64;
            for oy in 0..out_h {
                let y0 = oy as f64 * sy;
                let y1 = (oy + 1) as f64 * sy;
                let iy0 = y0.floor() as usize;
                let iy1 = (y1.ceil() as usize).min(img.height);
                for ox in 0..out_w {
                    let x0 = ox as f64 * sx;
                    let x1 = (ox + 1) as f64 * sx;
                    let ix0 = x0.floor() as usize;
                    let ix1 = (x1.ceil() as usize).min(img.width);
                    for c in 0..img.channels {
                        let mut acc = 0.0f64;
                        let mut wsum = 0.0f64;
                        let mut lo = f64::INFINITY;
                        let mut hi = f64::NEG_INFINITY;
                        for iy in iy0..iy1 {
                            let wy = overlap(iy as f64, iy as f64 + 1.0, y0, y1);
                            if wy <= 0.0 {
                                continue;
                            }
                            for ix in ix0..ix1 {
                                let wx = overlap(ix as f64, ix as f64 + 1.0, x0, x1);
                                if wx <= 0.0 {
                                    continue;
                                }
                                let v = f64::from(img.get(ix, iy, c));
                                acc += v * wx * wy;
                                wsum += wx * wy;
                                lo = lo.min(v);
                                hi = hi.max(v);
                            }
                        }
                        let v = (acc / wsum).clamp(lo, hi);
                        out.set(ox, oy, c, v as f32);
                    }
                }
            }
        }
    }
    Ok(out)
}

#[inline]
fn overlap(a0: f64, a1: f64, b0: f64, b1: f64) -> f64 {
    (a1.min(b1) - a0.max(b0)).max(0.0)
}

// ---------------------------------------------------------------------------
// PNM codec
// ---------------------------------------------------------------------------

struct HeaderScanner<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> HeaderScanner<'a> {
    fn err(&self, reason: impl Into<String>) -> ImgError {
        ImgError::Format {
            path: self.path.to_path_buf(),
            offset: self.pos,
            reason: reason.into(),
        }
    }

    /// Skip whitespace and `#` comments (comments run to end of line).
    fn skip_separators(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    fn read_number(&mut self, what: &str) -> Result<usize, ImgError> {
        self.skip_separators();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.err(format!("expected {what}")));
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).expect("digits are ascii");
        text.parse::<usize>()
            .map_err(|_| self.err(format!("{what} out of range: {text}")))
    }
}

fn read_pnm(path: &Path, magic: &[u8; 2], samples_per_pixel: usize) -> Result<(usize, usize, Vec<u8>), ImgError> {
    let bytes = fs::read(path).map_err(|source| ImgError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut scan = HeaderScanner {
        bytes: &bytes,
        pos: 0,
        path,
    };
    if bytes.len() < 2 || &bytes[0..2] != magic {
        return Err(scan.err(format!(
            "expected magic {:?}",
            std::str::from_utf8(magic).unwrap()
        )));
    }
    scan.pos = 2;
    let width = scan.read_number("width")?;
    let height = scan.read_number("height")?;
    let maxval = scan.read_number("maxval")?;
    if width == 0 || height == 0 {
        return Err(scan.err(format!("dimensions must be >= 1, got {width}x{height}")));
    }
    if maxval != 255 {
        return Err(scan.err(format!("unsupported maxval {maxval}, expected 255")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if scan.pos >= bytes.len() || !bytes[scan.pos].is_ascii_whitespace() {
        return Err(scan.err("expected single whitespace byte after maxval"));
    }
    scan.pos += 1;
    let expect = width * height * samples_per_pixel;
    let avail = bytes.len() - scan.pos;
    if avail < expect {
        scan.pos = bytes.len();
        return Err(scan.err(format!("truncated raster: expected {expect} bytes, found {avail}")));
    }
    if avail > expect {
        scan.pos += expect;
        return Err(scan.err(format!("trailing bytes after raster: expected {expect}, found {avail}")));
    }
    Ok((width, height, bytes[scan.pos..].to_vec()))
}

/// Read a binary P6 PPM with maxval 255.
pub fn read_ppm(path: impl AsRef<Path>) -> Result<Patch, ImgError> {
    let path = path.as_ref();
    let (w, h, data) = read_pnm(path, b"P6", PATCH_CHANNELS)?;
    Patch::new(w, h, data)
}

/// Write the canonical P6 encoding: `P6\n<w> <h>\n255\n` then raw samples.
pub fn write_ppm(patch: &Patch, path: impl AsRef<Path>) -> Result<(), ImgError> {
    let path = path.as_ref();
    write_pnm(path, b"P6", patch.width, patch.height, &patch.data)
}

/// Read a binary P5 PGM with maxval 255.
pub fn read_pgm(path: impl AsRef<Path>) -> Result<GrayPatch, ImgError> {
    let path = path.as_ref();
    let (w, h, data) = read_pnm(path, b"P5", 1)?;
    GrayPatch::new(w, h, data)
}

/// Write the canonical P5 encoding.
pub fn write_pgm(gray: &GrayPatch, path: impl AsRef<Path>) -> Result<(), ImgError> {
    let path = path.as_ref();
    write_pnm(path, b"P5", gray.width, gray.height, &gray.data)
}

fn write_pnm(path: &Path, magic: &[u8; 2], w: usize, h: usize, data: &[u8]) -> Result<(), ImgError> {
    let io_err = |source| ImgError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut f = fs::File::create(path).map_err(io_err)?;
    f.write_all(magic).map_err(io_err)?;
    f.write_all(format!("\n{w} {h}\n255\n").as_bytes()).map_err(io_err)?;
    f.write_all(data).map_err(io_err)?;
    Ok(())
}
