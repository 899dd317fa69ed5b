//! HDR/LDR image containers, PFM and PNG-mask I/O, and exposure/gamma tone mapping.
//!
//! All in-memory images are row-major with the top scanline first. PFM files
//! store scanlines bottom-to-top as the format requires; readers and writers
//! flip accordingly.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed file: {0}")]
    Malformed(String),
    #[error("NaN at sample {0}")]
    NaN(usize),
    #[error("non-finite value at sample {0}")]
    NonFinite(usize),
    #[error("value {value} at sample {index} is outside [0, 1]")]
    OutOfRange { index: usize, value: f32 },
    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("png encoding error: {0}")]
    PngEncode(#[from] png::EncodingError),
    #[error("png decoding error: {0}")]
    PngDecode(#[from] png::DecodingError),
}

pub type Result<T, E = ImageError> = std::result::Result<T, E>;

fn check_len(width: usize, height: usize, channels: usize, len: usize) -> Result<()> {
    if width * height * channels != len {
        return Err(ImageError::ShapeMismatch {
            expected: format!("{width}x{height}x{channels} = {} samples", width * height * channels),
            actual: format!("{len} samples"),
        });
    }
    Ok(())
}

/// Floating-point image with 1 or 3 interleaved channels.
///
/// Values are not required to be finite: depth maps use `+inf` for rays that
/// escape to the environment.
#[derive(Debug, Clone, PartialEq)]
pub struct HdrImage {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

impl HdrImage {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        assert!(channels == 1 || channels == 3, "HdrImage supports 1 or 3 channels");
        Self { width, height, channels, data: vec![0.0; width * height * channels] }
    }

    pub fn from_data(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(ImageError::InvalidParameter(format!("{channels} channels")));
        }
        check_len(width, height, channels, data.len())?;
        Ok(Self { width, height, channels, data })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f32) -> Self {
        let mut img = Self::new(width, height, channels);
        img.data.fill(value);
        img
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f32] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    #[inline]
    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [f32] {
        let i = (y * self.width + x) * self.channels;
        &mut self.data[i..i + self.channels]
    }

    /// Copies the `w`×`h` window whose top-left corner is `(x0, y0)`.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Self> {
        if x0 + w > self.width || y0 + h > self.height {
            return Err(ImageError::InvalidParameter(format!(
                "crop {w}x{h}+{x0}+{y0} exceeds {}x{}",
                self.width, self.height
            )));
        }
        let c = self.channels;
        let mut data = Vec::with_capacity(w * h * c);
        for y in y0..y0 + h {
            let start = (y * self.width + x0) * c;
            data.extend_from_slice(&self.data[start..start + w * c]);
        }
        Ok(Self { width: w, height: h, channels: c, data })
    }
}

/// Display-referred image with every value in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LdrImage {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    data: Vec<f32>,
}

impl LdrImage {
    pub fn from_data(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(ImageError::InvalidParameter(format!("{channels} channels")));
        }
        check_len(width, height, channels, data.len())?;
        if let Some((index, &value)) = data.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(ImageError::OutOfRange { index, value });
        }
        Ok(Self { width, height, channels, data })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f32) -> Result<Self> {
        Self::from_data(width, height, channels, vec![value; width * height * channels])
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f32] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }
}

/// Per-pixel boolean image (validity masks, hole maps).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl Mask {
    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        Self { width, height, data: vec![value; width * height] }
    }

    pub fn from_data(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        check_len(width, height, 1, data.len())?;
        Ok(Self { width, height, data })
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn count_true(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Self> {
        if x0 + w > self.width || y0 + h > self.height {
            return Err(ImageError::InvalidParameter(format!(
                "crop {w}x{h}+{x0}+{y0} exceeds {}x{}",
                self.width, self.height
            )));
        }
        let mut data = Vec::with_capacity(w * h);
        for y in y0..y0 + h {
            let start = y * self.width + x0;
            data.extend_from_slice(&self.data[start..start + w]);
        }
        Ok(Self { width: w, height: h, data })
    }
}

/// Serializes an image as little-endian PFM.
pub fn encode_pfm(img: &HdrImage) -> Result<Vec<u8>> {
    check_len(img.width, img.height, img.channels, img.data.len())?;
    if let Some(i) = img.data.iter().position(|v| v.is_nan()) {
        return Err(ImageError::NaN(i));
    }
    let magic = match img.channels {
        3 => "PF",
        1 => "Pf",
        c => return Err(ImageError::InvalidParameter(format!("{c} channels"))),
    };
    let header = format!("{magic}\n{} {}\n-1.0\n", img.width, img.height);
    let row_len = img.width * img.channels;
    let mut out = Vec::with_capacity(header.len() + img.data.len() * 4);
    out.extend_from_slice(header.as_bytes());
    for row in img.data.chunks_exact(row_len.max(1)).rev() {
        for v in row {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderCursor<'a> {
    fn token(&mut self) -> Result<&'a str> {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(ImageError::Malformed("unexpected end of header".into()));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .map_err(|_| ImageError::Malformed("non-ASCII header".into()))
    }
}

/// Parses a PFM byte stream of either endianness.
pub fn decode_pfm(bytes: &[u8]) -> Result<HdrImage> {
    let mut cur = HeaderCursor { bytes, pos: 0 };
    let channels = match cur.token()? {
        "PF" => 3,
        "Pf" => 1,
        other => return Err(ImageError::Malformed(format!("bad magic {other:?}"))),
    };
    let mut dim = |name: &str| -> Result<usize> {
        let tok = cur.token()?;
        tok.parse::<usize>()
            .map_err(|_| ImageError::Malformed(format!("bad {name} {tok:?}")))
    };
    let width = dim("width")?;
    let height = dim("height")?;
    let scale_tok = cur.token()?;
    let scale: f32 = scale_tok
        .parse()
        .map_err(|_| ImageError::Malformed(format!("bad scale {scale_tok:?}")))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(ImageError::Malformed(format!("bad scale {scale_tok:?}")));
    }
    // Exactly one whitespace byte separates the header from the payload.
    if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
        return Err(ImageError::Malformed("missing payload".into()));
    }
    let payload = &bytes[cur.pos + 1..];
    let count = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| ImageError::Malformed("dimensions overflow".into()))?;
    if payload.len() != count * 4 {
        return Err(ImageError::Malformed(format!(
            "payload has {} bytes, expected {}",
            payload.len(),
            count * 4
        )));
    }
    let little_endian = scale < 0.0;
    let row_len = width * channels;
    let mut data = vec![0.0f32; count];
    if row_len > 0 {
        for (file_row, chunk) in payload.chunks_exact(row_len * 4).enumerate() {
            let y = height - 1 - file_row;
            let dst = &mut data[y * row_len..(y + 1) * row_len];
            for (d, b) in dst.iter_mut().zip(chunk.chunks_exact(4)) {
                let b = [b[0], b[1], b[2], b[3]];
                *d = if little_endian { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) };
            }
        }
    }
    Ok(HdrImage { width, height, channels, data })
}

pub fn write_pfm(img: &HdrImage, path: impl AsRef<Path>) -> Result<()> {
    let bytes = encode_pfm(img)?;
    let mut f = BufWriter::new(File::create(path)?);
    f.write_all(&bytes)?;
    f.flush()?;
    Ok(())
}

pub fn read_pfm(path: impl AsRef<Path>) -> Result<HdrImage> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    decode_pfm(&bytes)
}

/// Writes an 8-bit grayscale PNG: `true` → 255, `false` → 0.
pub fn write_mask_png(mask: &Mask, path: impl AsRef<Path>) -> Result<()> {
    check_len(mask.width, mask.height, 1, mask.data.len())?;
    let w = BufWriter::new(File::create(path)?);
    let mut enc = png::Encoder::new(w, mask.width as u32, mask.height as u32);
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::Eight);
    let mut writer = enc.write_header()?;
    let bytes: Vec<u8> = mask.data.iter().map(|&v| if v { 255 } else { 0 }).collect();
    writer.write_image_data(&bytes)?;
    writer.finish()?;
    Ok(())
}

/// Reads a PNG as a mask; a pixel is `true` when its first channel is ≥ 128.
pub fn read_mask_png(path: impl AsRef<Path>) -> Result<Mask> {
    let mut dec = png::Decoder::new(BufReader::new(File::open(path)?));
    dec.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
    let mut reader = dec.read_info()?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| ImageError::Malformed("png too large".into()))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf)?;
    let stride = info.color_type.samples();
    let (w, h) = (info.width as usize, info.height as usize);
    let mut data = Vec::with_capacity(w * h);
    for row in buf[..info.buffer_size()].chunks_exact(info.line_size) {
        data.extend(row[..w * stride].chunks_exact(stride).map(|px| px[0] >= 128));
    }
    Mask::from_data(w, h, data)
}

/// `clamp(exposure · v, 0, 1)^(1/gamma)` per component.
pub fn tonemap(img: &HdrImage, exposure: f32, gamma: f32) -> Result<LdrImage> {
    if !(exposure > 0.0 && exposure.is_finite()) {
        return Err(ImageError::InvalidParameter(format!("exposure {exposure}")));
    }
    if !(gamma >= 1.0 && gamma.is_finite()) {
        return Err(ImageError::InvalidParameter(format!("gamma {gamma}")));
    }
    if let Some(i) = img.data.iter().position(|v| !v.is_finite()) {
        return Err(ImageError::NonFinite(i));
    }
    let inv_gamma = 1.0 / gamma;
    let data = img
        .data
        .iter()
        .map(|&v| {
            let c = (exposure * v).clamp(0.0, 1.0);
            if inv_gamma == 1.0 { c } else { c.powf(inv_gamma) }
        })
        .collect();
    Ok(LdrImage { width: img.width, height: img.height, channels: img.channels, data })
}
