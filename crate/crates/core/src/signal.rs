//! Network input preparation, training augmentation, and image metrics.
//!
//! Disparity is `min(1 / (4·depth), 1)`, so depths from 0.25 m to infinity map
//! onto `[1, 0]`. The frequency encoding appends `sin(2ᵏπd), cos(2ᵏπd)` for
//! `k = 0..4`, giving 11 channels per pixel.

use std::path::Path;

use rand::Rng;
use thiserror::Error;

use crate::dataset::DatasetExample;
use crate::image_io::{read_mask_png, read_pfm, tonemap, HdrImage, ImageError, LdrImage, Mask};
use crate::math::Vec3;

pub const FREQUENCIES: usize = 5;
pub const ENCODED_CHANNELS: usize = 1 + 2 * FREQUENCIES;
pub const PSNR_CAP_DB: f64 = 99.0;

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("depth {value} at pixel {index} is not positive")]
    NonPositiveDepth { index: usize, value: f32 },
    #[error("disparity {value} at pixel {index} is outside [0, 1]")]
    DisparityRange { index: usize, value: f32 },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("image {width}x{height} is smaller than the {crop}x{crop} crop")]
    TooSmall { width: usize, height: usize, crop: usize },
    #[error("invalid augmentation config: {0}")]
    Config(String),
    #[error(transparent)]
    Image(#[from] ImageError),
}

pub type Result<T, E = SignalError> = std::result::Result<T, E>;

#[inline]
pub fn disparity(depth: f32) -> f32 {
    (0.25 / depth).min(1.0)
}

/// Converts a single-channel depth map (meters, `+∞` allowed) to disparity.
pub fn depth_to_disparity(depth: &HdrImage) -> Result<HdrImage> {
    single_channel(depth, "depth")?;
    let mut data = Vec::with_capacity(depth.data.len());
    for (index, &value) in depth.data.iter().enumerate() {
        if !(value > 0.0) {
            return Err(SignalError::NonPositiveDepth { index, value });
        }
        data.push(disparity(value));
    }
    Ok(HdrImage::from_data(depth.width, depth.height, 1, data)?)
}

fn single_channel(img: &HdrImage, what: &str) -> Result<()> {
    if img.channels != 1 {
        return Err(SignalError::Shape(format!("{what} must have 1 channel, got {}", img.channels)));
    }
    Ok(())
}

/// Per-pixel 11-vector `[d, sin(πd), cos(πd), sin(2πd), cos(2πd), …]`, pixel-interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedDisparity {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl EncodedDisparity {
    pub fn channels(&self) -> usize {
        ENCODED_CHANNELS
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f32] {
        let i = (y * self.width + x) * ENCODED_CHANNELS;
        &self.data[i..i + ENCODED_CHANNELS]
    }

    /// One channel as a single-channel image.
    pub fn channel(&self, k: usize) -> HdrImage {
        assert!(k < ENCODED_CHANNELS, "channel {k} out of range");
        let data = self.data.chunks_exact(ENCODED_CHANNELS).map(|p| p[k]).collect();
        HdrImage { width: self.width, height: self.height, channels: 1, data }
    }

    /// Channel planes stacked vertically into one `W × 11H` single-channel image
    /// (channel 0 on top). This is the on-disk layout of `forge encode`.
    pub fn to_stacked(&self) -> HdrImage {
        let mut data = Vec::with_capacity(self.data.len());
        for k in 0..ENCODED_CHANNELS {
            data.extend(self.data.chunks_exact(ENCODED_CHANNELS).map(|p| p[k]));
        }
        HdrImage { width: self.width, height: self.height * ENCODED_CHANNELS, channels: 1, data }
    }

    pub fn from_stacked(img: &HdrImage) -> Result<Self> {
        single_channel(img, "stacked encoding")?;
        if !img.height.is_multiple_of(ENCODED_CHANNELS) {
            return Err(SignalError::Shape(format!("height {} is not a multiple of {ENCODED_CHANNELS}", img.height)));
        }
        let (w, h) = (img.width, img.height / ENCODED_CHANNELS);
        let plane = w * h;
        let mut data = vec![0.0; plane * ENCODED_CHANNELS];
        for k in 0..ENCODED_CHANNELS {
            for i in 0..plane {
                data[i * ENCODED_CHANNELS + k] = img.data[k * plane + i];
            }
        }
        Ok(Self { width: w, height: h, data })
    }
}

#[inline]
fn encode_value(d: f32, out: &mut [f32]) {
    out[0] = d;
    let mut freq = std::f64::consts::PI;
    for k in 0..FREQUENCIES {
        let (s, c) = (freq * d as f64).sin_cos();
        out[1 + 2 * k] = s as f32;
        out[2 + 2 * k] = c as f32;
        freq *= 2.0;
    }
}

/// Frequency-encodes a single-channel disparity map with values in `[0, 1]`.
pub fn frequency_encode(d: &HdrImage) -> Result<EncodedDisparity> {
    single_channel(d, "disparity")?;
    let mut data = vec![0.0; d.data.len() * ENCODED_CHANNELS];
    for (index, (&value, out)) in d.data.iter().zip(data.chunks_exact_mut(ENCODED_CHANNELS)).enumerate() {
        if !(0.0..=1.0).contains(&value) {
            return Err(SignalError::DisparityRange { index, value });
        }
        encode_value(value, out);
    }
    Ok(EncodedDisparity { width: d.width, height: d.height, data })
}

fn check_same_shape(a: &LdrImage, b: &LdrImage) -> Result<()> {
    if (a.width, a.height, a.channels) != (b.width, b.height, b.channels) {
        return Err(SignalError::Shape(format!(
            "{}x{}x{} vs {}x{}x{}",
            a.width, a.height, a.channels, b.width, b.height, b.channels
        )));
    }
    Ok(())
}

/// Mean over all pixels and channels of `|m·pred − m·gt|`.
pub fn masked_l1(pred: &LdrImage, gt: &LdrImage, mask: &Mask) -> Result<f64> {
    check_same_shape(pred, gt)?;
    if (mask.width, mask.height) != (pred.width, pred.height) {
        return Err(SignalError::Shape(format!(
            "mask {}x{} vs image {}x{}",
            mask.width, mask.height, pred.width, pred.height
        )));
    }
    let c = pred.channels;
    let total: f64 = pred
        .data()
        .chunks_exact(c)
        .zip(gt.data().chunks_exact(c))
        .zip(&mask.data)
        .filter(|(_, &m)| m)
        .map(|((p, g), _)| p.iter().zip(g).map(|(a, b)| (*a as f64 - *b as f64).abs()).sum::<f64>())
        .sum();
    let n = pred.data().len();
    Ok(if n == 0 { 0.0 } else { total / n as f64 })
}

/// Peak signal-to-noise ratio for signals in `[0, 1]`, capped at 99 dB.
pub fn psnr(a: &LdrImage, b: &LdrImage) -> Result<f64> {
    check_same_shape(a, b)?;
    let n = a.data().len();
    if n == 0 {
        return Ok(PSNR_CAP_DB);
    }
    let mse = a.data().iter().zip(b.data()).map(|(x, y)| (*x as f64 - *y as f64).powi(2)).sum::<f64>() / n as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(PSNR_CAP_DB))
}

/// Photometric and geometric augmentation parameters for one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentParams {
    pub crop_x: usize,
    pub crop_y: usize,
    pub exposure: f32,
    pub gamma: f32,
    /// Disparity multiplier; the camera vector is divided by it.
    pub scale: f32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentConfig {
    pub exposure_range: [f32; 2],
    pub gamma_range: [f32; 2],
    /// Log-uniform range of the disparity scale `f`.
    pub scale_range: [f32; 2],
    pub crop_size: usize,
    /// Debug: use these photometric values (and scale) instead of the draws.
    pub fixed: Option<(f32, f32, f32)>,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self { exposure_range: [3.0, 10.0], gamma_range: [2.2, 5.0], scale_range: [0.5, 2.0], crop_size: 384, fixed: None }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, [lo, hi]) in
            [("exposure", self.exposure_range), ("gamma", self.gamma_range), ("scale", self.scale_range)]
        {
            if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
                return Err(SignalError::Config(format!("{name} range [{lo}, {hi}]")));
            }
        }
        if self.gamma_range[0] < 1.0 {
            return Err(SignalError::Config("gamma must be at least 1".into()));
        }
        if self.crop_size == 0 {
            return Err(SignalError::Config("crop size must be positive".into()));
        }
        Ok(())
    }
}

/// The four rendered images of one example plus its camera offset.
#[derive(Debug, Clone, PartialEq)]
pub struct PairData {
    pub input: HdrImage,
    pub reshaded: HdrImage,
    pub depth: HdrImage,
    pub validity: Mask,
    pub novel_offset: Vec3,
}

impl PairData {
    /// Reads an example's files from a dataset rooted at `root`.
    pub fn load(root: &Path, example: &DatasetExample) -> Result<Self> {
        Ok(Self {
            input: read_pfm(root.join(&example.files.input))?,
            reshaded: read_pfm(root.join(&example.files.reshaded))?,
            depth: read_pfm(root.join(&example.files.depth))?,
            validity: read_mask_png(root.join(&example.files.validity))?,
            novel_offset: example.novel_offset,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSample {
    pub input: LdrImage,
    pub encoded_disparity: EncodedDisparity,
    pub camera_vec: Vec3,
    pub target: LdrImage,
    pub mask: Mask,
    pub params: AugmentParams,
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, [lo, hi]: [f32; 2]) -> f32 {
    (lo + (hi - lo) * rng.random::<f32>()).clamp(lo, hi)
}

fn log_uniform<R: Rng + ?Sized>(rng: &mut R, [lo, hi]: [f32; 2]) -> f32 {
    (lo.ln() + (hi.ln() - lo.ln()) * rng.random::<f32>()).exp().clamp(lo, hi)
}

/// Draws one crop, one `(exposure, γ)` pair shared by input and target, and
/// one disparity scale `f`; returns the prepared training sample.
pub fn augment_pair<R: Rng + ?Sized>(pair: &PairData, rng: &mut R, cfg: &AugmentConfig) -> Result<TrainSample> {
    cfg.validate()?;
    let (w, h) = (pair.input.width, pair.input.height);
    for (what, img) in [("reshaded", &pair.reshaded), ("depth", &pair.depth)] {
        if (img.width, img.height) != (w, h) {
            return Err(SignalError::Shape(format!("{what} is {}x{}, input is {w}x{h}", img.width, img.height)));
        }
    }
    if (pair.validity.width, pair.validity.height) != (w, h) {
        return Err(SignalError::Shape("validity mask size differs from input".into()));
    }
    let crop = cfg.crop_size;
    if w < crop || h < crop {
        return Err(SignalError::TooSmall { width: w, height: h, crop });
    }

    let crop_x = rng.random_range(0..=w - crop);
    let crop_y = rng.random_range(0..=h - crop);
    let mut exposure = uniform(rng, cfg.exposure_range);
    let mut gamma = uniform(rng, cfg.gamma_range);
    let mut scale = log_uniform(rng, cfg.scale_range);
    if let Some((e, g, f)) = cfg.fixed {
        (exposure, gamma, scale) = (e, g, f);
    }

    let input = tonemap(&pair.input.crop(crop_x, crop_y, crop, crop)?, exposure, gamma)?;
    let target = tonemap(&pair.reshaded.crop(crop_x, crop_y, crop, crop)?, exposure, gamma)?;
    let mut disp = depth_to_disparity(&pair.depth.crop(crop_x, crop_y, crop, crop)?)?;
    for d in &mut disp.data {
        *d = (*d * scale).min(1.0);
    }
    Ok(TrainSample {
        input,
        encoded_disparity: frequency_encode(&disp)?,
        camera_vec: pair.novel_offset * (1.0 / scale),
        target,
        mask: pair.validity.crop(crop_x, crop_y, crop, crop)?,
        params: AugmentParams { crop_x, crop_y, exposure, gamma, scale },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::task_rng;
    use proptest::prelude::*;

    fn depth(values: &[f32]) -> HdrImage {
        HdrImage::from_data(values.len(), 1, 1, values.to_vec()).unwrap()
    }

    fn ldr(v: f32, n: usize) -> LdrImage {
        LdrImage::filled(n, n, 3, v).unwrap()
    }

    #[test]
    fn disparity_values() {
        let d = depth_to_disparity(&depth(&[0.25, f32::INFINITY, 1.0, 0.1, 2.0])).unwrap();
        assert_eq!(d.data, vec![1.0, 0.0, 0.25, 1.0, 0.125]);
    }

    #[test]
    fn disparity_rejects_nonpositive() {
        assert!(matches!(depth_to_disparity(&depth(&[1.0, 0.0])), Err(SignalError::NonPositiveDepth { index: 1, .. })));
        assert!(depth_to_disparity(&depth(&[-1.0])).is_err());
        assert!(depth_to_disparity(&depth(&[f32::NAN])).is_err());
    }

    #[test]
    fn encoding_at_zero_and_half() {
        let e = frequency_encode(&depth(&[0.0, 0.5])).unwrap();
        assert_eq!(e.channels(), 11);
        let zero = [0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0];
        let half = [0.5, 1.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0];
        for (got, want) in e.pixel(0, 0).iter().zip(zero).chain(e.pixel(1, 0).iter().zip(half)) {
            assert!((got - want).abs() < 1e-6, "{got} vs {want}");
        }
    }

    #[test]
    fn encoding_rejects_out_of_range() {
        assert!(frequency_encode(&depth(&[1.5])).is_err());
        assert!(frequency_encode(&depth(&[-0.1])).is_err());
    }

    #[test]
    fn stacked_layout_roundtrip() {
        let d = HdrImage::from_data(3, 2, 1, vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5]).unwrap();
        let e = frequency_encode(&d).unwrap();
        let s = e.to_stacked();
        assert_eq!((s.width, s.height), (3, 22));
        assert_eq!(&s.data[..6], &d.data[..]);
        assert_eq!(EncodedDisparity::from_stacked(&s).unwrap(), e);
        assert_eq!(e.channel(0).data, d.data);
    }

    #[test]
    fn masked_l1_constants() {
        let m = Mask::filled(4, 4, true);
        assert_eq!(masked_l1(&ldr(0.5, 4), &ldr(0.5, 4), &m).unwrap(), 0.0);
        assert_eq!(masked_l1(&ldr(0.5, 4), &ldr(0.25, 4), &m).unwrap(), 0.25);
        assert_eq!(masked_l1(&ldr(0.5, 4), &ldr(0.25, 4), &Mask::filled(4, 4, false)).unwrap(), 0.0);
        assert!(masked_l1(&ldr(0.5, 4), &ldr(0.5, 3), &m).is_err());
    }

    #[test]
    fn masked_l1_normalizes_over_all_pixels() {
        let mut m = Mask::filled(2, 2, false);
        m.data[0] = true;
        // One of four pixels differs by 0.4 in every channel.
        assert!((masked_l1(&ldr(0.5, 2), &ldr(0.1, 2), &m).unwrap() - 0.1).abs() < 1e-7);
    }

    #[test]
    fn psnr_values() {
        assert_eq!(psnr(&ldr(0.3, 4), &ldr(0.3, 4)).unwrap(), 99.0);
        assert!((psnr(&ldr(0.0, 4), &ldr(0.1, 4)).unwrap() - 20.0).abs() < 1e-6);
        assert!((psnr(&ldr(0.5, 4), &ldr(0.51, 4)).unwrap() - 40.0).abs() < 1e-3);
    }

    fn pair(n: usize) -> PairData {
        let mut input = HdrImage::new(n, n, 3);
        for (i, v) in input.data.iter_mut().enumerate() {
            *v = (i % 17) as f32 * 0.01;
        }
        let mut reshaded = input.clone();
        for v in &mut reshaded.data {
            *v *= 1.5;
        }
        let mut depth = HdrImage::new(n, n, 1);
        for (i, v) in depth.data.iter_mut().enumerate() {
            *v = 0.2 + (i % 7) as f32 * 0.3;
        }
        let mut validity = Mask::filled(n, n, true);
        validity.data[3] = false;
        PairData { input, reshaded, depth, validity, novel_offset: Vec3::new(0.1, -0.2, 0.05) }
    }

    #[test]
    fn identity_augmentation() {
        let p = pair(8);
        let cfg = AugmentConfig { crop_size: 8, fixed: Some((1.0, 1.0, 1.0)), ..AugmentConfig::default() };
        let s = augment_pair(&p, &mut task_rng(&[1]), &cfg).unwrap();
        let clamped: Vec<f32> = p.input.data.iter().map(|v| v.clamp(0.0, 1.0)).collect();
        assert_eq!(s.input.data(), &clamped[..]);
        assert_eq!(s.camera_vec, p.novel_offset);
        assert_eq!(s.mask, p.validity);
        assert_eq!(s.encoded_disparity.channel(0), depth_to_disparity(&p.depth).unwrap());
    }

    #[test]
    fn scale_two_halves_camera_and_doubles_disparity() {
        let p = pair(8);
        let cfg = AugmentConfig { crop_size: 8, fixed: Some((1.0, 1.0, 2.0)), ..AugmentConfig::default() };
        let s = augment_pair(&p, &mut task_rng(&[2]), &cfg).unwrap();
        assert_eq!(s.camera_vec, p.novel_offset * 0.5);
        let base = depth_to_disparity(&p.depth).unwrap();
        for (got, d) in s.encoded_disparity.channel(0).data.iter().zip(&base.data) {
            assert_eq!(*got, (d * 2.0).min(1.0));
        }
    }

    #[test]
    fn augmentation_is_deterministic_and_in_range() {
        let p = pair(12);
        let cfg = AugmentConfig { crop_size: 5, ..AugmentConfig::default() };
        let a = augment_pair(&p, &mut task_rng(&[3]), &cfg).unwrap();
        assert_eq!(a, augment_pair(&p, &mut task_rng(&[3]), &cfg).unwrap());
        assert!((3.0..=10.0).contains(&a.params.exposure));
        assert!((2.2..=5.0).contains(&a.params.gamma));
        assert!((0.5..=2.0).contains(&a.params.scale));
        assert_eq!((a.input.width, a.target.width, a.mask.width, a.encoded_disparity.width), (5, 5, 5, 5));
    }

    #[test]
    fn shared_photometrics_on_equal_images() {
        let mut p = pair(10);
        p.reshaded = p.input.clone();
        let cfg = AugmentConfig { crop_size: 6, ..AugmentConfig::default() };
        for seed in 0..20 {
            let s = augment_pair(&p, &mut task_rng(&[seed]), &cfg).unwrap();
            assert_eq!(s.input, s.target);
        }
    }

    #[test]
    fn crop_larger_than_image_fails() {
        let cfg = AugmentConfig { crop_size: 9, ..AugmentConfig::default() };
        assert!(matches!(augment_pair(&pair(8), &mut task_rng(&[0]), &cfg), Err(SignalError::TooSmall { .. })));
    }

    proptest! {
        #[test]
        fn disparity_is_monotone_and_bounded(a in 1e-3f32..1e4, b in 1e-3f32..1e4) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(disparity(lo) >= disparity(hi));
            prop_assert!((0.0..=1.0).contains(&disparity(lo)));
        }

        #[test]
        fn encoding_keeps_input_and_is_bounded(values in proptest::collection::vec(0.0f32..=1.0, 1..32)) {
            let e = frequency_encode(&depth(&values)).unwrap();
            prop_assert_eq!(e.channel(0).data, values);
            prop_assert!(e.data.iter().all(|v| v.abs() <= 1.0));
        }

        #[test]
        fn masked_l1_symmetric_and_zero_iff_agree(
            a in proptest::collection::vec(0.0f32..=1.0, 12),
            b in proptest::collection::vec(0.0f32..=1.0, 12),
            m in proptest::collection::vec(any::<bool>(), 4),
        ) {
            let pa = LdrImage::from_data(2, 2, 3, a.clone()).unwrap();
            let pb = LdrImage::from_data(2, 2, 3, b.clone()).unwrap();
            let mask = Mask::from_data(2, 2, m.clone()).unwrap();
            let ab = masked_l1(&pa, &pb, &mask).unwrap();
            prop_assert_eq!(ab, masked_l1(&pb, &pa, &mask).unwrap());
            let agree = (0..4).all(|i| !m[i] || a[3 * i..3 * i + 3] == b[3 * i..3 * i + 3]);
            prop_assert_eq!(ab == 0.0, agree);
        }
    }
}
