//! Mean structural similarity on luma.
//!
//! Images are reduced to luma `0.299 R + 0.587 G + 0.114 B` and compared
//! with an 11x11 Gaussian window (sigma 1.5), stride 1, valid padding only,
//! `C1 = (0.01 * 255)^2`, `C2 = (0.03 * 255)^2`. Window statistics use the
//! weighted (biased) moments.

use std::path::Path;

use image::{ColorType, DynamicImage};

use super::FidelityError;

pub const WINDOW: usize = 11;
pub const SIGMA: f64 = 1.5;
pub const C1: f64 = (0.01 * 255.0) * (0.01 * 255.0);
pub const C2: f64 = (0.03 * 255.0) * (0.03 * 255.0);

/// A single-channel image of luma values on the 0..=255 scale.
#[derive(Debug, Clone, PartialEq)]
pub struct LumaImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl LumaImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self, FidelityError> {
        if pixels.len() != width * height {
            return Err(FidelityError::Image(format!("{} pixels for a {width}x{height} image", pixels.len())));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn from_gray8(width: usize, height: usize, data: &[u8]) -> Result<Self, FidelityError> {
        Self::new(width, height, data.iter().map(|&p| f64::from(p)).collect())
    }

    pub fn from_rgb8(width: usize, height: usize, data: &[u8]) -> Result<Self, FidelityError> {
        if data.len() != width * height * 3 {
            return Err(FidelityError::Image(format!("{} bytes for a {width}x{height} RGB image", data.len())));
        }
        let pixels = data
            .chunks_exact(3)
            .map(|p| 0.299 * f64::from(p[0]) + 0.587 * f64::from(p[1]) + 0.114 * f64::from(p[2]))
            .collect();
        Self::new(width, height, pixels)
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Self {
        Self { width, height, pixels: vec![value; width * height] }
    }

    /// Decodes an 8-bit grayscale or RGB(A) image file. Alpha is ignored.
    pub fn open(path: &Path) -> Result<Self, FidelityError> {
        let img = image::open(path).map_err(|e| FidelityError::Image(format!("{}: {e}", path.display())))?;
        Self::from_dynamic(&img).map_err(|e| FidelityError::Image(format!("{}: {e}", path.display())))
    }

    pub fn from_dynamic(img: &DynamicImage) -> Result<Self, FidelityError> {
        let (w, h) = (img.width() as usize, img.height() as usize);
        match img.color() {
            ColorType::L8 | ColorType::La8 => Self::from_gray8(w, h, img.to_luma8().as_raw()),
            ColorType::Rgb8 | ColorType::Rgba8 => Self::from_rgb8(w, h, img.to_rgb8().as_raw()),
            other => {
                Err(FidelityError::Image(format!("unsupported pixel format {other:?}; need 8-bit RGB or grayscale")))
            }
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }
}

fn gaussian_kernel() -> [f64; WINDOW] {
    let mut k = [0.0; WINDOW];
    let c = (WINDOW / 2) as f64;
    for (i, w) in k.iter_mut().enumerate() {
        let d = i as f64 - c;
        *w = (-(d * d) / (2.0 * SIGMA * SIGMA)).exp();
    }
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|w| *w /= sum);
    k
}

/// Separable valid-mode filter; output is `(w - 10) x (h - 10)`.
fn filter(src: &[f64], width: usize, height: usize, kernel: &[f64; WINDOW]) -> Vec<f64> {
    let ow = width - WINDOW + 1;
    let oh = height - WINDOW + 1;
    let mut horiz = vec![0.0; ow * height];
    for y in 0..height {
        let row = &src[y * width..(y + 1) * width];
        for x in 0..ow {
            horiz[y * ow + x] = kernel.iter().zip(&row[x..x + WINDOW]).map(|(k, p)| k * p).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = kernel.iter().enumerate().map(|(i, k)| k * horiz[(y + i) * ow + x]).sum();
        }
    }
    out
}

/// Per-window SSIM map in row-major order.
pub fn ssim_map(a: &LumaImage, b: &LumaImage) -> Result<Vec<f64>, FidelityError> {
    if (a.width, a.height) != (b.width, b.height) {
        return Err(FidelityError::SizeMismatch { left: (a.width, a.height), right: (b.width, b.height) });
    }
    if a.width < WINDOW || a.height < WINDOW {
        return Err(FidelityError::TooSmall { width: a.width, height: a.height, window: WINDOW });
    }
    let k = gaussian_kernel();
    let (w, h) = (a.width, a.height);
    let sq = |img: &[f64]| img.iter().map(|x| x * x).collect::<Vec<_>>();
    let cross: Vec<f64> = a.pixels.iter().zip(&b.pixels).map(|(x, y)| x * y).collect();
    let mu_a = filter(&a.pixels, w, h, &k);
    let mu_b = filter(&b.pixels, w, h, &k);
    let e_aa = filter(&sq(&a.pixels), w, h, &k);
    let e_bb = filter(&sq(&b.pixels), w, h, &k);
    let e_ab = filter(&cross, w, h, &k);
    Ok((0..mu_a.len())
        .map(|i| {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let var_a = e_aa[i] - ma * ma;
            let var_b = e_bb[i] - mb * mb;
            let cov = e_ab[i] - ma * mb;
            ((2.0 * ma * mb + C1) * (2.0 * cov + C2)) / ((ma * ma + mb * mb + C1) * (var_a + var_b + C2))
        })
        .collect())
}

/// Mean SSIM over all valid windows, in [-1, 1].
pub fn ssim(a: &LumaImage, b: &LumaImage) -> Result<f64, FidelityError> {
    let map = ssim_map(a, b)?;
    Ok(map.iter().sum::<f64>() / map.len() as f64)
}
