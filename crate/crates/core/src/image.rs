//! Linear RGB float images and the image-space metrics used by the loss and
//! the benchmark (MSE, PSNR, Gaussian-window SSIM with its gradient).

use nalgebra::Vector3;

use crate::{Error, Result};

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;

/// Row-major RGB image, channels interleaved.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height * 3],
        }
    }

    pub fn filled(width: usize, height: usize, rgb: Vector3<f64>) -> Self {
        Self::from_fn(width, height, |_, _| rgb)
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> Vector3<f64>) -> Self {
        let mut img = Self::new(width, height);
        for y in 0..height {
            for x in 0..width {
                img.set(x, y, f(x, y));
            }
        }
        img
    }

    /// Wraps interleaved RGB data; `data.len()` must be `3 · width · height`.
    pub fn from_raw(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height * 3 {
            return Err(Error::InvalidParameter(format!(
                "image data has {} values, expected {} for {width}x{height} RGB",
                data.len(),
                width * height * 3
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

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Vector3<f64> {
        let i = 3 * (y * self.width + x);
        Vector3::new(self.data[i], self.data[i + 1], self.data[i + 2])
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, rgb: Vector3<f64>) {
        let i = 3 * (y * self.width + x);
        self.data[i..i + 3].copy_from_slice(rgb.as_slice());
    }

    pub fn same_dimensions(&self, other: &Image) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::DimensionMismatch {
                left_w: self.width,
                left_h: self.height,
                right_w: other.width,
                right_h: other.height,
            });
        }
        Ok(())
    }

    fn channel(&self, c: usize) -> Vec<f64> {
        self.data.iter().skip(c).step_by(3).copied().collect()
    }
}

pub fn mse(a: &Image, b: &Image) -> Result<f64> {
    a.same_dimensions(b)?;
    let sum: f64 = a.data.iter().zip(&b.data).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(sum / a.data.len() as f64)
}

/// Peak signal-to-noise ratio for unit dynamic range; `+∞` for identical images.
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    let err = mse(a, b)?;
    Ok(if err == 0.0 { f64::INFINITY } else { -10.0 * err.log10() })
}

fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let half = (SSIM_WINDOW / 2) as f64;
    let mut w = [0.0; SSIM_WINDOW];
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - half;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let total: f64 = w.iter().sum();
    w.map(|v| v / total)
}

/// Separable "same"-size convolution with zero padding. The window is
/// symmetric, so this is also its own adjoint.
fn blur(plane: &[f64], width: usize, height: usize, window: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let half = (SSIM_WINDOW / 2) as isize;
    let mut tmp = vec![0.0; plane.len()];
    for y in 0..height {
        let row = &plane[y * width..(y + 1) * width];
        for x in 0..width {
            let mut acc = 0.0;
            for (k, w) in window.iter().enumerate() {
                let xs = x as isize + k as isize - half;
                if xs >= 0 && (xs as usize) < width {
                    acc += w * row[xs as usize];
                }
            }
            tmp[y * width + x] = acc;
        }
    }
    let mut out = vec![0.0; plane.len()];
    for y in 0..height {
        for x in 0..width {
            let mut acc = 0.0;
            for (k, w) in window.iter().enumerate() {
                let ys = y as isize + k as isize - half;
                if ys >= 0 && (ys as usize) < height {
                    acc += w * tmp[ys as usize * width + x];
                }
            }
            out[y * width + x] = acc;
        }
    }
    out
}

/// Mean SSIM over all pixels and channels.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    ssim_impl(a, b, false).map(|(s, _)| s)
}

/// Mean SSIM and its gradient with respect to `a`.
pub fn ssim_with_gradient(a: &Image, b: &Image) -> Result<(f64, Image)> {
    ssim_impl(a, b, true).map(|(s, g)| (s, g.expect("gradient requested")))
}

fn ssim_impl(a: &Image, b: &Image, with_grad: bool) -> Result<(f64, Option<Image>)> {
    a.same_dimensions(b)?;
    let (w, h) = (a.width, a.height);
    let n = (w * h * 3) as f64;
    let window = gaussian_window();
    let mut total = 0.0;
    let mut grad = with_grad.then(|| Image::new(w, h));

    for c in 0..3 {
        let x = a.channel(c);
        let y = b.channel(c);
        let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
        let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
        let xy: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p * q).collect();
        let mu_x = blur(&x, w, h, &window);
        let mu_y = blur(&y, w, h, &window);
        let e_xx = blur(&xx, w, h, &window);
        let e_yy = blur(&yy, w, h, &window);
        let e_xy = blur(&xy, w, h, &window);

        let len = w * h;
        let (mut map_a, mut map_b, mut map_c) = (vec![0.0; len], vec![0.0; len], vec![0.0; len]);
        for i in 0..len {
            let (mx, my) = (mu_x[i], mu_y[i]);
            let var_x = e_xx[i] - mx * mx;
            let var_y = e_yy[i] - my * my;
            let cov = e_xy[i] - mx * my;
            let n1 = 2.0 * mx * my + SSIM_C1;
            let n2 = 2.0 * cov + SSIM_C2;
            let d1 = mx * mx + my * my + SSIM_C1;
            let d2 = var_x + var_y + SSIM_C2;
            let s = n1 * n2 / (d1 * d2);
            total += s;
            if with_grad {
                // Arranged so every term cancels exactly when x == y.
                let d12 = d1 * d2;
                map_a[i] = (2.0 * my * (n2 - n1) - 2.0 * mx * s * (d2 - d1)) / d12;
                map_b[i] = -(s / d2);
                map_c[i] = 2.0 * if n2 != 0.0 { s / n2 } else { n1 / d12 };
            }
        }

        if let Some(g) = grad.as_mut() {
            let ga = blur(&map_a, w, h, &window);
            let gb = blur(&map_b, w, h, &window);
            let gc = blur(&map_c, w, h, &window);
            for i in 0..len {
                g.data[3 * i + c] = (ga[i] + 2.0 * x[i] * gb[i] + y[i] * gc[i]) / n;
            }
        }
    }
    Ok((total / n, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise(w: usize, h: usize, seed: u64) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Image::from_fn(w, h, |_, _| Vector3::from_fn(|_, _| rng.random::<f64>()))
    }

    #[test]
    fn window_is_normalized_and_symmetric() {
        let w = gaussian_window();
        assert_relative_eq!(w.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        for i in 0..SSIM_WINDOW {
            assert_eq!(w[i], w[SSIM_WINDOW - 1 - i]);
        }
    }

    #[test]
    fn identical_images() {
        let a = noise(20, 16, 1);
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
        assert_relative_eq!(ssim(&a, &a).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn constant_offset_psnr() {
        let a = Image::filled(8, 8, Vector3::repeat(0.4));
        let b = Image::filled(8, 8, Vector3::repeat(0.5));
        assert_relative_eq!(mse(&a, &b).unwrap(), 0.01, epsilon = 1e-15);
        assert_relative_eq!(psnr(&a, &b).unwrap(), 20.0, epsilon = 1e-10);
    }

    #[test]
    fn independent_noise_has_low_ssim() {
        let s = ssim(&noise(64, 64, 2), &noise(64, 64, 3)).unwrap();
        assert!(s.abs() < 0.1, "{s}");
    }

    #[test]
    fn dimension_mismatch() {
        let err = ssim(&Image::new(4, 4), &Image::new(4, 5)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
        assert!(psnr(&Image::new(3, 4), &Image::new(4, 4)).is_err());
    }

    #[test]
    fn ssim_gradient_matches_finite_differences() {
        for seed in 0..3 {
            let a = noise(32, 32, 10 + seed);
            let b = noise(32, 32, 20 + seed);
            let (_, grad) = ssim_with_gradient(&a, &b).unwrap();
            let h = 1e-5;
            let mut fd = vec![0.0; grad.data.len()];
            for (i, v) in fd.iter_mut().enumerate() {
                let (mut p, mut m) = (a.clone(), a.clone());
                p.data[i] += h;
                m.data[i] -= h;
                *v = (ssim(&p, &b).unwrap() - ssim(&m, &b).unwrap()) / (2.0 * h);
            }
            let diff: f64 = fd
                .iter()
                .zip(&grad.data)
                .map(|(x, y)| (x - y).powi(2))
                .sum::<f64>()
                .sqrt();
            let norm: f64 = fd.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(diff / norm < 1e-4, "seed {seed}: {}", diff / norm);
        }
    }
}
