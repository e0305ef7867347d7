//! Real spherical-harmonic radiance, degrees 0..=3, with the usual splatting
//! convention of a +0.5 offset and clamping at zero.

use nalgebra::Vector3;

use super::RadianceCoeffs;

pub const SH_COEFFS: usize = 16;

pub(crate) const SH_C0: f64 = 0.282_094_791_773_878_14;
const SH_C1: f64 = 0.488_602_511_902_919_9;
const SH_C2: [f64; 5] = [
    1.092_548_430_592_079_2,
    -1.092_548_430_592_079_2,
    0.315_391_565_252_520_05,
    -1.092_548_430_592_079_2,
    0.546_274_215_296_039_6,
];
const SH_C3: [f64; 7] = [
    -0.590_043_589_926_643_5,
    2.890_611_442_640_554,
    -0.457_045_799_464_465_8,
    0.373_176_332_590_115_4,
    -0.457_045_799_464_465_8,
    1.445_305_721_320_277,
    -0.590_043_589_926_643_5,
];

/// Basis values for direction `d`. Entries above `max_degree` are zero.
pub fn sh_basis(d: &Vector3<f64>, max_degree: usize) -> [f64; SH_COEFFS] {
    let mut b = [0.0; SH_COEFFS];
    b[0] = SH_C0;
    if max_degree == 0 {
        return b;
    }
    let (x, y, z) = (d.x, d.y, d.z);
    b[1] = -SH_C1 * y;
    b[2] = SH_C1 * z;
    b[3] = -SH_C1 * x;
    if max_degree == 1 {
        return b;
    }
    let (xx, yy, zz) = (x * x, y * y, z * z);
    let (xy, yz, xz) = (x * y, y * z, x * z);
    b[4] = SH_C2[0] * xy;
    b[5] = SH_C2[1] * yz;
    b[6] = SH_C2[2] * (2.0 * zz - xx - yy);
    b[7] = SH_C2[3] * xz;
    b[8] = SH_C2[4] * (xx - yy);
    if max_degree == 2 {
        return b;
    }
    b[9] = SH_C3[0] * y * (3.0 * xx - yy);
    b[10] = SH_C3[1] * xy * z;
    b[11] = SH_C3[2] * y * (4.0 * zz - xx - yy);
    b[12] = SH_C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
    b[13] = SH_C3[4] * x * (4.0 * zz - xx - yy);
    b[14] = SH_C3[5] * z * (xx - yy);
    b[15] = SH_C3[6] * x * (xx - 3.0 * yy);
    b
}

/// Unclamped color before the zero clamp, from precomputed basis values.
#[inline]
pub(crate) fn sh_raw(radiance: &RadianceCoeffs, basis: &[f64; SH_COEFFS]) -> Vector3<f64> {
    let mut c = Vector3::repeat(0.5);
    for (coef, b) in radiance.coeffs.iter().zip(basis) {
        if *b != 0.0 {
            c += coef * *b;
        }
    }
    c
}

/// RGB radiance seen along unit direction `d`.
pub fn sh_radiance(radiance: &RadianceCoeffs, d: &Vector3<f64>, max_degree: usize) -> Vector3<f64> {
    sh_raw(radiance, &sh_basis(d, max_degree)).map(|c| c.max(0.0))
}

/// Accumulates `dL/dcoeffs` for one evaluation given `dL/d(rgb)`.
pub fn sh_radiance_backward(
    radiance: &RadianceCoeffs,
    basis: &[f64; SH_COEFFS],
    d_rgb: &Vector3<f64>,
    out: &mut [Vector3<f64>; SH_COEFFS],
) {
    let raw = sh_raw(radiance, basis);
    let gated = Vector3::from_fn(|c, _| if raw[c] > 0.0 { d_rgb[c] } else { 0.0 });
    for (slot, b) in out.iter_mut().zip(basis) {
        if *b != 0.0 {
            *slot += gated * *b;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_coefficients_give_offset() {
        let c = sh_radiance(&RadianceCoeffs::zeros(), &Vector3::z(), 3);
        assert_eq!(c, Vector3::repeat(0.5));
    }

    #[test]
    fn dc_term_is_isotropic() {
        let mut r = RadianceCoeffs::zeros();
        r.coeffs[0] = Vector3::new(0.4, -0.2, 1.0);
        let expected = r.coeffs[0] * SH_C0 + Vector3::repeat(0.5);
        for d in [Vector3::x(), -Vector3::y(), Vector3::new(1.0, 1.0, 1.0).normalize()] {
            assert_relative_eq!(sh_radiance(&r, &d, 3), expected, epsilon = 1e-15);
        }
    }

    #[test]
    fn odd_degree_one_term_flips() {
        let mut r = RadianceCoeffs::zeros();
        r.coeffs[2] = Vector3::repeat(0.3);
        let up = sh_radiance(&r, &Vector3::z(), 3);
        let down = sh_radiance(&r, &-Vector3::z(), 3);
        let contribution = 0.3 * SH_C1;
        assert_relative_eq!(up - down, Vector3::repeat(2.0 * contribution), epsilon = 1e-15);
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn basis_is_orthonormal() {
        // Fibonacci-sphere quadrature of ∫ Y_i Y_j dΩ.
        let n = 20_000;
        let mut gram = [[0.0f64; SH_COEFFS]; SH_COEFFS];
        let golden = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
        for i in 0..n {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            let b = sh_basis(&Vector3::new(r * phi.cos(), r * phi.sin(), z), 3);
            for a in 0..SH_COEFFS {
                for c in 0..SH_COEFFS {
                    gram[a][c] += b[a] * b[c];
                }
            }
        }
        let w = 4.0 * std::f64::consts::PI / n as f64;
        for a in 0..SH_COEFFS {
            for c in 0..SH_COEFFS {
                let expected = if a == c { 1.0 } else { 0.0 };
                assert!(
                    (gram[a][c] * w - expected).abs() < 2e-3,
                    "({a},{c}) = {}",
                    gram[a][c] * w
                );
            }
        }
    }

    #[test]
    fn negative_color_clamps_and_blocks_gradient() {
        let mut r = RadianceCoeffs::zeros();
        r.coeffs[0] = Vector3::new(-10.0, 0.0, 0.0);
        let d = Vector3::z();
        assert_eq!(sh_radiance(&r, &d, 3).x, 0.0);
        let mut g = [Vector3::zeros(); SH_COEFFS];
        sh_radiance_backward(&r, &sh_basis(&d, 3), &Vector3::repeat(1.0), &mut g);
        assert_eq!(g[0].x, 0.0);
        assert_relative_eq!(g[0].y, SH_C0);
    }
}
