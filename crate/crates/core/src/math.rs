//! Small linear-algebra helpers shared by the particle and camera code.

use nalgebra::{Matrix2, Matrix3, Vector4};

/// Rotation matrix of a unit quaternion stored as `(w, x, y, z)`.
pub fn quat_to_rotation(q: &Vector4<f64>) -> Matrix3<f64> {
    let (w, x, y, z) = (q[0], q[1], q[2], q[3]);
    Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    )
}

/// Partial derivatives of [`quat_to_rotation`] with respect to `w, x, y, z`.
pub fn quat_rotation_partials(q: &Vector4<f64>) -> [Matrix3<f64>; 4] {
    let (w, x, y, z) = (q[0], q[1], q[2], q[3]);
    [
        Matrix3::new(0.0, -z, y, z, 0.0, -x, -y, x, 0.0) * 2.0,
        Matrix3::new(0.0, y, z, y, -2.0 * x, -w, z, w, -2.0 * x) * 2.0,
        Matrix3::new(-2.0 * y, x, w, x, 0.0, z, -w, z, -2.0 * y) * 2.0,
        Matrix3::new(-2.0 * z, -w, x, w, -2.0 * z, y, x, y, 0.0) * 2.0,
    ]
}

/// Gradient of `L(R(q / |q|))` with respect to `q`, given `dL/dR` and a
/// (possibly non-unit) quaternion.
pub fn quat_gradient(q: &Vector4<f64>, d_rot: &Matrix3<f64>) -> Vector4<f64> {
    let norm = q.norm();
    let unit = q / norm;
    let partials = quat_rotation_partials(&unit);
    let g_unit = Vector4::from_fn(|k, _| partials[k].component_mul(d_rot).sum());
    // d(q/|q|)/dq = (I - q̂ q̂ᵀ) / |q|
    (g_unit - unit * unit.dot(&g_unit)) / norm
}

/// Eigenvalues of a symmetric 2x2 matrix, largest first.
pub fn sym2_eigenvalues(m: &Matrix2<f64>) -> (f64, f64) {
    let mid = 0.5 * (m[(0, 0)] + m[(1, 1)]);
    let half_diff = 0.5 * (m[(0, 0)] - m[(1, 1)]);
    let off = 0.5 * (m[(0, 1)] + m[(1, 0)]);
    let radius = (half_diff * half_diff + off * off).sqrt();
    (mid + radius, mid - radius)
}
