use std::ops::Mul;

use nalgebra::{Matrix3, SMatrix, SVector, Vector3};

use super::sh::{self, NUM_COEFFS};

pub type Coeffs = SVector<f64, NUM_COEFFS>;
pub type Band2 = SMatrix<f64, 5, 5>;
pub type Band4 = SMatrix<f64, 9, 9>;
pub type Dense15 = SMatrix<f64, NUM_COEFFS, NUM_COEFFS>;

/// Rotation of SH coefficients, stored as its band-2 and band-4 blocks (band
/// 0 is always the identity).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandRotation {
    pub band2: Band2,
    pub band4: Band4,
}

impl BandRotation {
    pub fn identity() -> Self {
        Self {
            band2: Band2::identity(),
            band4: Band4::identity(),
        }
    }

    /// Analytic rotation by `angle` about z: each (m, -m) pair mixes by
    /// cos(m angle), sin(m angle).
    pub fn about_z(angle: f64) -> Self {
        fn block<const N: usize>(l: usize, angle: f64) -> SMatrix<f64, N, N> {
            let mut b = SMatrix::<f64, N, N>::identity();
            for m in 1..=l {
                let (s, c) = (m as f64 * angle).sin_cos();
                let (p, q) = (l + m, l - m);
                b[(p, p)] = c;
                b[(p, q)] = -s;
                b[(q, p)] = s;
                b[(q, q)] = c;
            }
            b
        }
        Self {
            band2: block::<5>(2, angle),
            band4: block::<9>(4, angle),
        }
    }

    /// Coefficient action of a 3x3 rotation `r`: `(D f)(d) = f(r^T d)`,
    /// computed by exact quadrature projection.
    pub fn from_matrix3(r: &Matrix3<f64>) -> Self {
        let mut dense = Dense15::zeros();
        for (d, w) in sh::sphere_quadrature() {
            let ya = sh::eval_basis(&d);
            let yb = sh::eval_basis(&(r.transpose() * d));
            for a in 0..NUM_COEFFS {
                for b in 0..NUM_COEFFS {
                    dense[(a, b)] += w * ya[a] * yb[b];
                }
            }
        }
        Self::from_dense(&dense)
    }

    pub fn from_dense(m: &Dense15) -> Self {
        Self {
            band2: m.fixed_view::<5, 5>(1, 1).into_owned(),
            band4: m.fixed_view::<9, 9>(6, 6).into_owned(),
        }
    }

    pub fn to_dense(&self) -> Dense15 {
        let mut m = Dense15::zeros();
        m[(0, 0)] = 1.0;
        m.fixed_view_mut::<5, 5>(1, 1).copy_from(&self.band2);
        m.fixed_view_mut::<9, 9>(6, 6).copy_from(&self.band4);
        m
    }

    pub fn transpose(&self) -> Self {
        Self {
            band2: self.band2.transpose(),
            band4: self.band4.transpose(),
        }
    }

    pub fn apply(&self, v: &Coeffs) -> Coeffs {
        let mut out = Coeffs::zeros();
        out[0] = v[0];
        let b2 = self.band2 * v.fixed_rows::<5>(1);
        let b4 = self.band4 * v.fixed_rows::<9>(6);
        out.fixed_rows_mut::<5>(1).copy_from(&b2);
        out.fixed_rows_mut::<9>(6).copy_from(&b4);
        out
    }

    pub fn apply_transpose(&self, v: &Coeffs) -> Coeffs {
        let mut out = Coeffs::zeros();
        out[0] = v[0];
        let b2 = self.band2.tr_mul(&v.fixed_rows::<5>(1));
        let b4 = self.band4.tr_mul(&v.fixed_rows::<9>(6));
        out.fixed_rows_mut::<5>(1).copy_from(&b2);
        out.fixed_rows_mut::<9>(6).copy_from(&b4);
        out
    }
}

impl Mul for BandRotation {
    type Output = BandRotation;

    fn mul(self, rhs: BandRotation) -> BandRotation {
        BandRotation {
            band2: self.band2 * rhs.band2,
            band4: self.band4 * rhs.band4,
        }
    }
}

impl Mul for &BandRotation {
    type Output = BandRotation;

    fn mul(self, rhs: &BandRotation) -> BandRotation {
        BandRotation {
            band2: self.band2 * rhs.band2,
            band4: self.band4 * rhs.band4,
        }
    }
}

/// Rotation by `angle` about x in 3-space (right-handed).
pub fn rot_x(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

pub fn rot_y(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

pub fn rot_z(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// `Rx(tx) Ry(ty) Rz(tz)`, the 3-space counterpart of the coefficient
/// rotation with the same Euler triple.
pub fn euler_matrix(theta: [f64; 3]) -> Matrix3<f64> {
    rot_x(theta[0]) * rot_y(theta[1]) * rot_z(theta[2])
}

/// Inverse of [`euler_matrix`]; at gimbal lock the z angle is set to 0.
pub fn euler_from_matrix(r: &Matrix3<f64>) -> [f64; 3] {
    let sy = r[(0, 2)].clamp(-1.0, 1.0);
    let ty = sy.asin();
    if sy.abs() < 1.0 - 1e-12 {
        let tx = (-r[(1, 2)]).atan2(r[(2, 2)]);
        let tz = (-r[(0, 1)]).atan2(r[(0, 0)]);
        [tx, ty, tz]
    } else {
        let tx = r[(2, 1)].atan2(r[(1, 1)]);
        [tx, ty, 0.0]
    }
}

/// Minimal-angle rotation taking z to the unit vector `n`; for `n` near -z
/// the fixed half turn about x.
pub fn rotation_z_to(n: &Vector3<f64>) -> Matrix3<f64> {
    let z = Vector3::z();
    let c = n.dot(&z);
    if c < -1.0 + 1e-9 {
        return rot_x(std::f64::consts::PI);
    }
    let axis = z.cross(n);
    let s = axis.norm();
    if s < 1e-15 {
        return Matrix3::identity();
    }
    let k = axis / s;
    let kx = k.cross_matrix();
    Matrix3::identity() + kx * s + kx * kx * (1.0 - c)
}
