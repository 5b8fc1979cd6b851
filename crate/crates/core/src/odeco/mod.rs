//! Spherical-harmonic representation of orthogonally decomposable (odeco)
//! fourth-order tensors.
//!
//! A tensor is stored as 15 real SH coefficients over bands 0, 2 and 4. The
//! axis-aligned tensor with stretching ratios `lambda` is `B lambda`, where
//! `B` projects `x^4`, `y^4`, `z^4` onto the basis; orientations act through
//! band-block rotations `exp(tx Lx) exp(ty Ly) exp(tz Lz)`.
//!
//! Rotations act on functions by `(D f)(d) = f(R^T d)`, so `D` is a group
//! homomorphism and the generators satisfy `[Lx, Ly] = Lz` (and cyclic).

mod cache;
mod convert;
mod rotation;
pub mod sh;

use std::ops::{Add, Mul, Sub};
use std::sync::OnceLock;

use nalgebra::{Matrix3, SMatrix, Vector3};

use crate::error::{Error, Result};

pub use convert::{from_symmetric_matrix, from_symmetric_matrix_near, glyph_frame, symmetric_matrix};
pub use rotation::{
    euler_from_matrix, euler_matrix, rot_x, rot_y, rot_z, rotation_z_to, Band2, Band4, BandRotation, Coeffs,
    Dense15,
};
pub use sh::NUM_COEFFS;

/// Sign `c` in `[Lx, Ly] = c Lz` for our rotation convention.
pub const COMMUTATOR_SIGN: f64 = 1.0;

/// One odeco tensor as 15 SH coefficients (band 0, band 2 with m = -2..2,
/// band 4 with m = -4..4).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdecoVec(pub Coeffs);

impl OdecoVec {
    pub fn zeros() -> Self {
        OdecoVec(Coeffs::zeros())
    }

    pub fn coeffs(&self) -> &Coeffs {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn norm_squared(&self) -> f64 {
        self.0.norm_squared()
    }

    /// Coefficients of band `l` (0, 2 or 4).
    pub fn band(&self, l: usize) -> &[f64] {
        let (start, len) = match l {
            0 => (0, 1),
            2 => (1, 5),
            4 => (6, 9),
            _ => panic!("odeco tensors only occupy bands 0, 2 and 4"),
        };
        &self.0.as_slice()[start..start + len]
    }

    pub fn rotated(&self, r: &BandRotation) -> Self {
        OdecoVec(r.apply(&self.0))
    }

    /// Value of the degree-4 polynomial at a unit direction.
    pub fn evaluate(&self, dir: &Vector3<f64>) -> f64 {
        evaluate_polynomial(self, dir)
    }
}

impl Add for OdecoVec {
    type Output = OdecoVec;
    fn add(self, rhs: OdecoVec) -> OdecoVec {
        OdecoVec(self.0 + rhs.0)
    }
}

impl Sub for OdecoVec {
    type Output = OdecoVec;
    fn sub(self, rhs: OdecoVec) -> OdecoVec {
        OdecoVec(self.0 - rhs.0)
    }
}

impl Mul<f64> for OdecoVec {
    type Output = OdecoVec;
    fn mul(self, s: f64) -> OdecoVec {
        OdecoVec(self.0 * s)
    }
}

pub type StretchBasis = SMatrix<f64, NUM_COEFFS, 3>;

/// Angular momentum operators and the stretch basis, computed once.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraTables {
    /// `B`: maps `lambda` to canonical coefficients.
    pub stretch: StretchBasis,
    pub lx: Dense15,
    pub ly: Dense15,
    pub lz: Dense15,
    /// Coefficient rotation taking z to x (quarter turn about y).
    pub z_to_x: BandRotation,
    /// Coefficient rotation taking z to y (quarter turn about -x).
    pub z_to_y: BandRotation,
}

impl AlgebraTables {
    pub fn build() -> Self {
        let quad = sh::sphere_quadrature();
        let mut stretch = StretchBasis::zeros();
        for (d, w) in &quad {
            let y = sh::eval_basis(d);
            let mono = [d.x.powi(4), d.y.powi(4), d.z.powi(4)];
            for k in 0..NUM_COEFFS {
                for (c, m) in mono.iter().enumerate() {
                    stretch[(k, c)] += w * y[k] * m;
                }
            }
        }
        let mut lz = Dense15::zeros();
        for (l, _) in sh::BANDS {
            for m in 1..=l as i32 {
                lz[(sh::index(l, m), sh::index(l, -m))] = -(m as f64);
                lz[(sh::index(l, -m), sh::index(l, m))] = m as f64;
            }
        }
        let half = std::f64::consts::FRAC_PI_2;
        let z_to_x = BandRotation::from_matrix3(&rot_y(half));
        let z_to_y = BandRotation::from_matrix3(&rot_x(-half));
        let conj = |q: &BandRotation| {
            let qd = q.to_dense();
            qd * lz * qd.transpose()
        };
        let lx = conj(&z_to_x);
        let ly = conj(&z_to_y);
        Self {
            stretch,
            lx,
            ly,
            lz,
            z_to_x,
            z_to_y,
        }
    }

    pub fn canonical(&self, lambda: &[f64; 3]) -> Coeffs {
        self.stretch * Vector3::from(*lambda)
    }

    pub fn exp_x(&self, angle: f64) -> BandRotation {
        if angle == 0.0 {
            return BandRotation::identity();
        }
        let q = &self.z_to_x;
        q * &(BandRotation::about_z(angle) * q.transpose())
    }

    pub fn exp_y(&self, angle: f64) -> BandRotation {
        if angle == 0.0 {
            return BandRotation::identity();
        }
        let q = &self.z_to_y;
        q * &(BandRotation::about_z(angle) * q.transpose())
    }

    pub fn exp_z(&self, angle: f64) -> BandRotation {
        BandRotation::about_z(angle)
    }

    /// `exp(tx Lx) exp(ty Ly) exp(tz Lz)`.
    pub fn rotation(&self, theta: [f64; 3]) -> BandRotation {
        let ex = self.exp_x(theta[0]);
        let ey = self.exp_y(theta[1]);
        let ez = self.exp_z(theta[2]);
        ex * (ey * ez)
    }
}

/// Process-wide tables.
pub fn tables() -> &'static AlgebraTables {
    static TABLES: OnceLock<AlgebraTables> = OnceLock::new();
    TABLES.get_or_init(AlgebraTables::build)
}

pub use cache::{load_tables, load_or_build_tables, save_tables, CACHE_VERSION};

/// Returns `(Lx, Ly, Lz)`.
pub fn angular_ops() -> (Dense15, Dense15, Dense15) {
    let t = tables();
    (t.lx, t.ly, t.lz)
}

/// 15x15 coefficient rotation for an Euler triple, as a band-block matrix.
pub fn rotation_operator(theta: [f64; 3]) -> BandRotation {
    tables().rotation(theta)
}

/// The axis-aligned tensor `B lambda`.
pub fn canonical_tensor(lambda: [f64; 3]) -> OdecoVec {
    OdecoVec(tables().canonical(&lambda))
}

/// Fixed rotation aligning a tensor's z axis with a unit vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisRotation {
    pub axis: Vector3<f64>,
    pub euler: [f64; 3],
    pub matrix3: Matrix3<f64>,
    pub band: BandRotation,
}

impl AxisRotation {
    pub fn new(axis: &Vector3<f64>) -> Result<Self> {
        if (axis.norm() - 1.0).abs() > 1e-8 {
            return Err(Error::Invalid(format!(
                "axis {axis:?} is not a unit vector (norm {})",
                axis.norm()
            )));
        }
        let r3 = rotation_z_to(axis);
        let euler = euler_from_matrix(&r3);
        Ok(Self {
            axis: *axis,
            euler,
            matrix3: euler_matrix(euler),
            band: rotation_operator(euler),
        })
    }
}

/// `R_n`: rotation taking the canonical z axis to the unit normal `n`.
pub fn normal_rotation(n: &Vector3<f64>) -> Result<BandRotation> {
    Ok(AxisRotation::new(n)?.band)
}

/// `R_n exp(tz Lz) B lambda`: a tensor whose lambda_z lobe points along `n`.
pub fn boundary_tensor(n: &Vector3<f64>, theta_z: f64, lambda: [f64; 3]) -> Result<OdecoVec> {
    let rn = normal_rotation(n)?;
    let t = tables();
    let local = t.exp_z(theta_z).apply(&t.canonical(&lambda));
    Ok(OdecoVec(rn.apply(&local)))
}

pub fn evaluate_polynomial(f: &OdecoVec, dir: &Vector3<f64>) -> f64 {
    let y = sh::eval_basis(dir);
    f.0.iter().zip(y.iter()).map(|(a, b)| a * b).sum()
}

#[cfg(test)]
mod tests;
