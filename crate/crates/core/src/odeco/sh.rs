//! Real orthonormal spherical harmonics for bands 0, 2 and 4, without the
//! Condon-Shortley phase, and an exact product quadrature on the sphere.

use std::f64::consts::PI;

use nalgebra::Vector3;

/// Number of coefficients over bands {0, 2, 4}.
pub const NUM_COEFFS: usize = 15;

/// (band, offset) of each band block in a coefficient vector.
pub const BANDS: [(usize, usize); 3] = [(0, 0), (2, 1), (4, 6)];

/// Global coefficient index of `(l, m)`.
pub const fn index(l: usize, m: i32) -> usize {
    let offset = match l {
        0 => 0,
        2 => 1,
        _ => 6,
    };
    (offset + l as i32 + m) as usize
}

/// Evaluates all 15 basis functions at a unit direction.
pub fn eval_basis(d: &Vector3<f64>) -> [f64; NUM_COEFFS] {
    let (x, y, z) = (d.x, d.y, d.z);
    // Re/Im of (x + iy)^m for m = 0..=4.
    let mut re = [1.0; 5];
    let mut im = [0.0; 5];
    for m in 1..5 {
        re[m] = re[m - 1] * x - im[m - 1] * y;
        im[m] = re[m - 1] * y + im[m - 1] * x;
    }
    let mut out = [0.0; NUM_COEFFS];
    for (l, _) in BANDS {
        for m in 0..=l {
            let p = legendre_reduced(l, m, z);
            let k = norm_factor(l, m);
            if m == 0 {
                out[index(l, 0)] = k * p;
            } else {
                let s = std::f64::consts::SQRT_2 * k * p;
                out[index(l, m as i32)] = s * re[m];
                out[index(l, -(m as i32))] = s * im[m];
            }
        }
    }
    out
}

/// `P_l^m(z) / (1 - z^2)^(m/2)` without the Condon-Shortley phase.
fn legendre_reduced(l: usize, m: usize, z: f64) -> f64 {
    let mut pmm = 1.0;
    for k in 1..=m {
        pmm *= (2 * k - 1) as f64;
    }
    if l == m {
        return pmm;
    }
    let mut prev = pmm;
    let mut cur = z * (2 * m + 1) as f64 * pmm;
    for ll in (m + 2)..=l {
        let next = ((2 * ll - 1) as f64 * z * cur - (ll + m - 1) as f64 * prev) / (ll - m) as f64;
        prev = cur;
        cur = next;
    }
    cur
}

fn norm_factor(l: usize, m: usize) -> f64 {
    let mut ratio = 1.0;
    for k in (l - m + 1)..=(l + m) {
        ratio /= k as f64;
    }
    ((2 * l + 1) as f64 / (4.0 * PI) * ratio).sqrt()
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// Product rule (Gauss-Legendre in z, uniform in azimuth). With the default
/// sizes it integrates spherical polynomials up to degree 19 exactly.
pub fn sphere_quadrature() -> Vec<(Vector3<f64>, f64)> {
    const NZ: usize = 10;
    const NPHI: usize = 20;
    let mut out = Vec::with_capacity(NZ * NPHI);
    for (z, wz) in gauss_legendre(NZ) {
        let r = (1.0 - z * z).sqrt();
        for k in 0..NPHI {
            let phi = 2.0 * PI * k as f64 / NPHI as f64;
            out.push((Vector3::new(r * phi.cos(), r * phi.sin(), z), wz * 2.0 * PI / NPHI as f64));
        }
    }
    out
}
