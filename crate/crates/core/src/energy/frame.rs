use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::odeco::{euler_matrix, rot_z, rotation_operator, tables, AlgebraTables, AxisRotation, OdecoVec};

/// How a vertex's orientation is constrained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VertexClass {
    /// Full orientation (three Euler angles) and stretch.
    Interior,
    /// z lobe locked to the surface normal; one twist angle.
    Boundary,
    /// z lobe locked to a sharp-edge tangent; one twist angle.
    FeatureEdge,
    /// Orientation frozen to one incident feature tangent; stretch only.
    Corner,
    /// Tensor fully prescribed.
    HardFixed,
}

impl VertexClass {
    pub fn theta_slots(self) -> &'static [usize] {
        match self {
            VertexClass::Interior => &[0, 1, 2],
            VertexClass::Boundary | VertexClass::FeatureEdge => &[2],
            VertexClass::Corner | VertexClass::HardFixed => &[],
        }
    }

    /// Whether the vertex carries a fixed axis rotation.
    pub fn is_axis_aligned(self) -> bool {
        matches!(self, VertexClass::Boundary | VertexClass::FeatureEdge | VertexClass::Corner)
    }
}

/// Per-vertex degrees of freedom.
///
/// `theta` always has three slots; only the slots listed by
/// [`VertexClass::theta_slots`] are free. Axis-aligned classes use `theta[2]`
/// as the twist about the locked axis.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexFrame {
    pub class: VertexClass,
    pub theta: [f64; 3],
    pub lambda: [f64; 3],
    /// Components of `lambda` held fixed by hard constraints.
    pub lambda_locked: [bool; 3],
    pub axis: Option<AxisRotation>,
    fixed: Option<OdecoVec>,
}

impl VertexFrame {
    pub fn interior(theta: [f64; 3], lambda: [f64; 3]) -> Self {
        Self {
            class: VertexClass::Interior,
            theta,
            lambda,
            lambda_locked: [false; 3],
            axis: None,
            fixed: None,
        }
    }

    /// A boundary, feature-edge or corner frame whose z lobe follows `axis`.
    pub fn aligned(class: VertexClass, axis: AxisRotation, theta_z: f64, lambda: [f64; 3]) -> Self {
        assert!(class.is_axis_aligned(), "{class:?} does not carry an axis rotation");
        Self {
            class,
            theta: [0.0, 0.0, theta_z],
            lambda,
            lambda_locked: [false; 3],
            axis: Some(axis),
            fixed: None,
        }
    }

    pub fn hard_fixed(theta: [f64; 3], lambda: [f64; 3]) -> Self {
        let tensor = OdecoVec(rotation_operator(theta).apply(&tables().canonical(&lambda)));
        Self {
            class: VertexClass::HardFixed,
            theta,
            lambda,
            lambda_locked: [true; 3],
            axis: None,
            fixed: Some(tensor),
        }
    }

    pub fn num_dof(&self) -> usize {
        match self.class {
            VertexClass::HardFixed => 0,
            c => c.theta_slots().len() + self.lambda_locked.iter().filter(|l| !**l).count(),
        }
    }

    /// 3x3 rotation whose columns are the tensor's lobe axes, paired with `lambda`.
    pub fn rotation3(&self) -> Matrix3<f64> {
        match (&self.axis, self.class) {
            (Some(axis), _) => axis.matrix3 * rot_z(self.theta[2]),
            _ => euler_matrix(self.theta),
        }
    }

    pub fn realize(&self) -> OdecoVec {
        self.realize_with(tables())
    }

    pub(crate) fn realize_with(&self, t: &AlgebraTables) -> OdecoVec {
        if let Some(f) = self.fixed {
            return f;
        }
        let canonical = t.canonical(&self.lambda);
        match &self.axis {
            Some(axis) => OdecoVec(axis.band.apply(&t.exp_z(self.theta[2]).apply(&canonical))),
            None => OdecoVec(t.rotation(self.theta).apply(&canonical)),
        }
    }
}
