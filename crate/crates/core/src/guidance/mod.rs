//! User guidance: stretch targets, hard constraints and orientation locks.
//!
//! Guidance files are JSON documents:
//!
//! ```json
//! {
//!   "version": 1,
//!   "soft_lambda": [{ "vertex": 7, "lambda": [3.0, 1.0, null], "weight": 2.0 }],
//!   "hard_lambda": [{ "vertex": 3, "lambda": [1.0, 1.0, 1.0] }],
//!   "hard_tensor": [{ "vertex": 5, "theta": [0.0, 0.0, 0.3], "lambda": [2.0, 1.0, 1.0] }],
//!   "corner_overrides": [{ "vertex": 9, "tangent": [1.0, 0.0, 0.0] }],
//!   "options": { "normal_lock": true, "feature_lock": true, "feature_angle": 40.0, "guidance_domain": "sparse" }
//! }
//! ```
//!
//! Every section is optional. A `null` soft-lambda component is left free.

mod derived;

use std::cell::Cell;
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize};

use crate::energy::LambdaTarget;
use crate::error::{Error, Result};
use crate::mesh::{BoundaryData, FeatureData, TetMesh, Vec3, DEFAULT_FEATURE_ANGLE_DEG};

pub use derived::{
    curvature_guidance, curvature_ratio, field_from_vtk, field_guidance, FieldInit, ValueMap, DEGENERATE_NUDGE,
};

pub const GUIDANCE_VERSION: u32 = 1;

/// Which vertices the stretch penalty covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuidanceDomain {
    /// Only vertices with a user target.
    #[default]
    Sparse,
    /// Every free vertex, using the diffused stretch as its target.
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GuidanceOptions {
    pub normal_lock: bool,
    pub feature_lock: bool,
    pub feature_angle: f64,
    pub guidance_domain: GuidanceDomain,
}

impl Default for GuidanceOptions {
    fn default() -> Self {
        Self {
            normal_lock: true,
            feature_lock: true,
            feature_angle: DEFAULT_FEATURE_ANGLE_DEG,
            guidance_domain: GuidanceDomain::Sparse,
        }
    }
}

thread_local! {
    static VERTEX_LIMIT: Cell<usize> = const { Cell::new(usize::MAX) };
}

/// Vertex index checked against the mesh size while deserializing, so range
/// errors carry the file position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
struct VertexIndex(usize);

impl<'de> Deserialize<'de> for VertexIndex {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = usize::deserialize(d)?;
        let limit = VERTEX_LIMIT.with(Cell::get);
        if v >= limit {
            return Err(serde::de::Error::custom(format!(
                "vertex {v} out of range (mesh has {limit} vertices)"
            )));
        }
        Ok(VertexIndex(v))
    }
}

fn positive<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<[f64; 3], D::Error> {
    let l = <[f64; 3]>::deserialize(d)?;
    if l.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(serde::de::Error::custom(format!("stretch ratios must be positive, got {l:?}")));
    }
    Ok(l)
}

fn positive_or_free<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<[Option<f64>; 3], D::Error> {
    let l = <[Option<f64>; 3]>::deserialize(d)?;
    if l.iter().flatten().any(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(serde::de::Error::custom(format!("stretch ratios must be positive, got {l:?}")));
    }
    Ok(l)
}

fn default_weight() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SoftEntry {
    vertex: VertexIndex,
    #[serde(deserialize_with = "positive_or_free")]
    lambda: [Option<f64>; 3],
    #[serde(default = "default_weight")]
    weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HardLambdaEntry {
    vertex: VertexIndex,
    #[serde(deserialize_with = "positive")]
    lambda: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HardTensorEntry {
    vertex: VertexIndex,
    theta: [f64; 3],
    #[serde(deserialize_with = "positive")]
    lambda: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CornerEntry {
    vertex: VertexIndex,
    #[serde(default)]
    tangent: Option<[f64; 3]>,
}

/// On-disk guidance document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GuidanceFile {
    version: u32,
    #[serde(default)]
    soft_lambda: Vec<SoftEntry>,
    #[serde(default)]
    hard_lambda: Vec<HardLambdaEntry>,
    #[serde(default)]
    hard_tensor: Vec<HardTensorEntry>,
    #[serde(default)]
    corner_overrides: Vec<CornerEntry>,
    #[serde(default)]
    pub options: GuidanceOptions,
}

impl Default for GuidanceFile {
    fn default() -> Self {
        Self {
            version: GUIDANCE_VERSION,
            soft_lambda: Vec::new(),
            hard_lambda: Vec::new(),
            hard_tensor: Vec::new(),
            corner_overrides: Vec::new(),
            options: GuidanceOptions::default(),
        }
    }
}

impl GuidanceFile {
    /// Parses a guidance document, rejecting vertex indices `>= num_vertices`.
    pub fn parse(text: &str, num_vertices: usize) -> std::result::Result<Self, serde_json::Error> {
        struct Reset(usize);
        impl Drop for Reset {
            fn drop(&mut self) {
                VERTEX_LIMIT.with(|c| c.set(self.0));
            }
        }
        let _reset = Reset(VERTEX_LIMIT.with(|c| c.replace(num_vertices)));
        let file: GuidanceFile = serde_json::from_str(text)?;
        if file.version != GUIDANCE_VERSION {
            return Err(serde::de::Error::custom(format!(
                "unsupported guidance version {} (expected {GUIDANCE_VERSION})",
                file.version
            )));
        }
        Ok(file)
    }

    pub fn load(path: &Path, num_vertices: usize) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, num_vertices).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("guidance serializes")
    }

    /// Corner overrides as `(vertex, tangent)` pairs.
    pub fn corner_overrides(&self) -> Vec<(usize, Option<Vec3>)> {
        self.corner_overrides
            .iter()
            .map(|c| (c.vertex.0, c.tangent.map(Vec3::from)))
            .collect()
    }
}

/// A fully prescribed tensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardTensor {
    pub theta: [f64; 3],
    pub lambda: [f64; 3],
}

/// Boundary geometry shared by guidance construction and the solver.
#[derive(Debug, Clone)]
pub struct SurfaceInfo {
    pub boundary: BoundaryData,
    pub features: FeatureData,
}

impl SurfaceInfo {
    pub fn new(mesh: &TetMesh, feature_angle_deg: f64) -> Result<Self> {
        let boundary = BoundaryData::build(mesh)?;
        let features = boundary.detect_features(mesh, feature_angle_deg);
        Ok(Self { boundary, features })
    }
}

/// Validated per-vertex guidance.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConstraintSet {
    pub soft_lambda: BTreeMap<usize, LambdaTarget>,
    pub hard_lambda: BTreeMap<usize, [f64; 3]>,
    pub hard_tensor: BTreeMap<usize, HardTensor>,
    /// Boundary vertices whose z lobe follows the stored unit normal.
    pub normal_locked: BTreeMap<usize, Vec3>,
    /// Feature vertices whose z lobe follows the stored unit tangent.
    pub feature_locked: BTreeMap<usize, Vec3>,
    /// Corners whose orientation is frozen to the stored tangent.
    pub corner_locked: BTreeMap<usize, Vec3>,
    pub corner_overrides: BTreeMap<usize, Option<Vec3>>,
    pub options: GuidanceOptions,
}

impl ConstraintSet {
    /// Default locks only: every boundary vertex normal-, feature- or
    /// corner-locked according to `options`.
    pub fn defaults(mesh: &TetMesh, surface: &SurfaceInfo, options: GuidanceOptions) -> Self {
        let mut set = ConstraintSet {
            options,
            ..Default::default()
        };
        set.assign_locks(mesh, surface);
        set
    }

    /// Builds constraints from a parsed file. Corner overrides are applied to
    /// `surface.features` in place.
    pub fn from_file(mesh: &TetMesh, surface: &mut SurfaceInfo, file: &GuidanceFile) -> Result<Self> {
        let mut set = ConstraintSet {
            options: file.options,
            ..Default::default()
        };
        let mut owner: BTreeMap<usize, &'static str> = BTreeMap::new();
        let mut claim = |v: usize, section: &'static str| match owner.insert(v, section) {
            Some(prev) => Err(Error::Guidance(format!(
                "vertex {v} appears in both {prev} and {section}"
            ))),
            None => Ok(()),
        };
        for e in &file.soft_lambda {
            claim(e.vertex.0, "soft_lambda")?;
            if !(e.weight.is_finite() && e.weight > 0.0) {
                return Err(Error::Guidance(format!("vertex {}: weight must be positive", e.vertex.0)));
            }
            let value = e.lambda.map(|l| l.unwrap_or(0.0));
            let mask = e.lambda.map(|l| l.is_some());
            set.soft_lambda.insert(
                e.vertex.0,
                LambdaTarget {
                    value,
                    mask,
                    weight: e.weight,
                },
            );
        }
        for e in &file.hard_lambda {
            claim(e.vertex.0, "hard_lambda")?;
            set.hard_lambda.insert(e.vertex.0, e.lambda);
        }
        for e in &file.hard_tensor {
            claim(e.vertex.0, "hard_tensor")?;
            set.hard_tensor.insert(
                e.vertex.0,
                HardTensor {
                    theta: e.theta,
                    lambda: e.lambda,
                },
            );
        }
        for (v, t) in file.corner_overrides() {
            if let Some(t) = t {
                if t.norm() < 1e-12 {
                    return Err(Error::Guidance(format!("corner {v}: zero tangent")));
                }
            }
            if !mesh.is_boundary(v) {
                return Err(Error::Guidance(format!("corner override {v} is not a boundary vertex")));
            }
            set.corner_overrides.insert(v, t.map(|t| t.normalize()));
        }
        surface
            .features
            .add_corners(set.corner_overrides.iter().map(|(&v, &t)| (v, t)));
        set.assign_locks(mesh, surface);
        Ok(set)
    }

    fn assign_locks(&mut self, mesh: &TetMesh, surface: &SurfaceInfo) {
        self.normal_locked.clear();
        self.feature_locked.clear();
        self.corner_locked.clear();
        for v in 0..mesh.num_vertices() {
            if !mesh.is_boundary(v) || self.hard_tensor.contains_key(&v) {
                continue;
            }
            let tangent = surface.features.tangents.get(v).copied().flatten();
            match tangent {
                Some(t) if self.options.feature_lock && surface.features.is_corner(v) => {
                    self.corner_locked.insert(v, t);
                }
                Some(t) if self.options.feature_lock => {
                    self.feature_locked.insert(v, t);
                }
                _ if self.options.normal_lock => {
                    self.normal_locked.insert(v, surface.boundary.normal(v));
                }
                _ => {}
            }
        }
    }

    /// Serializable form; `from_file(to_file())` reproduces this set.
    pub fn to_file(&self) -> GuidanceFile {
        GuidanceFile {
            version: GUIDANCE_VERSION,
            soft_lambda: self
                .soft_lambda
                .iter()
                .map(|(&v, t)| SoftEntry {
                    vertex: VertexIndex(v),
                    lambda: [0, 1, 2].map(|c| t.mask[c].then_some(t.value[c])),
                    weight: t.weight,
                })
                .collect(),
            hard_lambda: self
                .hard_lambda
                .iter()
                .map(|(&v, &lambda)| HardLambdaEntry {
                    vertex: VertexIndex(v),
                    lambda,
                })
                .collect(),
            hard_tensor: self
                .hard_tensor
                .iter()
                .map(|(&v, h)| HardTensorEntry {
                    vertex: VertexIndex(v),
                    theta: h.theta,
                    lambda: h.lambda,
                })
                .collect(),
            corner_overrides: self
                .corner_overrides
                .iter()
                .map(|(&v, t)| CornerEntry {
                    vertex: VertexIndex(v),
                    tangent: t.map(|t| [t.x, t.y, t.z]),
                })
                .collect(),
            options: self.options,
        }
    }

    /// Adds soft targets (for example from curvature guidance) for vertices
    /// that carry no other stretch constraint. Returns how many were added.
    pub fn add_soft_targets(&mut self, targets: impl IntoIterator<Item = (usize, LambdaTarget)>) -> usize {
        let mut added = 0;
        for (v, t) in targets {
            if self.hard_lambda.contains_key(&v) || self.hard_tensor.contains_key(&v) {
                continue;
            }
            if let std::collections::btree_map::Entry::Vacant(e) = self.soft_lambda.entry(v) {
                e.insert(t);
                added += 1;
            }
        }
        added
    }

    /// Vertices carrying any stretch value (soft, hard or from a hard tensor),
    /// used as diffusion sources.
    pub fn lambda_sources(&self) -> BTreeMap<usize, ([f64; 3], [bool; 3])> {
        let mut out = BTreeMap::new();
        for (&v, t) in &self.soft_lambda {
            out.insert(v, (t.value, t.mask));
        }
        for (&v, &l) in &self.hard_lambda {
            out.insert(v, (l, [true; 3]));
        }
        for (&v, h) in &self.hard_tensor {
            out.insert(v, (h.lambda, [true; 3]));
        }
        out
    }
}

/// Reads a guidance file and builds the constraint set in one step.
pub fn parse_guidance(path: &Path, mesh: &TetMesh, surface: &mut SurfaceInfo) -> Result<ConstraintSet> {
    let file = GuidanceFile::load(path, mesh.num_vertices())?;
    ConstraintSet::from_file(mesh, surface, &file)
}
