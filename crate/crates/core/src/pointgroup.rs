//! Finite point groups of bounded simulation boxes.
//!
//! Every group is stored as an explicit, ordered list of orthogonal matrices.
//! The element order is a fixed canonical enumeration so that orbits (and the
//! ranking realization built on them) are reproducible:
//!
//! * `Ci`: identity, inversion.
//! * `D2` (2D): identity, 180° rotation, `reflect_x` (x → −x), `reflect_y` (y → −y).
//! * `D2h`: `diag(s0, s1, s2)` with sign bit `r` of the index `k` in `0..8`
//!   selecting `s_r = −1`.
//! * `Oh`: signed permutation matrices, permutations in lexicographic order
//!   (outer loop) and sign patterns as for `D2h` (inner loop).
//! * `D4h:<axis>`: the `Oh` enumeration filtered to the elements that map the
//!   principal axis onto itself (up to sign).
//!
//! The identity is always element 0.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used to decide membership when searching the element list.
const MEMBERSHIP_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Axis> {
        match i {
            0 => Some(Axis::X),
            1 => Some(Axis::Y),
            2 => Some(Axis::Z),
            _ => None,
        }
    }

    fn letter(self) -> char {
        ['x', 'y', 'z'][self.index()]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GroupName {
    /// Identity only. Not a box symmetry; used for the non-equivariant baseline.
    C1,
    Ci,
    D2,
    D2h,
    D4h,
    Oh,
}

impl GroupName {
    pub fn as_str(self) -> &'static str {
        match self {
            GroupName::C1 => "C1",
            GroupName::Ci => "Ci",
            GroupName::D2 => "D2",
            GroupName::D2h => "D2h",
            GroupName::D4h => "D4h",
            GroupName::Oh => "Oh",
        }
    }

    /// Number of elements listed in the group catalog.
    pub fn order(self) -> usize {
        match self {
            GroupName::C1 => 1,
            GroupName::Ci => 2,
            GroupName::D2 => 4,
            GroupName::D2h => 8,
            GroupName::D4h => 16,
            GroupName::Oh => 48,
        }
    }

    /// The spatial dimension the group is defined in, if fixed.
    pub fn natural_dim(self) -> Option<usize> {
        match self {
            GroupName::C1 => None,
            GroupName::D2 => Some(2),
            _ => Some(3),
        }
    }
}

/// A catalog address such as `Oh`, `D2h` or `D4h:x`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct GroupId {
    pub name: GroupName,
    pub axis: Option<Axis>,
}

impl GroupId {
    pub const fn new(name: GroupName) -> Self {
        GroupId { name, axis: None }
    }

    pub const fn d4h(axis: Axis) -> Self {
        GroupId {
            name: GroupName::D4h,
            axis: Some(axis),
        }
    }

    /// Largest catalog group that maps an axis-aligned, origin-centered box
    /// with the given side lengths onto itself.
    pub fn for_box(sides: &[f64]) -> Result<GroupId> {
        let eq = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs());
        match sides {
            [_, _] => Ok(GroupId::new(GroupName::D2)),
            [a, b, c] => {
                let (ab, bc, ac) = (eq(*a, *b), eq(*b, *c), eq(*a, *c));
                Ok(if ab && bc {
                    GroupId::new(GroupName::Oh)
                } else if bc {
                    GroupId::d4h(Axis::X)
                } else if ac {
                    GroupId::d4h(Axis::Y)
                } else if ab {
                    GroupId::d4h(Axis::Z)
                } else {
                    GroupId::new(GroupName::D2h)
                })
            }
            _ => Err(Error::Shape(format!(
                "box must have 2 or 3 sides, got {}",
                sides.len()
            ))),
        }
    }
}

impl fmt::Display for GroupId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.axis {
            Some(axis) => write!(f, "{}:{}", self.name.as_str(), axis.letter()),
            None => f.write_str(self.name.as_str()),
        }
    }
}

impl FromStr for GroupId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let unknown = || Error::UnknownGroup(s.to_string());
        let (head, axis) = match s.split_once(':') {
            Some((h, a)) => {
                let axis = match a {
                    "x" => Axis::X,
                    "y" => Axis::Y,
                    "z" => Axis::Z,
                    _ => return Err(unknown()),
                };
                (h, Some(axis))
            }
            None => (s, None),
        };
        let name = match head {
            "C1" => GroupName::C1,
            "Ci" => GroupName::Ci,
            "D2" => GroupName::D2,
            "D2h" => GroupName::D2h,
            "D4h" => GroupName::D4h,
            "Oh" => GroupName::Oh,
            _ => return Err(unknown()),
        };
        if (name == GroupName::D4h) != axis.is_some() {
            return Err(unknown());
        }
        Ok(GroupId { name, axis })
    }
}

impl TryFrom<String> for GroupId {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<GroupId> for String {
    fn from(id: GroupId) -> String {
        id.to_string()
    }
}

/// An orthogonal `dim × dim` matrix (row-major) with a readable label.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupElement {
    matrix: Vec<f64>,
    dim: usize,
    label: String,
}

impl GroupElement {
    pub fn new(matrix: Vec<f64>, dim: usize, label: impl Into<String>) -> Result<Self> {
        if matrix.len() != dim * dim {
            return Err(Error::Shape(format!(
                "matrix has {} entries, expected {}",
                matrix.len(),
                dim * dim
            )));
        }
        Ok(GroupElement {
            matrix,
            dim,
            label: label.into(),
        })
    }

    /// Builds an element and derives its label from the geometry of the matrix.
    pub fn from_matrix(matrix: Vec<f64>, dim: usize) -> Result<Self> {
        let label = describe(&matrix, dim).unwrap_or_else(|| "element".to_string());
        GroupElement::new(matrix, dim, label)
    }

    pub fn identity(dim: usize) -> Self {
        let mut matrix = vec![0.0; dim * dim];
        for i in 0..dim {
            matrix[i * dim + i] = 1.0;
        }
        GroupElement {
            matrix,
            dim,
            label: "identity".to_string(),
        }
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.matrix[row * self.dim + col]
    }

    pub fn determinant(&self) -> f64 {
        determinant(&self.matrix, self.dim)
    }

    /// Matrix product `self · other`.
    pub fn compose(&self, other: &GroupElement) -> Vec<f64> {
        matmul(&self.matrix, &other.matrix, self.dim)
    }

    /// Multiplies a single `dim`-vector.
    pub fn apply_block(&self, v: &[f64], out: &mut [f64]) {
        let n = self.dim;
        for (r, o) in out.iter_mut().enumerate().take(n) {
            let row = &self.matrix[r * n..(r + 1) * n];
            *o = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
    }

    /// Transposed product `selfᵀ · v` for one block (the inverse action).
    pub fn apply_block_transposed(&self, v: &[f64], out: &mut [f64]) {
        let n = self.dim;
        for (c, o) in out.iter_mut().enumerate().take(n) {
            *o = (0..n).map(|r| self.matrix[r * n + c] * v[r]).sum();
        }
    }

    /// Applies the element to a feature vector. Without a layout the vector
    /// must be a stack of `dim`-blocks; with one, scalar channels pass through.
    pub fn apply(&self, v: &[f64], layout: Option<&BlockLayout>) -> Result<Vec<f64>> {
        let mut out = vec![0.0; v.len()];
        match layout {
            None => {
                if v.len() % self.dim != 0 {
                    return Err(Error::Shape(format!(
                        "vector length {} is not a multiple of {}",
                        v.len(),
                        self.dim
                    )));
                }
                for (src, dst) in v.chunks(self.dim).zip(out.chunks_mut(self.dim)) {
                    self.apply_block(src, dst);
                }
            }
            Some(layout) => {
                if layout.dim() != self.dim || layout.len() != v.len() {
                    return Err(Error::Shape(format!(
                        "layout ({} values, dim {}) does not fit vector of {} values in dim {}",
                        layout.len(),
                        layout.dim(),
                        v.len(),
                        self.dim
                    )));
                }
                let mut at = 0;
                for ch in layout.channels() {
                    match ch {
                        Channel::Geometric => {
                            self.apply_block(&v[at..at + self.dim], &mut out[at..at + self.dim]);
                            at += self.dim;
                        }
                        Channel::Scalar => {
                            out[at] = v[at];
                            at += 1;
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Channel {
    /// A `dim`-vector that transforms under the group.
    Geometric,
    /// A single invariant value.
    Scalar,
}

/// Describes how a flat feature vector splits into geometric blocks and
/// scalar channels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockLayout {
    dim: usize,
    channels: Vec<Channel>,
}

impl BlockLayout {
    pub fn new(dim: usize, channels: Vec<Channel>) -> Self {
        BlockLayout { dim, channels }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    /// Total number of values described by the layout.
    pub fn len(&self) -> usize {
        self.channels
            .iter()
            .map(|c| match c {
                Channel::Geometric => self.dim,
                Channel::Scalar => 1,
            })
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn geometric_blocks(&self) -> usize {
        self.channels
            .iter()
            .filter(|c| **c == Channel::Geometric)
            .count()
    }

    pub fn scalar_channels(&self) -> usize {
        self.channels.len() - self.geometric_blocks()
    }
}

#[derive(Clone, Debug)]
pub struct PointGroup {
    id: GroupId,
    dim: usize,
    elements: Vec<GroupElement>,
}

/// Constructs a catalog group.
pub fn make_group(name: GroupName, dim: usize, principal_axis: Option<Axis>) -> Result<PointGroup> {
    if let Some(expected) = name.natural_dim() {
        if dim != expected {
            return Err(Error::GroupDimension {
                group: name.as_str().to_string(),
                expected,
                got: dim,
            });
        }
    } else if !(1..=3).contains(&dim) {
        return Err(Error::Shape(format!("unsupported dimension {dim}")));
    }
    match (name, principal_axis) {
        (GroupName::D4h, None) => {
            return Err(Error::PrincipalAxis {
                group: "D4h".into(),
                reason: "a principal axis is required".into(),
            })
        }
        (GroupName::D4h, Some(_)) => {}
        (other, Some(_)) => {
            return Err(Error::PrincipalAxis {
                group: other.as_str().into(),
                reason: "only D4h takes a principal axis".into(),
            })
        }
        _ => {}
    }

    let matrices: Vec<Vec<f64>> = match name {
        GroupName::C1 => vec![GroupElement::identity(dim).matrix],
        GroupName::Ci => {
            let id = GroupElement::identity(dim).matrix;
            let inv = id.iter().map(|x| -x).collect();
            vec![id, inv]
        }
        GroupName::D2 => vec![
            vec![1.0, 0.0, 0.0, 1.0],
            vec![-1.0, 0.0, 0.0, -1.0],
            vec![-1.0, 0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0, -1.0],
        ],
        GroupName::D2h => (0..8)
            .map(|k| signed_permutation(&[0, 1, 2], k))
            .collect(),
        GroupName::Oh => all_signed_permutations(),
        GroupName::D4h => {
            let a = principal_axis.expect("checked above").index();
            all_signed_permutations()
                .into_iter()
                .filter(|m| m[a * 3 + a] != 0.0)
                .collect()
        }
    };

    let elements = matrices
        .into_iter()
        .map(|m| GroupElement::from_matrix(m, dim))
        .collect::<Result<Vec<_>>>()?;
    Ok(PointGroup {
        id: GroupId {
            name,
            axis: principal_axis,
        },
        dim,
        elements,
    })
}

fn signed_permutation(perm: &[usize; 3], signs: usize) -> Vec<f64> {
    let mut m = vec![0.0; 9];
    for (r, &c) in perm.iter().enumerate() {
        m[r * 3 + c] = if (signs >> r) & 1 == 1 { -1.0 } else { 1.0 };
    }
    m
}

fn all_signed_permutations() -> Vec<Vec<f64>> {
    const PERMS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    PERMS
        .iter()
        .flat_map(|p| (0..8).map(move |k| signed_permutation(p, k)))
        .collect()
}

impl PointGroup {
    /// Builds a group from a catalog id, using the id's natural dimension.
    pub fn from_id(id: GroupId) -> Result<PointGroup> {
        let dim = id.name.natural_dim().unwrap_or(3);
        make_group(id.name, dim, id.axis)
    }

    /// The identity-only group.
    pub fn trivial(dim: usize) -> PointGroup {
        make_group(GroupName::C1, dim, None).expect("trivial group is always valid")
    }

    /// Wraps an arbitrary element list without checking the group axioms.
    /// Use [`verify_group`] to validate.
    pub fn from_elements(id: GroupId, dim: usize, elements: Vec<GroupElement>) -> PointGroup {
        PointGroup { id, dim, elements }
    }

    pub fn id(&self) -> GroupId {
        self.id
    }

    pub fn name(&self) -> GroupName {
        self.id.name
    }

    pub fn principal_axis(&self) -> Option<Axis> {
        self.id.axis
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn elements(&self) -> &[GroupElement] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn element(&self, label: &str) -> Option<&GroupElement> {
        self.elements.iter().find(|e| e.label == label)
    }

    /// Index of the element closest to `matrix`, if within tolerance.
    pub fn find(&self, matrix: &[f64]) -> Option<usize> {
        let (idx, dev) = self.closest(matrix)?;
        (dev <= MEMBERSHIP_TOL).then_some(idx)
    }

    fn closest(&self, matrix: &[f64]) -> Option<(usize, f64)> {
        self.elements
            .iter()
            .enumerate()
            .map(|(i, e)| (i, max_abs_diff(&e.matrix, matrix)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }

    pub fn identity_index(&self) -> Option<usize> {
        self.find(&GroupElement::identity(self.dim).matrix)
    }

    /// The images of `v` under every element, in element order.
    pub fn orbit(&self, v: &[f64], layout: Option<&BlockLayout>) -> Result<Orbit> {
        let images = self
            .elements
            .iter()
            .map(|e| e.apply(v, layout))
            .collect::<Result<Vec<_>>>()?;
        Ok(Orbit {
            source: v.to_vec(),
            images,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Orbit {
    pub source: Vec<f64>,
    pub images: Vec<Vec<f64>>,
}

impl Orbit {
    /// Image indices sorted in descending lexicographic order, ties broken
    /// by element index.
    pub fn canonical_order(&self) -> Vec<usize> {
        canonical_order(&self.images)
    }

    pub fn canonical_images(&self) -> Vec<&[f64]> {
        self.canonical_order()
            .into_iter()
            .map(|i| self.images[i].as_slice())
            .collect()
    }
}

/// Descending lexicographic comparison using IEEE total order per entry.
pub fn lex_descending(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match y.total_cmp(x) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    b.len().cmp(&a.len())
}

pub fn canonical_order<V: AsRef<[f64]>>(images: &[V]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..images.len()).collect();
    idx.sort_by(|&i, &j| lex_descending(images[i].as_ref(), images[j].as_ref()).then(i.cmp(&j)));
    idx
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AxiomCheck {
    pub pass: bool,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AxiomReport {
    pub closure: AxiomCheck,
    pub identity: AxiomCheck,
    pub inverses: AxiomCheck,
    pub orthogonality: AxiomCheck,
    /// Number of elements checked.
    pub order: usize,
}

impl AxiomReport {
    pub fn passed(&self) -> bool {
        self.closure.pass && self.identity.pass && self.inverses.pass && self.orthogonality.pass
    }

    pub fn max_residual(&self) -> f64 {
        [
            self.closure.residual,
            self.identity.residual,
            self.inverses.residual,
            self.orthogonality.residual,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Checks closure, identity, inverses and orthogonality by brute force.
pub fn verify_group(g: &PointGroup) -> AxiomReport {
    const EXACT_TOL: f64 = 1e-12;
    let n = g.dim;
    let ident = GroupElement::identity(n);

    let mut closure = 0.0f64;
    let mut inverses = 0.0f64;
    for a in &g.elements {
        let mut best_inverse = f64::INFINITY;
        for b in &g.elements {
            let ab = a.compose(b);
            closure = closure.max(g.closest(&ab).map_or(f64::INFINITY, |(_, d)| d));
            best_inverse = best_inverse.min(max_abs_diff(&ab, &ident.matrix));
        }
        inverses = inverses.max(best_inverse);
    }
    let identity = g
        .closest(&ident.matrix)
        .map_or(f64::INFINITY, |(_, d)| d);

    let mut ortho = 0.0f64;
    for e in &g.elements {
        let mut mtm = vec![0.0; n * n];
        for r in 0..n {
            for c in 0..n {
                mtm[r * n + c] = (0..n).map(|k| e.matrix[k * n + r] * e.matrix[k * n + c]).sum();
            }
        }
        ortho = ortho.max(max_abs_diff(&mtm, &ident.matrix));
        let det = e.determinant();
        ortho = ortho.max((det.abs() - 1.0).abs());
    }

    AxiomReport {
        closure: AxiomCheck {
            pass: closure <= MEMBERSHIP_TOL,
            residual: closure,
        },
        identity: AxiomCheck {
            pass: identity <= EXACT_TOL,
            residual: identity,
        },
        inverses: AxiomCheck {
            pass: inverses <= EXACT_TOL,
            residual: inverses,
        },
        orthogonality: AxiomCheck {
            pass: ortho <= EXACT_TOL,
            residual: ortho,
        },
        order: g.elements.len(),
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn matmul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for r in 0..n {
        for c in 0..n {
            out[r * n + c] = (0..n).map(|k| a[r * n + k] * b[k * n + c]).sum();
        }
    }
    out
}

fn determinant(m: &[f64], n: usize) -> f64 {
    match n {
        1 => m[0],
        2 => m[0] * m[3] - m[1] * m[2],
        3 => {
            m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6])
                + m[2] * (m[3] * m[7] - m[4] * m[6])
        }
        _ => f64::NAN,
    }
}

/// Names an axis direction whose components are in {-1, 0, 1} after
/// scaling, e.g. `x`, `xy`, `x-y`, `xy-z`. The sign is canonicalized so the
/// first nonzero component is positive; returns whether it was flipped.
fn axis_label(v: &[f64]) -> Option<(String, bool)> {
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale < 1e-9 {
        return None;
    }
    let mut rounded = Vec::with_capacity(v.len());
    for x in v {
        let s = x / scale;
        let r = s.round();
        if (s - r).abs() > 1e-6 {
            return None;
        }
        rounded.push(r as i32);
    }
    let first = *rounded.iter().find(|r| **r != 0)?;
    let flipped = first < 0;
    let mut label = String::new();
    for (i, r) in rounded.iter().enumerate() {
        let r = if flipped { -r } else { *r };
        if r != 0 {
            if r < 0 {
                label.push('-');
            }
            label.push(['x', 'y', 'z'][i]);
        }
    }
    Some((label, flipped))
}

/// Proper rotation angle in degrees and canonical axis label of a 3×3 rotation.
fn rotation_parts(m: &[f64]) -> Option<(i64, String)> {
    let tr = m[0] + m[4] + m[8];
    let cos = ((tr - 1.0) / 2.0).clamp(-1.0, 1.0);
    let theta = cos.acos().to_degrees();
    if theta < 1e-6 {
        return Some((0, String::new()));
    }
    if (180.0 - theta) < 1e-6 {
        // R = 2 n nᵀ − I
        let diag = [m[0], m[4], m[8]];
        let k = (0..3).max_by(|&a, &b| diag[a].total_cmp(&diag[b]))?;
        let col: Vec<f64> = (0..3)
            .map(|r| (m[r * 3 + k] + if r == k { 1.0 } else { 0.0 }) / 2.0)
            .collect();
        let (label, _) = axis_label(&col)?;
        return Some((180, label));
    }
    let v = [m[7] - m[5], m[2] - m[6], m[3] - m[1]];
    let (label, flipped) = axis_label(&v)?;
    let theta = if flipped { 360.0 - theta } else { theta };
    Some((theta.round() as i64, label))
}

fn describe(m: &[f64], dim: usize) -> Option<String> {
    match dim {
        2 => {
            let det = determinant(m, 2);
            if det > 0.0 {
                let theta = m[2].atan2(m[0]).to_degrees().rem_euclid(360.0).round() as i64;
                Some(if theta == 0 {
                    "identity".into()
                } else {
                    format!("rot{theta}")
                })
            } else {
                // M = I − 2 n nᵀ: the columns of (I − M) / 2 are multiples of n.
                let col: Vec<f64> = if (1.0 - m[0]).abs() > 1e-9 {
                    vec![(1.0 - m[0]) / 2.0, -m[2] / 2.0]
                } else {
                    vec![-m[1] / 2.0, (1.0 - m[3]) / 2.0]
                };
                let (label, _) = axis_label(&col)?;
                Some(format!("reflect_{label}"))
            }
        }
        3 => {
            let det = determinant(m, 3);
            if det > 0.0 {
                let (theta, axis) = rotation_parts(m)?;
                Some(if theta == 0 {
                    "identity".into()
                } else {
                    format!("rot{theta}_{axis}")
                })
            } else {
                let neg: Vec<f64> = m.iter().map(|x| -x).collect();
                let (theta, axis) = rotation_parts(&neg)?;
                if theta == 0 {
                    return Some("inversion".into());
                }
                let phi = (theta + 180).rem_euclid(360);
                Some(if phi == 0 {
                    format!("reflect_{axis}")
                } else {
                    format!("rotoreflect{phi}_{axis}")
                })
            }
        }
        1 => Some(if m[0] > 0.0 { "identity" } else { "inversion" }.into()),
        _ => None,
    }
}
