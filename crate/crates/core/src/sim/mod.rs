//! Charged and gravitational N-body systems inside reflective boxes.
//!
//! Coordinates are centered on the box, so a box with sides `(a, b, c)`
//! spans `[-a/2, a/2] × [-b/2, b/2] × [-c/2, c/2]`. Forces are softened with
//! `(r² + ε²)`, and walls reflect specularly.

pub mod dataset;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pointgroup::{Axis, GroupElement};

pub use dataset::{make_dataset, read_dataset, write_dataset, Dataset, Sample, Split};

pub const DEFAULT_DT: f64 = 0.02;
pub const DEFAULT_SOFTENING: f64 = 0.1;
pub const INITIAL_SPEED: f64 = 0.5;
const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;
const MAX_REFLECTIONS: usize = 1_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemKind {
    Charged,
    Gravity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct BoxSpec {
    sides: Vec<f64>,
}

impl BoxSpec {
    pub fn new(sides: Vec<f64>) -> Result<Self> {
        if !(2..=3).contains(&sides.len()) {
            return Err(Error::Config(format!(
                "box needs 2 or 3 sides, got {}",
                sides.len()
            )));
        }
        if sides.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::Config(format!("box sides must be positive: {sides:?}")));
        }
        Ok(BoxSpec { sides })
    }

    pub fn sides(&self) -> &[f64] {
        &self.sides
    }

    pub fn dim(&self) -> usize {
        self.sides.len()
    }

    pub fn half(&self, axis: usize) -> f64 {
        self.sides[axis] / 2.0
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        point
            .iter()
            .enumerate()
            .all(|(d, x)| x.abs() <= self.half(d))
    }
}

impl TryFrom<Vec<f64>> for BoxSpec {
    type Error = Error;

    fn try_from(sides: Vec<f64>) -> Result<Self> {
        BoxSpec::new(sides)
    }
}

impl From<BoxSpec> for Vec<f64> {
    fn from(b: BoxSpec) -> Vec<f64> {
        b.sides
    }
}

/// Positions, velocities and static attributes of `N` objects.
///
/// `q` and `qdot` are flat `N × dim` arrays. `u[i]` is the charge (charged
/// systems) or mass (gravity). Edges are directed pairs `(i, j)`, `i ≠ j`,
/// and `edge_attrs[k] = u[i] · u[j]` for `edges[k] = (i, j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemState {
    pub dim: usize,
    pub q: Vec<f64>,
    pub qdot: Vec<f64>,
    pub u: Vec<f64>,
    pub edges: Vec<(usize, usize)>,
    pub edge_attrs: Vec<f64>,
}

/// All ordered pairs `i ≠ j`, `i` major.
pub fn fully_connected(n: usize) -> Vec<(usize, usize)> {
    (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect()
}

impl SystemState {
    /// Builds a fully connected state with product edge attributes.
    pub fn new(dim: usize, q: Vec<f64>, qdot: Vec<f64>, u: Vec<f64>) -> Result<Self> {
        let n = u.len();
        if q.len() != n * dim || qdot.len() != n * dim {
            return Err(Error::Shape(format!(
                "{n} objects in dim {dim} need {} coordinates, got q={} qdot={}",
                n * dim,
                q.len(),
                qdot.len()
            )));
        }
        let edges = fully_connected(n);
        let edge_attrs = edges.iter().map(|&(i, j)| u[i] * u[j]).collect();
        Ok(SystemState {
            dim,
            q,
            qdot,
            u,
            edges,
            edge_attrs,
        })
    }

    pub fn n(&self) -> usize {
        self.u.len()
    }

    pub fn pos(&self, i: usize) -> &[f64] {
        &self.q[i * self.dim..(i + 1) * self.dim]
    }

    pub fn vel(&self, i: usize) -> &[f64] {
        &self.qdot[i * self.dim..(i + 1) * self.dim]
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(&self.qdot).all(|x| x.is_finite())
    }

    /// Rotates/reflects positions and velocities; attributes are unchanged.
    pub fn transformed(&self, e: &GroupElement) -> Result<SystemState> {
        Ok(SystemState {
            q: e.apply(&self.q, None)?,
            qdot: e.apply(&self.qdot, None)?,
            ..self.clone()
        })
    }

    pub fn momentum(&self) -> Vec<f64> {
        let mut p = vec![0.0; self.dim];
        for i in 0..self.n() {
            for (pd, v) in p.iter_mut().zip(self.vel(i)) {
                *pd += v;
            }
        }
        p
    }
}

/// Generation settings shared by every trajectory of a dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    #[serde(rename = "box")]
    pub box_spec: BoxSpec,
    pub kind: SystemKind,
    pub dt: f64,
    pub softening: f64,
    /// When set, initial velocities point into the positive half-space of
    /// this axis (all objects travel "one way" along it).
    #[serde(default)]
    pub heading: Option<Axis>,
}

impl SimConfig {
    pub fn new(n: usize, box_spec: BoxSpec, kind: SystemKind) -> Self {
        SimConfig {
            n,
            box_spec,
            kind,
            dt: DEFAULT_DT,
            softening: DEFAULT_SOFTENING,
            heading: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.box_spec.dim()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Config(format!("need at least 2 objects, got {}", self.n)));
        }
        if !(self.dt.is_finite() && self.dt >= 0.0) {
            return Err(Error::Config(format!("invalid time step {}", self.dt)));
        }
        if !(self.softening.is_finite() && self.softening > 0.0) {
            return Err(Error::Config(format!("invalid softening {}", self.softening)));
        }
        if let Some(axis) = self.heading {
            if axis.index() >= self.dim() {
                return Err(Error::Config(format!("heading axis {axis:?} outside dimension {}", self.dim())));
            }
        }
        Ok(())
    }
}

/// Draws an initial state: positions ~ N(0, 1) per coordinate, redrawn per
/// object until inside the box; velocities uniform on the sphere of radius
/// 0.5; charges uniform in {−1, +1} or unit masses.
pub fn sample_initial(cfg: &SimConfig, seed: u64) -> Result<SystemState> {
    cfg.validate()?;
    let dim = cfg.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q = Vec::with_capacity(cfg.n * dim);
    let mut attempts = 0;
    for _ in 0..cfg.n {
        loop {
            attempts += 1;
            if attempts > MAX_PLACEMENT_ATTEMPTS {
                return Err(Error::Placement {
                    n: cfg.n,
                    attempts: MAX_PLACEMENT_ATTEMPTS,
                });
            }
            let p: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            if p.iter().enumerate().all(|(d, x)| x.abs() < cfg.box_spec.half(d)) {
                q.extend(p);
                break;
            }
        }
    }

    let mut qdot = Vec::with_capacity(cfg.n * dim);
    for _ in 0..cfg.n {
        let mut v: Vec<f64> = loop {
            let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            if v.iter().map(|x| x * x).sum::<f64>() > 1e-12 {
                break v;
            }
        };
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x *= INITIAL_SPEED / norm);
        if let Some(axis) = cfg.heading {
            v[axis.index()] = v[axis.index()].abs();
        }
        qdot.extend(v);
    }

    let u = match cfg.kind {
        SystemKind::Charged => (0..cfg.n)
            .map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 })
            .collect(),
        SystemKind::Gravity => vec![1.0; cfg.n],
    };
    SystemState::new(dim, q, qdot, u)
}

/// Softened Coulomb (like charges repel) or Newtonian accelerations with
/// unit coupling constants and unit inertial mass for charges.
pub fn accelerations(state: &SystemState, kind: SystemKind, softening: f64) -> Vec<f64> {
    let (n, dim) = (state.n(), state.dim);
    let eps2 = softening * softening;
    let mut acc = vec![0.0; n * dim];
    let mut diff = vec![0.0; dim];
    for i in 0..n {
        let qi = state.pos(i);
        for j in 0..n {
            if i == j {
                continue;
            }
            let qj = state.pos(j);
            let mut r2 = eps2;
            for d in 0..dim {
                diff[d] = qi[d] - qj[d];
                r2 += diff[d] * diff[d];
            }
            let inv3 = 1.0 / (r2 * r2.sqrt());
            let coupling = match kind {
                SystemKind::Charged => state.u[i] * state.u[j],
                SystemKind::Gravity => -state.u[j],
            };
            for d in 0..dim {
                acc[i * dim + d] += coupling * diff[d] * inv3;
            }
        }
    }
    acc
}

/// Kinetic plus softened pair potential energy.
pub fn total_energy(state: &SystemState, kind: SystemKind, softening: f64) -> f64 {
    let eps2 = softening * softening;
    let mass = |i: usize| match kind {
        SystemKind::Charged => 1.0,
        SystemKind::Gravity => state.u[i],
    };
    let kinetic: f64 = (0..state.n())
        .map(|i| 0.5 * mass(i) * state.vel(i).iter().map(|v| v * v).sum::<f64>())
        .sum();
    let mut potential = 0.0;
    for i in 0..state.n() {
        for j in i + 1..state.n() {
            let r2: f64 = state
                .pos(i)
                .iter()
                .zip(state.pos(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            let inv = 1.0 / (r2 + eps2).sqrt();
            potential += match kind {
                SystemKind::Charged => state.u[i] * state.u[j] * inv,
                SystemKind::Gravity => -state.u[i] * state.u[j] * inv,
            };
        }
    }
    kinetic + potential
}

/// Folds every coordinate back into the box, mirroring position about the
/// wall and negating that velocity component for each crossing.
pub fn reflect_into_box(q: &mut [f64], qdot: &mut [f64], box_spec: &BoxSpec) -> Result<()> {
    let dim = box_spec.dim();
    for (k, (x, v)) in q.iter_mut().zip(qdot.iter_mut()).enumerate() {
        let half = box_spec.half(k % dim);
        let mut count = 0;
        while x.abs() > half {
            if *x > half {
                *x = 2.0 * half - *x;
            } else {
                *x = -2.0 * half - *x;
            }
            *v = -*v;
            count += 1;
            if count > MAX_REFLECTIONS {
                return Err(Error::NonFinite(format!(
                    "coordinate {k} did not settle inside the box"
                )));
            }
        }
    }
    Ok(())
}

/// One velocity-Verlet step followed by wall handling.
pub fn step(
    state: &SystemState,
    dt: f64,
    kind: SystemKind,
    softening: f64,
    box_spec: &BoxSpec,
) -> Result<SystemState> {
    let mut next = state.clone();
    let a0 = accelerations(state, kind, softening);
    for ((v, q), a) in next.qdot.iter_mut().zip(next.q.iter_mut()).zip(&a0) {
        *v += 0.5 * dt * a;
        *q += dt * *v;
    }
    let a1 = accelerations(&next, kind, softening);
    for (v, a) in next.qdot.iter_mut().zip(&a1) {
        *v += 0.5 * dt * a;
    }
    if !next.is_finite() {
        return Err(Error::NonFinite("state after integration".into()));
    }
    reflect_into_box(&mut next.q, &mut next.qdot, box_spec)?;
    Ok(next)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub frames: Vec<SystemState>,
    pub dt: f64,
    pub kind: SystemKind,
}

/// Simulates `frames` states (the first from [`sample_initial`]).
pub fn simulate(cfg: &SimConfig, frames: usize, seed: u64) -> Result<Trajectory> {
    if frames == 0 {
        return Err(Error::Config("a trajectory needs at least one frame".into()));
    }
    let mut states = Vec::with_capacity(frames);
    states.push(sample_initial(cfg, seed)?);
    for f in 1..frames {
        let next = step(&states[f - 1], cfg.dt, cfg.kind, cfg.softening, &cfg.box_spec)
            .map_err(|e| Error::NonFinite(format!("frame {f} (seed {seed}): {e}")))?;
        states.push(next);
    }
    Ok(Trajectory {
        frames: states,
        dt: cfg.dt,
        kind: cfg.kind,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pointgroup::{GroupId, PointGroup};

    fn cube() -> BoxSpec {
        BoxSpec::new(vec![5.0, 5.0, 5.0]).unwrap()
    }

    fn state(q: Vec<f64>, qdot: Vec<f64>, u: Vec<f64>) -> SystemState {
        SystemState::new(3, q, qdot, u).unwrap()
    }

    #[test]
    fn sampled_speeds_and_masses() {
        let mut cfg = SimConfig::new(5, cube(), SystemKind::Gravity);
        let s = sample_initial(&cfg, 3).unwrap();
        for i in 0..5 {
            let speed = s.vel(i).iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((speed - 0.5).abs() <= 1e-12);
            assert!(cfg.box_spec.contains(s.pos(i)));
        }
        assert!(s.u.iter().all(|m| *m == 1.0));
        assert_eq!(s.edges.len(), 20);

        cfg.kind = SystemKind::Charged;
        let s = sample_initial(&cfg, 3).unwrap();
        assert!(s.u.iter().all(|c| *c == 1.0 || *c == -1.0));
        for (k, &(i, j)) in s.edges.iter().enumerate() {
            assert_eq!(s.edge_attrs[k], s.u[i] * s.u[j]);
        }
        assert_eq!(s, sample_initial(&cfg, 3).unwrap());
        assert_ne!(s, sample_initial(&cfg, 4).unwrap());
    }

    #[test]
    fn heading_restricts_velocity_half_space() {
        let mut cfg = SimConfig::new(20, cube(), SystemKind::Charged);
        cfg.heading = Some(Axis::X);
        let s = sample_initial(&cfg, 1).unwrap();
        assert!((0..20).all(|i| s.vel(i)[0] >= 0.0));
    }

    #[test]
    fn tiny_box_fails_placement() {
        let cfg = SimConfig::new(5, BoxSpec::new(vec![1e-4; 3]).unwrap(), SystemKind::Charged);
        assert!(matches!(sample_initial(&cfg, 0), Err(Error::Placement { .. })));
        assert!(BoxSpec::new(vec![1.0, -1.0, 1.0]).is_err());
        assert!(sample_initial(&SimConfig::new(1, cube(), SystemKind::Charged), 0).is_err());
    }

    #[test]
    fn like_charges_repel_along_axis() {
        let s = state(vec![-0.5, 0.0, 0.0, 0.5, 0.0, 0.0], vec![0.0; 6], vec![1.0, 1.0]);
        let a = accelerations(&s, SystemKind::Charged, 0.1);
        assert!(a[0] < 0.0 && a[3] > 0.0);
        assert_eq!(a[0], -a[3]);
        assert_eq!(&a[1..3], &[0.0, 0.0]);
        assert_eq!(&a[4..6], &[0.0, 0.0]);
    }

    #[test]
    fn gravity_pair_obeys_third_law() {
        let s = state(vec![0.3, -0.2, 0.9, -0.4, 0.6, 0.1], vec![0.0; 6], vec![1.0, 1.0]);
        let a = accelerations(&s, SystemKind::Gravity, 0.1);
        for d in 0..3 {
            assert!((a[d] + a[3 + d]).abs() <= 1e-14);
        }
        // attraction: a_1 points towards q_2
        let towards: f64 = (0..3).map(|d| a[d] * (s.q[3 + d] - s.q[d])).sum();
        assert!(towards > 0.0);
    }

    #[test]
    fn accelerations_are_minus_potential_gradient() {
        // Oracle: central differences of the potential energy.
        for kind in [SystemKind::Charged, SystemKind::Gravity] {
            let cfg = SimConfig::new(5, cube(), kind);
            let mut s = sample_initial(&cfg, 17).unwrap();
            s.qdot.iter_mut().for_each(|v| *v = 0.0);
            let a = accelerations(&s, kind, 0.1);
            let h = 1e-6;
            for k in 0..s.q.len() {
                let mut p = s.clone();
                let mut m = s.clone();
                p.q[k] += h;
                m.q[k] -= h;
                let grad = (total_energy(&p, kind, 0.1) - total_energy(&m, kind, 0.1)) / (2.0 * h);
                let mass = 1.0;
                let expected = -grad / mass;
                let rel = (a[k] - expected).abs() / expected.abs().max(1e-8);
                assert!(rel < 1e-6, "{kind:?} k={k}: {} vs {expected}", a[k]);
            }
        }
    }

    fn double_loop_energy(s: &SystemState, kind: SystemKind, eps: f64) -> f64 {
        let mut e = 0.0;
        for i in 0..s.n() {
            let v = s.vel(i);
            e += 0.5 * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
        }
        for i in 0..s.n() {
            for j in 0..s.n() {
                if j <= i {
                    continue;
                }
                let (a, b) = (s.pos(i), s.pos(j));
                let r2 = (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2);
                let sign = if kind == SystemKind::Charged { 1.0 } else { -1.0 };
                e += sign * s.u[i] * s.u[j] / (r2 + eps * eps).sqrt();
            }
        }
        e
    }

    #[test]
    fn energy_matches_independent_double_loop() {
        for kind in [SystemKind::Charged, SystemKind::Gravity] {
            let s = sample_initial(&SimConfig::new(6, cube(), kind), 5).unwrap();
            let a = total_energy(&s, kind, 0.1);
            let b = double_loop_energy(&s, kind, 0.1);
            assert!((a - b).abs() <= 1e-14 * a.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn energy_edge_cases() {
        let single = state(vec![0.0, 0.0, 0.0], vec![0.3, -0.4, 0.0], vec![1.0]);
        assert_eq!(total_energy(&single, SystemKind::Charged, 0.1), 0.5 * 0.25);
        let far = state(vec![-1e9, 0.0, 0.0, 1e9, 0.0, 0.0], vec![0.0; 6], vec![1.0, -1.0]);
        assert!(total_energy(&far, SystemKind::Charged, 0.1).abs() < 1e-9);
    }

    #[test]
    fn verlet_conserves_energy_between_walls() {
        // Bound gravitational pair on a near-circular orbit in a large box.
        let big = BoxSpec::new(vec![100.0; 3]).unwrap();
        let v = (1.0f64 / (2.0 * (1.0 + 0.01f64).powf(1.5))).sqrt() * 1.0;
        let mut s = state(
            vec![-0.5, 0.0, 0.0, 0.5, 0.0, 0.0],
            vec![0.0, -v, 0.0, 0.0, v, 0.0],
            vec![1.0, 1.0],
        );
        let e0 = total_energy(&s, SystemKind::Gravity, 0.1);
        for _ in 0..100 {
            s = step(&s, 0.02, SystemKind::Gravity, 0.1, &big).unwrap();
        }
        let e1 = total_energy(&s, SystemKind::Gravity, 0.1);
        assert!(((e1 - e0) / e0).abs() < 1e-3, "{e0} -> {e1}");
    }

    #[test]
    fn wall_reflection_flips_normal_velocity() {
        let b = BoxSpec::new(vec![2.0, 2.0, 2.0]).unwrap();
        let s = state(
            vec![0.99, 0.0, 0.0, -0.5, -0.5, -0.5],
            vec![1.0, 0.2, 0.0, 0.0, 0.0, 0.0],
            vec![1.0, 1.0],
        );
        let next = step(&s, 0.02, SystemKind::Gravity, 0.1, &b).unwrap();
        assert!(b.contains(next.pos(0)));
        assert!(next.qdot[0] < 0.0);
        let mut q = vec![1.3, 0.0];
        let mut v = vec![0.7, -0.1];
        reflect_into_box(&mut q, &mut v, &BoxSpec::new(vec![2.0, 2.0]).unwrap()).unwrap();
        assert!((q[0] - 0.7).abs() < 1e-15);
        assert_eq!(v, vec![-0.7, -0.1]);
    }

    #[test]
    fn zero_step_is_identity() {
        let cfg = SimConfig::new(5, cube(), SystemKind::Charged);
        let s = sample_initial(&cfg, 8).unwrap();
        assert_eq!(step(&s, 0.0, cfg.kind, 0.1, &cfg.box_spec).unwrap(), s);
    }

    #[test]
    fn simulate_shapes_and_box_invariant() {
        let cfg = SimConfig::new(5, cube(), SystemKind::Charged);
        let t = simulate(&cfg, 11, 2).unwrap();
        assert_eq!(t.frames.len(), 11);
        assert!(t.frames.iter().all(|f| (0..5).all(|i| cfg.box_spec.contains(f.pos(i)))));
        assert_eq!(t, simulate(&cfg, 11, 2).unwrap());
        assert!(simulate(&cfg, 0, 2).is_err());
    }

    #[test]
    fn momentum_conserved_without_walls() {
        let mut cfg = SimConfig::new(5, BoxSpec::new(vec![1e3; 3]).unwrap(), SystemKind::Charged);
        cfg.dt = 0.02;
        let t = simulate(&cfg, 50, 9).unwrap();
        for w in t.frames.windows(2) {
            let (p0, p1) = (w[0].momentum(), w[1].momentum());
            for d in 0..3 {
                assert!((p0[d] - p1[d]).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn force_field_is_box_group_equivariant() {
        for (sides, id) in [
            (vec![5.0, 5.0, 5.0], "Oh"),
            (vec![5.0, 4.0, 4.0], "D4h:x"),
            (vec![5.0, 4.0, 3.0], "D2h"),
        ] {
            let id: GroupId = id.parse().unwrap();
            assert_eq!(GroupId::for_box(&sides).unwrap(), id);
            let g = PointGroup::from_id(id).unwrap();
            let cfg = SimConfig::new(5, BoxSpec::new(sides).unwrap(), SystemKind::Charged);
            let s = sample_initial(&cfg, 21).unwrap();
            let a = accelerations(&s, cfg.kind, 0.1);
            for e in g.elements() {
                let ta = accelerations(&s.transformed(e).unwrap(), cfg.kind, 0.1);
                let rotated = e.apply(&a, None).unwrap();
                for (x, y) in ta.iter().zip(&rotated) {
                    assert!((x - y).abs() <= 1e-12);
                }
            }
        }
    }
}
