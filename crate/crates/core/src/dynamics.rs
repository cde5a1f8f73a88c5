//! Planar serial-chain rigid-body dynamics.
//!
//! Frame and angle convention used everywhere in this crate:
//!
//! * The motion plane is spanned by world `x` (horizontal) and `z` (up).
//!   Planar vectors are stored as `Vector2` with component 0 = x and
//!   component 1 = z. Gravity acts along −z.
//! * A leg joint angle is measured from the downward (−z) axis and is
//!   positive counterclockwise when the plane is drawn with x to the right
//!   and z up, i.e. rotating the hanging link toward +x. With `q1 = 0` the
//!   first link hangs straight down; with `q1 = π/2` it points along +x.
//!   Joint angles after the first are relative to the previous link.
//! * The planar wedge product is `a ∧ b = a_x b_z − a_z b_x`, the moment of
//!   `b` applied at `a` in the same counterclockwise sense as the joints.
//!
//! Three base modes are supported:
//!
//! | mode          | coordinates                     |
//! |---------------|---------------------------------|
//! | `Fixed`       | `[q1 … qn]`                     |
//! | `FloatingXz`  | `[x, z, q1 … qn]`               |
//! | `VirtualFt`   | `[x, y_rot, z, q1 … qn]`        |
//!
//! In the floating and virtual modes a point base body of mass `base_mass`
//! sits at `(x, z)`. `VirtualFt` adds a revolute base coordinate `y_rot`
//! whose positive sense is clockwise (a right-handed rotation about +y with
//! y pointing into the page), so the generalized force it carries is the
//! base moment `M_y = −(r ∧ F)`. That makes the `[x, y_rot, z]` block of any
//! generalized force the planar wrench an FT sensor at the base reports.

use nalgebra::{Cholesky, DMatrix, DVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec2 = Vector2<f64>;

/// Standard gravity used by the default model (m/s²).
pub const DEFAULT_GRAVITY: f64 = 9.81;

/// Base body rotational inertia for the virtual FT mount (kg·m²).
pub const DEFAULT_BASE_INERTIA: f64 = 0.005;

/// Planar wedge product `a_x b_z − a_z b_x`.
#[inline]
pub fn wedge(a: &Vec2, b: &Vec2) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

/// Rotates a planar vector by +90° in the joint sense: `(x, z) ↦ (−z, x)`.
#[inline]
fn perp(v: &Vec2) -> Vec2 {
    Vec2::new(-v[1], v[0])
}

#[inline]
fn link_direction(angle: f64) -> Vec2 {
    let (s, c) = angle.sin_cos();
    Vec2::new(s, -c)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkParams {
    /// Link length (m).
    pub length: f64,
    /// Distance from the proximal joint to the center of mass, along the link (m).
    pub com_offset: f64,
    /// Mass (kg).
    pub mass: f64,
    /// Rotational inertia about the center of mass (kg·m²).
    pub inertia: f64,
}

impl LinkParams {
    pub fn validate(&self, index: usize) -> Result<()> {
        let field = |name: &str| format!("links[{index}].{name}");
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(Error::invalid(field("length"), "must be > 0"));
        }
        if !(0.0..=self.length).contains(&self.com_offset) {
            return Err(Error::invalid(field("com_offset"), "must lie in [0, length]"));
        }
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(Error::invalid(field("mass"), "must be > 0"));
        }
        if !(self.inertia >= 0.0 && self.inertia.is_finite()) {
            return Err(Error::invalid(field("inertia"), "must be ≥ 0"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseMode {
    Fixed,
    FloatingXz,
    VirtualFt,
}

impl BaseMode {
    /// Number of base coordinates preceding the joint block.
    pub fn base_dofs(self) -> usize {
        match self {
            BaseMode::Fixed => 0,
            BaseMode::FloatingXz => 2,
            BaseMode::VirtualFt => 3,
        }
    }

    fn x_index(self) -> Option<usize> {
        match self {
            BaseMode::Fixed => None,
            BaseMode::FloatingXz | BaseMode::VirtualFt => Some(0),
        }
    }

    fn z_index(self) -> Option<usize> {
        match self {
            BaseMode::Fixed => None,
            BaseMode::FloatingXz => Some(1),
            BaseMode::VirtualFt => Some(2),
        }
    }

    fn rot_index(self) -> Option<usize> {
        match self {
            BaseMode::VirtualFt => Some(1),
            _ => None,
        }
    }
}

/// Kinematic and inertial description of a planar leg.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainModel {
    pub links: Vec<LinkParams>,
    pub base_mass: f64,
    /// Rotational inertia of the base body about its origin (kg·m²). Only
    /// used in `VirtualFt` mode, where the base rotation and joint 1 share
    /// an axis and the mass matrix would otherwise be singular.
    pub base_inertia: f64,
    pub base_mode: BaseMode,
    /// Magnitude of gravity along −z (m/s²).
    pub gravity: f64,
}

impl ChainModel {
    pub fn new(links: Vec<LinkParams>, base_mass: f64, base_mode: BaseMode) -> Result<Self> {
        let model = ChainModel {
            links,
            base_mass,
            base_inertia: DEFAULT_BASE_INERTIA,
            base_mode,
            gravity: DEFAULT_GRAVITY,
        };
        model.validate()?;
        Ok(model)
    }

    /// The two-link leg with its measured physical constants.
    pub fn reference_leg(base_mode: BaseMode) -> Self {
        ChainModel {
            links: vec![
                LinkParams {
                    length: 0.205,
                    com_offset: 0.171,
                    mass: 0.351,
                    inertia: 0.00207,
                },
                LinkParams {
                    length: 0.215,
                    com_offset: 0.031,
                    mass: 0.080,
                    inertia: 0.00030,
                },
            ],
            base_mass: 0.738,
            base_inertia: DEFAULT_BASE_INERTIA,
            base_mode,
            gravity: DEFAULT_GRAVITY,
        }
    }

    pub fn with_base_mode(&self, base_mode: BaseMode) -> Self {
        ChainModel {
            base_mode,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.links.is_empty() {
            return Err(Error::invalid("links", "at least one link is required"));
        }
        for (i, link) in self.links.iter().enumerate() {
            link.validate(i + 1)?;
        }
        if !(self.base_mass >= 0.0 && self.base_mass.is_finite()) {
            return Err(Error::invalid("base_mass", "must be ≥ 0"));
        }
        if !(self.base_inertia >= 0.0 && self.base_inertia.is_finite()) {
            return Err(Error::invalid("base_inertia", "must be ≥ 0"));
        }
        if !self.gravity.is_finite() {
            return Err(Error::invalid("gravity", "must be finite"));
        }
        Ok(())
    }

    /// Number of actuated joints `n`.
    pub fn n_joints(&self) -> usize {
        self.links.len()
    }

    /// Generalized coordinate count `N`.
    pub fn dof(&self) -> usize {
        self.base_mode.base_dofs() + self.links.len()
    }

    /// Index of joint 1 inside the generalized coordinate vector.
    pub fn joint_offset(&self) -> usize {
        self.base_mode.base_dofs()
    }

    pub fn total_mass(&self) -> f64 {
        let links: f64 = self.links.iter().map(|l| l.mass).sum();
        match self.base_mode {
            BaseMode::Fixed => links,
            _ => links + self.base_mass,
        }
    }

    fn check_dim(&self, what: &'static str, got: usize) -> Result<()> {
        let expected = self.dof();
        if got != expected {
            return Err(Error::DimensionMismatch {
                what,
                expected,
                got,
            });
        }
        Ok(())
    }

    fn check_link(&self, link: usize) -> Result<()> {
        if link == 0 || link > self.links.len() {
            return Err(Error::LinkIndexOutOfRange {
                index: link,
                links: self.links.len(),
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneralizedState {
    pub q: DVector<f64>,
    pub qdot: DVector<f64>,
}

impl GeneralizedState {
    pub fn new(q: DVector<f64>, qdot: DVector<f64>) -> Self {
        GeneralizedState { q, qdot }
    }

    pub fn at_rest(q: DVector<f64>) -> Self {
        let n = q.len();
        GeneralizedState {
            q,
            qdot: DVector::zeros(n),
        }
    }

    pub fn dof(&self) -> usize {
        self.q.len()
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(self.qdot.iter()).all(|v| v.is_finite())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DynamicsTerms {
    pub mass: DMatrix<f64>,
    pub coriolis: DMatrix<f64>,
    pub gravity: DVector<f64>,
}

/// World endpoints of each link: `(proximal joint, distal end)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinkEndpoints {
    pub base: Vec2,
    pub links: Vec<(Vec2, Vec2)>,
}

impl LinkEndpoints {
    pub fn foot(&self) -> Vec2 {
        self.links.last().map(|l| l.1).unwrap_or(self.base)
    }

    /// Material point at fraction `alpha` along link `link` (1-based).
    pub fn point_on_link(&self, link: usize, alpha: f64) -> Vec2 {
        let (p1, p2) = self.links[link - 1];
        p1 + (p2 - p1) * alpha
    }
}

/// Cached chain geometry at one configuration.
struct Pose {
    base: Vec2,
    /// Proximal joint position of each link.
    origins: Vec<Vec2>,
    /// Absolute link angle in the joint sense.
    angles: Vec<f64>,
}

impl Pose {
    fn new(model: &ChainModel, q: &DVector<f64>) -> Self {
        let mode = model.base_mode;
        let base = Vec2::new(
            mode.x_index().map_or(0.0, |i| q[i]),
            mode.z_index().map_or(0.0, |i| q[i]),
        );
        let mut angle = mode.rot_index().map_or(0.0, |i| -q[i]);
        let offset = model.joint_offset();
        let mut origins = Vec::with_capacity(model.links.len());
        let mut angles = Vec::with_capacity(model.links.len());
        let mut origin = base;
        for (i, link) in model.links.iter().enumerate() {
            angle += q[offset + i];
            origins.push(origin);
            angles.push(angle);
            origin += link_direction(angle) * link.length;
        }
        Pose {
            base,
            origins,
            angles,
        }
    }

    fn point(&self, link: usize, distance: f64) -> Vec2 {
        self.origins[link - 1] + link_direction(self.angles[link - 1]) * distance
    }

    /// Translational Jacobian (2×N) of a point rigidly attached to `link`
    /// (1-based); `link = 0` denotes the base body.
    fn point_jacobian(&self, model: &ChainModel, link: usize, p: &Vec2) -> DMatrix<f64> {
        let n = model.dof();
        let mode = model.base_mode;
        let mut jac = DMatrix::zeros(2, n);
        if let Some(i) = mode.x_index() {
            jac[(0, i)] = 1.0;
        }
        if let Some(i) = mode.z_index() {
            jac[(1, i)] = 1.0;
        }
        if let Some(i) = mode.rot_index() {
            let col = -perp(&(p - self.base));
            jac[(0, i)] = col[0];
            jac[(1, i)] = col[1];
        }
        let offset = model.joint_offset();
        for j in 0..link {
            let col = perp(&(p - self.origins[j]));
            jac[(0, offset + j)] = col[0];
            jac[(1, offset + j)] = col[1];
        }
        jac
    }

    /// Angular Jacobian row (length N) of `link`.
    fn angular_row(&self, model: &ChainModel, link: usize) -> DVector<f64> {
        let mut row = DVector::zeros(model.dof());
        if let Some(i) = model.base_mode.rot_index() {
            row[i] = -1.0;
        }
        let offset = model.joint_offset();
        for j in 0..link {
            row[offset + j] = 1.0;
        }
        row
    }

    /// `∂J/∂q_k` for the Jacobian of point `p` on `link`, given the point
    /// Jacobian itself and the Jacobians of every joint origin.
    fn point_jacobian_derivative(
        &self,
        model: &ChainModel,
        link: usize,
        jac_p: &DMatrix<f64>,
        origin_jacs: &[DMatrix<f64>],
        base_jac: &DMatrix<f64>,
        k: usize,
    ) -> DMatrix<f64> {
        let n = model.dof();
        let mut d = DMatrix::zeros(2, n);
        let dp = Vec2::new(jac_p[(0, k)], jac_p[(1, k)]);
        if let Some(i) = model.base_mode.rot_index() {
            let db = Vec2::new(base_jac[(0, k)], base_jac[(1, k)]);
            let col = -perp(&(dp - db));
            d[(0, i)] = col[0];
            d[(1, i)] = col[1];
        }
        let offset = model.joint_offset();
        for j in 0..link {
            let jo = &origin_jacs[j];
            let doj = Vec2::new(jo[(0, k)], jo[(1, k)]);
            let col = perp(&(dp - doj));
            d[(0, offset + j)] = col[0];
            d[(1, offset + j)] = col[1];
        }
        d
    }
}

/// Mass contributions: each body's COM point, its Jacobian, angular row and
/// inertial parameters.
struct Body {
    link: usize,
    mass: f64,
    inertia: f64,
    com: Vec2,
    jac: DMatrix<f64>,
    angular: Option<DVector<f64>>,
}

fn bodies(model: &ChainModel, pose: &Pose) -> Vec<Body> {
    let mut out = Vec::with_capacity(model.links.len() + 1);
    if model.base_mode != BaseMode::Fixed && (model.base_mass > 0.0 || model.base_inertia > 0.0)
    {
        out.push(Body {
            link: 0,
            mass: model.base_mass,
            inertia: model.base_inertia,
            com: pose.base,
            jac: pose.point_jacobian(model, 0, &pose.base),
            angular: model
                .base_mode
                .rot_index()
                .map(|_| pose.angular_row(model, 0)),
        });
    }
    for (i, link) in model.links.iter().enumerate() {
        let com = pose.point(i + 1, link.com_offset);
        out.push(Body {
            link: i + 1,
            mass: link.mass,
            inertia: link.inertia,
            com,
            jac: pose.point_jacobian(model, i + 1, &com),
            angular: Some(pose.angular_row(model, i + 1)),
        });
    }
    out
}

fn assemble_mass(model: &ChainModel, bodies: &[Body]) -> DMatrix<f64> {
    let n = model.dof();
    let mut m = DMatrix::zeros(n, n);
    for b in bodies {
        m.gemm_tr(b.mass, &b.jac, &b.jac, 1.0);
        if let Some(w) = &b.angular {
            m.ger(b.inertia, w, w, 1.0);
        }
    }
    m
}

fn assemble_gravity(model: &ChainModel, bodies: &[Body]) -> DVector<f64> {
    let n = model.dof();
    let mut g = DVector::zeros(n);
    for b in bodies {
        for k in 0..n {
            g[k] += b.mass * model.gravity * b.jac[(1, k)];
        }
    }
    g
}

/// Partial derivatives `∂M/∂q_k` for every k.
fn mass_partials(model: &ChainModel, pose: &Pose, bodies: &[Body]) -> Vec<DMatrix<f64>> {
    let n = model.dof();
    let base_jac = pose.point_jacobian(model, 0, &pose.base);
    let origin_jacs: Vec<DMatrix<f64>> = (0..model.links.len())
        .map(|j| {
            // Joint j+1 sits on the distal end of link j (or on the base).
            pose.point_jacobian(model, j, &pose.origins[j])
        })
        .collect();
    let mut partials = vec![DMatrix::zeros(n, n); n];
    for b in bodies.iter().filter(|b| b.link > 0) {
        for (k, dm) in partials.iter_mut().enumerate() {
            let dj =
                pose.point_jacobian_derivative(model, b.link, &b.jac, &origin_jacs, &base_jac, k);
            let prod = dj.transpose() * &b.jac;
            *dm += (&prod + prod.transpose()) * b.mass;
        }
    }
    partials
}

fn christoffel_coriolis(partials: &[DMatrix<f64>], qdot: &DVector<f64>) -> DMatrix<f64> {
    let n = qdot.len();
    let mut c = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut sum = 0.0;
            for k in 0..n {
                sum += 0.5
                    * (partials[k][(i, j)] + partials[j][(i, k)] - partials[i][(j, k)])
                    * qdot[k];
            }
            c[(i, j)] = sum;
        }
    }
    c
}

pub fn mass_matrix(model: &ChainModel, q: &DVector<f64>) -> Result<DMatrix<f64>> {
    model.check_dim("q", q.len())?;
    let pose = Pose::new(model, q);
    Ok(assemble_mass(model, &bodies(model, &pose)))
}

/// Coriolis matrix built from the Christoffel symbols of the mass matrix,
/// so that `Ṁ = C + Cᵀ` holds exactly.
pub fn coriolis_matrix(
    model: &ChainModel,
    q: &DVector<f64>,
    qdot: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    model.check_dim("q", q.len())?;
    model.check_dim("qdot", qdot.len())?;
    let pose = Pose::new(model, q);
    let bodies = bodies(model, &pose);
    Ok(christoffel_coriolis(
        &mass_partials(model, &pose, &bodies),
        qdot,
    ))
}

/// Gradient of the potential energy, `∂U/∂q`.
pub fn gravity_vector(model: &ChainModel, q: &DVector<f64>) -> Result<DVector<f64>> {
    model.check_dim("q", q.len())?;
    let pose = Pose::new(model, q);
    Ok(assemble_gravity(model, &bodies(model, &pose)))
}

/// All three terms from one pass over the chain.
pub fn dynamics_terms(model: &ChainModel, state: &GeneralizedState) -> Result<DynamicsTerms> {
    model.check_dim("q", state.q.len())?;
    model.check_dim("qdot", state.qdot.len())?;
    let pose = Pose::new(model, &state.q);
    let bodies = bodies(model, &pose);
    Ok(DynamicsTerms {
        mass: assemble_mass(model, &bodies),
        coriolis: christoffel_coriolis(&mass_partials(model, &pose, &bodies), &state.qdot),
        gravity: assemble_gravity(model, &bodies),
    })
}

/// Total potential energy relative to z = 0.
pub fn potential_energy(model: &ChainModel, q: &DVector<f64>) -> Result<f64> {
    model.check_dim("q", q.len())?;
    let pose = Pose::new(model, q);
    Ok(bodies(model, &pose)
        .iter()
        .map(|b| b.mass * model.gravity * b.com[1])
        .sum())
}

pub fn kinetic_energy(model: &ChainModel, state: &GeneralizedState) -> Result<f64> {
    let m = mass_matrix(model, &state.q)?;
    Ok(0.5 * state.qdot.dot(&(m * &state.qdot)))
}

/// `C(q, q̇) q̇` without forming `C`: `Σ m_b J_bᵀ J̇_b q̇` over the bodies.
pub fn coriolis_vector(model: &ChainModel, state: &GeneralizedState) -> Result<DVector<f64>> {
    model.check_dim("q", state.q.len())?;
    model.check_dim("qdot", state.qdot.len())?;
    let pose = Pose::new(model, &state.q);
    let bodies = bodies(model, &pose);
    Ok(coriolis_product(model, &pose, &bodies, &state.qdot))
}

fn coriolis_product(
    model: &ChainModel,
    pose: &Pose,
    bodies: &[Body],
    qdot: &DVector<f64>,
) -> DVector<f64> {
    let n = model.dof();
    let velocity = |jac: &DMatrix<f64>| {
        let mut v = Vec2::zeros();
        for k in 0..n {
            v[0] += jac[(0, k)] * qdot[k];
            v[1] += jac[(1, k)] * qdot[k];
        }
        v
    };
    let base_vel = velocity(&pose.point_jacobian(model, 0, &pose.base));
    let origin_vels: Vec<Vec2> = (0..model.links.len())
        .map(|j| velocity(&pose.point_jacobian(model, j, &pose.origins[j])))
        .collect();
    let rot = model.base_mode.rot_index();
    let offset = model.joint_offset();
    let mut h = DVector::zeros(n);
    for b in bodies.iter().filter(|b| b.link > 0) {
        // J̇ q̇ of the COM: each revolute column perp(p − o) differentiates
        // to perp(ṗ − ȯ).
        let v = velocity(&b.jac);
        let mut acc = Vec2::zeros();
        if let Some(i) = rot {
            acc -= perp(&(v - base_vel)) * qdot[i];
        }
        for (j, vo) in origin_vels.iter().enumerate().take(b.link) {
            acc += perp(&(v - vo)) * qdot[offset + j];
        }
        h.gemv_tr(b.mass, &b.jac, &DVector::from_column_slice(acc.as_slice()), 1.0);
    }
    h
}

/// `q̈ = M⁻¹(τ_sen − τ_ext − C q̇ − g)`, with `τ_ext` on the left-hand side
/// of the equation of motion.
pub fn forward_dynamics(
    model: &ChainModel,
    state: &GeneralizedState,
    tau: &DVector<f64>,
    tau_ext: &DVector<f64>,
) -> Result<DVector<f64>> {
    model.check_dim("tau", tau.len())?;
    model.check_dim("tau_ext", tau_ext.len())?;
    model.check_dim("q", state.q.len())?;
    model.check_dim("qdot", state.qdot.len())?;
    let pose = Pose::new(model, &state.q);
    let bodies = bodies(model, &pose);
    let rhs = tau
        - tau_ext
        - coriolis_product(model, &pose, &bodies, &state.qdot)
        - assemble_gravity(model, &bodies);
    let chol = Cholesky::new(assemble_mass(model, &bodies)).ok_or(Error::SingularMassMatrix)?;
    Ok(chol.solve(&rhs))
}

pub fn forward_kinematics(model: &ChainModel, q: &DVector<f64>) -> Result<LinkEndpoints> {
    model.check_dim("q", q.len())?;
    let pose = Pose::new(model, q);
    let links = model
        .links
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let p1 = pose.origins[i];
            (p1, p1 + link_direction(pose.angles[i]) * l.length)
        })
        .collect();
    Ok(LinkEndpoints {
        base: pose.base,
        links,
    })
}

/// 2×N Jacobian of the material point `p1 + α(p2 − p1)` on link `link`
/// (1-based).
pub fn contact_jacobian(
    model: &ChainModel,
    q: &DVector<f64>,
    link: usize,
    alpha: f64,
) -> Result<DMatrix<f64>> {
    model.check_dim("q", q.len())?;
    model.check_link(link)?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid("alpha", "must lie in [0, 1]"));
    }
    let pose = Pose::new(model, q);
    let p = pose.point(link, alpha * model.links[link - 1].length);
    Ok(pose.point_jacobian(model, link, &p))
}

/// Jacobian of the distal end of the last link.
pub fn foot_jacobian(model: &ChainModel, q: &DVector<f64>) -> Result<DMatrix<f64>> {
    contact_jacobian(model, q, model.n_joints(), 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn fixed() -> ChainModel {
        ChainModel::reference_leg(BaseMode::Fixed)
    }

    #[test]
    fn last_diagonal_entry_is_configuration_independent() {
        let model = fixed();
        let expected = 0.00030 + 0.080 * 0.031 * 0.031;
        for q in [[0.0, 0.0], [0.4, -1.3], [2.0, 2.9]] {
            let m = mass_matrix(&model, &DVector::from_row_slice(&q)).unwrap();
            assert_abs_diff_eq!(m[(1, 1)], expected, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(expected, 3.7688e-4, epsilon = 1e-8);
    }

    #[test]
    fn mass_matrix_is_periodic_in_revolute_coordinates() {
        let model = ChainModel::reference_leg(BaseMode::VirtualFt);
        let q = DVector::from_row_slice(&[0.01, 0.02, -0.003, 0.7, -0.4]);
        let m = mass_matrix(&model, &q).unwrap();
        for i in [1, 3, 4] {
            let mut shifted = q.clone();
            shifted[i] += 2.0 * PI;
            let ms = mass_matrix(&model, &shifted).unwrap();
            assert!((m.clone() - ms).amax() < 1e-12);
        }
    }

    #[test]
    fn hanging_chain_has_no_joint_gravity() {
        let model = ChainModel::reference_leg(BaseMode::FloatingXz);
        let g = gravity_vector(&model, &DVector::from_row_slice(&[0.3, 0.5, 0.0, 0.0])).unwrap();
        assert_abs_diff_eq!(g[2], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(g[3], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(g[1], (0.738 + 0.351 + 0.080) * 9.81, epsilon = 1e-12);
        assert_abs_diff_eq!(g[0], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn floating_weight_is_configuration_independent() {
        let model = ChainModel::reference_leg(BaseMode::FloatingXz);
        let g = gravity_vector(&model, &DVector::from_row_slice(&[0.0, 0.2, 1.1, -2.0])).unwrap();
        assert_abs_diff_eq!(g[1], model.total_mass() * 9.81, epsilon = 1e-12);
    }

    #[test]
    fn kinematics_of_axis_aligned_poses() {
        let model = fixed();
        let fk = forward_kinematics(&model, &DVector::from_row_slice(&[0.0, 0.0])).unwrap();
        assert_abs_diff_eq!(fk.foot()[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(fk.foot()[1], -0.420, epsilon = 1e-15);

        let fk = forward_kinematics(&model, &DVector::from_row_slice(&[FRAC_PI_2, 0.3])).unwrap();
        assert_abs_diff_eq!(fk.links[0].1[0], 0.205, epsilon = 1e-15);
        assert_abs_diff_eq!(fk.links[0].1[1], 0.0, epsilon = 1e-15);
        assert_eq!(fk.links[0].1, fk.links[1].0);
    }

    #[test]
    fn contact_jacobian_at_root_pivot_is_zero() {
        let model = fixed();
        let j = contact_jacobian(&model, &DVector::from_row_slice(&[0.7, 1.2]), 1, 0.0).unwrap();
        assert_eq!(j.amax(), 0.0);
    }

    #[test]
    fn contact_jacobian_distal_columns_vanish() {
        let model = ChainModel::reference_leg(BaseMode::VirtualFt);
        let q = DVector::from_row_slice(&[0.0, 0.1, 0.0, 0.7, 1.2]);
        let j = contact_jacobian(&model, &q, 1, 0.6).unwrap();
        assert_eq!(j[(0, 4)], 0.0);
        assert_eq!(j[(1, 4)], 0.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let model = fixed();
        assert!(matches!(
            mass_matrix(&model, &DVector::zeros(3)),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            contact_jacobian(&model, &DVector::zeros(2), 3, 0.5),
            Err(Error::LinkIndexOutOfRange { .. })
        ));
        assert!(matches!(
            contact_jacobian(&model, &DVector::zeros(2), 0, 0.5),
            Err(Error::LinkIndexOutOfRange { .. })
        ));
        let mut bad = fixed();
        bad.links[0].com_offset = 1.0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn static_equilibrium_gives_zero_acceleration() {
        let model = fixed();
        let q = DVector::from_row_slice(&[0.9, -0.4]);
        let state = GeneralizedState::at_rest(q.clone());
        let g = gravity_vector(&model, &q).unwrap();
        let acc = forward_dynamics(&model, &state, &g, &DVector::zeros(2)).unwrap();
        assert!(acc.amax() < 1e-12);
    }

    #[test]
    fn acceleration_is_linear_in_torque_deficit() {
        let model = ChainModel::reference_leg(BaseMode::FloatingXz);
        let q = DVector::from_row_slice(&[0.0, 0.3, 0.9, -0.4]);
        let state = GeneralizedState::at_rest(q.clone());
        let g = gravity_vector(&model, &q).unwrap();
        let deficit = DVector::from_row_slice(&[0.2, -0.1, 0.3, 0.05]);
        let zero = DVector::zeros(4);
        let a1 = forward_dynamics(&model, &state, &(&g + &deficit), &zero).unwrap();
        let a2 = forward_dynamics(&model, &state, &(&g + &deficit * 2.0), &zero).unwrap();
        assert!((a2 - a1 * 2.0).amax() < 1e-10);
    }
}
