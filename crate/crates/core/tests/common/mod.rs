//! Hand-written constructions shared by the oracle tests and the
//! acceptance suite. Geometry and virtual work never go through the
//! crate's kinematics.

#![allow(dead_code)]

use legcontact::contact::BaseWrench;
use legcontact::dynamics::{gravity_vector, BaseMode, ChainModel, GeneralizedState};
use nalgebra::DVector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Mass, inertia, COM position and absolute angle of every body, written
/// out directly from the angle convention (link direction `(sin ψ, −cos ψ)`).
pub fn oracle_bodies(model: &ChainModel, q: &DVector<f64>) -> Vec<(f64, f64, [f64; 2], f64)> {
    let (mut bx, mut bz, mut psi, off) = match model.base_mode {
        BaseMode::Fixed => (0.0, 0.0, 0.0, 0),
        BaseMode::FloatingXz => (q[0], q[1], 0.0, 2),
        BaseMode::VirtualFt => (q[0], q[2], -q[1], 3),
    };
    let mut out = Vec::new();
    match model.base_mode {
        BaseMode::Fixed => {}
        BaseMode::FloatingXz => out.push((model.base_mass, 0.0, [bx, bz], 0.0)),
        BaseMode::VirtualFt => out.push((model.base_mass, model.base_inertia, [bx, bz], psi)),
    }
    for (i, l) in model.links.iter().enumerate() {
        psi += q[off + i];
        let (s, c) = psi.sin_cos();
        out.push((l.mass, l.inertia, [bx + l.com_offset * s, bz - l.com_offset * c], psi));
        bx += l.length * s;
        bz -= l.length * c;
    }
    out
}

pub fn oracle_potential(model: &ChainModel, q: &DVector<f64>) -> f64 {
    oracle_bodies(model, q)
        .iter()
        .map(|b| b.0 * model.gravity * b.2[1])
        .sum()
}

/// Joint origins, the contact point and the base point for `[x, y_rot, z, q1, q2]`.
pub fn oracle_points(model: &ChainModel, q: &[f64], link: usize, alpha: f64) -> ([f64; 2], Vec<[f64; 2]>, [f64; 2]) {
    let base = [q[0], q[2]];
    let mut psi = -q[1];
    let mut o = base;
    let mut origins = Vec::new();
    let mut point = [0.0; 2];
    for (i, l) in model.links.iter().enumerate() {
        psi += q[3 + i];
        origins.push(o);
        let end = [o[0] + l.length * psi.sin(), o[1] - l.length * psi.cos()];
        if i + 1 == link {
            point = [o[0] + alpha * (end[0] - o[0]), o[1] + alpha * (end[1] - o[1])];
        }
        o = end;
    }
    (base, origins, point)
}

/// Generalized force of a force `f` applied at the contact, by virtual work
/// on each coordinate: translations carry `f`, rotations carry the moment
/// about their pivot (the base rotation is clockwise-positive).
pub fn oracle_generalized_force(model: &ChainModel, q: &[f64], link: usize, alpha: f64, f: [f64; 2]) -> DVector<f64> {
    let (base, origins, p) = oracle_points(model, q, link, alpha);
    let moment = |pivot: [f64; 2]| (p[0] - pivot[0]) * f[1] - (p[1] - pivot[1]) * f[0];
    let mut g = DVector::zeros(3 + model.links.len());
    g[0] = f[0];
    g[1] = -moment(base);
    g[2] = f[1];
    for j in 0..link {
        g[3 + j] = moment(origins[j]);
    }
    g
}

pub struct Case {
    pub q: Vec<f64>,
    pub link: usize,
    pub alpha: f64,
    pub force: [f64; 2],
}

pub fn random_case(rng: &mut ChaCha8Rng, model: &ChainModel) -> Case {
    let q: Vec<f64> = vec![
        rng.random_range(-0.5..0.5),
        rng.random_range(-0.5..0.5),
        rng.random_range(-0.5..0.5),
        rng.random_range(-3.2..3.2),
        rng.random_range(-3.2..3.2),
    ];
    let link = rng.random_range(1..=2);
    let alpha = rng.random_range(0.0..=1.0);
    // Keep the force at least ~3° away from the link direction.
    let (_, origins, _) = oracle_points(model, &q, link, 0.0);
    let end = if link < origins.len() {
        origins[link]
    } else {
        oracle_points(model, &q, link, 1.0).2
    };
    let link_angle = (end[1] - origins[link - 1][1]).atan2(end[0] - origins[link - 1][0]);
    let offset = rng.random_range(0.05..(std::f64::consts::PI - 0.05));
    let angle = link_angle + offset;
    let mag = rng.random_range(0.5..20.0);
    Case {
        q,
        link,
        alpha,
        force: [mag * angle.cos(), mag * angle.sin()],
    }
}

/// Static snapshot of a leg at rest under gravity and the contact force:
/// joint torques and the sensor reading hold it in equilibrium.
pub fn snapshot_for(model: &ChainModel, case: &Case) -> (GeneralizedState, DVector<f64>, BaseWrench) {
    let q = DVector::from_vec(case.q.clone());
    let g = gravity_vector(model, &q).unwrap();
    let d = oracle_generalized_force(model, &case.q, case.link, case.alpha, case.force);
    let support = &g - &d;
    let tau = DVector::from_fn(2, |i, _| support[3 + i]);
    let reading = BaseWrench::new(support[0], support[2], support[1]);
    (GeneralizedState::at_rest(q), tau, reading)
}
