//! Quasi-static contact model and the perturb-probe-commit direction search.
//!
//! A suction contact is a material point on the target part. A force `f`
//! applied there produces the generalized force `tau = J^T f`, with `J` the
//! contact point's velocity per unit joint rate, and the joint yields
//! `dq = tau / k` (clamped to its limits). Each step probes the current
//! pulling direction and `N` random perturbations of it with a small force,
//! keeps the one that moved the contact furthest, then commits a larger
//! force along it.

use nalgebra::{Point3, Vector3};
use rand::Rng;
use rand_distr::{Distribution, UnitBall};
use serde::{Deserialize, Serialize};

use crate::dataset::ManipPose;
use crate::render::CameraView;
use crate::scene::{point_jacobian, surface_normal, ArticulatedObject};
use crate::{seed, Error, Result};

/// Probe displacements at or below this count as no motion.
pub const STALL_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AiaConfig {
    /// Number of random perturbations per step (`N`).
    pub perturbations: usize,
    /// Perturbation radius in direction space.
    pub epsilon1: f64,
    /// Probe force magnitude.
    pub epsilon2: f64,
    /// Commit force as a multiple of the probe force.
    pub commit_scale: f64,
    /// Joint compliance: force per unit joint displacement.
    pub stiffness: f64,
    pub max_steps: usize,
    /// Episode ends once the joint has moved strictly more than this.
    pub target_displacement: f64,
    /// Largest angle between approach direction and the inward surface
    /// normal at which suction still holds, in degrees.
    pub suction_cone_deg: f64,
}

impl Default for AiaConfig {
    fn default() -> Self {
        Self {
            perturbations: 16,
            epsilon1: 0.5,
            epsilon2: 1.0,
            commit_scale: 10.0,
            // 10 N committed along a drawer axis moves it 0.02 m.
            stiffness: 500.0,
            max_steps: 60,
            target_displacement: 0.1,
            suction_cone_deg: 60.0,
        }
    }
}

impl AiaConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("epsilon1", self.epsilon1),
            ("epsilon2", self.epsilon2),
            ("commit_scale", self.commit_scale),
            ("stiffness", self.stiffness),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(self.target_displacement.is_finite() && self.target_displacement >= 0.0) {
            return Err(Error::InvalidParams(
                "target_displacement must be non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn commit_force(&self) -> f64 {
        self.commit_scale * self.epsilon2
    }
}

/// Suction contact on the target part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactState {
    pub target_joint: usize,
    pub part_index: usize,
    pub joint_values: Vec<f64>,
    /// Contact point in the part frame (object frame at zero configuration).
    pub local_point: Point3<f64>,
    pub attached: bool,
    pub step_index: usize,
}

impl ContactState {
    /// Attaches at world point `world` on the part driven by `target_joint`.
    pub fn attach(
        obj: &ArticulatedObject,
        joint_values: &[f64],
        target_joint: usize,
        world: &Point3<f64>,
    ) -> Result<Self> {
        obj.check_joint_values(joint_values)?;
        let part_index = obj
            .part_of_joint(target_joint)
            .ok_or(Error::NoSuchJoint(target_joint))?;
        let local_point = obj
            .part_pose(part_index, joint_values)
            .inverse_transform_point(world);
        Ok(Self {
            target_joint,
            part_index,
            joint_values: joint_values.to_vec(),
            local_point,
            attached: true,
            step_index: 0,
        })
    }

    pub fn q(&self) -> f64 {
        self.joint_values[self.target_joint]
    }

    pub fn contact_world(&self, obj: &ArticulatedObject) -> Point3<f64> {
        self.contact_at(obj, self.q())
    }

    fn contact_at(&self, obj: &ArticulatedObject, q: f64) -> Point3<f64> {
        let mut values = self.joint_values.clone();
        values[self.target_joint] = q;
        obj.part_pose(self.part_index, &values) * self.local_point
    }

    fn jacobian(&self, obj: &ArticulatedObject) -> Vector3<f64> {
        point_jacobian(obj, self.target_joint, &self.contact_world(obj))
    }
}

/// Quasi-static response to a force.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Response {
    /// Joint displacement after limit clamping.
    pub dq: f64,
    /// Distance travelled by the contact point.
    pub delta: f64,
}

fn respond(
    obj: &ArticulatedObject,
    state: &ContactState,
    direction: &Vector3<f64>,
    magnitude: f64,
    stiffness: f64,
) -> Result<Response> {
    if !state.attached {
        return Err(Error::Detached);
    }
    let spec = obj.joint(state.target_joint)?;
    let tau = state.jacobian(obj).dot(&(direction * magnitude));
    let q = state.q();
    let q_new = spec.clamp(q + tau / stiffness);
    let delta = (state.contact_at(obj, q_new) - state.contact_world(obj)).norm();
    Ok(Response {
        dq: q_new - q,
        delta,
    })
}

/// Contact displacement produced by a force of `magnitude` along the unit
/// vector `direction`. Measurement only: `state` is not changed.
pub fn apply_probe(
    obj: &ArticulatedObject,
    state: &ContactState,
    direction: &Vector3<f64>,
    magnitude: f64,
    stiffness: f64,
) -> Result<f64> {
    Ok(respond(obj, state, direction, magnitude, stiffness)?.delta)
}

/// Outcome of one probe-and-commit iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct AiaStep {
    pub d_opt: Vector3<f64>,
    /// Index of the winning candidate; 0 is the unperturbed direction.
    pub chosen: usize,
    /// Probe displacement of every candidate, index-aligned.
    pub deltas: Vec<f64>,
    pub committed: Response,
    pub state: ContactState,
}

/// Candidate directions: `d` itself followed by `n` normalized perturbations
/// `d + z` with `z` uniform in the ball of radius `epsilon1`.
pub fn candidate_directions(
    d: &Vector3<f64>,
    n: usize,
    epsilon1: f64,
    rng: &mut impl Rng,
) -> Vec<Vector3<f64>> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(*d);
    while out.len() < n + 1 {
        let z: [f64; 3] = UnitBall.sample(rng);
        let v = d + Vector3::from(z) * epsilon1;
        // Only reachable when epsilon1 >= 1.
        if v.norm() > 1e-9 {
            out.push(v.normalize());
        }
    }
    out
}

/// Probes `d_i` and its perturbations, selects the direction with the
/// largest displacement (lowest index on ties) and commits a step along it.
pub fn aia_step(
    obj: &ArticulatedObject,
    state: &ContactState,
    d_i: &Vector3<f64>,
    cfg: &AiaConfig,
    seed: u64,
) -> Result<AiaStep> {
    if !state.attached {
        return Err(Error::Detached);
    }
    let mut rng = seed::rng(seed);
    let candidates =
        candidate_directions(&d_i.normalize(), cfg.perturbations, cfg.epsilon1, &mut rng);
    let deltas = candidates
        .iter()
        .map(|d| apply_probe(obj, state, d, cfg.epsilon2, cfg.stiffness))
        .collect::<Result<Vec<_>>>()?;
    let mut chosen = 0;
    for (j, &delta) in deltas.iter().enumerate() {
        if delta > deltas[chosen] {
            chosen = j;
        }
    }
    if deltas[chosen] <= STALL_EPS {
        return Err(Error::Stalled);
    }
    let d_opt = candidates[chosen];
    let committed = respond(obj, state, &d_opt, cfg.commit_force(), cfg.stiffness)?;
    let mut next = state.clone();
    next.joint_values[state.target_joint] += committed.dq;
    next.step_index += 1;
    Ok(AiaStep {
        d_opt,
        chosen,
        deltas,
        committed,
        state: next,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Joint displacement exceeded the target.
    Reached,
    MaxSteps,
    /// Every probed direction produced no motion.
    Stalled,
    /// The contact pixel is not on the part driven by the target joint.
    NoCoupling,
    /// Approach direction outside the suction cone.
    SuctionFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub d_opt: [f64; 3],
    pub delta: f64,
    pub dq: f64,
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub target_joint: usize,
    pub q_initial: f64,
    pub q_final: f64,
    /// Joint-space displacement `|q_final - q_initial|`.
    pub displacement: f64,
    pub steps: usize,
    pub termination: Termination,
    pub trace: Vec<StepRecord>,
}

impl EpisodeTrace {
    fn failed(target_joint: usize, q: f64, termination: Termination) -> Self {
        Self {
            target_joint,
            q_initial: q,
            q_final: q,
            displacement: 0.0,
            steps: 0,
            termination,
            trace: Vec::new(),
        }
    }
}

/// True when `forward` lies within the suction cone around `-normal`.
pub fn suction_holds(forward: &Vector3<f64>, normal: &Vector3<f64>, cone_deg: f64) -> bool {
    let cos = forward.normalize().dot(&(-normal.normalize()));
    cos >= cone_deg.to_radians().cos()
}

/// Attaches at the pose's contact and runs probe-and-commit steps until the
/// target joint has moved more than `cfg.target_displacement`, the step
/// budget runs out, or the search stalls. The gripper pulls along
/// `-forward_dir`.
pub fn run_manipulation(
    obj: &ArticulatedObject,
    view: &CameraView,
    pose: &ManipPose,
    target_joint: usize,
    cfg: &AiaConfig,
    seed: u64,
) -> Result<EpisodeTrace> {
    cfg.validate()?;
    let values = &view.joint_values;
    obj.check_joint_values(values)?;
    obj.joint(target_joint)?;
    let q0 = values[target_joint];
    let part = obj
        .part_of_joint(target_joint)
        .ok_or(Error::NoSuchJoint(target_joint))?;
    let part_id = obj.parts[part].part_id;

    let (x, y) = pose.contact_px;
    if x >= view.width() || y >= view.height() || view.part_at(x, y) != part_id {
        return Ok(EpisodeTrace::failed(
            target_joint,
            q0,
            Termination::NoCoupling,
        ));
    }
    let Ok(normal) = surface_normal(obj, values, part_id, &pose.contact_3d) else {
        return Ok(EpisodeTrace::failed(
            target_joint,
            q0,
            Termination::NoCoupling,
        ));
    };
    if !suction_holds(&pose.forward_dir, &normal, cfg.suction_cone_deg) {
        return Ok(EpisodeTrace::failed(
            target_joint,
            q0,
            Termination::SuctionFailed,
        ));
    }

    let mut state = ContactState::attach(obj, values, target_joint, &pose.contact_3d)?;
    let mut direction = -pose.forward_dir.normalize();
    let mut trace = Vec::new();
    let reached = |s: &ContactState| (s.q() - q0).abs() > cfg.target_displacement;
    let mut termination = Termination::MaxSteps;
    for step in 0..cfg.max_steps {
        if reached(&state) {
            break;
        }
        match aia_step(
            obj,
            &state,
            &direction,
            cfg,
            seed::derive(seed, step as u64),
        ) {
            Ok(s) => {
                trace.push(StepRecord {
                    d_opt: s.d_opt.into(),
                    delta: s.deltas[s.chosen],
                    dq: s.committed.dq,
                    q: s.state.q(),
                });
                direction = s.d_opt;
                state = s.state;
            }
            Err(Error::Stalled) => {
                termination = Termination::Stalled;
                break;
            }
            Err(e) => return Err(e),
        }
    }
    if reached(&state) {
        termination = Termination::Reached;
    }
    Ok(EpisodeTrace {
        target_joint,
        q_initial: q0,
        q_final: state.q(),
        displacement: (state.q() - q0).abs(),
        steps: trace.len(),
        termination,
        trace,
    })
}
