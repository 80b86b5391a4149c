//! Fixtures shared by the criterion benchmarks.

use affordsim_core::harness::{setup_episode, Episode};
use affordsim_core::policy::propose_normal_oracle;
use affordsim_core::{AffordanceMap, Category, ContactState, ManipPose};

/// A visible episode of `category` at `resolution`.
pub fn episode(category: Category, resolution: u32) -> Episode {
    setup_episode(category, 0, 42, [resolution, resolution]).expect("fixture episode")
}

pub fn affordance(ep: &Episode) -> AffordanceMap {
    ep.affordance().expect("fixture affordance")
}

/// Oracle pose and the contact it attaches.
pub fn contact(ep: &Episode) -> (ManipPose, ContactState) {
    let p =
        propose_normal_oracle(&ep.obj, &ep.view, ep.spec.target_joint, 1).expect("fixture pose");
    let state = ContactState::attach(
        &ep.obj,
        &ep.view.joint_values,
        ep.spec.target_joint,
        &p.pose.contact_3d,
    )
    .expect("fixture contact");
    (p.pose, state)
}
