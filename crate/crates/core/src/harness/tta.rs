use serde::{Deserialize, Serialize};

use super::{setup_episode, EpisodeResult, EvalReport};
use crate::control::{run_manipulation, AiaConfig};
use crate::policy::{
    pixel_features, propose_with_tta, PosePolicy, ProposalContext, TtaScorer, FEATURE_COUNT,
};
use crate::scene::Category;
use crate::{Error, Result};

/// Domain shift applied on top of the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TtaScenario {
    /// Contacts within this many pixels of the projected handle marker fail
    /// regardless of physics. `None` disables the shift.
    pub forbidden_radius_px: Option<f64>,
}

impl Default for TtaScenario {
    fn default() -> Self {
        Self {
            forbidden_radius_px: Some(15.0),
        }
    }
}

impl TtaScenario {
    pub fn disabled() -> Self {
        Self {
            forbidden_radius_px: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TtaOptions {
    pub categories: Vec<Category>,
    pub candidates: usize,
    pub learning_rate: f64,
    /// When false the scorer is never consulted or updated and the base
    /// policy runs unchanged.
    pub adapt: bool,
    pub window: usize,
    pub scenario: TtaScenario,
    pub resolution: [u32; 2],
}

impl Default for TtaOptions {
    fn default() -> Self {
        Self {
            categories: vec![Category::Door],
            candidates: crate::policy::DEFAULT_CANDIDATES,
            learning_rate: crate::policy::DEFAULT_LEARNING_RATE,
            adapt: true,
            window: 50,
            scenario: TtaScenario::default(),
            resolution: [
                crate::render::DEFAULT_RESOLUTION.0,
                crate::render::DEFAULT_RESOLUTION.1,
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TtaReport {
    pub report: EvalReport,
    pub options: TtaOptions,
    pub window_rates: Vec<f64>,
    /// Episodes whose contact fell inside the forbidden region.
    pub forced_failures: usize,
    /// Scorer weights after every update, in order.
    pub scorer_history: Vec<[f64; FEATURE_COUNT]>,
    pub scorer: TtaScorer,
}

impl TtaReport {
    pub fn first_window_rate(&self) -> Option<f64> {
        self.window_rates.first().copied()
    }

    pub fn last_window_rate(&self) -> Option<f64> {
        self.window_rates.last().copied()
    }

    pub fn overall_rate(&self) -> f64 {
        let eps = &self.report.episodes;
        eps.iter().filter(|e| e.success_initial).count() as f64 / eps.len().max(1) as f64
    }
}

/// Initial-movement success rate over consecutive, non-overlapping windows
/// of `window` episodes. A trailing partial window is dropped.
pub fn window_rates(results: &[EpisodeResult], window: usize) -> Vec<f64> {
    if window == 0 {
        return Vec::new();
    }
    results
        .chunks_exact(window)
        .map(|w| w.iter().filter(|e| e.success_initial).count() as f64 / window as f64)
        .collect()
}

/// Sequential episodes in which the scorer re-ranks the base policy's
/// candidates and is updated from every outcome. Categories are cycled.
pub fn run_tta_experiment(
    base: &dyn PosePolicy,
    opts: &TtaOptions,
    episodes: usize,
    cfg: &AiaConfig,
    seed: u64,
    scorer: Option<TtaScorer>,
) -> Result<TtaReport> {
    cfg.validate()?;
    if opts.categories.is_empty() {
        return Err(Error::InvalidParams("no categories".into()));
    }
    let mut scorer = scorer.unwrap_or_else(|| TtaScorer::new(opts.learning_rate));
    let candidates = if opts.adapt { opts.candidates } else { 1 };
    let name = if opts.adapt {
        format!("{}+tta", base.name())
    } else {
        base.name().to_string()
    };
    let mut results = Vec::with_capacity(episodes);
    let mut history = Vec::new();
    let mut forced_failures = 0;

    for i in 0..episodes {
        let category = opts.categories[i % opts.categories.len()];
        let id = i as u64;
        let ep = match setup_episode(category, id, seed, opts.resolution) {
            Ok(ep) => ep,
            Err(e) => {
                log::debug!("episode {id} skipped: {e}");
                let mut r = EpisodeResult::from_displacement(id, category, &name, 0.0, 0, None);
                r.error = Some(e.to_string());
                results.push(r);
                continue;
            }
        };
        let amap = ep.affordance()?;
        let ctx = ProposalContext {
            obj: &ep.obj,
            view: &ep.view,
            target_joint: ep.spec.target_joint,
            amap: Some(&amap),
        };
        let proposal = propose_with_tta(base, &scorer, &ctx, ep.spec.policy_seed(), candidates)?;
        let px = proposal.pose.contact_px;

        let forbidden = match opts.scenario.forbidden_radius_px {
            Some(radius) => {
                let part = ep
                    .obj
                    .part_of_joint(ep.spec.target_joint)
                    .expect("checked by setup");
                match ep.obj.parts[part].handle {
                    Some(h) => {
                        let world = ep.obj.part_pose(part, &ep.view.joint_values) * h;
                        let (u, v) = ep.view.project(&world);
                        (f64::from(px.0) - u).hypot(f64::from(px.1) - v) <= radius
                    }
                    None => false,
                }
            }
            None => false,
        };

        let result = if forbidden {
            forced_failures += 1;
            let mut r = EpisodeResult::from_displacement(id, category, &name, 0.0, 0, None);
            r.error = Some("contact inside forbidden region".into());
            r
        } else {
            let t = run_manipulation(
                &ep.obj,
                &ep.view,
                &proposal.pose,
                ep.spec.target_joint,
                cfg,
                ep.spec.control_seed(),
            )?;
            EpisodeResult::from_displacement(
                id,
                category,
                &name,
                t.displacement,
                t.steps,
                Some(t.termination),
            )
        };
        if opts.adapt {
            scorer.update(&pixel_features(&ctx, px)?, result.success_initial)?;
            history.push(scorer.weights);
        }
        results.push(result);
    }

    let window_rates = window_rates(&results, opts.window);
    let report = EvalReport::from_results(
        &name,
        &opts.categories,
        results,
        *cfg,
        seed,
        opts.resolution,
    );
    Ok(TtaReport {
        report,
        options: opts.clone(),
        window_rates,
        forced_failures,
        scorer_history: history,
        scorer,
    })
}
