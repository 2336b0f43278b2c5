use serde::{Deserialize, Serialize};

use super::group::RolloutGroup;
use super::policy::{PolicyContext, PolicyParams};
use super::GrpoError;

/// Groups whose reward spread is below this get all-zero advantages.
pub const ZERO_STD: f64 = 1e-12;
pub const RATIO_MIN: f64 = 1e-8;
pub const RATIO_MAX: f64 = 1e8;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StdKind {
    /// Divide by G.
    #[default]
    Population,
    /// Divide by G - 1.
    Sample,
}

/// How planning steps are averaged in the objective.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// Uniform mean over every planning step in the batch.
    #[default]
    PerStep,
    /// Mean over trajectories of each trajectory's step mean.
    PerTrajectory,
}

pub fn normalize_advantages(rewards: &[f64]) -> Result<Vec<f64>, GrpoError> {
    normalize_advantages_with(rewards, StdKind::Population)
}

pub fn normalize_advantages_with(rewards: &[f64], std_kind: StdKind) -> Result<Vec<f64>, GrpoError> {
    let g = rewards.len();
    if g < 2 {
        return Err(GrpoError::GroupTooSmall(g));
    }
    let mean = rewards.iter().sum::<f64>() / g as f64;
    let ss: f64 = rewards.iter().map(|r| (r - mean) * (r - mean)).sum();
    let denom = match std_kind {
        StdKind::Population => g as f64,
        StdKind::Sample => (g - 1) as f64,
    };
    let std = (ss / denom).sqrt();
    if std < ZERO_STD {
        return Ok(vec![0.0; g]);
    }
    Ok(rewards.iter().map(|r| (r - mean) / std).collect())
}

/// `exp(new - old)` limited to `[RATIO_MIN, RATIO_MAX]`, plus whether the
/// limit was hit.
pub fn ratio_with_flag(logp_new: f64, logp_old: f64) -> (f64, bool) {
    let r = (logp_new - logp_old).exp();
    if r < RATIO_MIN {
        (RATIO_MIN, true)
    } else if r > RATIO_MAX {
        (RATIO_MAX, true)
    } else {
        (r, false)
    }
}

pub fn importance_ratio(logp_new: f64, logp_old: f64) -> f64 {
    let (r, clamped) = ratio_with_flag(logp_new, logp_old);
    if clamped {
        log::debug!("importance ratio clamped (log-ratio {})", logp_new - logp_old);
    }
    r
}

/// `KL(p || q)` from log-probabilities.
pub fn categorical_kl(logp: &[f64], logq: &[f64]) -> f64 {
    logp.iter()
        .zip(logq)
        .map(|(lp, lq)| {
            let p = lp.exp();
            if p == 0.0 {
                0.0
            } else {
                p * (lp - lq)
            }
        })
        .sum()
}

pub fn kl_divergence(policy: &PolicyParams, reference: &PolicyParams, ctx: &PolicyContext) -> Result<f64, GrpoError> {
    if !policy.same_templates(reference) {
        return Err(GrpoError::TemplateMismatch);
    }
    Ok(categorical_kl(&policy.log_probs(ctx), &reference.log_probs(ctx)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveConfig {
    pub kl_coeff: f64,
    /// PPO-style ratio clip; `None` keeps the plain `rho * A` term.
    pub clip: Option<f64>,
    pub weighting: Weighting,
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        ObjectiveConfig {
            kl_coeff: 0.1,
            clip: None,
            weighting: Weighting::PerStep,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObjectiveValue {
    pub objective: f64,
    /// Weighted mean KL to the reference at the visited contexts.
    pub mean_kl: f64,
    /// Same shape as `PolicyParams::logits`.
    pub gradient: Vec<f64>,
}

/// `mean_t(rho_t A_t) - beta * mean_t KL_t` over all planning steps of the
/// groups, with its exact gradient in the policy logits.
pub fn grpo_objective(
    groups: &[RolloutGroup],
    policy: &PolicyParams,
    reference: &PolicyParams,
    cfg: &ObjectiveConfig,
) -> Result<ObjectiveValue, GrpoError> {
    if !policy.same_templates(reference) {
        return Err(GrpoError::TemplateMismatch);
    }
    policy.check()?;
    let t = policy.n_templates();
    let tau = policy.temperature;
    let mut gradient = vec![0.0; policy.logits.len()];
    let mut objective = 0.0;
    let mut mean_kl = 0.0;

    let n_steps: usize = groups.iter().flat_map(|g| &g.records).map(Vec::len).sum();
    let n_trajs: usize = groups.iter().flat_map(|g| &g.records).filter(|r| !r.is_empty()).count();
    for g in groups {
        if g.advantages.len() != g.records.len() {
            return Err(GrpoError::NotNormalized);
        }
    }
    if n_steps == 0 {
        return Ok(ObjectiveValue {
            objective: 0.0,
            mean_kl: 0.0,
            gradient,
        });
    }

    let mut dz = vec![0.0; t];
    for g in groups {
        for (records, &adv) in g.records.iter().zip(&g.advantages) {
            let w = match cfg.weighting {
                Weighting::PerStep => 1.0 / n_steps as f64,
                Weighting::PerTrajectory => 1.0 / (n_trajs * records.len().max(1)) as f64,
            };
            for rec in records {
                if rec.template >= t {
                    return Err(GrpoError::Shape {
                        expected: t,
                        got: rec.template + 1,
                    });
                }
                let logp = policy.log_probs(&rec.context);
                let logq = reference.log_probs(&rec.context);
                let (rho, clamped) = ratio_with_flag(logp[rec.template], rec.old_logprob);
                let kl = categorical_kl(&logp, &logq);

                let (term, ratio_active) = match cfg.clip {
                    None => (rho * adv, !clamped),
                    Some(eps) => {
                        let unclipped = rho * adv;
                        let clipped = rho.clamp(1.0 - eps, 1.0 + eps) * adv;
                        if unclipped <= clipped {
                            (unclipped, !clamped)
                        } else {
                            (clipped, false)
                        }
                    }
                };
                objective += w * (term - cfg.kl_coeff * kl);
                mean_kl += w * kl;

                // d/dz_j of the step objective, then chain through z = xW/tau.
                for j in 0..t {
                    let pj = logp[j].exp();
                    let d_ratio = if ratio_active {
                        rho * adv * (f64::from(u8::from(j == rec.template)) - pj)
                    } else {
                        0.0
                    };
                    let d_kl = if pj == 0.0 { 0.0 } else { pj * (logp[j] - logq[j] - kl) };
                    dz[j] = w * (d_ratio - cfg.kl_coeff * d_kl) / tau;
                }
                for &f in &rec.context.features {
                    for j in 0..t {
                        gradient[f * t + j] += dz[j];
                    }
                }
            }
        }
    }
    Ok(ObjectiveValue {
        objective,
        mean_kl,
        gradient,
    })
}

/// Gradient ascent step on the logits.
pub fn update_policy(policy: &PolicyParams, gradient: &[f64], learning_rate: f64) -> Result<PolicyParams, GrpoError> {
    if gradient.len() != policy.logits.len() {
        return Err(GrpoError::Shape {
            expected: policy.logits.len(),
            got: gradient.len(),
        });
    }
    let mut next = policy.clone();
    for (w, g) in next.logits.iter_mut().zip(gradient) {
        *w += learning_rate * g;
    }
    Ok(next)
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
