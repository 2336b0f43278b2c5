//! The desk-scale trainable planner: a temperature softmax over plan
//! templates whose logits are a linear function of sparse binary context
//! features (bias, task domain, retrieved-memory keyword bucket).

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{format_plan_output, Plan, PlannerPort, PlannerRequest, Subgoal};
use crate::env::{PlanTemplate, Task, WorldSpec};
use crate::memory::MemoryContext;
use crate::port::PortError;
use crate::seed::str_hash;

use super::GrpoError;

pub const DEFAULT_TEMPERATURE: f64 = 0.5;
pub const DEFAULT_MEMORY_BUCKETS: usize = 4;

/// Active feature indices of one planning context; every active feature
/// has value 1.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PolicyContext {
    pub features: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub templates: Vec<PlanTemplate>,
    /// Known domain tags; one extra feature slot covers unseen tags.
    pub domains: Vec<String>,
    pub memory_buckets: usize,
    /// `n_features x n_templates`, row-major.
    pub logits: Vec<f64>,
    pub temperature: f64,
}

impl PolicyParams {
    /// All-zero logits, i.e. the uniform policy.
    pub fn uniform(
        templates: Vec<PlanTemplate>,
        domains: Vec<String>,
        memory_buckets: usize,
        temperature: f64,
    ) -> Result<Self, GrpoError> {
        if templates.is_empty() {
            return Err(GrpoError::NoTemplates);
        }
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(GrpoError::Config(format!("temperature must be positive, got {temperature}")));
        }
        let n_features = 1 + domains.len() + 1 + memory_buckets;
        Ok(PolicyParams {
            logits: vec![0.0; n_features * templates.len()],
            templates,
            domains,
            memory_buckets,
            temperature,
        })
    }

    /// Uniform policy over a world's templates, with one domain feature per
    /// distinct domain tag among its tasks.
    pub fn for_world(spec: &WorldSpec, temperature: f64) -> Result<Self, GrpoError> {
        let mut domains: Vec<String> = spec.tasks.iter().map(|t| t.domain_tag.clone()).collect();
        domains.sort();
        domains.dedup();
        Self::uniform(spec.plan_templates.clone(), domains, DEFAULT_MEMORY_BUCKETS, temperature)
    }

    pub fn n_templates(&self) -> usize {
        self.templates.len()
    }

    pub fn n_features(&self) -> usize {
        1 + self.domains.len() + 1 + self.memory_buckets
    }

    pub fn check(&self) -> Result<(), GrpoError> {
        if self.templates.is_empty() {
            return Err(GrpoError::NoTemplates);
        }
        if self.logits.len() != self.n_features() * self.n_templates() {
            return Err(GrpoError::Shape {
                expected: self.n_features() * self.n_templates(),
                got: self.logits.len(),
            });
        }
        if self.logits.iter().any(|x| !x.is_finite()) {
            return Err(GrpoError::Config("non-finite logit".into()));
        }
        Ok(())
    }

    pub fn same_templates(&self, other: &PolicyParams) -> bool {
        self.templates == other.templates && self.n_features() == other.n_features()
    }

    pub fn featurize(&self, task: &Task, memory: &MemoryContext) -> PolicyContext {
        let domain = self
            .domains
            .iter()
            .position(|d| *d == task.domain_tag)
            .unwrap_or(self.domains.len());
        let mut features = vec![0, 1 + domain];
        if self.memory_buckets > 0 {
            let bucket = match memory.discrete.first().and_then(|e| e.keywords.first()) {
                None => 0,
                Some(_) if self.memory_buckets == 1 => 0,
                Some(k) => 1 + (str_hash(&k.to_lowercase()) % (self.memory_buckets as u64 - 1)) as usize,
            };
            features.push(2 + self.domains.len() + bucket);
        }
        PolicyContext { features }
    }

    /// Temperature-scaled scores `z = x W / tau`.
    pub fn scores(&self, ctx: &PolicyContext) -> Vec<f64> {
        let t = self.n_templates();
        let mut z = vec![0.0; t];
        for &f in &ctx.features {
            for (j, zj) in z.iter_mut().enumerate() {
                *zj += self.logits[f * t + j];
            }
        }
        z.iter_mut().for_each(|x| *x /= self.temperature);
        z
    }

    pub fn log_probs(&self, ctx: &PolicyContext) -> Vec<f64> {
        log_softmax(&self.scores(ctx))
    }

    pub fn probs(&self, ctx: &PolicyContext) -> Vec<f64> {
        self.log_probs(ctx).into_iter().map(f64::exp).collect()
    }

    pub fn log_prob(&self, ctx: &PolicyContext, template: usize) -> f64 {
        self.log_probs(ctx)[template]
    }

    pub fn sample(&self, ctx: &PolicyContext, rng: &mut impl Rng) -> usize {
        let p = self.probs(ctx);
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (j, pj) in p.iter().enumerate() {
            acc += pj;
            if u < acc {
                return j;
            }
        }
        p.len() - 1
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("policy serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, GrpoError> {
        let p: PolicyParams = serde_json::from_str(text).map_err(|e| GrpoError::Format {
            line: e.line(),
            message: e.to_string(),
        })?;
        p.check()?;
        Ok(p)
    }
}

pub fn log_softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + z.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
    z.iter().map(|x| x - lse).collect()
}

/// One planning decision as seen by the trainer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanningRecord {
    pub step_index: usize,
    pub context: PolicyContext,
    pub template: usize,
    /// `log pi_old(template | context)` at sampling time.
    pub old_logprob: f64,
    /// Trajectory reward broadcast to this step; set after judging.
    pub reward: f64,
}

/// Planner port backed by a policy snapshot. The template is drawn once
/// from the first context; every later step re-scores that same template
/// under its own context and follows the template's subgoal schedule.
pub struct PolicyPlanner {
    pub policy: Arc<PolicyParams>,
    rng: ChaCha8Rng,
    forced: Option<usize>,
    chosen: Option<usize>,
    pub records: Vec<PlanningRecord>,
}

impl PolicyPlanner {
    pub fn new(policy: Arc<PolicyParams>, seed: u64) -> Self {
        PolicyPlanner {
            policy,
            rng: ChaCha8Rng::seed_from_u64(seed),
            forced: None,
            chosen: None,
            records: Vec::new(),
        }
    }

    /// Always uses `template`; for evaluation tables.
    pub fn forced(policy: Arc<PolicyParams>, template: usize) -> Self {
        let mut p = Self::new(policy, 0);
        p.forced = Some(template);
        p
    }

    pub fn chosen_template(&self) -> Option<usize> {
        self.chosen
    }
}

impl PlannerPort for PolicyPlanner {
    fn propose(&mut self, req: &PlannerRequest<'_>) -> Result<String, PortError> {
        let ctx = self.policy.featurize(req.task, req.memory);
        let template = match self.chosen {
            Some(k) if req.step_index > 0 => k,
            _ => {
                let k = match self.forced {
                    Some(k) => k,
                    None => self.policy.sample(&ctx, &mut self.rng),
                };
                self.chosen = Some(k);
                k
            }
        };
        let spec = self
            .policy
            .templates
            .get(template)
            .ok_or_else(|| PortError::Other(format!("template {template} out of range")))?;
        if req.attempt == 0 && self.records.iter().all(|r| r.step_index != req.step_index) {
            self.records.push(PlanningRecord {
                step_index: req.step_index,
                old_logprob: self.policy.log_prob(&ctx, template),
                context: ctx,
                template,
                reward: 0.0,
            });
        }
        let plan = Plan::from_steps(spec.plan.clone());
        let subgoal = Subgoal::new(spec.schedule.get(req.step_index).map_or("STOP", String::as_str));
        Ok(format_plan_output(&plan, &subgoal))
    }
}
