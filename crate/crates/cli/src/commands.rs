use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use pilot_core::agent::{
    ActorPort, Clock, EpisodeRunner, FrozenClock, GroundingActor, MemoryPort, NoMemory, PlannerPort, ReferencePlanner,
    SystemClock, Trajectory,
};
use pilot_core::client::{ChatClient, PromptLibrary, RemoteActor, RemoteGate, RemoteJudge, RemotePlanner};
use pilot_core::env::{Task, World, WorldSpec};
use pilot_core::fixtures::{builtin_world, resolve_world};
use pilot_core::grpo::{
    expected_success, template_success_table, PolicyParams, PolicyPlanner, ScriptedRoles, StdKind, TrainConfig,
    Trainer, Weighting,
};
use pilot_core::judge::{agreement_stats, judge_trajectory, read_scores_csv, JudgePort, RewardRecord, ScriptedJudge};
use pilot_core::memory::{load_bank, save_bank, GatePort, MemoryManager, ScriptedGate, ScriptedSummarizer};
use pilot_core::pipeline::{
    apply_quality_list, build_bank, filter_tasks, load_jsonl, load_tasks, load_trajectories, propose_tasks,
    save_jsonl, save_tasks, save_trajectories, QualityList, ScriptedProposer, ScriptedRolloutAgent, TaskCandidate,
};
use pilot_core::scaling::{fit_by_component, predict_success_with, read_points, render_report, write_fits, LogBase};
use serde::Serialize;

use crate::args::*;
use crate::settings::FileConfig;
use crate::Usage;


/// Settings shared by every command.
pub struct Ctx {
    pub seed: u64,
    pub file: FileConfig,
}

fn need_file(path: &Path) -> Result<()> {
    if !path.is_file() {
        return Err(Usage(format!("no such file: {}", path.display())).into());
    }
    Ok(())
}

fn need_dir(path: &Path) -> Result<()> {
    if !path.is_dir() {
        return Err(Usage(format!("no such directory: {}", path.display())).into());
    }
    Ok(())
}

/// The parent directory of an output path must already exist.
fn writable(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() && !p.is_dir() => {
            Err(Usage(format!("output directory does not exist: {}", p.display())).into())
        }
        _ => Ok(()),
    }
}

fn check_world(name: &str) -> Result<()> {
    if builtin_world(name).is_some() {
        Ok(())
    } else {
        need_file(Path::new(name))
    }
}

fn world(name: &str) -> Result<Arc<WorldSpec>> {
    resolve_world(name).with_context(|| format!("loading world {name}"))
}

fn client(ctx: &Ctx) -> Arc<ChatClient> {
    Arc::new(ChatClient::new(ctx.file.client.clone(), ctx.seed))
}

fn memory_port(
    opts: &MemoryOpts,
    spec: &Arc<WorldSpec>,
    ctx: &Ctx,
    prompts: &PromptLibrary,
) -> Result<Option<MemoryManager>> {
    let Some(dir) = &opts.memory_bank else {
        return Ok(None);
    };
    let bank = load_bank(dir).with_context(|| format!("loading bank {}", dir.display()))?;
    let gate: Arc<dyn GatePort> = match opts.gate {
        RoleKind::Scripted => Arc::new(ScriptedGate::new(Arc::clone(spec))),
        RoleKind::Remote => Arc::new(RemoteGate::new(client(ctx))),
    };
    let mut mgr = MemoryManager::new(bank.shared(), gate).with_k(opts.top_k);
    mgr.prompts = Arc::new(prompts.clone());
    Ok(Some(mgr))
}

pub fn run(a: &RunArgs, ctx: &Ctx) -> Result<()> {
    check_world(&a.world)?;
    if let Some(p) = &a.policy {
        need_file(p)?;
        if a.planner != PlannerKind::Policy {
            return Err(Usage("--policy needs --planner policy".into()).into());
        }
    }
    if let Some(d) = &a.memory.memory_bank {
        need_dir(d)?;
    }
    if let Some(d) = &a.prompts {
        need_dir(d)?;
    }
    writable(&a.out)?;

    let spec = world(&a.world)?;
    let task = spec
        .task(&a.task)
        .cloned()
        .with_context(|| format!("world {} has no task {}", spec.name, a.task))?;
    let prompts = match &a.prompts {
        Some(d) => PromptLibrary::from_dir(d).context("loading prompts")?,
        None => PromptLibrary::builtin().clone(),
    };
    let mut planner: Box<dyn PlannerPort> = match a.planner {
        PlannerKind::Scripted => Box::new(ReferencePlanner),
        PlannerKind::Remote => Box::new(RemotePlanner::new(client(ctx))),
        PlannerKind::Policy => {
            let policy = match &a.policy {
                Some(p) => PolicyParams::from_json(&std::fs::read_to_string(p)?)?,
                None => PolicyParams::for_world(&spec, ctx.file.train.temperature)?,
            };
            Box::new(PolicyPlanner::new(Arc::new(policy), ctx.seed))
        }
    };
    let mut actor: Box<dyn ActorPort> = match a.actor {
        RoleKind::Scripted => Box::new(GroundingActor),
        RoleKind::Remote => Box::new(RemoteActor::new(client(ctx))),
    };
    let mut memory: Box<dyn MemoryPort> = match memory_port(&a.memory, &spec, ctx, &prompts)? {
        Some(m) => Box::new(m),
        None => Box::new(NoMemory::default()),
    };
    let clock: Box<dyn Clock> = if a.wall_clock { Box::new(SystemClock::default()) } else { Box::new(FrozenClock) };
    let runner = EpisodeRunner {
        prompts: &prompts,
        limits: ctx.file.limits(&a.limits),
        clock: clock.as_ref(),
    };
    let mut w = World::new(Arc::clone(&spec), ctx.seed);
    let traj = runner.run(&mut w, &task, planner.as_mut(), actor.as_mut(), memory.as_mut())?;
    save_trajectories(std::slice::from_ref(&traj), &a.out)?;
    println!(
        "{} {} in {} steps ({:?}); goal {}/{}; wrote {}",
        task.task_id,
        if traj.success { "succeeded" } else { "failed" },
        traj.steps.len(),
        traj.termination,
        traj.goal_met,
        traj.goal_total(),
        a.out.display()
    );
    Ok(())
}

fn train_config(a: &TrainArgs, ctx: &Ctx) -> TrainConfig {
    let mut c = ctx.file.train.clone();
    c.seed = ctx.seed;
    c.limits = ctx.file.limits(&a.limits);
    macro_rules! set {
        ($flag:expr, $field:ident) => {
            if let Some(v) = $flag {
                c.$field = v;
            }
        };
    }
    set!(a.group_size, group_size);
    set!(a.batch, batch_tasks);
    set!(a.kl, kl_coeff);
    set!(a.lr, learning_rate);
    set!(a.temperature, temperature);
    set!(a.iters, iterations);
    set!(a.ref_refresh_every, ref_refresh_every);
    set!(a.epochs, epochs);
    set!(a.votes, judge_votes);
    if let Some(s) = a.std {
        c.std_kind = match s {
            StdArg::Population => StdKind::Population,
            StdArg::Sample => StdKind::Sample,
        };
    }
    if a.clip.is_some() {
        c.clip = a.clip;
    }
    if let Some(w) = a.weighting {
        c.weighting = match w {
            WeightingArg::PerStep => Weighting::PerStep,
            WeightingArg::PerTrajectory => Weighting::PerTrajectory,
        };
    }
    c
}

pub fn train(a: &TrainArgs, ctx: &Ctx) -> Result<()> {
    check_world(&a.world)?;
    if let Some(t) = &a.tasks {
        need_file(t)?;
    }
    if let Some(d) = &a.memory_bank {
        need_dir(d)?;
    }
    writable(&a.out)?;
    if let Some(p) = &a.policy_out {
        writable(p)?;
    }

    let spec = world(&a.world)?;
    let tasks = match &a.tasks {
        Some(p) => load_tasks(p)?,
        None => spec.tasks.clone(),
    };
    for t in &tasks {
        spec.check_task_refs(t)?;
    }
    let config = train_config(a, ctx);
    config.validate()?;
    let memory = match &a.memory_bank {
        Some(dir) => Some(
            MemoryManager::new(load_bank(dir)?.shared(), Arc::new(ScriptedGate::new(Arc::clone(&spec)))),
        ),
        None => None,
    };
    let roles = Arc::new(ScriptedRoles { memory });
    let initial = PolicyParams::for_world(&spec, config.temperature)?;
    let trainer = Trainer {
        spec: Arc::clone(&spec),
        roles: roles.clone(),
        judge: Arc::new(ScriptedJudge),
        config: config.clone(),
    };
    let outcome = trainer.train(&tasks, initial.clone())?;
    std::fs::write(&a.out, outcome.report.to_jsonl()).with_context(|| format!("writing {}", a.out.display()))?;
    if let Some(p) = &a.policy_out {
        std::fs::write(p, outcome.policy.to_json()).with_context(|| format!("writing {}", p.display()))?;
    }
    let table = template_success_table(&spec, &tasks, &initial, roles.as_ref(), config.limits);
    let before = expected_success(&spec, &tasks, &initial, roles.as_ref(), &table);
    let after = expected_success(&spec, &tasks, &outcome.policy, roles.as_ref(), &table);
    println!(
        "{} iterations on {} tasks; expected success {before:.3} -> {after:.3}; wrote {}",
        config.iterations,
        tasks.len(),
        a.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct Judged<'a> {
    task_id: &'a str,
    success: bool,
    #[serde(flatten)]
    record: &'a RewardRecord,
}

pub fn judge(a: &JudgeArgs, ctx: &Ctx) -> Result<()> {
    need_file(&a.trajectories)?;
    writable(&a.out)?;
    if a.k == 0 {
        return Err(Usage("--k must be at least 1".into()).into());
    }
    let trajs = load_trajectories(&a.trajectories)?;
    let judge: Box<dyn JudgePort> = match a.judge {
        RoleKind::Scripted => Box::new(ScriptedJudge),
        RoleKind::Remote => Box::new(RemoteJudge::new(client(ctx))),
    };
    let records = trajs
        .iter()
        .map(|t| judge_trajectory(t, judge.as_ref(), PromptLibrary::builtin(), a.k))
        .collect::<Result<Vec<_>, _>>()?;
    let rows: Vec<Judged> = trajs
        .iter()
        .zip(&records)
        .map(|(t, r)| Judged {
            task_id: &t.task.task_id,
            success: t.success,
            record: r,
        })
        .collect();
    save_jsonl(&rows, &a.out)?;
    let mean = records.iter().map(|r| f64::from(r.reward)).sum::<f64>() / records.len().max(1) as f64;
    println!("judged {} trajectories, mean reward {mean:.2}; wrote {}", records.len(), a.out.display());
    Ok(())
}

pub fn agree(a: &AgreeArgs) -> Result<()> {
    need_file(&a.judge)?;
    need_file(&a.human)?;
    let stats = agreement_stats(&read_scores_csv(&a.judge)?, &read_scores_csv(&a.human)?)?;
    println!("{}", serde_json::to_string(&stats)?);
    Ok(())
}

pub fn fitscale(a: &FitArgs) -> Result<()> {
    need_file(&a.points)?;
    if let Some(o) = &a.out {
        writable(o)?;
    }
    let base = match a.log_base {
        BaseArg::Ten => LogBase::Ten,
        BaseArg::E => LogBase::E,
    };
    let fits = fit_by_component(&read_points(&a.points)?, base)?;
    if let Some(o) = &a.out {
        write_fits(o, &fits)?;
    }
    if a.report || a.out.is_none() {
        print!("{}", render_report(&fits));
    }
    for &x in &a.predict {
        for f in &fits {
            let p = predict_success_with(f, x, base)?;
            println!(
                "{} at {x}B: {:.2}%{}",
                f.component_label,
                p.success_pct,
                if p.clamped { " (clamped)" } else { "" }
            );
        }
    }
    Ok(())
}

fn read_candidates(path: &Path) -> Result<Vec<TaskCandidate>> {
    if let Ok(c) = load_jsonl::<TaskCandidate>(path) {
        return Ok(c);
    }
    Ok(load_tasks(path)?.into_iter().map(TaskCandidate::new).collect())
}

pub fn filter(a: &FilterArgs, ctx: &Ctx) -> Result<()> {
    check_world(&a.world)?;
    if let Some(c) = &a.candidates {
        need_file(c)?;
    }
    if let Some(q) = &a.quality {
        need_file(q)?;
    }
    writable(&a.out)?;
    writable(&a.report)?;
    if a.n == 0 {
        return Err(Usage("--n must be at least 1".into()).into());
    }

    let spec = world(&a.world)?;
    let mut candidates = match (&a.candidates, &a.page) {
        (Some(p), _) => read_candidates(p)?,
        (None, Some(page)) => {
            let (c, warnings) = propose_tasks(&spec, page, &ScriptedProposer::for_world(&spec), a.proposals)?;
            for w in warnings {
                log::warn!("proposal skipped: {w}");
            }
            c
        }
        (None, None) => bail!(Usage("give --candidates or --page".into())),
    };
    for c in &candidates {
        spec.check_task_refs(&c.task)?;
    }
    if let Some(q) = &a.quality {
        let list = QualityList::parse(&std::fs::read_to_string(q)?).map_err(|e| anyhow::anyhow!("{}: {e}", q.display()))?;
        candidates = apply_quality_list(candidates, &list);
    }
    let agent = ScriptedRolloutAgent {
        limits: ctx.file.limits(&a.limits),
    };
    let (kept, report) = filter_tasks(&candidates, &spec, &agent, a.n, ctx.seed)?;
    let tasks: Vec<Task> = kept.into_iter().map(|c| c.task).collect();
    save_tasks(&tasks, &a.out)?;
    report.save(&a.report)?;
    println!(
        "kept {} of {} candidates; wrote {} and {}",
        report.kept,
        report.proposed,
        a.out.display(),
        a.report.display()
    );
    Ok(())
}

pub fn memory_build(a: &BuildArgs) -> Result<()> {
    need_file(&a.from)?;
    if a.out.exists() && !a.out.is_dir() {
        return Err(Usage(format!("{} is not a directory", a.out.display())).into());
    }
    let trajs: Vec<Trajectory> = load_trajectories(&a.from)?;
    let (bank, skipped) = build_bank(&trajs, &ScriptedSummarizer, a.dim)?;
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    save_bank(&bank, &a.out)?;
    println!(
        "banked {} trajectories, skipped {skipped} unsuccessful; wrote {}",
        bank.len(),
        PathBuf::from(&a.out).display()
    );
    Ok(())
}
