use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Planner-centric web agent toolkit: simulated episodes, judging,
/// planner training, scaling fits and task filtering.
#[derive(Debug, Parser)]
#[command(name = "pilot", version)]
pub struct Cli {
    /// Master seed; every random draw derives from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for rollouts and judge votes (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// TOML file with [client], [train] and [limits] tables.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one episode and write its trajectory.
    Run(RunArgs),
    /// Train the plan-template policy with group-relative optimization.
    Train(TrainArgs),
    /// Score trajectories with K judge votes.
    Judge(JudgeArgs),
    /// Agreement between judge and human score columns.
    Agree(AgreeArgs),
    /// Fit success against log model size.
    Fitscale(FitArgs),
    /// Keep candidate tasks that an agent can complete at least once.
    FilterTasks(FilterArgs),
    /// Build a memory bank from successful trajectories.
    MemoryBuild(BuildArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PlannerKind {
    Scripted,
    Remote,
    Policy,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum RoleKind {
    Scripted,
    Remote,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum StdArg {
    Population,
    Sample,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum WeightingArg {
    PerStep,
    PerTrajectory,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BaseArg {
    Ten,
    E,
}

/// Episode bounds shared by every command that runs episodes.
#[derive(Debug, Args)]
pub struct LimitArgs {
    /// Step limit per episode [default: 15].
    #[arg(long)]
    pub max_steps: Option<usize>,
    /// Parse attempts per planner or actor call [default: 2].
    #[arg(long)]
    pub parse_retries: Option<usize>,
    /// Recent steps shown to the plan-update prompt [default: 3].
    #[arg(long)]
    pub history_window: Option<usize>,
}

#[derive(Debug, Args)]
pub struct MemoryOpts {
    /// Memory bank directory; omit to run without memory.
    #[arg(long)]
    pub memory_bank: Option<PathBuf>,
    /// Memory update gate.
    #[arg(long, value_enum, default_value = "scripted")]
    pub gate: RoleKind,
    /// Experiences retrieved per query.
    #[arg(long, default_value_t = 10)]
    pub top_k: usize,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Bundled world name (synthshop, plansuite, citymix) or spec file.
    #[arg(long)]
    pub world: String,
    /// Task id within the world.
    #[arg(long)]
    pub task: String,
    #[arg(long, value_enum, default_value = "scripted")]
    pub planner: PlannerKind,
    #[arg(long, value_enum, default_value = "scripted")]
    pub actor: RoleKind,
    /// Policy checkpoint for --planner policy (default: uniform).
    #[arg(long)]
    pub policy: Option<PathBuf>,
    #[command(flatten)]
    pub memory: MemoryOpts,
    #[command(flatten)]
    pub limits: LimitArgs,
    /// Directory of prompt template files overriding the bundled ones.
    #[arg(long)]
    pub prompts: Option<PathBuf>,
    /// Record real step timings instead of zeros.
    #[arg(long)]
    pub wall_clock: bool,
    /// Trajectory output file.
    #[arg(long, default_value = "trajectory.jsonl")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Bundled world name or spec file; must define plan templates.
    #[arg(long, default_value = "plansuite")]
    pub world: String,
    /// Training tasks (default: the world's own tasks).
    #[arg(long)]
    pub tasks: Option<PathBuf>,
    /// Rollouts per task, G [default: 8].
    #[arg(long)]
    pub group_size: Option<usize>,
    /// Tasks sampled per iteration [default: 6].
    #[arg(long)]
    pub batch: Option<usize>,
    /// KL penalty coefficient, beta [default: 0.1].
    #[arg(long)]
    pub kl: Option<f64>,
    /// Ascent step size on the template logits [default: 0.05].
    #[arg(long)]
    pub lr: Option<f64>,
    /// Softmax temperature [default: 0.5].
    #[arg(long)]
    pub temperature: Option<f64>,
    /// Training iterations [default: 100].
    #[arg(long)]
    pub iters: Option<usize>,
    /// Refresh the reference policy every N iterations; 0 keeps it fixed [default: 0].
    #[arg(long)]
    pub ref_refresh_every: Option<usize>,
    /// Gradient steps per collected batch [default: 1].
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Judge votes per trajectory, K [default: 3].
    #[arg(long)]
    pub votes: Option<usize>,
    /// Advantage standard deviation [default: population].
    #[arg(long, value_enum)]
    pub std: Option<StdArg>,
    /// Optional ratio clip epsilon (off by default).
    #[arg(long)]
    pub clip: Option<f64>,
    /// Averaging over planning steps [default: per-step].
    #[arg(long, value_enum)]
    pub weighting: Option<WeightingArg>,
    #[command(flatten)]
    pub limits: LimitArgs,
    /// Frozen memory bank consulted during rollouts.
    #[arg(long)]
    pub memory_bank: Option<PathBuf>,
    /// Per-iteration report output.
    #[arg(long, default_value = "train_report.jsonl")]
    pub out: PathBuf,
    /// Where to write the trained policy checkpoint.
    #[arg(long)]
    pub policy_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct JudgeArgs {
    #[arg(long)]
    pub trajectories: PathBuf,
    /// Votes per trajectory.
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(long, value_enum, default_value = "scripted")]
    pub judge: RoleKind,
    /// Reward-annotated output.
    #[arg(long, default_value = "rewards.jsonl")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AgreeArgs {
    /// CSV with a judge score column.
    #[arg(long)]
    pub judge: PathBuf,
    /// CSV with a human score column.
    #[arg(long)]
    pub human: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// CSV of component_label,params_billions,success_pct.
    #[arg(long)]
    pub points: PathBuf,
    /// CSV of fitted coefficients.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print a per-component coefficient table.
    #[arg(long)]
    pub report: bool,
    /// Logarithm base for model size.
    #[arg(long, value_enum, default_value = "ten")]
    pub log_base: BaseArg,
    /// Also predict success at this size in billions.
    #[arg(long)]
    pub predict: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[arg(long)]
    pub world: String,
    /// Candidate tasks, one per line; omit to propose from --page.
    #[arg(long, required_unless_present = "page")]
    pub candidates: Option<PathBuf>,
    /// Page to propose candidates from with the scripted proposer.
    #[arg(long, conflicts_with = "candidates")]
    pub page: Option<String>,
    /// Proposals requested from --page.
    #[arg(long, default_value_t = 10)]
    pub proposals: usize,
    /// Rollouts per candidate, N.
    #[arg(long, default_value_t = 6)]
    pub n: usize,
    /// Manual review list of `allow <id>` / `deny <id>` lines.
    #[arg(long)]
    pub quality: Option<PathBuf>,
    #[command(flatten)]
    pub limits: LimitArgs,
    /// Kept tasks output.
    #[arg(long, default_value = "tasks.jsonl")]
    pub out: PathBuf,
    /// Per-candidate success rates.
    #[arg(long, default_value = "filter_report.jsonl")]
    pub report: PathBuf,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    /// Trajectories to summarize; failures are skipped.
    #[arg(long)]
    pub from: PathBuf,
    /// Bank output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Feature dimension.
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
}
