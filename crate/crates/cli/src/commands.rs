use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use toolsight::datagen::{
    diagnostic_images, gen_diagnostic, gen_mvtool, gen_orientation_suite, has_positional_cue,
    mvtool_scenes, orientation_base, sft_task, solve_diagnostic, GenConfig, GenError,
};
use toolsight::episode::{check_answer, render_prompt, AgentAction, Environment, TaskSpec};
use toolsight::policies::{default_mix, rl_filter, rollout, Policy, PolicyKind};
use toolsight::raster::write_ppm;
use toolsight::reward::{finalize_group, score, GroupStats, RewardBreakdown, RewardConfig};
use toolsight::store::{
    mask_fraction, read_jsonl, to_training_example, write_atomic, DiagnosticRecord, Store, StoreError, TaskRecord,
    TrajectoryRecord,
};

use crate::{verify, BenchKind, CliError, Command, Common};

const SEED_ENV: &str = "CODEVISION_SEED";
const ITEMS_PER_SCENE: usize = 25;
const RL_SALT: u64 = 0x5EED_0F_41;
const RL_CANDIDATE_FACTOR: usize = 20;

type Result<T> = std::result::Result<T, CliError>;

fn usage(m: impl std::fmt::Display) -> CliError {
    CliError::Usage(m.to_string())
}

fn data(m: impl std::fmt::Display) -> CliError {
    CliError::Data(m.to_string())
}

impl From<StoreError> for CliError {
    fn from(e: StoreError) -> Self {
        data(e)
    }
}

impl From<GenError> for CliError {
    fn from(e: GenError) -> Self {
        match e {
            GenError::Config(_) | GenError::Precondition(_) => usage(e),
            _ => data(e),
        }
    }
}

impl Common {
    fn seed(&self) -> Result<u64> {
        if let Some(s) = self.seed {
            return Ok(s);
        }
        match std::env::var(SEED_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| usage(format!("{SEED_ENV}='{v}' is not an unsigned integer"))),
            Err(_) => Ok(0),
        }
    }

    fn out(&self) -> Result<&Path> {
        self.out.as_deref().ok_or_else(|| usage("--out is required for this command"))
    }
}

/// A config argument is a file path if such a file exists, otherwise an
/// inline list of `key=value` pairs separated by commas.
fn config_text(arg: &Option<String>) -> Result<String> {
    match arg {
        None => Ok(String::new()),
        Some(a) if Path::new(a).is_file() => fs::read_to_string(a).map_err(|e| data(format!("{a}: {e}"))),
        Some(a) => Ok(a.split(',').collect::<Vec<_>>().join("\n")),
    }
}

fn gen_config(arg: &Option<String>, seed: u64) -> Result<GenConfig> {
    let cfg = GenConfig::default().merge_str(&config_text(arg)?).map_err(usage)?;
    Ok(cfg.with_seed(seed))
}

fn reward_config(arg: &Option<String>) -> Result<RewardConfig> {
    RewardConfig::default().merge_str(&config_text(arg)?).map_err(usage)
}

fn positive(n: usize, flag: &str) -> Result<()> {
    if n == 0 {
        return Err(usage(format!("{flag} must be at least 1")));
    }
    Ok(())
}

fn kv(key: &str, value: impl std::fmt::Display) {
    println!("{key}={value}");
}

/// Nearest-rank quantiles of a non-empty sample.
fn quantiles(values: &mut [f64]) -> Vec<(&'static str, f64)> {
    values.sort_by(f64::total_cmp);
    let at = |q: f64| values[((q * (values.len() - 1) as f64).round()) as usize];
    vec![("p0", at(0.0)), ("p25", at(0.25)), ("p50", at(0.5)), ("p75", at(0.75)), ("p100", at(1.0))]
}

/// A task manifest; image paths resolve against the manifest's directory.
/// Tasks are loaded on demand so large benchmarks stream.
struct Manifest {
    store: Store,
    records: Vec<TaskRecord>,
}

impl Manifest {
    fn open(path: &Path) -> Result<Self> {
        Ok(Self {
            store: Store::open(path.parent().unwrap_or(Path::new(".")))?,
            records: read_jsonl(path)?,
        })
    }

    fn load(&self, r: &TaskRecord) -> Result<Arc<TaskSpec>> {
        Ok(Arc::new(r.load(self.store.images())?))
    }

    fn get(&self, id: &str) -> Result<Arc<TaskSpec>> {
        let r = self
            .records
            .iter()
            .find(|r| r.id == id)
            .ok_or_else(|| data(format!("no task '{id}' in manifest")))?;
        self.load(r)
    }
}

fn write_tasks(store: &Store, tasks: &[TaskSpec]) -> Result<Vec<TaskRecord>> {
    let records = tasks
        .iter()
        .map(|t| TaskRecord::store(t, store.images()))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    store.write("tasks.jsonl", &records)?;
    Ok(records)
}

fn type_histogram(tasks: &[TaskRecord]) {
    let mut hist: BTreeMap<&str, usize> = BTreeMap::new();
    for t in tasks {
        *hist.entry(t.task_type.name()).or_default() += 1;
    }
    for (k, v) in hist {
        kv(&format!("type.{k}"), v);
    }
}

pub fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::GenBench {
            kind,
            n,
            scenes,
            config,
            common,
        } => gen_bench(kind, n, scenes, &config, &common),
        Command::GenSft { n, config, common } => gen_sft_cmd(n, &config, &common),
        Command::GenRl {
            n,
            config,
            reward_config: rc,
            common,
        } => gen_rl(n, &config, &rc, &common),
        Command::RunPolicy {
            policy,
            manifest,
            k,
            common,
        } => run_policy(&policy, &manifest, k, &common),
        Command::Score {
            trajectories,
            manifest,
            config,
            common,
        } => score_cmd(&trajectories, &manifest, &config, &common),
        Command::Verify { common } => verify::run(common.seed()?),
        Command::Repl { task, id, common } => repl(&task, id.as_deref(), &common),
    }
}

fn gen_bench(kind: BenchKind, n: usize, scenes: Option<usize>, config: &Option<String>, common: &Common) -> Result<()> {
    positive(n, "--n")?;
    let seed = common.seed()?;
    let store = Store::open(common.out()?)?;
    match kind {
        BenchKind::Mvtool => {
            let cfg = gen_config(config, seed)?;
            let count = scenes.unwrap_or(n.div_ceil(ITEMS_PER_SCENE));
            positive(count, "--scenes")?;
            let layouts = mvtool_scenes(&cfg, count)?;
            let items = gen_mvtool(&layouts, n, &cfg)?;
            // render each scene once, in order of first use
            let mut docs = HashMap::new();
            let mut records = Vec::with_capacity(items.len());
            for it in &items {
                let doc = docs.entry(it.scene).or_insert_with(|| layouts[it.scene].to_doc());
                records.push(TaskRecord::store(&it.to_task(doc)?, store.images())?);
            }
            store.write("tasks.jsonl", &records)?;
            store.write("mvtool.jsonl", &items)?;

            kv("kind", "mvtool");
            kv("items", items.len());
            kv("scenes", count);
            let mut hist: BTreeMap<&str, usize> = BTreeMap::new();
            for it in &items {
                *hist.entry(it.tool.name()).or_default() += 1;
            }
            for (k, v) in hist {
                kv(&format!("transform.{k}"), v);
            }
            let mut ratios: Vec<f64> = items.iter().map(|i| i.area_ratio).collect();
            for (q, v) in quantiles(&mut ratios) {
                kv(&format!("area_ratio.{q}"), format!("{v:.3e}"));
            }
            let cues = items.iter().filter(|i| has_positional_cue(&i.question)).count();
            kv("positional_cue_audit", if cues == 0 { "pass" } else { "fail" });
            if cues > 0 {
                return Err(data(format!("{cues} questions contain positional cues")));
            }
        }
        BenchKind::Orientation => {
            let cfg = gen_config(config, seed)?;
            let base = orientation_base(seed, n, cfg.scene, cfg.scene_words)?;
            let tasks = write_tasks(&store, &gen_orientation_suite(&base)?)?;
            kv("kind", "orientation");
            kv("base_items", base.len());
            kv("items", tasks.len());
            type_histogram(&tasks);
        }
        BenchKind::Diagnostic => {
            // symmetric images are skipped, so draw a few spares
            let images = diagnostic_images(seed, n + n / 4 + 8)?;
            let items: Vec<_> = gen_diagnostic(&images, seed).into_iter().take(n).collect();
            if items.len() < n {
                return Err(data(format!("only {} asymmetric images for {n} items", items.len())));
            }
            let records = items
                .iter()
                .map(|it| DiagnosticRecord::store(it, &images[it.source], store.images()))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            store.write("diagnostic.jsonl", &records)?;
            kv("kind", "diagnostic");
            kv("items", items.len());
            let mut hist: BTreeMap<&str, usize> = BTreeMap::new();
            for it in &items {
                *hist.entry(it.transform.name()).or_default() += 1;
            }
            for (k, v) in hist {
                kv(&format!("transform.{k}"), v);
            }
            let solved = items
                .iter()
                .filter(|it| solve_diagnostic(&images[it.source], &it.image) == Some(it.transform))
                .count();
            kv("oracle_correct", solved);
        }
    }
    Ok(())
}

/// Items are generated, rolled out and stored one at a time so only one
/// full-size scene is alive at once.
fn gen_sft_cmd(n: usize, config: &Option<String>, common: &Common) -> Result<()> {
    positive(n, "--n")?;
    let cfg = gen_config(config, common.seed()?)?;
    cfg.validate()?;
    let store = Store::open(common.out()?)?;
    let env = Environment::default();
    let oracle = Policy::new(PolicyKind::Oracle);
    let mut tasks = Vec::with_capacity(n);
    let mut trajs = Vec::with_capacity(n);
    let mut examples = Vec::with_capacity(n);
    for i in 0..n {
        let t = Arc::new(sft_task(&cfg, i)?);
        let traj = rollout(&env, &oracle, &t).map_err(data)?;
        examples.push(to_training_example(&traj, &render_prompt(&t, env.interpreter()))?);
        trajs.push(TrajectoryRecord::store(&traj, Some(oracle.kind.name()), store.images())?);
        tasks.push(TaskRecord::store(&t, store.images())?);
    }
    store.write("tasks.jsonl", &tasks)?;
    store.write("trajectories.jsonl", &trajs)?;
    store.write("sft.jsonl", &examples)?;

    kv("items", tasks.len());
    type_histogram(&tasks);
    let mean = examples.iter().map(mask_fraction).sum::<f64>() / examples.len() as f64;
    kv("mask_fraction.mean", format!("{mean:.4}"));
    Ok(())
}

fn gen_rl(n: usize, config: &Option<String>, rc: &Option<String>, common: &Common) -> Result<()> {
    positive(n, "--n")?;
    let seed = common.seed()?;
    let cfg = gen_config(config, seed ^ RL_SALT)?;
    cfg.validate()?;
    let rcfg = reward_config(rc)?;
    let store = Store::open(common.out()?)?;
    let env = Environment::default();
    let mix = default_mix(rcfg.group_k, seed);

    let mut kept = Vec::new();
    let mut candidates = 0;
    while kept.len() < n && candidates < n * RL_CANDIDATE_FACTOR {
        let mut task = sft_task(&cfg, candidates)?;
        task.id = format!("rl-{seed}-{candidates:05}");
        candidates += 1;
        let task = Arc::new(task);
        let (keep, _) = rl_filter(&env, &task, &mix, &rcfg).map_err(data)?;
        if keep {
            kept.push(TaskRecord::store(&task, store.images())?);
        }
    }
    if kept.len() < n {
        return Err(data(format!("only {} of {candidates} candidates passed the filter", kept.len())));
    }
    store.write("tasks.jsonl", &kept)?;
    kv("candidates", candidates);
    kv("kept", kept.len());
    type_histogram(&kept);
    Ok(())
}

fn policies_for(name: &str, k: usize, seed: u64) -> Result<Vec<Policy>> {
    if name.trim().eq_ignore_ascii_case("mix") {
        return Ok(default_mix(k, seed));
    }
    let kind: PolicyKind = name.parse().map_err(usage)?;
    Ok((0..k)
        .map(|j| Policy::new(kind).with_seed(seed.wrapping_add(j as u64)))
        .collect())
}

fn run_policy(name: &str, manifest: &Path, k: usize, common: &Common) -> Result<()> {
    positive(k, "--k")?;
    let policies = policies_for(name, k, common.seed()?)?;
    let out = common.out()?;
    let manifest = Manifest::open(manifest)?;
    let store = Store::open(out)?;
    let env = Environment::default();
    let mut records = Vec::with_capacity(manifest.records.len() * k);
    let mut correct = 0usize;
    for r in &manifest.records {
        let t = manifest.load(r)?;
        for p in &policies {
            let traj = rollout(&env, p, &t).map_err(data)?;
            correct += usize::from(
                traj.final_answer
                    .as_deref()
                    .is_some_and(|a| check_answer(a, &t.gold_answer)),
            );
            records.push(TrajectoryRecord::store(&traj, Some(p.kind.name()), store.images())?);
        }
    }
    store.write("trajectories.jsonl", &records)?;
    kv("tasks", manifest.records.len());
    kv("trajectories", records.len());
    kv("correct", correct);
    Ok(())
}

#[derive(serde::Serialize)]
struct GroupRecord {
    task_id: String,
    finalized: bool,
    size: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    stats: Option<GroupStats>,
}

fn score_cmd(trajectories: &Path, manifest: &Path, config: &Option<String>, common: &Common) -> Result<()> {
    let cfg = reward_config(config)?;
    let out = common.out()?;
    let manifest = Manifest::open(manifest)?;
    let traj_store = Store::open(trajectories.parent().unwrap_or(Path::new(".")))?;
    let records: Vec<TrajectoryRecord> = read_jsonl(trajectories)?;

    // phase one per trajectory, task by task; output keeps file order
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        groups.entry(&r.task_id).or_default().push(i);
    }
    let mut slots: Vec<Option<RewardBreakdown>> = vec![None; records.len()];
    for (task_id, idx) in &groups {
        let task = manifest.get(task_id)?;
        for &i in idx {
            let traj = records[i].load(traj_store.images())?;
            slots[i] = Some(score(&traj, &task, &cfg).map_err(data)?);
        }
    }
    let mut breakdowns: Vec<RewardBreakdown> = slots.into_iter().map(|b| b.expect("scored")).collect();
    let mut group_records = Vec::with_capacity(groups.len());
    for (task_id, idx) in &groups {
        let stats = if idx.len() == cfg.group_k {
            let mut g: Vec<_> = idx.iter().map(|&i| breakdowns[i].clone()).collect();
            let stats = finalize_group(&mut g, &cfg).map_err(data)?;
            for (&i, b) in idx.iter().zip(g) {
                breakdowns[i] = b;
            }
            Some(stats)
        } else {
            None
        };
        group_records.push(GroupRecord {
            task_id: task_id.to_string(),
            finalized: stats.is_some(),
            size: idx.len(),
            stats,
        });
    }
    let store = Store::open(out)?;
    store.write("scores.jsonl", &breakdowns)?;
    store.write("groups.jsonl", &group_records)?;

    kv("trajectories", breakdowns.len());
    kv("groups", group_records.len());
    kv("groups_finalized", group_records.iter().filter(|g| g.finalized).count());
    if !breakdowns.is_empty() {
        let m = breakdowns.len() as f64;
        kv("mean_total", format!("{:.6}", breakdowns.iter().map(|b| b.total).sum::<f64>() / m));
        kv("accuracy", format!("{:.4}", breakdowns.iter().map(|b| f64::from(b.r_acc)).sum::<f64>() / m));
        kv("traj_match", breakdowns.iter().filter(|b| b.traj_match > 0.0).count());
        kv("penalized", breakdowns.iter().filter(|b| b.penalties.sum() > 0).count());
    }
    Ok(())
}

/// Undoes the `\n` and `\\` escapes that let one stdin line carry a
/// multi-line action.
fn unescape(line: &str) -> String {
    let mut out = String::with_capacity(line.len());
    let mut chars = line.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('n') => out.push('\n'),
            Some('\\') => out.push('\\'),
            Some(other) => {
                out.push('\\');
                out.push(other);
            }
            None => out.push('\\'),
        }
    }
    out
}

fn repl(manifest: &Path, id: Option<&str>, common: &Common) -> Result<()> {
    let manifest = Manifest::open(manifest)?;
    let task = match id {
        Some(id) => manifest.get(id)?,
        None => manifest.load(manifest.records.first().ok_or_else(|| data("manifest is empty"))?)?,
    };
    let out: Option<PathBuf> = common.out.clone();
    let env = Environment::default();
    let mut ep = env.reset(task.clone()).map_err(data)?;
    let stdout = io::stdout();
    let mut w = stdout.lock();
    let io_err = |e: io::Error| data(e);
    writeln!(w, "{}", ep.observation().prompt).map_err(io_err)?;

    for (i, line) in io::stdin().lock().lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let step = ep.step(AgentAction::new(unescape(&line))).map_err(data)?;
        writeln!(w, "{}", step.feedback).map_err(io_err)?;
        let (iw, ih) = step.image.dims();
        match &out {
            Some(dir) => {
                let path = dir.join(format!("turn-{:02}.ppm", i + 1));
                write_atomic(&path, &write_ppm(&step.image))?;
                writeln!(w, "image={} ({iw}x{ih})", path.display()).map_err(io_err)?;
            }
            None => writeln!(w, "image={iw}x{ih}").map_err(io_err)?,
        }
        if step.done {
            break;
        }
    }
    if !ep.is_done() {
        ep.abort();
    }
    let traj = ep.into_trajectory();
    let b = score(&traj, &task, &RewardConfig::default()).map_err(data)?;
    writeln!(w, "termination={:?}", traj.termination.expect("terminated")).map_err(io_err)?;
    writeln!(w, "r_acc={}", b.r_acc).map_err(io_err)?;
    writeln!(w, "total={}", b.total).map_err(io_err)?;
    Ok(())
}
