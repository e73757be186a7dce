//! Acceptance suite. Each criterion runs at its stated scale and tolerance
//! and prints one `PASS`/`FAIL` line; the process fails if any criterion does.
//!
//! Run with `cargo test -p toolsight --test acceptance -- --nocapture`.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use toolsight::datagen::{
    diagnostic_images, difficulty_filter, first_tool_name, gen_diagnostic, gen_mvtool, mvtool_scenes, sft_task,
    GenConfig, SceneOptions, DIAGNOSTIC_OPTIONS,
};
use toolsight::episode::{AgentAction, Environment, TaskSpec, TaskType, Trajectory};
use toolsight::policies::{rollout, Policy, PolicyKind};
use toolsight::raster::{detect_transform, iou, iou_ratio, BBox, Raster, ToolId, TransformKind};
use toolsight::reward::{
    finalize_group, necessity_reward, score, GroupStats, Penalties, RewardBreakdown, RewardConfig,
};
use toolsight::store::{
    read_jsonl, to_training_example, write_jsonl, Role, Store, TaskRecord, TrainingExample, TrajectoryRecord,
};
use toolsight::toolprog::{parse, ExecOutcome, Interpreter};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------------
// independent oracles

/// Pixel map written out from the definitions: Rot90 is clockwise,
/// src(x, y) → dst(H−1−y, x).
fn oracle_transform(img: &Raster, k: TransformKind) -> Raster {
    let (w, h) = img.dims();
    match k {
        TransformKind::Identity => img.clone(),
        TransformKind::Rot90 => Raster::from_fn(h, w, |dx, dy| img.get(dy, h - 1 - dx)),
        TransformKind::Rot180 => Raster::from_fn(w, h, |dx, dy| img.get(w - 1 - dx, h - 1 - dy)),
        TransformKind::Rot270 => Raster::from_fn(h, w, |dx, dy| img.get(w - 1 - dy, dx)),
        TransformKind::FlipH => Raster::from_fn(w, h, |dx, dy| img.get(w - 1 - dx, dy)),
        TransformKind::FlipV => Raster::from_fn(w, h, |dx, dy| img.get(dx, h - 1 - dy)),
    }
}

fn apply(img: &Raster, k: TransformKind) -> Raster {
    k.dihedral().apply(img)
}

fn random_raster(r: &mut ChaCha8Rng, max: u32) -> Raster {
    let (w, h) = (r.gen_range(1..=max), r.gen_range(1..=max));
    Raster::from_fn(w, h, |_, _| r.gen())
}

/// Intersection and union by counting member pixels.
fn pixel_iou(a: &BBox, b: &BBox, grid: u32) -> (u64, u64) {
    let inside = |bb: &BBox, x: u32, y: u32| x >= bb.x0 && x < bb.x1 && y >= bb.y0 && y < bb.y1;
    let (mut i, mut u) = (0, 0);
    for y in 0..grid {
        for x in 0..grid {
            let (ia, ib) = (inside(a, x, y), inside(b, x, y));
            i += u64::from(ia && ib);
            u += u64::from(ia || ib);
        }
    }
    (i, u)
}

fn small_config(seed: u64) -> GenConfig {
    GenConfig {
        area_threshold: 0.02,
        scene: SceneOptions {
            width: 256,
            height: 192,
            max_scale: 2,
        },
        scene_words: 24,
        ..GenConfig::default()
    }
    .with_seed(seed)
}

fn one_type(cfg: GenConfig, t: TaskType) -> GenConfig {
    let mut type_proportions = [0.0; 5];
    type_proportions[TaskType::ALL.iter().position(|x| *x == t).unwrap()] = 1.0;
    GenConfig {
        type_proportions,
        ..cfg
    }
}

/// Nesting, strict shrinking by the configured factor, containment of the
/// target, and fit within the image.
fn check_chain(task: &TaskSpec, shrink: f64) -> Result<(), String> {
    let w = &task.crop_windows;
    let (iw, ih) = task.canonical_image.dims();
    let target = task.target_box.ok_or("multi-crop task without target")?;
    let crops = task.s_req.iter().filter(|t| **t == ToolId::Crop).count();
    ensure!(w.len() == crops && crops >= 2, "{}: {} windows for {crops} crops", task.id, w.len());
    for b in w {
        ensure!(b.x1 <= iw && b.y1 <= ih, "{}: window {b:?} exceeds {iw}x{ih}", task.id);
    }
    for pair in w.windows(2) {
        let (outer, inner) = (pair[0], pair[1]);
        ensure!(
            outer.x0 <= inner.x0 && outer.y0 <= inner.y0 && inner.x1 <= outer.x1 && inner.y1 <= outer.y1,
            "{}: {inner:?} not nested in {outer:?}",
            task.id
        );
        ensure!(inner.area() < outer.area(), "{}: area does not shrink", task.id);
        ensure!(
            inner.area() as f64 <= shrink * outer.area() as f64,
            "{}: shrink {} exceeds {shrink}",
            task.id,
            inner.area() as f64 / outer.area() as f64
        );
    }
    let last = w.last().unwrap();
    ensure!(
        last.x0 <= target.x0 && last.y0 <= target.y0 && target.x1 <= last.x1 && target.y1 <= last.y1,
        "{}: last window misses the target",
        task.id
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// criteria

fn dihedral_laws() -> Outcome {
    let start = Instant::now();
    let mut r = rng(1);
    use TransformKind::*;
    for n in 0..1000 {
        let img = random_raster(&mut r, 64);
        let twice = |k| apply(&apply(&img, k), k);
        for k in TransformKind::ALL {
            let out = apply(&img, k);
            ensure!(out == oracle_transform(&img, k), "raster {n}: {k:?} pixel map differs from definition");
            ensure!(out == apply(&img, k), "raster {n}: {k:?} not pure");
            ensure!(detect_transform(&img, &out).contains(&k), "raster {n}: detect misses {k:?}");
        }
        ensure!(apply(&twice(Rot90), Rot180) == img, "raster {n}: Rot90^4 != Identity");
        ensure!(twice(Rot180) == img, "raster {n}: Rot180^2 != Identity");
        ensure!(twice(FlipH) == img, "raster {n}: FlipH^2 != Identity");
        ensure!(twice(FlipV) == img, "raster {n}: FlipV^2 != Identity");
        ensure!(twice(Rot90) == apply(&img, Rot180), "raster {n}: Rot90∘Rot90 != Rot180");
        ensure!(apply(&apply(&img, FlipV), FlipH) == apply(&img, Rot180), "raster {n}: FlipH∘FlipV != Rot180");
        ensure!(apply(&apply(&img, Rot90), Rot270) == img, "raster {n}: Rot90∘Rot270 != Identity");
        ensure!(img.crop(img.full_box()).unwrap() == img, "raster {n}: full-frame crop differs");
    }
    let t = start.elapsed();
    ensure!(t < Duration::from_secs(10), "took {t:?}");
    Ok(format!("1000 rasters in {:.2}s", t.as_secs_f64()))
}

fn iou_oracle() -> Outcome {
    const GRID: u32 = 12;
    let boxes: Vec<BBox> = (0..GRID)
        .flat_map(|x0| (x0 + 1..=GRID).map(move |x1| (x0, x1)))
        .flat_map(|(x0, x1)| {
            (0..GRID).flat_map(move |y0| (y0 + 1..=GRID).map(move |y1| BBox::new(x0, y0, x1, y1).unwrap()))
        })
        .collect();
    ensure!(boxes.len() == 78 * 78, "{} boxes", boxes.len());
    let mut r = rng(2);
    for _ in 0..100_000 {
        let a = boxes[r.gen_range(0..boxes.len())];
        let b = boxes[r.gen_range(0..boxes.len())];
        let (i, u) = pixel_iou(&a, &b, GRID);
        let (n, d) = iou_ratio(&a, &b);
        ensure!(n * u == i * d, "iou_ratio({a:?}, {b:?}) = {n}/{d}, oracle {i}/{u}");
        let v = iou(&a, &b);
        ensure!((v - i as f64 / u as f64).abs() <= 1e-12, "iou({a:?}, {b:?}) = {v}, oracle {i}/{u}");
        ensure!(v == iou(&b, &a), "asymmetric for {a:?}, {b:?}");
    }
    Ok("100000 pairs exact".into())
}

fn diagnostic() -> Outcome {
    let seed = 7;
    let images = diagnostic_images(seed, 260).map_err(|e| e.to_string())?;
    let items: Vec<_> = gen_diagnostic(&images, seed).into_iter().take(200).collect();
    ensure!(items.len() == 200, "only {} items", items.len());
    let mut correct = 0;
    let mut hist: BTreeMap<TransformKind, usize> = BTreeMap::new();
    for it in &items {
        let src = &images[it.source];
        ensure!(*it.image == oracle_transform(src, it.transform), "{}: image is not the stated transform", it.id);
        let hits: Vec<_> = detect_transform(src, &it.image)
            .into_iter()
            .filter(|k| DIAGNOSTIC_OPTIONS.contains(k))
            .collect();
        correct += usize::from(hits == [it.transform]);
        *hist.entry(it.transform).or_default() += 1;
    }
    ensure!(correct == 200, "{correct}/200 correct");
    let (mean, sd) = (40.0, (200.0f64 * 0.2 * 0.8).sqrt());
    for k in DIAGNOSTIC_OPTIONS {
        let c = *hist.get(&k).unwrap_or(&0) as f64;
        ensure!((c - mean).abs() <= 3.0 * sd, "{k:?}: {c} outside 40 ± {:.1}", 3.0 * sd);
    }
    Ok(format!("200/200 correct, histogram {:?}", hist.values().collect::<Vec<_>>()))
}

fn closed_form(b: &RewardBreakdown, cfg: &RewardConfig) -> f64 {
    (f64::from(b.r_acc) + cfg.w_fmt * f64::from(b.r_fmt))
        + cfg.beta1 * (cfg.w_must * (b.must_use_total + b.traj_match) + cfg.w_sugg * (b.nec_bonus + b.opt_bonus))
        - cfg.beta2 * f64::from(b.penalties.sum())
}

fn reward_arithmetic() -> Outcome {
    const EPS: f64 = 1e-9;
    let cfg = RewardConfig::default();
    let env = Environment::default();
    let (oracle, hacker) = (Policy::new(PolicyKind::Oracle), Policy::new(PolicyKind::RewardHacker));
    let mut checked = 0;
    for t in TaskType::ALL {
        let gen = one_type(GenConfig::default().with_seed(11), t);
        for i in 0..100 {
            let task = Arc::new(sft_task(&gen, i).map_err(|e| format!("{t} {i}: {e}"))?);
            let b = score(&rollout(&env, &oracle, &task).map_err(|e| e.to_string())?, &task, &cfg)
                .map_err(|e| e.to_string())?;
            // expected: full outcome, full budget plus match bonus when tools are required
            let required = !task.s_req.is_empty();
            let (must, matched) = if required { (1.0, 0.5) } else { (0.0, 0.0) };
            let expected = 1.0 + 0.1 + 1.0 * (1.0 * (must + matched));
            ensure!(b.r_acc == 1 && b.r_fmt == 1, "{}: outcome {}/{}", task.id, b.r_acc, b.r_fmt);
            ensure!((b.must_use_total - must).abs() <= EPS, "{}: must_use {}", task.id, b.must_use_total);
            ensure!(b.traj_match == matched, "{}: traj_match {}", task.id, b.traj_match);
            ensure!(b.nec_bonus == 0.0 && b.opt_bonus == 0.0, "{}: bonuses", task.id);
            ensure!(b.penalties == Penalties::default(), "{}: penalties {:?}", task.id, b.penalties);
            ensure!((b.total - expected).abs() <= EPS, "{}: total {} vs {expected}", task.id, b.total);
            ensure!((b.total - closed_form(&b, &cfg)).abs() <= EPS, "{}: recombination", task.id);
            let ledger: f64 = b.ledger.iter().map(|c| c.amount).sum();
            ensure!((ledger - b.must_use_total).abs() <= EPS, "{}: ledger sums to {ledger}", task.id);

            let h = score(&rollout(&env, &hacker, &task).map_err(|e| e.to_string())?, &task, &cfg)
                .map_err(|e| e.to_string())?;
            ensure!(h.total < b.total, "{}: hacker {} >= oracle {}", task.id, h.total, b.total);
            checked += 1;
        }
    }

    // necessity: 3 of 4 tool users succeed, 1 of 4 non-users
    let g = GroupStats {
        k: 8,
        tool_size: 4,
        tool_successes: 3,
        notool_size: 4,
        notool_successes: 1,
    };
    ensure!(necessity_reward(&g) == 0.5, "r_nec = {}", necessity_reward(&g));
    let mut group: Vec<RewardBreakdown> = (0..8)
        .map(|i| RewardBreakdown {
            task_id: "nec".into(),
            r_acc: u8::from(matches!(i, 0..=2 | 4)),
            r_fmt: 1,
            must_use_total: 1.0,
            ledger: vec![],
            traj_match: 0.5,
            nec_bonus: 0.0,
            opt_bonus: 0.0,
            penalties: Penalties::default(),
            used_optional: i < 4,
            best_iou: None,
            total: 0.0,
        })
        .collect();
    let stats = finalize_group(&mut group, &cfg).map_err(|e| e.to_string())?;
    ensure!(stats == g, "stats {stats:?}");
    for (i, b) in group.iter().enumerate() {
        let nec = if i < 3 { 0.5 } else { 0.0 };
        ensure!(b.nec_bonus == nec, "rollout {i}: nec {}", b.nec_bonus);
        ensure!((b.total - closed_form(b, &cfg)).abs() <= EPS, "rollout {i}: total");
    }
    ensure!((group[0].total - (1.1 + 1.5 + 0.2 * 0.5)).abs() <= EPS, "first total {}", group[0].total);
    Ok(format!("{checked} oracle/hacker pairs, r_nec = 0.5"))
}

fn penalty_guardrails() -> Outcome {
    let cfg = RewardConfig::default();
    let env = Environment::default();
    let (cw, ch) = (40, 120);
    let canonical = Arc::new(Raster::from_fn(cw, ch, |x, y| [x as u8, y as u8, (x * 7 + y * 3) as u8]));
    let target = BBox::new(0, 0, 10, 10).unwrap();
    // crops of the target's corner with IoU exactly 1/20, 1/10 and 1/2
    let crops = [
        ((1u64, 20u64), BBox::new(0, 0, 20, 100).unwrap()),
        ((1, 10), BBox::new(0, 0, 10, 100).unwrap()),
        ((1, 2), BBox::new(0, 0, 10, 20).unwrap()),
    ];
    let reqs: [Vec<ToolId>; 4] = [
        vec![],
        vec![ToolId::Crop],
        vec![ToolId::Rotate90],
        vec![ToolId::Rotate90, ToolId::Crop],
    ];
    let mut cases = 0;
    for s_req in &reqs {
        let has_crop = s_req.contains(&ToolId::Crop);
        let corruption = if s_req.contains(&ToolId::Rotate90) {
            TransformKind::Rot270
        } else {
            TransformKind::Identity
        };
        let task = Arc::new(TaskSpec {
            id: format!("pen-{}", s_req.len()),
            question: "What does the sign say?".into(),
            initial_image: Arc::new(apply(&canonical, corruption)),
            canonical_image: canonical.clone(),
            gold_answer: "GO".into(),
            task_type: match (s_req.len(), has_crop) {
                (0, _) => TaskType::NoTool,
                (1, _) => TaskType::SingleTool,
                _ => TaskType::MultiTool,
            },
            s_req: s_req.clone(),
            target_box: has_crop.then_some(target),
            crop_windows: vec![],
            max_turns: 6,
            faulty_step: None,
        });
        let orient_tool = if s_req.contains(&ToolId::Rotate90) {
            ToolId::Rotate90
        } else {
            ToolId::Rotate180
        };
        for code_turns in 0..=5usize {
            for &((num, den), crop_box) in &crops {
                for orient in [true, false] {
                    for correct in [true, false] {
                        let mut actions = Vec::new();
                        let mut view = corruption.dihedral();
                        let mut cropped = false;
                        for k in 0..code_turns {
                            let program = if orient && k == 0 {
                                view = view.then(orient_tool.transform().unwrap().dihedral());
                                format!("{}()", orient_tool.name())
                            } else if !cropped {
                                cropped = true;
                                let b = view.map_box(&crop_box, cw, ch);
                                format!("crop(x0={}, y0={}, x1={}, y1={})", b.x0, b.y0, b.x1, b.y1)
                            } else {
                                "grayscale()".into()
                            };
                            actions.push(AgentAction::code("step", &program));
                        }
                        actions.push(AgentAction::answer("done", if correct { "GO" } else { "STOP" }));
                        let traj = env.replay(task.clone(), &actions).map_err(|e| e.to_string())?;
                        ensure!(traj.failed_turns() == 0, "unexpected failure in {actions:?}");
                        let b = score(&traj, &task, &cfg).map_err(|e| e.to_string())?;

                        // best IoU as a fraction; no crop means 0
                        let (bn, bd) = if cropped { (num, den) } else { (0, 1) };
                        let below_floor = bn * 10 < bd; // best < 1/10, strictly
                        let expected = Penalties {
                            turn_limit: u8::from(code_turns > s_req.len() + 1),
                            poor_reasoning: u8::from(correct && has_crop && below_floor),
                            inappropriate_tool: u8::from(s_req.is_empty() && orient && code_turns > 0),
                        };
                        ensure!(
                            b.penalties == expected,
                            "s_req {s_req:?}, {code_turns} code turns, IoU {num}/{den}, orient {orient}, correct {correct}: got {:?}, expected {expected:?}",
                            b.penalties
                        );
                        ensure!((b.total - closed_form(&b, &cfg)).abs() <= 1e-9, "recombination");
                        cases += 1;
                    }
                }
            }
        }
    }
    Ok(format!("{cases} constructed trajectories"))
}

fn generator_constraints() -> Outcome {
    let cfg = GenConfig::default().with_seed(5);
    let scenes = mvtool_scenes(&cfg, 200).map_err(|e| e.to_string())?;
    let items = gen_mvtool(&scenes, 5000, &cfg).map_err(|e| e.to_string())?;
    ensure!(items.len() == 5000, "{} items", items.len());
    let banned = ["left", "right", "top", "bottom", "corner", "coordinates"];
    let mut hist: BTreeMap<String, usize> = BTreeMap::new();
    for it in &items {
        let (w, h) = (cfg.scene.width as u64, cfg.scene.height as u64);
        // area ratio from the box itself, compared in integers: a/(w·h) < 1/10⁴
        ensure!(it.target_box.area() * 10_000 < w * h, "{}: target area {}", it.id, it.target_box.area());
        let q = it.question.to_lowercase();
        ensure!(!banned.iter().any(|b| q.contains(b)), "{}: positional cue in '{}'", it.id, it.question);
        *hist.entry(it.tool.name().to_string()).or_default() += 1;
    }
    ensure!(hist.len() == 5, "tools {hist:?}");
    for (k, c) in &hist {
        let p = *c as f64 / 5000.0;
        ensure!((p - 0.2).abs() <= 0.02, "{k}: proportion {p}");
    }

    let mc = one_type(GenConfig::default().with_seed(6), TaskType::MultiCrop);
    for i in 0..100 {
        let task = sft_task(&mc, i).map_err(|e| e.to_string())?;
        check_chain(&task, mc.shrink_factor)?;
        let q = task.question.to_lowercase();
        ensure!(!banned.iter().any(|b| q.contains(b)), "{}: positional cue", task.id);
    }
    Ok(format!("5000 items, transforms {:?}, 100 zoom chains valid", hist.values().collect::<Vec<_>>()))
}

fn difficulty() -> Outcome {
    // every success pattern of a K = 8 group
    for mask in 0u32..256 {
        let results: Vec<bool> = (0..8).map(|i| mask & (1 << i) != 0).collect();
        let c = mask.count_ones();
        let keep = difficulty_filter(&results).map_err(|e| e.to_string())?;
        ensure!(keep == (1..=7).contains(&c), "pattern {mask:08b}: keep {keep}");
    }
    Ok("256 patterns, counts 0..8".into())
}

fn error_recovery() -> Outcome {
    let cfg = one_type(small_config(8), TaskType::ErrorHandling);
    let env = Environment::default();
    let clumsy = Policy::new(PolicyKind::Clumsy);
    let mut kinds = BTreeSet::new();
    for i in 0..100 {
        let task = Arc::new(sft_task(&cfg, i).map_err(|e| e.to_string())?);
        let faulty = task.faulty_step.clone().ok_or("error-handling task without a faulty step")?;
        let traj: Trajectory = rollout(&env, &clumsy, &task).map_err(|e| e.to_string())?;
        let failures: Vec<usize> = traj
            .turns
            .iter()
            .enumerate()
            .filter(|(_, t)| t.outcome.as_ref().is_some_and(|o| !o.is_ok()))
            .map(|(i, _)| i)
            .collect();
        ensure!(failures == [0], "{}: failures at {failures:?}", task.id);
        let next = traj.turns.get(1).and_then(|t| t.outcome.as_ref());
        ensure!(next.is_some_and(|o| o.is_ok()), "{}: no successful retry", task.id);
        let feedback = traj.turns[0].feedback();
        let tool = first_tool_name(&faulty);
        ensure!(feedback.contains(tool), "{}: feedback '{feedback}' omits '{tool}'", task.id);
        let b = score(&traj, &task, &RewardConfig::default()).map_err(|e| e.to_string())?;
        ensure!(b.r_acc == 1, "{}: wrong final answer", task.id);
        kinds.insert(feedback.split(':').next().unwrap_or("").to_string());
    }
    Ok(format!("100 episodes, error kinds {kinds:?}"))
}

fn hash_dir(root: &Path, files: &[&str]) -> String {
    let mut h = Sha256::new();
    for f in files {
        h.update(std::fs::read(root.join(f)).unwrap());
    }
    let mut imgs: Vec<_> = std::fs::read_dir(root.join("images"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    imgs.sort();
    for name in imgs {
        h.update(name.as_bytes());
    }
    hex_string(&h.finalize())
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn write_run(root: &Path, seed: u64) -> Result<(), String> {
    let store = Store::open(root).map_err(|e| e.to_string())?;
    let cfg = small_config(seed);
    let env = Environment::default();
    let mut tasks = Vec::new();
    let mut trajs = Vec::new();
    for i in 0..40 {
        let t = Arc::new(sft_task(&cfg, i).map_err(|e| e.to_string())?);
        let p = Policy::new(PolicyKind::Random).with_seed(seed);
        let traj = rollout(&env, &p, &t).map_err(|e| e.to_string())?;
        tasks.push(TaskRecord::store(&t, store.images()).map_err(|e| e.to_string())?);
        trajs.push(TrajectoryRecord::store(&traj, Some("random"), store.images()).map_err(|e| e.to_string())?);
    }
    store.write("tasks.jsonl", &tasks).map_err(|e| e.to_string())?;
    store.write("trajectories.jsonl", &trajs).map_err(|e| e.to_string())
}

fn determinism_and_round_trip() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let files = ["tasks.jsonl", "trajectories.jsonl"];
    let runs: Vec<String> = [("a", 21), ("b", 21), ("c", 22)]
        .iter()
        .map(|(name, seed)| {
            let root = dir.path().join(name);
            write_run(&root, *seed).map(|_| hash_dir(&root, &files))
        })
        .collect::<Result<_, _>>()?;
    ensure!(runs[0] == runs[1], "same seed, different checksums");
    ensure!(runs[0] != runs[2], "different seeds, same checksum");

    // 1,000 random tasks, trajectories, breakdowns and training examples
    let root = dir.path().join("rt");
    let store = Store::open(&root).map_err(|e| e.to_string())?;
    let env = Environment::default();
    let rcfg = RewardConfig::default();
    let mut r = rng(9);
    let kinds = PolicyKind::ALL;
    let (mut tasks, mut task_recs, mut trajs, mut traj_recs, mut scores, mut examples) =
        (vec![], vec![], vec![], vec![], vec![], vec![]);
    for i in 0..1000 {
        let t = Arc::new(sft_task(&small_config(r.gen()), i).map_err(|e| e.to_string())?);
        let policy = Policy::new(kinds[r.gen_range(0..kinds.len())]).with_seed(r.gen());
        let traj = rollout(&env, &policy, &t).map_err(|e| e.to_string())?;
        scores.push(score(&traj, &t, &rcfg).map_err(|e| e.to_string())?);
        examples.push(to_training_example(&traj, &t.question).map_err(|e| e.to_string())?);
        task_recs.push(TaskRecord::store(&t, store.images()).map_err(|e| e.to_string())?);
        traj_recs.push(TrajectoryRecord::store(&traj, Some(policy.kind.name()), store.images()).map_err(|e| e.to_string())?);
        tasks.push(t);
        trajs.push(traj);
    }
    let path = |n: &str| root.join(n);
    write_jsonl(&path("tasks.jsonl"), &task_recs).map_err(|e| e.to_string())?;
    write_jsonl(&path("traj.jsonl"), &traj_recs).map_err(|e| e.to_string())?;
    write_jsonl(&path("scores.jsonl"), &scores).map_err(|e| e.to_string())?;
    write_jsonl(&path("sft.jsonl"), &examples).map_err(|e| e.to_string())?;

    // a fresh store so nothing is served from memory
    let fresh = Store::open(&root).map_err(|e| e.to_string())?;
    let task_back: Vec<TaskRecord> = read_jsonl(&path("tasks.jsonl")).map_err(|e| e.to_string())?;
    let traj_back: Vec<TrajectoryRecord> = read_jsonl(&path("traj.jsonl")).map_err(|e| e.to_string())?;
    let score_back: Vec<RewardBreakdown> = read_jsonl(&path("scores.jsonl")).map_err(|e| e.to_string())?;
    let ex_back: Vec<TrainingExample> = read_jsonl(&path("sft.jsonl")).map_err(|e| e.to_string())?;
    ensure!(score_back == scores, "breakdowns changed");
    ensure!(ex_back == examples, "training examples changed");
    for i in 0..1000 {
        let t = task_back[i].load(fresh.images()).map_err(|e| e.to_string())?;
        ensure!(t == *tasks[i], "task {i} changed");
        let j = traj_back[i].load(fresh.images()).map_err(|e| e.to_string())?;
        ensure!(j == trajs[i], "trajectory {i} changed");
        for seg in &ex_back[i].segments {
            ensure!((seg.mask() == 1) == (seg.role() == Role::Assistant), "example {i}: mask rule");
        }
    }
    // the mask rule is also enforced on read
    let text = std::fs::read_to_string(path("sft.jsonl")).unwrap();
    let tampered = text.replacen("\"role\":\"user\",", "\"role\":\"assistant\",", 1);
    std::fs::write(path("sft.jsonl"), tampered).unwrap();
    ensure!(read_jsonl::<TrainingExample>(&path("sft.jsonl")).is_err(), "tampered mask accepted");
    Ok("checksums reproducible; 1000 records round-trip".into())
}

const TOKENS: &[&str] = &[
    "rotate90", "rotate180", "flip-horizontal", "flip_vertical", "crop", "blur", "brightness", "zoom", "(", ")", "(",
    ")", "=", ",", "|", "\n", " ", "\t", "x0", "y1", "radius", "factor", "1", "0", "-3", "0.5", "1e9", "99999999999999999999",
    "\"h\"", "\"", "\\", "__", "-", ".", "é", "∘", "\0",
];

fn fuzz_input(r: &mut ChaCha8Rng) -> String {
    if r.gen_bool(0.5) {
        let bytes: Vec<u8> = (0..r.gen_range(0..48)).map(|_| r.gen()).collect();
        String::from_utf8_lossy(&bytes).into_owned()
    } else {
        (0..r.gen_range(0..16)).map(|_| TOKENS[r.gen_range(0..TOKENS.len())]).collect()
    }
}

fn random_call(r: &mut ChaCha8Rng) -> String {
    let factors = ["0.5", "1.0", "1.3", "2", "0.25"];
    match r.gen_range(0..12) {
        0 => "rotate90()".into(),
        1 => "rotate180()".into(),
        2 => "rotate270()".into(),
        3 => "flip-horizontal()".into(),
        4 => "flip-vertical()".into(),
        5 => {
            let (x0, y0) = (r.gen_range(0..10), r.gen_range(0..10));
            format!(
                "crop(x0={x0}, y0={y0}, x1={}, y1={})",
                x0 + r.gen_range(1..10),
                y0 + r.gen_range(1..10)
            )
        }
        6 => format!("brightness(factor={})", factors[r.gen_range(0..factors.len())]),
        7 => format!("contrast(factor={})", factors[r.gen_range(0..factors.len())]),
        8 => "grayscale()".into(),
        9 => format!("blur(radius={})", r.gen_range(1..4)),
        10 => "sharpen()".into(),
        _ => "edge-detect()".into(),
    }
}

fn failure_kind(o: &ExecOutcome) -> Option<String> {
    match o {
        ExecOutcome::Failure(f) => Some(format!("{:?}", f.kind)),
        ExecOutcome::Success { .. } => None,
    }
}

fn interpreter_robustness() -> Outcome {
    let mut r = rng(10);
    let prev = std::panic::take_hook();
    std::panic::set_hook(Box::new(|_| {}));
    let mut accepted = 0usize;
    let mut panicked = None;
    for n in 0..1_000_000 {
        let input = fuzz_input(&mut r);
        match catch_unwind(AssertUnwindSafe(|| parse(&input).is_ok())) {
            Ok(ok) => accepted += usize::from(ok),
            Err(_) => {
                panicked = Some((n, input));
                break;
            }
        }
    }
    std::panic::set_hook(prev);
    if let Some((n, input)) = panicked {
        return Err(format!("parse panicked on input {n}: {input:?}"));
    }

    let interp = Interpreter::default();
    let mut composable = 0;
    for n in 0..10_000 {
        let img = random_raster(&mut r, 12);
        let (a, b) = (random_call(&mut r), random_call(&mut r));
        let chained = interp.run(&format!("{a} | {b}"), &img);
        let first = interp.run(&a, &img);
        match first.result() {
            None => ensure!(
                failure_kind(&chained) == failure_kind(&first),
                "case {n}: '{a} | {b}' vs failing '{a}'"
            ),
            Some(mid) => {
                let second = interp.run(&b, mid);
                match (chained.result(), second.result()) {
                    (Some(x), Some(y)) => {
                        ensure!(x == y, "case {n}: '{a} | {b}' differs from two turns");
                        let both: Vec<_> = first.applied().iter().chain(second.applied()).cloned().collect();
                        ensure!(chained.applied() == both, "case {n}: applied lists differ");
                        composable += 1;
                    }
                    _ => ensure!(
                        failure_kind(&chained) == failure_kind(&second),
                        "case {n}: '{a} | {b}' failure differs"
                    ),
                }
            }
        }
    }
    Ok(format!("10^6 parses ({accepted} accepted), 10^4 chains ({composable} composable)"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("dihedral group laws", dihedral_laws),
        ("IoU oracle equivalence", iou_oracle),
        ("diagnostic oracle", diagnostic),
        ("reward arithmetic", reward_arithmetic),
        ("penalty guardrails", penalty_guardrails),
        ("generator constraints", generator_constraints),
        ("difficulty filter", difficulty),
        ("error-recovery episode", error_recovery),
        ("determinism & round-trip", determinism_and_round_trip),
        ("interpreter robustness", interpreter_robustness),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name} ({secs:.1}s): {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name} ({secs:.1}s): {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
