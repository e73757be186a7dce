//! Embedded self-checks: a fast sample of the library's invariants, each
//! reported as one `check.<name>=pass|fail` line.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use toolsight::datagen::{
    diagnostic_images, gen_diagnostic, has_positional_cue, solve_diagnostic, sft_task, GenConfig, SceneOptions,
};
use toolsight::episode::{render_prompt, Environment, TaskType};
use toolsight::policies::{rollout, Policy, PolicyKind};
use toolsight::raster::{detect_transform, iou, BBox, Dihedral, Raster, TransformKind};
use toolsight::reward::{score, RewardConfig};
use toolsight::store::{read_jsonl, to_training_example, Store, TaskRecord, TrajectoryRecord};
use toolsight::toolprog::parse;

use crate::CliError;

fn random_raster(rng: &mut ChaCha8Rng) -> Raster {
    let (w, h) = (rng.gen_range(1..9), rng.gen_range(1..9));
    Raster::from_fn(w, h, |_, _| rng.gen())
}

fn dihedral_laws(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let all: Vec<Dihedral> = (0..8).map(|i| Dihedral::new(i >= 4, (i % 4) as u8)).collect();
    for _ in 0..100 {
        let img = random_raster(rng);
        for &a in &all {
            if a.inverse().apply(&a.apply(&img)) != img {
                return Err(format!("{a:?} inverse does not restore"));
            }
            for &b in &all {
                if b.apply(&a.apply(&img)) != a.then(b).apply(&img) {
                    return Err(format!("{a:?} then {b:?} is not composition"));
                }
            }
        }
    }
    Ok(())
}

fn iou_bounds(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let mut arb = || {
        let (x0, y0) = (rng.gen_range(0..11), rng.gen_range(0..11));
        BBox::new(x0, y0, rng.gen_range(x0 + 1..12), rng.gen_range(y0 + 1..12)).unwrap()
    };
    for _ in 0..10_000 {
        let (a, b) = (arb(), arb());
        let v = iou(&a, &b);
        if !(0.0..=1.0).contains(&v) || v != iou(&b, &a) || iou(&a, &a) != 1.0 {
            return Err(format!("iou({a:?}, {b:?}) = {v}"));
        }
    }
    Ok(())
}

fn parse_round_trip() -> Result<(), String> {
    let programs = [
        "rotate90()",
        "crop(x0=1, y0=2, x1=30, y1=40) | grayscale()",
        "brightness(factor=1.5) | blur(radius=3) | flip-vertical()",
    ];
    for p in programs {
        let prog = parse(p).map_err(|e| e.to_string())?;
        if parse(&prog.render()).map_err(|e| e.to_string())? != prog {
            return Err(format!("render/parse mismatch for '{p}'"));
        }
    }
    for bad in ["rotate90(", "| grayscale()", "crop(x0=1,, y0=2)"] {
        if parse(bad).is_ok() {
            return Err(format!("'{bad}' parsed"));
        }
    }
    Ok(())
}

fn diagnostic(seed: u64) -> Result<(), String> {
    let images = diagnostic_images(seed, 24).map_err(|e| e.to_string())?;
    for it in gen_diagnostic(&images, seed) {
        if solve_diagnostic(&images[it.source], &it.image) != Some(it.transform) {
            return Err(format!("{} misclassified", it.id));
        }
    }
    let img = &images[0];
    if !detect_transform(img, img).contains(&TransformKind::Identity) {
        return Err("identity not detected".into());
    }
    Ok(())
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

fn oracle_rewards(seed: u64) -> Result<(), String> {
    let cfg = small_config(seed);
    let env = Environment::default();
    let rcfg = RewardConfig::default();
    let oracle = Policy::new(PolicyKind::Oracle);
    let hacker = Policy::new(PolicyKind::RewardHacker);
    for i in 0..20 {
        let t = Arc::new(sft_task(&cfg, i).map_err(|e| e.to_string())?);
        if has_positional_cue(&t.question) {
            return Err(format!("{}: positional cue", t.id));
        }
        let traj = rollout(&env, &oracle, &t).map_err(|e| e.to_string())?;
        let b = score(&traj, &t, &rcfg).map_err(|e| e.to_string())?;
        let required = !t.s_req.is_empty();
        if b.r_acc != 1 || b.penalties.sum() != 0 || (required && b.traj_match != rcfg.traj_match_bonus) {
            return Err(format!("{}: oracle breakdown {b:?}", t.id));
        }
        if required && t.task_type != TaskType::ErrorHandling {
            let h = rollout(&env, &hacker, &t).map_err(|e| e.to_string())?;
            let hb = score(&h, &t, &rcfg).map_err(|e| e.to_string())?;
            if hb.total >= b.total {
                return Err(format!("{}: hacker {} >= oracle {}", t.id, hb.total, b.total));
            }
        }
    }
    Ok(())
}

fn store_round_trip(seed: u64) -> Result<(), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let store = Store::open(dir.path()).map_err(|e| e.to_string())?;
    let env = Environment::default();
    let t = Arc::new(sft_task(&small_config(seed), 0).map_err(|e| e.to_string())?);
    let traj = rollout(&env, &Policy::new(PolicyKind::Oracle), &t).map_err(|e| e.to_string())?;
    let tr = TaskRecord::store(&t, store.images()).map_err(|e| e.to_string())?;
    let jr = TrajectoryRecord::store(&traj, None, store.images()).map_err(|e| e.to_string())?;
    store.write("t.jsonl", [&tr]).map_err(|e| e.to_string())?;
    store.write("j.jsonl", [&jr]).map_err(|e| e.to_string())?;
    let tr2: Vec<TaskRecord> = read_jsonl(&store.path("t.jsonl")).map_err(|e| e.to_string())?;
    let jr2: Vec<TrajectoryRecord> = read_jsonl(&store.path("j.jsonl")).map_err(|e| e.to_string())?;
    if tr2[0].load(store.images()).map_err(|e| e.to_string())? != *t
        || jr2[0].load(store.images()).map_err(|e| e.to_string())? != traj
    {
        return Err("round trip changed a record".into());
    }
    let ex = to_training_example(&traj, &render_prompt(&t, env.interpreter())).map_err(|e| e.to_string())?;
    if ex.segments.iter().any(|s| (s.mask() == 1) != (s.role() == toolsight::store::Role::Assistant)) {
        return Err("mask does not follow role".into());
    }
    Ok(())
}

pub fn run(seed: u64) -> Result<(), CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let results = [
        ("dihedral_laws", dihedral_laws(&mut rng)),
        ("iou_bounds", iou_bounds(&mut rng)),
        ("parse_round_trip", parse_round_trip()),
        ("diagnostic_oracle", diagnostic(seed)),
        ("oracle_rewards", oracle_rewards(seed)),
        ("store_round_trip", store_round_trip(seed)),
    ];
    let mut failed = 0;
    for (name, r) in &results {
        match r {
            Ok(()) => println!("check.{name}=pass"),
            Err(e) => {
                failed += 1;
                println!("check.{name}=fail");
                eprintln!("{name}: {e}");
            }
        }
    }
    println!("checks={} failed={failed}", results.len());
    if failed > 0 {
        return Err(CliError::Data(format!("{failed} invariant checks failed")));
    }
    Ok(())
}
