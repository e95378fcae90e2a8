//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. Pass criterion numbers as arguments to run a
//! subset, e.g. `cargo test --test acceptance -- 1 2 3`.

mod common;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use rand::Rng;
use swarmland::baseline::{apf_velocity, ApfPidController, ApfParams};
use swarmland::checkpoint::{encode, load_checkpoint, save_checkpoint, CheckpointMeta};
use swarmland::cli::{state_path, train_to_dir, LOG_FILE, POLICY_FILE};
use swarmland::config::RunConfig;
use swarmland::env::{reward_individual, reward_team, EnvConfig};
use swarmland::eval::{
    aggregate_named, min_separation, run_scenario, EpisodeRecord, EvalSetup, MetricsReport,
    Outcome, PolicyController, Scenario,
};
use swarmland::nn::{ActorCritic, ActorCriticSpec};
use swarmland::ppo::{compute_gae, minibatch_loss_and_grads, LossCoefs, Minibatch, RunningNorm, TrainingLog};
use swarmland::sim::Vec3;

use common::*;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

// 1 ------------------------------------------------------------------------

fn reward_oracle_check() -> Verdict {
    let mut rng = rng(1);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let cfg = EnvConfig {
            alpha: rng.random_range(0.1..5.0),
            beta: -rng.random_range(0.0..1.0),
            c_land: rng.random_range(0.0..20.0),
            alpha_c: rng.random_range(0.1..20.0),
            k_team: rng.random_range(0.0..50.0),
            ..Default::default()
        };
        let mut individual = Vec::new();
        let mut expect = Vec::new();
        for _ in 0..cfg.n_drones {
            let prev = rng.random_range(0.0..7.0);
            let cur = rng.random_range(0.0..7.0);
            let speed = rng.random_range(0.0..6.0);
            let landed = rng.random::<bool>();
            let got = reward_individual(prev, cur, speed, landed, &cfg);
            let want = reward_oracle(prev, cur, speed, f64::from(u8::from(landed)), cfg.alpha, cfg.beta, cfg.c_land);
            worst = worst.max((got - want).abs());
            individual.push(got);
            expect.push(want);
        }
        let collision = rng.random::<bool>();
        let all = rng.random::<bool>();
        let got = reward_team(&individual, collision, all, &cfg);
        let want = team_oracle(&expect, collision, all, cfg.alpha_c, cfg.k_team);
        worst = worst.max((got - want).abs());
    }
    verdict(worst <= 1e-9, format!("50 tuples, max |diff| {worst:.1e} (tol 1e-9)"))
}

// 2 ------------------------------------------------------------------------

fn gae_oracle_check() -> Verdict {
    let mut rng = rng(2);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(1..=50);
        let gamma = rng.random_range(0.5..1.0);
        let lambda = rng.random_range(0.0..=1.0);
        let rewards = normal_vec(&mut rng, n, 3.0);
        let values = normal_vec(&mut rng, n, 5.0);
        let mut dones = vec![false; n];
        if rng.random::<bool>() {
            dones[n - 1] = true;
        }
        let last = rng.random_range(-5.0..5.0);
        let (adv, ret) = compute_gae(&rewards, &values, &dones, last, gamma, lambda);
        let want = gae_bruteforce(&rewards, &values, &dones, last, gamma, lambda);
        for t in 0..n {
            worst = worst.max((adv[t] - want[t]).abs());
            worst = worst.max((ret[t] - (want[t] + values[t])).abs());
        }
    }
    verdict(worst <= 1e-10, format!("100 episodes, max |diff| {worst:.1e} (tol 1e-10)"))
}

// 3 ------------------------------------------------------------------------

fn projection_objective<'a>(obs: &'a [f64], batch: usize, cm: &'a [f64], cv: &'a [f64], cl: &'a [f64]) -> impl Fn(&ActorCritic<f64>) -> (f64, Vec<bool>) + 'a {
    move |net| {
        let out = net.forward(obs, batch).unwrap();
        let mut l = 0.0;
        for (m, c) in out.mean.iter().zip(cm) {
            l += m * c;
        }
        for (v, c) in out.value.iter().zip(cv) {
            l += v * c;
        }
        for (s, c) in net.log_std().iter().zip(cl) {
            l += s * c;
        }
        (l, relu_pattern(net, obs, batch))
    }
}

fn ppo_problem(net: &ActorCritic<f64>, batch: usize, rng: &mut rand_chacha::ChaCha8Rng) -> PpoProblem {
    let spec = net.spec();
    let obs = normal_vec(rng, batch * spec.obs_dim, 1.5);
    let out = net.forward(&obs, batch).unwrap();
    let ls = net.log_std().to_vec();
    let act = spec.act_dim;
    let mut actions = Vec::new();
    let mut old_lp = Vec::new();
    for i in 0..batch {
        let m = &out.mean[i * act..(i + 1) * act];
        let a: Vec<f64> = m.iter().map(|&x| x + rng.random_range(-0.6..0.6)).collect();
        old_lp.push(gaussian_log_prob(&a, m, &ls) + rng.random_range(-0.4..0.4));
        actions.extend(a);
    }
    PpoProblem {
        obs,
        actions,
        old_lp,
        adv: normal_vec(rng, batch, 1.0),
        returns: normal_vec(rng, batch, 1.0),
        clip: 0.2,
        vf: 0.5,
        ent: 0.01,
    }
}

fn ppo_grads(net: &ActorCritic<f64>, p: &PpoProblem) -> Vec<f64> {
    let mb = Minibatch {
        obs: &p.obs,
        actions: &p.actions,
        old_log_probs: &p.old_lp,
        advantages: &p.adv,
        returns: &p.returns,
    };
    let coefs = LossCoefs {
        clip_eps: p.clip,
        value_coef: p.vf,
        entropy_coef: p.ent,
    };
    minibatch_loss_and_grads(net, &mb, coefs).unwrap().1
}

fn gradient_check() -> Verdict {
    const H: f64 = 1e-4;
    const FLOOR: f64 = 1e-6;
    let mut rng = rng(3);
    let mut worst = 0.0f64;
    let mut checked = 0;
    let mut skipped = 0;
    let mut tally = |r: FdReport| {
        worst = worst.max(r.max_rel);
        checked += r.checked;
        skipped += r.skipped;
    };

    for k in 0..20 {
        let spec = random_spec(&mut rng);
        let mut net = ActorCritic::<f64>::init(spec.clone(), 100 + k);
        for p in net.params_mut().iter_mut() {
            *p += rng.random_range(-0.3..0.3);
        }
        let batch = rng.random_range(1..=4);
        let all: Vec<usize> = (0..net.n_params()).collect();

        let obs = normal_vec(&mut rng, batch * spec.obs_dim, 1.0);
        let cm = normal_vec(&mut rng, batch * spec.act_dim, 1.0);
        let cv = normal_vec(&mut rng, batch, 1.0);
        let cl = normal_vec(&mut rng, spec.act_dim, 1.0);
        let out = net.forward(&obs, batch).unwrap();
        let g = net.backward(&out.cache, &cm, &cv, &cl).unwrap();
        tally(fd_check(&net, &g, &all, H, FLOOR, &projection_objective(&obs, batch, &cm, &cv, &cl)));

        let p = ppo_problem(&net, batch, &mut rng);
        let g = ppo_grads(&net, &p);
        tally(fd_check(&net, &g, &all, H, FLOOR, &|n| p.objective(n)));
    }

    let net = ActorCritic::<f32>::init(ActorCriticSpec::landing(), 7).cast::<f64>();
    let spec = net.spec().clone();
    let batch = 3;
    let idx = stratified_indices(&net, 20, &mut rng);
    let obs = normal_vec(&mut rng, batch * spec.obs_dim, 1.0);
    let cm = normal_vec(&mut rng, batch * spec.act_dim, 1.0);
    let cv = normal_vec(&mut rng, batch, 1.0);
    let cl = normal_vec(&mut rng, spec.act_dim, 1.0);
    let out = net.forward(&obs, batch).unwrap();
    let g = net.backward(&out.cache, &cm, &cv, &cl).unwrap();
    let full = fd_check(&net, &g, &idx, H, FLOOR, &projection_objective(&obs, batch, &cm, &cv, &cl));
    let p = ppo_problem(&net, batch, &mut rng);
    let g = ppo_grads(&net, &p);
    let full_ppo = fd_check(&net, &g, &idx, H, FLOOR, &|n| p.objective(n));
    let full_checked = full.checked.min(full_ppo.checked);
    tally(full);
    tally(full_ppo);

    verdict(
        worst < 1e-4 && full_checked >= 200,
        format!(
            "{checked} derivatives ({full_checked} per objective on the full network, {skipped} skipped at kinks), max rel err {worst:.1e} (tol 1e-4)"
        ),
    )
}

// 4-8 ----------------------------------------------------------------------

struct DeskRun {
    dir: PathBuf,
    log: TrainingLog,
    csv: Vec<u8>,
    secs: f64,
}

fn desk_config() -> RunConfig {
    RunConfig::default()
}

fn train_desk(root: &Path, name: &str) -> swarmland::Result<DeskRun> {
    let dir = root.join(name);
    let t0 = Instant::now();
    train_to_dir(&desk_config(), &dir, None)?;
    let secs = t0.elapsed().as_secs_f64();
    let csv = std::fs::read(dir.join(LOG_FILE)).expect("log written");
    let log = parse_log(&String::from_utf8_lossy(&csv));
    Ok(DeskRun { dir, log, csv, secs })
}

fn parse_log(text: &str) -> TrainingLog {
    let mut log = TrainingLog::default();
    for line in text.lines().skip(1) {
        let f: Vec<f64> = line.split(',').map(|x| x.parse().unwrap_or(f64::NAN)).collect();
        log.push(swarmland::ppo::IterationRecord {
            timestep: f[0] as u64,
            ep_rew_mean: f[1],
            ep_len_mean: f[2],
            loss_policy: f[3],
            loss_value: f[4],
            entropy: f[5],
            kl: f[6],
            wall_s: f[7],
        });
    }
    log
}

fn determinism(a: &DeskRun, b: &DeskRun) -> Verdict {
    let same = a.csv == b.csv;
    verdict(
        same && !a.csv.is_empty(),
        format!(
            "{} log rows, byte-identical: {same}; runs took {:.0} s and {:.0} s",
            a.log.len(),
            a.secs,
            b.secs
        ),
    )
}

fn training_trend(run: &DeskRun) -> Verdict {
    match run.log.trend(0.1) {
        Some(t) => verdict(
            t.reward_last > t.reward_first && t.length_last < t.length_first,
            format!(
                "episode reward {:.2} -> {:.2}, episode length {:.1} -> {:.1} (first vs last 10% of updates)",
                t.reward_first, t.reward_last, t.length_first, t.length_last
            ),
        ),
        None => verdict(false, "log too short for a trend"),
    }
}

fn report(records: &[EpisodeRecord], who: &str, sc: &str) -> MetricsReport {
    aggregate_named(records, who, sc).expect("non-empty")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or("n/a".into(), |v| format!("{v:.2}"))
}

struct Evaluations {
    policy_static: Vec<EpisodeRecord>,
    baseline_static: Vec<EpisodeRecord>,
    policy_moving: Vec<EpisodeRecord>,
    baseline_moving: Vec<EpisodeRecord>,
    slow: Vec<EpisodeRecord>,
    fast: Vec<EpisodeRecord>,
}

fn evaluate(policy: &mut PolicyController, setup: &EvalSetup) -> swarmland::Result<Evaluations> {
    let mut baseline = ApfPidController::new(RunConfig::default().baseline());
    let st = Scenario::by_name("static-floor", Some(100), 20_000)?;
    let mv = Scenario::by_name("moving", Some(40), 30_000)?;
    let slow = Scenario::by_name("moving-0.2", Some(40), 40_000)?;
    let fast = Scenario::by_name("moving-0.5", Some(40), 40_000)?;
    Ok(Evaluations {
        policy_static: run_scenario(policy, setup, &st)?,
        baseline_static: run_scenario(&mut baseline, setup, &st)?,
        policy_moving: run_scenario(policy, setup, &mv)?,
        baseline_moving: run_scenario(&mut baseline, setup, &mv)?,
        slow: run_scenario(policy, setup, &slow)?,
        fast: run_scenario(policy, setup, &fast)?,
    })
}

fn performance_floor(ev: &Evaluations, d_collision: f64) -> Verdict {
    let m = report(&ev.policy_static, "policy", "static-floor");
    let close_calls = ev
        .policy_static
        .iter()
        .filter(|r| r.outcome == Outcome::Success && min_separation(r) < d_collision)
        .count();
    let err = m.mean_landing_error.unwrap_or(f64::INFINITY);
    verdict(
        m.success_rate >= 70.0 && err <= 10.0 && close_calls == 0,
        format!(
            "{} static episodes: success {:.1}% (min 70), landing error {} cm (max 10), collisions in successful episodes {close_calls}",
            m.episodes,
            m.success_rate,
            fmt_opt(m.mean_landing_error)
        ),
    )
}

fn baseline_ordering(ev: &Evaluations) -> Verdict {
    let ps = report(&ev.policy_static, "policy", "static-floor");
    let bs = report(&ev.baseline_static, "baseline", "static-floor");
    let pm = report(&ev.policy_moving, "policy", "moving");
    let bm = report(&ev.baseline_moving, "baseline", "moving");
    let time_ok = match (ps.mean_landing_time, bs.mean_landing_time) {
        (Some(p), Some(b)) => p <= b,
        (Some(_), None) => true,
        _ => false,
    };
    verdict(
        time_ok && ps.success_rate >= bs.success_rate && pm.success_rate >= bm.success_rate,
        format!(
            "static: time {} s vs {} s, success {:.1}% vs {:.1}%; moving: success {:.1}% vs {:.1}% (policy vs baseline)",
            fmt_opt(ps.mean_landing_time),
            fmt_opt(bs.mean_landing_time),
            ps.success_rate,
            bs.success_rate,
            pm.success_rate,
            bm.success_rate
        ),
    )
}

fn moving_degradation(ev: &Evaluations) -> Verdict {
    let slow = report(&ev.slow, "policy", "moving-0.2");
    let fast = report(&ev.fast, "policy", "moving-0.5");
    verdict(
        fast.success_rate <= slow.success_rate,
        format!(
            "success {:.1}% at 0.2 m/s vs {:.1}% at 0.5 m/s ({} episodes each)",
            slow.success_rate, fast.success_rate, slow.episodes
        ),
    )
}

// 9 ------------------------------------------------------------------------

fn random_point(rng: &mut rand_chacha::ChaCha8Rng, half: f64) -> Vec3 {
    Vec3::new(
        rng.random_range(-half..half),
        rng.random_range(-half..half),
        rng.random_range(-half..half),
    )
}

fn apf_properties() -> Verdict {
    let mut rng = rng(9);
    let mut antisym = 0.0f64;
    let mut cap_excess = 0.0f64;
    let mut misalign = 0.0f64;
    for _ in 0..1000 {
        let params = ApfParams {
            k_att: rng.random_range(0.1..3.0),
            k_rep: rng.random_range(0.001..0.2),
            d0: rng.random_range(0.2..1.0),
            v_cap: rng.random_range(0.2..3.0),
        };

        // repulsion only: each drone sits on its own goal, cap out of reach
        let loose = ApfParams {
            v_cap: 1e12,
            ..params
        };
        let p1 = random_point(&mut rng, 1.0);
        let dir = random_point(&mut rng, 1.0);
        let dir = dir * (1.0 / dir.norm());
        let p2 = p1 + dir * rng.random_range(0.05..params.d0);
        let r1 = apf_velocity(p1, p1, &[p2], &loose).unwrap();
        let r2 = apf_velocity(p2, p2, &[p1], &loose).unwrap();
        antisym = antisym.max((r1 + r2).norm() / r1.norm().max(1e-12));

        // cap
        let p = random_point(&mut rng, 2.0);
        let goal = random_point(&mut rng, 2.0);
        let others: Vec<Vec3> = (0..3).map(|_| p + random_point(&mut rng, 0.5)).collect();
        let v = apf_velocity(p, goal, &others, &params).unwrap();
        cap_excess = cap_excess.max(v.norm() - params.v_cap);

        // goal alignment with every neighbour outside d0
        let far: Vec<Vec3> = (0..3)
            .map(|_| {
                let d = random_point(&mut rng, 1.0);
                p + d * ((params.d0 + rng.random_range(0.0..1.0)) / d.norm())
            })
            .collect();
        let v = apf_velocity(p, goal, &far, &loose).unwrap();
        let g = goal - p;
        let cos = v.dot(g) / (v.norm() * g.norm());
        misalign = misalign.max(1.0 - cos);
    }
    verdict(
        antisym < 1e-12 && cap_excess <= 1e-12 && misalign < 1e-12,
        format!(
            "1000 configurations: antisymmetry err {antisym:.1e}, cap excess {cap_excess:.1e}, alignment err {misalign:.1e}"
        ),
    )
}

// 10 -----------------------------------------------------------------------

fn checkpoint_round_trip(root: &Path) -> swarmland::Result<Verdict> {
    let net = ActorCritic::<f32>::init(ActorCriticSpec::landing(), 10);
    let mut norm = RunningNorm::new(26);
    norm.update(&normal_vec(&mut rng(10), 26 * 5, 2.0))?;
    let meta = CheckpointMeta {
        seed: 10,
        total_timesteps: 0,
        config_hash: "abc".into(),
    };
    let path = root.join("round_trip.marl");
    save_checkpoint(&net, &norm, &meta, &path)?;
    let back = load_checkpoint(&path)?;
    let bits_equal = net
        .params()
        .iter()
        .zip(back.net.params())
        .all(|(a, b)| a.to_bits() == b.to_bits())
        && back.normalizer == norm
        && back.meta == meta;

    let mut cfg = RunConfig::default();
    cfg.ppo.rollout_length = 64;
    cfg.ppo.minibatch_size = 128;
    cfg.ppo.n_epochs = 3;
    cfg.ppo.total_timesteps = 2 * cfg.ppo.batch_size() as u64;
    cfg.ppo.checkpoint_interval = 1;
    let straight = root.join("straight");
    train_to_dir(&cfg, &straight, None)?;
    let mid = std::fs::read_dir(&straight)
        .expect("output dir")
        .filter_map(|e| e.ok().map(|e| e.path()))
        .find(|p| p.file_name().is_some_and(|n| n.to_string_lossy().starts_with("checkpoint_")))
        .expect("intermediate checkpoint");
    let resumed = root.join("resumed");
    train_to_dir(&cfg, &resumed, Some(&mid))?;

    let a = std::fs::read(straight.join(POLICY_FILE)).expect("policy");
    let b = std::fs::read(resumed.join(POLICY_FILE)).expect("policy");
    let la = std::fs::read(straight.join(LOG_FILE)).expect("log");
    let lb = std::fs::read(resumed.join(LOG_FILE)).expect("log");
    let sa = std::fs::read(state_path(&straight.join(POLICY_FILE))).expect("state");
    let sb = std::fs::read(state_path(&resumed.join(POLICY_FILE))).expect("state");
    let resume_equal = a == b && la == lb && sa == sb;
    let size = encode(&net, &norm, &meta)?.len();
    Ok(verdict(
        bits_equal && resume_equal,
        format!(
            "{size}-byte checkpoint bit-exact: {bits_equal}; resumed 2-update run identical (parameters, log, optimizer state): {resume_equal}"
        ),
    ))
}

// --------------------------------------------------------------------------

fn main() -> ExitCode {
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let on = |k: u32| wanted.is_empty() || wanted.contains(&k);
    let root = tempfile::tempdir().expect("temp dir");
    let mut failures = 0;
    let mut line = |k: u32, name: &str, t0: Instant, v: Verdict| {
        let tag = if v.pass { "PASS" } else { "FAIL" };
        if !v.pass {
            failures += 1;
        }
        println!("{tag} [{k:>2}] {name}: {} ({:.1} s)", v.detail, t0.elapsed().as_secs_f64());
    };
    let guard = |r: swarmland::Result<Verdict>| r.unwrap_or_else(|e| verdict(false, format!("error: {e}")));

    let simple: [(u32, &str, fn() -> Verdict); 3] = [
        (1, "reward oracle", reward_oracle_check),
        (2, "advantage oracle", gae_oracle_check),
        (3, "gradient check", gradient_check),
    ];
    for (k, name, f) in simple {
        if on(k) {
            let t0 = Instant::now();
            line(k, name, t0, f());
        }
    }

    if (4..=8).any(on) {
        let t0 = Instant::now();
        let run_a = train_desk(root.path(), "run_a");
        let run_b = if on(4) { Some(train_desk(root.path(), "run_b")) } else { None };
        match run_a {
            Err(e) => {
                for k in (4..=8).filter(|&k| on(k)) {
                    line(k, "desk training", t0, verdict(false, format!("training failed: {e}")));
                }
            }
            Ok(a) => {
                if let Some(b) = run_b {
                    line(4, "determinism", t0, guard(b.map(|b| determinism(&a, &b))));
                }
                if on(5) {
                    line(5, "training trend", Instant::now(), training_trend(&a));
                }
                if (6..=8).any(on) {
                    let t1 = Instant::now();
                    let setup = desk_config().eval_setup();
                    let d_collision = setup.env.d_collision;
                    let evals = load_checkpoint(&a.dir.join(POLICY_FILE))
                        .and_then(|ck| PolicyController::new(ck.net, ck.normalizer))
                        .and_then(|mut p| evaluate(&mut p, &setup));
                    match evals {
                        Ok(ev) => {
                            if on(6) {
                                line(6, "policy performance floor", t1, performance_floor(&ev, d_collision));
                            }
                            if on(7) {
                                line(7, "baseline ordering", t1, baseline_ordering(&ev));
                            }
                            if on(8) {
                                line(8, "moving-platform degradation", t1, moving_degradation(&ev));
                            }
                        }
                        Err(e) => {
                            for k in (6..=8).filter(|&k| on(k)) {
                                line(k, "evaluation", t1, verdict(false, format!("error: {e}")));
                            }
                        }
                    }
                }
            }
        }
    }

    if on(9) {
        let t0 = Instant::now();
        line(9, "potential-field properties", t0, apf_properties());
    }
    if on(10) {
        let t0 = Instant::now();
        line(10, "checkpoint round trip", t0, guard(checkpoint_round_trip(root.path())));
    }

    if failures == 0 {
        println!("acceptance: all selected criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failures} criterion/criteria failed");
        ExitCode::FAILURE
    }
}
