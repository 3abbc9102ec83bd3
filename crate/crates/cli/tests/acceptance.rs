//! End-to-end acceptance suite. Each criterion prints one PASS/FAIL line with
//! the measured quantity; the test fails if any criterion fails.
//!
//! Run with `cargo test -p drltrade-cli --test acceptance`; set `ACCEPTANCE_ONLY=1,4b` to run a subset.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use drltrade_cli::commands::{self, BacktestArgs, Baseline, ExperimentArgs, Span};
use drltrade_core::agents::train::greedy_episode_reward;
use drltrade_core::agents::{ddqn_target, dqn_target, train, A2cAgent, AgentConfig, AgentKind, QAgent, ReplayBuffer, Transition};
use drltrade_core::env::{EnvConfig, TradeAction, TradingEnv};
use drltrade_core::features::indicators::{self, RsiSmoothing};
use drltrade_core::features::{build_features, FeatureConfig, FeatureMatrix, FeatureRow};
use drltrade_core::neural::{Activation, AdamConfig, DuelingNet, Mlp, Network};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::*;

struct Outcome {
    pass: bool,
    detail: String,
}

/// Written straight to stderr so the verdicts show even when the harness
/// captures test output.
fn report_line(line: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stderr(), "{line}");
}

fn report(id: &str, title: &str, started: Instant, outcome: Outcome) -> bool {
    let verdict = if outcome.pass { "PASS" } else { "FAIL" };
    report_line(&format!("{verdict} [{id}] {title}: {} ({:.1}s)", outcome.detail, started.elapsed().as_secs_f64()));
    outcome.pass
}

fn within(started: Instant, limit: Duration) -> bool {
    started.elapsed() < limit
}

// 1. Feature-oracle equivalence.

fn feature_oracles() -> Outcome {
    let started = Instant::now();
    let mut worst: BTreeMap<&str, f64> = BTreeMap::new();
    let mut bump = |name, d: f64| {
        let w = worst.entry(name).or_insert(0.0);
        *w = w.max(d);
    };
    let max_diff = |lib: &[Option<f64>], oracle: &dyn Fn(usize) -> Option<f64>| {
        lib.iter().enumerate().map(|(t, v)| diff(*v, oracle(t))).fold(0.0, f64::max)
    };
    for seed in 0..100 {
        let p = random_prices(10_000 + seed, 600);
        let r: Vec<f64> = p.windows(2).map(|w| w[1] / w[0] - 1.0).collect();
        bump("ewm_std", max_diff(&indicators::ewm_std(&r, 60, EPS).0, &|t| ewm_std_at(&r, t, 60)));
        let sigma = indicators::price_sigma(&p, 60, EPS);
        for h in [21, 42, 63, 252] {
            bump("vol_normalized_return", max_diff(&indicators::vol_normalized_return(&p, h, &sigma).0, &|t| vol_return_at(&p, t, h, 60)));
        }
        let macd = macd_series(&p, 8.0, 24.0);
        bump("macd", max_diff(&indicators::macd(&p, 8.0, 24.0, EPS).0, &|t| macd[t]));
        bump("rsi", max_diff(&indicators::rsi(&p, 30, RsiSmoothing::Wilder).0, &|t| rsi_at(&p, t, 30)));
        bump("normalize_close", max_diff(&indicators::normalize_close(&p, 60, EPS).0, &|t| norm_close_at(&p, t, 60)));
    }
    let pass = worst.values().all(|&d| d < 1e-10) && within(started, Duration::from_secs(30));
    let detail = worst.iter().map(|(k, v)| format!("{k} {v:.1e}")).collect::<Vec<_>>().join(", ");
    Outcome { pass, detail: format!("max abs diff over 100 series: {detail}") }
}

// 2. Gradient suite.

fn vec_in(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn transitions(rng: &mut ChaCha8Rng, n: usize, dim: usize, actions: usize) -> Vec<Transition<Vec<f64>>> {
    (0..n)
        .map(|i| {
            let done = i % 4 == 3;
            let next = (!done).then(|| vec_in(rng, dim));
            Transition::new(vec_in(rng, dim), rng.gen_range(0..actions), rng.gen_range(-1.0..1.0), next, done)
        })
        .collect()
}

fn gradient_suite() -> Outcome {
    let started = Instant::now();
    let mut worst: BTreeMap<&str, f64> = BTreeMap::new();
    let mut bump = |name, d: f64| {
        let w = worst.entry(name).or_insert(0.0);
        *w = w.max(d);
    };
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = Mlp::new(&[6, 8, 5, 3], Activation::Identity, &mut rng);
        let (x, c) = (vec_in(&mut rng, 6), vec_in(&mut rng, 3));
        let (_, cache) = net.forward(&x).unwrap();
        let (g, _) = net.backward(&cache, &c).unwrap();
        bump("mlp", fd_worst_relative(&net, &g, |p: &Mlp| dot(&p.predict(&x).unwrap(), &c)));

        let net = DuelingNet::new(&[5, 8, 6], 4, 3, &mut rng);
        let (x, c) = (vec_in(&mut rng, 5), vec_in(&mut rng, 3));
        let (_, cache) = net.forward(&x).unwrap();
        let (g, _) = net.backward(&cache, &c).unwrap();
        bump("dueling", fd_worst_relative(&net, &g, |p: &DuelingNet| dot(&p.predict(&x).unwrap(), &c)));

        for (name, kind) in [("dqn_loss", AgentKind::Dqn), ("ddqn_loss", AgentKind::Ddqn), ("dueling_loss", AgentKind::Dueling)] {
            let mut agent = QAgent::new(kind, 5, 3, &[8, 6], 4, AdamConfig::default(), 0.9, &mut rng).unwrap();
            let data = transitions(&mut rng, 12, 5, 3);
            let refs: Vec<&Transition<Vec<f64>>> = data.iter().collect();
            for _ in 0..3 {
                agent.q_train_step(&refs).unwrap();
            }
            let (_, g) = agent.loss_and_gradient(&refs).unwrap();
            let loss = |p: &Network| {
                let mut a = agent.clone();
                *a.online_mut() = p.clone();
                a.loss_and_gradient(&refs).unwrap().0
            };
            bump(name, fd_worst_relative(agent.online(), &g, loss));
        }

        let agent = A2cAgent::new(5, 3, &[8, 6], AdamConfig::default(), 0.95, 0.01, &mut rng);
        let rollout = transitions(&mut rng, 16, 5, 3);
        let l = agent.losses_and_gradients(&rollout).unwrap();
        bump(
            "a2c_actor",
            fd_worst_relative(agent.actor(), &l.actor_grad, |p: &Mlp| {
                let mut a = agent.clone();
                *a.actor_mut() = p.clone();
                a.losses_and_gradients(&rollout).unwrap().actor_loss
            }),
        );
        bump(
            "a2c_critic",
            fd_worst_relative(agent.critic(), &l.critic_grad, |p: &Mlp| {
                let mut a = agent.clone();
                *a.critic_mut() = p.clone();
                a.losses_and_gradients(&rollout).unwrap().critic_loss
            }),
        );
    }
    let pass = worst.values().all(|&d| d < 1e-4) && within(started, Duration::from_secs(60));
    let detail = worst.iter().map(|(k, v)| format!("{k} {v:.1e}")).collect::<Vec<_>>().join(", ");
    Outcome { pass, detail: format!("worst relative error, 20 instances each: {detail}") }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

// 3. Reward and wealth accounting.

fn price_matrix(prices: &[f64]) -> Arc<FeatureMatrix> {
    let dates = (0..prices.len()).map(|i| default_start() + chrono::Days::new(i as u64)).collect();
    let rows = prices.iter().map(|p| FeatureRow { norm_close: p / 100.0, rsi: 50.0, ..FeatureRow::default() }).collect();
    Arc::new(FeatureMatrix::from_parts("P", 0, dates, prices.to_vec(), rows))
}

fn play(env: &mut TradingEnv, actions: &[TradeAction]) -> Vec<(f64, f64, bool)> {
    env.reset().unwrap();
    let mut out = Vec::new();
    for &a in actions {
        let s = env.step(a).unwrap();
        out.push((s.reward, s.info.wealth, s.done));
        if s.done {
            break;
        }
    }
    out
}

fn reward_accounting() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut reward_mismatches, mut worst_identity, mut antisymmetry_breaks) = (0usize, 0.0f64, 0usize);
    let mut steps_checked = 0usize;
    for episode in 0..1000u64 {
        let n = rng.gen_range(8..80);
        let lookback = rng.gen_range(1..6);
        let prices = random_prices(20_000 + episode, n);
        let cost = rng.gen_range(0.0001..0.0005);
        let cfg = EnvConfig { lookback, ..EnvConfig::with_cost(cost) };
        let (mut env, _) = TradingEnv::new(price_matrix(&prices), cfg.clone()).unwrap();
        let actions: Vec<TradeAction> = (0..n).map(|_| TradeAction::ALL[rng.gen_range(0..3)]).collect();
        let steps = play(&mut env, &actions);
        let (mut w, mut product, mut prev) = (cfg.initial_capital, 1.0, 0i64);
        for (k, &(reward, _, done)) in steps.iter().enumerate() {
            let t = lookback - 1 + k;
            let a = actions[k].value();
            let running = (prices[t + 1] / prices[t] - 1.0) * a as f64 - (a - prev).abs() as f64 * cost;
            w *= 1.0 + running;
            product *= 1.0 + running;
            let expected = if w <= (1.0 - cfg.drawdown_threshold) * cfg.initial_capital {
                cfg.ruin_penalty
            } else if done {
                let ret = w / cfg.initial_capital - 1.0;
                running + if ret < 0.0 { cfg.negative_terminal_multiplier } else { cfg.terminal_multiplier } * ret
            } else {
                running
            };
            reward_mismatches += usize::from(reward != expected);
            steps_checked += 1;
            prev = a;
        }
        let final_wealth = steps.last().unwrap().1;
        let identity = cfg.initial_capital * product;
        worst_identity = worst_identity.max(((final_wealth - identity) / identity).abs());

        let free = EnvConfig { lookback, terminal_multiplier: 0.0, negative_terminal_multiplier: 0.0, ..EnvConfig::with_cost(0.0) };
        let (mut env, _) = TradingEnv::new(price_matrix(&prices), free).unwrap();
        let mirrored: Vec<TradeAction> = actions.iter().map(|a| TradeAction::try_from(-a.value()).unwrap()).collect();
        let a = play(&mut env, &actions);
        let b = play(&mut env, &mirrored);
        for (x, y) in a.iter().zip(&b) {
            if x.0 == -10.0 || y.0 == -10.0 {
                break;
            }
            antisymmetry_breaks += usize::from(x.0 != -y.0);
        }
    }
    Outcome {
        pass: reward_mismatches == 0 && worst_identity < 1e-9 && antisymmetry_breaks == 0,
        detail: format!(
            "1000 episodes, {steps_checked} steps: {reward_mismatches} reward mismatches, worst wealth identity error {worst_identity:.1e}, {antisymmetry_breaks} antisymmetry breaks at C=0"
        ),
    }
}

// 4. Double estimator.

fn ddqn_collapse() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for i in 0..1000 {
        let kind = if i % 2 == 0 { AgentKind::Dqn } else { AgentKind::Dueling };
        let agent = QAgent::new(kind, 6, 3, &[10, 8], 5, AdamConfig::default(), 0.99, &mut rng).unwrap();
        assert_eq!(agent.online(), agent.target());
        let next = vec_in(&mut rng, 6);
        let r = rng.gen_range(-1.0..1.0);
        let a = dqn_target(r, Some(&next), false, agent.target(), 0.99).unwrap();
        let b = ddqn_target(r, Some(&next), false, agent.online(), agent.target(), 0.99).unwrap();
        worst = worst.max((a - b).abs());
    }
    Outcome { pass: worst <= 1e-12, detail: format!("max |ddqn - dqn| with target = online over 1000 inputs: {worst:.1e}") }
}

const NOISE_ACTIONS: usize = 5;
const NOISE_STEPS: usize = 5000;
const NOISE_SEEDS: u64 = 20;

/// Trains on the single-state noise bandit and returns the final estimate of
/// the best action's value: `max_a Q(s, a)` for DQN, `Q'(s, argmax_a Q(s, a))`
/// for DDQN.
fn noise_mdp_estimate(kind: AgentKind, seed: u64) -> f64 {
    let state = vec![1.0];
    let mut init = ChaCha8Rng::seed_from_u64(seed);
    let mut agent = QAgent::new(kind, 1, NOISE_ACTIONS, &[16], 4, AdamConfig { lr: 1e-3, ..AdamConfig::default() }, 0.0, &mut init).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut buffer = ReplayBuffer::new(500);
    for step in 1..=NOISE_STEPS {
        let a = rng.gen_range(0..NOISE_ACTIONS);
        let r = rng.gen_range(-1.0..1.0);
        buffer.push(Transition::new(state.clone(), a, r, Some(state.clone()), false));
        if buffer.len() >= 32 {
            let batch = buffer.sample(32, &mut rng);
            agent.q_train_step(&batch).unwrap();
        }
        if step % 300 == 0 {
            agent.sync_target();
        }
    }
    let q = agent.q_values(&state).unwrap();
    match kind {
        AgentKind::Ddqn => {
            let pick = drltrade_core::neural::argmax(&q);
            agent.target().predict(&state).unwrap()[pick]
        }
        _ => q.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    }
}

fn overestimation() -> Outcome {
    let started = Instant::now();
    let dqn: Vec<f64> = (0..NOISE_SEEDS).map(|s| noise_mdp_estimate(AgentKind::Dqn, s)).collect();
    let ddqn: Vec<f64> = (0..NOISE_SEEDS).map(|s| noise_mdp_estimate(AgentKind::Ddqn, s)).collect();
    let diffs: Vec<f64> = dqn.iter().zip(&ddqn).map(|(a, b)| a - b).collect();
    // Paired percentile bootstrap of the mean difference.
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut means: Vec<f64> = (0..10_000)
        .map(|_| (0..diffs.len()).map(|_| diffs[rng.gen_range(0..diffs.len())]).sum::<f64>() / diffs.len() as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let lower = means[(0.025 * means.len() as f64) as usize];
    let (m_dqn, m_ddqn) = (mean(&dqn), mean(&ddqn));
    Outcome {
        pass: m_dqn > 0.0 && m_ddqn > 0.0 && m_dqn >= m_ddqn && lower > 0.0 && within(started, Duration::from_secs(300)),
        detail: format!(
            "mean max Q: DQN {m_dqn:.4}, DDQN {m_ddqn:.4} (true 0); paired bootstrap 95% interval for DQN - DDQN starts at {lower:.4}"
        ),
    }
}

// 5. Toy market.

const TOY_DAYS: i32 = 600;
const TOY_COST: f64 = 0.0001;
const TOY_EPISODES: usize = 150;
const TOY_VALUE_LR: f64 = 1e-6;

fn toy_market() -> (Arc<FeatureMatrix>, EnvConfig) {
    let p: Vec<f64> = (0..TOY_DAYS).map(|t| 100.0 * 1.001f64.powi(t)).collect();
    let fm = build_features(&series("TOY", default_start(), &p), &FeatureConfig::default()).unwrap();
    (Arc::new(fm), EnvConfig::with_cost(TOY_COST))
}

/// Always-long episode reward in closed form: the first step pays the entry
/// cost, every step earns 0.1%, and the last adds the terminal bonus on the
/// compounded return.
fn toy_optimum(fm: &FeatureMatrix, cfg: &EnvConfig) -> f64 {
    let steps = (fm.len() - cfg.lookback) as i32;
    let g = 0.001;
    let first = g - TOY_COST;
    let wealth_ratio = (1.0 + first) * (1.0 + g).powi(steps - 1);
    first + (steps - 1) as f64 * g + cfg.terminal_multiplier * (wealth_ratio - 1.0)
}

fn toy_convergence() -> Outcome {
    let (fm, env_cfg) = toy_market();
    let optimum = toy_optimum(&fm, &env_cfg);
    let factory = || Ok(TradingEnv::new(Arc::clone(&fm), env_cfg.clone())?);

    // Cross-check the closed form against stepping the environment.
    let (mut env, _) = factory().unwrap();
    env.reset().unwrap();
    let mut stepped = 0.0;
    while !{
        let s = env.step(TradeAction::Buy).unwrap();
        stepped += s.reward;
        s.done
    } {}
    let mut lines = vec![format!("always-long optimum {optimum:.6} (stepped {stepped:.6})")];
    let mut pass = (optimum - stepped).abs() < 1e-9;

    for kind in AgentKind::ALL {
        let started = Instant::now();
        let mut cfg = AgentConfig::for_kind(kind);
        cfg.value_adam.lr = TOY_VALUE_LR;
        // One A2C update per episode.
        cfg.n_steps = fm.len() - env_cfg.lookback;
        cfg.episodes = TOY_EPISODES;
        let (agent, _) = train(factory, &cfg).unwrap();
        let (mut env, _) = factory().unwrap();
        let got = greedy_episode_reward(&agent, &mut env).unwrap();
        let need = if kind == AgentKind::A2c { 0.90 } else { 0.95 };
        let ok = got >= need * optimum && within(started, Duration::from_secs(600));
        pass &= ok;
        lines.push(format!(
            "{kind} {:.1}% of optimum after {TOY_EPISODES} episodes (need {:.0}%, {:.0}s){}",
            100.0 * got / optimum,
            need * 100.0,
            started.elapsed().as_secs_f64(),
            if ok { "" } else { " <- below target" }
        ));
    }
    Outcome { pass, detail: lines.join("; ") }
}

// 6. Dueling identifiability.

fn dueling_identifiability() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let net = DuelingNet::new(&[420, 64, 64], 32, 3, &mut rng);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let x: Vec<f64> = (0..420).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let (q, cache) = net.forward(&x).unwrap();
        worst = worst.max((q.iter().map(|qa| qa - cache.value()).sum::<f64>() / q.len() as f64).abs());
    }
    Outcome { pass: worst <= 1e-12, detail: format!("max |mean_a (Q - V)| over 1000 states: {worst:.1e}") }
}

// 7. End-to-end determinism.

fn files_under(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn write_fixture(dir: &Path, id: &str, prices: &[f64], start: chrono::NaiveDate) -> PathBuf {
    let path = dir.join(format!("{id}.csv"));
    std::fs::write(&path, yahoo_csv(start, prices)).unwrap();
    path
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let a = write_fixture(dir.path(), "AAA", &random_prices(71, 480), default_start());
    let b = write_fixture(dir.path(), "BBB", &random_prices(72, 480), default_start());
    let config = dir.path().join("run.toml");
    std::fs::write(
        &config,
        format!(
            "out_dir = \"out\"\n[[data.assets]]\nid = \"AAA\"\npath = \"{}\"\n[[data.assets]]\nid = \"BBB\"\npath = \"{}\"\n\
             [features]\nlookback = 20\n[env]\nlookback = 20\n[agent]\nepisodes = 2\nhidden = [32, 32]\nbatch_size = 32\nlearning_starts = 32\n\
             [experiment]\nseeds = [0, 1]\njobs = 0\n",
            a.display(),
            b.display()
        ),
    )
    .unwrap();
    let out = dir.path().join("out");
    let run = |jobs: Option<usize>, keep_as: &str| {
        let cells = commands::experiment(&ExperimentArgs { config: config.clone(), jobs, out: None }).unwrap();
        let files = files_under(&out);
        std::fs::rename(&out, dir.path().join(keep_as)).unwrap();
        (cells, files)
    };
    let (c1, first) = run(None, "run-1");
    let (c2, second) = run(None, "run-2");
    let (c3, single) = run(Some(1), "run-3");
    let failed = c1.iter().chain(&c2).chain(&c3).filter(|c| c.outcome.is_err()).count();
    let differing = |a: &BTreeMap<PathBuf, Vec<u8>>, b: &BTreeMap<PathBuf, Vec<u8>>, skip_snapshots: bool| -> Vec<String> {
        let keys: std::collections::BTreeSet<&PathBuf> = a.keys().chain(b.keys()).collect();
        keys.into_iter()
            .filter(|k| !(skip_snapshots && k.ends_with("config.toml")))
            .filter(|k| a.get(*k) != b.get(*k))
            .map(|k| k.display().to_string())
            .collect()
    };
    let rerun = differing(&first, &second, false);
    let by_jobs = differing(&first, &single, true);
    let checkpoints = first.keys().filter(|k| k.ends_with("checkpoint.json")).count();
    Outcome {
        pass: failed == 0 && rerun.is_empty() && by_jobs.is_empty() && checkpoints == 16 && first.contains_key(Path::new("matrix.csv")),
        detail: format!(
            "2 assets x 4 agents x 2 seeds: rerun compared {} files, {} differ; single-job run differs in {} non-snapshot files{}",
            first.len(),
            rerun.len(),
            by_jobs.len(),
            if rerun.is_empty() && by_jobs.is_empty() { String::new() } else { format!(": {}", [rerun, by_jobs].concat().join(", ")) }
        ),
    }
}

// 8. Protocol reproduction on BTC-USD / XRP-USD shaped fixtures.

fn protocol_start() -> chrono::NaiveDate {
    chrono::NaiveDate::from_ymd_opt(2015, 8, 30).unwrap()
}

fn protocol_days() -> usize {
    (chrono::NaiveDate::from_ymd_opt(2023, 8, 30).unwrap() - protocol_start()).num_days() as usize + 1
}

/// Geometric random walk with the given start price, daily drift and volatility.
fn crypto_walk(seed: u64, start: f64, drift: f64, vol: f64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = start;
    (0..n)
        .map(|_| {
            let v = p;
            let z: f64 = (0..12).map(|_| rng.gen_range(0.0..1.0)).sum::<f64>() - 6.0;
            p *= (drift + vol * z).exp();
            v
        })
        .collect()
}

fn protocol_fixtures(dir: &Path) -> [(String, PathBuf, Vec<f64>); 2] {
    let n = protocol_days();
    let btc = crypto_walk(2015, 230.0, 0.0017, 0.037, n);
    let xrp = crypto_walk(2016, 0.0075, 0.0018, 0.058, n);
    [
        ("BTC-USD".to_string(), write_fixture(dir, "BTC-USD", &btc, protocol_start()), btc),
        ("XRP-USD".to_string(), write_fixture(dir, "XRP-USD", &xrp, protocol_start()), xrp),
    ]
}

const PROTOCOL_EPISODES: usize = 20;

fn protocol(dir: &Path, fixtures: &[(String, PathBuf, Vec<f64>)]) -> Outcome {
    let started = Instant::now();
    let mut toml = String::from("out_dir = \"protocol\"\n[data]\ntrain_fraction = 0.9\n");
    for (id, path, _) in fixtures {
        toml.push_str(&format!("[[data.assets]]\nid = \"{id}\"\npath = \"{}\"\n", path.display()));
    }
    toml.push_str(&format!("[env]\ninitial_capital = 100000.0\n[agent]\nepisodes = {PROTOCOL_EPISODES}\n[experiment]\nagents = [\"dqn\", \"ddqn\", \"dueling\", \"a2c\"]\nseeds = [0]\n"));
    let config = dir.join("protocol.toml");
    std::fs::write(&config, toml).unwrap();
    let cells = commands::experiment(&ExperimentArgs { config, jobs: None, out: None }).unwrap();

    let n = protocol_days();
    let test_days = n - (n as f64 * 0.9).floor() as usize;
    let mut problems = Vec::new();
    let mut ruined = Vec::new();
    for c in &cells {
        if let Err(e) = &c.outcome {
            problems.push(format!("{} {}: {e}", c.asset, c.agent));
            continue;
        }
        let cell = dir.join("protocol").join(&c.asset).join(c.agent.name()).join("seed-0");
        let signals = std::fs::read_to_string(cell.join("signals.csv")).unwrap();
        let wealth = std::fs::read_to_string(cell.join("wealth.csv")).unwrap();
        let sig: Vec<&str> = signals.lines().collect();
        let wl: Vec<&str> = wealth.lines().collect();
        let first_test_day = protocol_start() + chrono::Days::new((n - test_days) as u64);
        let last_wealth: f64 = wl.last().and_then(|l| l.rsplit(',').next()).and_then(|v| v.parse().ok()).unwrap_or(f64::NAN);
        // A backtest ends early only through the 70% drawdown stop.
        let full = sig.len() == test_days && wl.len() == test_days + 1 && wl.last().unwrap().starts_with("2023-08-30,");
        let stopped = wl.len() < test_days + 1 && sig.len() == wl.len() - 1 && last_wealth <= 30_000.0;
        let ok = sig[0] == "date,action"
            && wl[0] == "date,wealth"
            && wl[1] == format!("{first_test_day},100000")
            && (full || stopped)
            && sig[1..].iter().all(|l| matches!(l.rsplit(',').next(), Some("-1" | "0" | "1")));
        if !ok {
            problems.push(format!("{} {}: unexpected report layout ({} wealth rows, last {last_wealth})", c.asset, c.agent, wl.len() - 1));
        } else if stopped {
            ruined.push(format!("{} {} after {} days", c.asset, c.agent, wl.len() - 1));
        }
    }
    Outcome {
        pass: problems.is_empty() && cells.len() == 8 && within(started, Duration::from_secs(7200)),
        detail: format!(
            "2 assets x 4 agents over {n} days ({test_days} test days, $100000, {PROTOCOL_EPISODES} episodes each): {} cells ok{}{}",
            cells.len() - problems.len(),
            if ruined.is_empty() { String::new() } else { format!(", drawdown stop in {}", ruined.join(", ")) },
            if problems.is_empty() { String::new() } else { format!("; {}", problems.join("; ")) }
        ),
    }
}

// 9. Baselines.

fn baseline(data: &Path, which: Baseline, cost: Option<f64>, span: Span) -> drltrade_core::backtest::BacktestReport {
    commands::backtest(&BacktestArgs { checkpoint: None, baseline: Some(which), data: data.to_path_buf(), config: None, seed: None, cost, span, out: None })
        .unwrap()
}

fn baselines(dir: &Path, fixtures: &[(String, PathBuf, Vec<f64>)]) -> Outcome {
    let toy: Vec<f64> = (0..TOY_DAYS).map(|t| 100.0 * 1.001f64.powi(t)).collect();
    let mut sets: Vec<(String, PathBuf, Vec<f64>)> = fixtures.to_vec();
    sets.push(("TOY".into(), write_fixture(dir, "TOY", &toy, default_start()), toy));
    for seed in 0..5 {
        let p = random_prices(500 + seed, 700);
        sets.push((format!("RW{seed}"), write_fixture(dir, &format!("RW{seed}"), &p, default_start()), p));
    }
    let (mut flat_nonzero, mut worst_long, mut checked) = (0usize, 0.0f64, 0usize);
    for (_, path, prices) in &sets {
        for span in [Span::Test, Span::All] {
            let flat = baseline(path, Baseline::Flat, None, span);
            flat_nonzero += usize::from(flat.summary.total_return != 0.0 || flat.summary.final_wealth != 100_000.0);
            let long = baseline(path, Baseline::Long, Some(0.0), span);
            let first = match span {
                Span::Test => (prices.len() as f64 * 0.9).floor() as usize,
                Span::All => 315 + 59,
            };
            let expected = prices[prices.len() - 1] / prices[first] - 1.0;
            worst_long = worst_long.max((long.summary.total_return - expected).abs() / expected.abs().max(1.0));
            checked += 1;
        }
    }
    Outcome {
        pass: flat_nonzero == 0 && worst_long <= 1e-12,
        detail: format!(
            "{checked} series/spans: always-flat nonzero returns {flat_nonzero}; always-long at C=0 vs p_end/p_start - 1 worst relative gap {worst_long:.1e}"
        ),
    }
}

/// Comma-separated criterion ids in `ACCEPTANCE_ONLY` restrict the run; the
/// rest are reported as SKIP.
fn selected(id: &str) -> bool {
    match std::env::var("ACCEPTANCE_ONLY") {
        Ok(list) => list.split(',').any(|x| x.trim() == id),
        Err(_) => true,
    }
}

#[test]
fn acceptance_criteria() {
    let dir = tempfile::tempdir().unwrap();
    let fixtures = protocol_fixtures(dir.path());
    let criteria: Vec<(&str, &str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("1", "feature oracles", Box::new(feature_oracles)),
        ("2", "gradient suite", Box::new(gradient_suite)),
        ("3", "reward and wealth accounting", Box::new(reward_accounting)),
        ("4a", "ddqn collapses to dqn", Box::new(ddqn_collapse)),
        ("4b", "overestimation ordering", Box::new(overestimation)),
        ("5", "toy-market convergence", Box::new(toy_convergence)),
        ("6", "dueling identifiability", Box::new(dueling_identifiability)),
        ("7", "end-to-end determinism", Box::new(determinism)),
        ("8", "protocol reproduction", Box::new(|| protocol(dir.path(), &fixtures))),
        ("9", "baseline sanity", Box::new(|| baselines(dir.path(), &fixtures))),
    ];
    let mut failed = Vec::new();
    for (id, title, run) in &criteria {
        if !selected(id) {
            report_line(&format!("SKIP [{id}] {title}"));
            continue;
        }
        let started = Instant::now();
        if !report(id, title, started, run()) {
            failed.push(*id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
