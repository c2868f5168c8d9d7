//! Acceptance suite. Runs every exit criterion at its pinned tolerance and
//! prints one `[PASS]`/`[FAIL]` line each; exits nonzero if any fails.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use u2usim::agents::{greedy_act, AcLearner, AcParams, AgentKind, DqnLearner, DqnParams, QTable, TabularParams};
use u2usim::channel::{link_budgets, ChannelParams, RicianFading, UplinkTx, RHO_U_LEVELS};
use u2usim::env::{Env, EnvConfig, HeadLayout, JointAction};
use u2usim::harness::{compare_agents, ComparisonRow, ExperimentConfig};
use u2usim::nn::Mlp;
use u2usim::scenario::{Move, UavPose};
use u2usim::video_qoe::{frame_tx_time, qoe_reward, quality, slot_delay, QoeWeights, ResolutionLadder};

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Verdict { pass, detail: detail.into() }
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    (a - b).abs() / a.abs().max(b.abs())
}

// ---------------------------------------------------------------------------
// 1. channel against a scalar reimplementation

/// Linear-domain recomputation of one UE's rate with fading at 0 dB.
fn oracle_rate(bs: [f64; 3], ues: &[([f64; 3], f64)], k: usize, p: &ChannelParams, floor: f64) -> f64 {
    let rx_mw = |pos: [f64; 3], p_max_dbm: f64| {
        let d = ((pos[0] - bs[0]).powi(2) + (pos[1] - bs[1]).powi(2) + (pos[2] - bs[2]).powi(2))
            .sqrt()
            .max(floor);
        let free_space = 4.0 * PI * p.carrier_hz * d / p.light_speed;
        let pathloss_db = 10.0 * (free_space * free_space * 10f64.powf(p.eta_los_db / 10.0)).log10();
        let fpc_dbm = 10.0 * p.bandwidth_hz.log10() + p.rho_u * pathloss_db;
        let tx_mw = 10f64.powf(p_max_dbm.min(fpc_dbm) / 10.0);
        tx_mw * 10f64.powf(p.gain_db / 10.0) / d.powf(p.alpha)
    };
    let own = rx_mw(ues[k].0, ues[k].1);
    let interference: f64 = ues.iter().enumerate().filter(|(m, _)| *m != k).map(|(_, u)| rx_mw(u.0, u.1)).sum();
    let noise = 10f64.powf(p.noise_dbm / 10.0);
    p.bandwidth_hz * (1.0 + own / (noise + interference)).ln() / 2f64.ln()
}

fn channel_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    let mut links = 0;
    for _ in 0..1000 {
        let p = ChannelParams {
            carrier_hz: rng.random_range(0.7e9..6e9),
            eta_los_db: rng.random_range(0.0..5.0),
            alpha: rng.random_range(1.5..4.0),
            gain_db: rng.random_range(-45.0..-10.0),
            bandwidth_hz: rng.random_range(1e5..2e7),
            noise_dbm: rng.random_range(-120.0..-80.0),
            rho_u: RHO_U_LEVELS[rng.random_range(0..RHO_U_LEVELS.len())],
            ..ChannelParams::default()
        };
        let floor = 1.0;
        let point = |rng: &mut ChaCha8Rng| [rng.random_range(0.0..5000.0), rng.random_range(0.0..5000.0), rng.random_range(0.0..100.0)];
        let bs = point(&mut rng);
        let n = rng.random_range(1..=8);
        let ues: Vec<([f64; 3], f64)> = (0..n)
            .map(|i| {
                // an occasional UE right on top of the BS exercises the distance floor
                let pos = if i == 0 && rng.random_bool(0.05) { bs } else { point(&mut rng) };
                (pos, [23.0, 25.0, 30.0][rng.random_range(0..3)])
            })
            .collect();
        let tx: Vec<UplinkTx> = ues
            .iter()
            .map(|(pos, pmax)| UplinkTx {
                pose: UavPose::new(pos[0], pos[1], pos[2]),
                p_max_dbm: *pmax,
            })
            .collect();
        let budgets = match link_budgets(&UavPose::new(bs[0], bs[1], bs[2]), &tx, &vec![0.0; n], &p, floor) {
            Ok(b) => b,
            Err(e) => return Verdict::new(false, format!("pipeline error: {e}")),
        };
        for (k, b) in budgets.iter().enumerate() {
            worst = worst.max(rel_err(b.rate_bps, oracle_rate(bs, &ues, k, &p, floor)));
            links += 1;
        }
    }
    Verdict::new(worst < 1e-10, format!("{links} links, max relative error {worst:.3e} (< 1e-10)"))
}

// ---------------------------------------------------------------------------
// 2. Rician amplitudes against the closed-form density

/// `I0(x) exp(-x)` by its power series.
fn bessel_i0_scaled(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = (-x).exp();
    let mut sum = term;
    let mut k = 1.0;
    loop {
        term *= q / (k * k);
        sum += term;
        if term < 1e-17 * sum && k > x {
            return sum;
        }
        k += 1.0;
    }
}

/// Rician CDF tabulated by composite Simpson integration of the density.
struct RicianCdf {
    step: f64,
    values: Vec<f64>,
}

impl RicianCdf {
    fn new(kappa: f64) -> Self {
        let nu = (kappa / (kappa + 1.0)).sqrt();
        let s2 = 0.5 / (kappa + 1.0);
        let pdf = |r: f64| {
            let x = r * nu / s2;
            r / s2 * (-(r - nu) * (r - nu) / (2.0 * s2)).exp() * bessel_i0_scaled(x)
        };
        let r_max = nu + 14.0 * s2.sqrt();
        let panels = 20_000;
        let h = r_max / (2 * panels) as f64;
        let mut values = Vec::with_capacity(panels + 1);
        values.push(0.0);
        let mut acc = 0.0;
        for i in 0..panels {
            let a = 2.0 * i as f64 * h;
            acc += h / 3.0 * (pdf(a) + 4.0 * pdf(a + h) + pdf(a + 2.0 * h));
            values.push(acc);
        }
        RicianCdf { step: 2.0 * h, values }
    }

    fn total(&self) -> f64 {
        *self.values.last().unwrap()
    }

    fn at(&self, r: f64) -> f64 {
        let pos = r / self.step;
        let i = pos.floor() as usize;
        if i + 1 >= self.values.len() {
            return self.total();
        }
        let t = pos - i as f64;
        self.values[i] * (1.0 - t) + self.values[i + 1] * t
    }
}

fn rician_sampler() -> Verdict {
    let n = 100_000;
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, kappa) in [0.0, 1.0, 4.0, 10.0].into_iter().enumerate() {
        let fading = match RicianFading::new(kappa) {
            Ok(f) => f,
            Err(e) => return Verdict::new(false, format!("kappa {kappa}: {e}")),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(100 + i as u64);
        let mut amps: Vec<f64> = (0..n).map(|_| fading.sample(&mut rng).amplitude).collect();
        let power = amps.iter().map(|a| a * a).sum::<f64>() / n as f64;
        amps.sort_by(f64::total_cmp);
        let cdf = RicianCdf::new(kappa);
        let ks = amps
            .iter()
            .enumerate()
            .map(|(j, &a)| {
                let f = cdf.at(a);
                (f - j as f64 / n as f64).max((j + 1) as f64 / n as f64 - f)
            })
            .fold(0.0, f64::max);
        let ok = ks < 0.01 && (power - 1.0).abs() < 0.01 && (cdf.total() - 1.0).abs() < 1e-9;
        pass &= ok;
        parts.push(format!("k={kappa}: KS {ks:.4}, power {power:.4}"));
    }
    Verdict::new(pass, parts.join("; "))
}

// ---------------------------------------------------------------------------
// 3. backprop against central differences on the agents' networks

/// ReLU on/off pattern of every hidden unit, by an independent forward pass.
fn relu_pattern(net: &Mlp, x: &[f64]) -> Vec<bool> {
    let mut cur = x.to_vec();
    let mut pattern = Vec::new();
    let layers = net.layers();
    for (l, layer) in layers.iter().enumerate() {
        let next: Vec<f64> = (0..layer.outputs)
            .map(|o| {
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                layer.bias[o] + row.iter().zip(&cur).map(|(w, v)| w * v).sum::<f64>()
            })
            .collect();
        if l + 1 < layers.len() {
            pattern.extend(next.iter().map(|&z| z > 0.0));
            cur = next.into_iter().map(|z| z.max(0.0)).collect();
        }
    }
    pattern
}

fn agent_shapes() -> Vec<(String, Vec<usize>)> {
    let mut shapes = Vec::new();
    for (name, env) in [("default", EnvConfig::default()), ("toy", ExperimentConfig::toy(AgentKind::Ac).env)] {
        let layout = HeadLayout::from_config(&env);
        let dqn = DqnLearner::new(layout.state_len(), layout.head_sizes(), DqnParams::default(), 0).expect("dqn");
        let ac = AcLearner::new(layout.state_len(), layout.head_sizes(), AcParams::default(), 0).expect("ac");
        shapes.push((format!("{name} dqn"), dqn.online().sizes()));
        shapes.push((format!("{name} actor"), ac.actor().sizes()));
        shapes.push((format!("{name} critic"), ac.critic().sizes()));
    }
    shapes
}

fn gradient_check() -> Verdict {
    let h = 1e-5;
    let shapes = agent_shapes();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    let (mut checked, mut skipped) = (0usize, 0usize);
    for trial in 0..100 {
        let sizes = &shapes[trial % shapes.len()].1;
        let mut net = Mlp::new(sizes, &mut rng).expect("net");
        for layer in net.layers_mut() {
            layer.bias.iter_mut().for_each(|b| *b = rng.random_range(-0.1..0.1));
        }
        let x: Vec<f64> = (0..net.input_len()).map(|_| rng.random::<f64>()).collect();
        let upstream: Vec<f64> = (0..net.output_len()).map(|_| rng.sample(StandardNormal)).collect();
        let loss = |n: &Mlp| n.predict(&x).expect("predict").iter().zip(&upstream).map(|(y, u)| y * u).sum::<f64>();
        let grads = net.backward(&net.forward(&x).expect("forward"), &upstream).expect("backward");
        let base_pattern = relu_pattern(&net, &x);

        let mut offsets = vec![0];
        for l in net.layers() {
            offsets.push(offsets.last().unwrap() + l.weights.len() + l.bias.len());
        }
        for _ in 0..24 {
            let l = rng.random_range(0..net.layers().len());
            let idx = rng.random_range(offsets[l]..offsets[l + 1]);
            let theta = net.param(idx);
            net.set_param(idx, theta + h);
            let (up, up_pattern) = (loss(&net), relu_pattern(&net, &x));
            net.set_param(idx, theta - h);
            let (down, down_pattern) = (loss(&net), relu_pattern(&net, &x));
            net.set_param(idx, theta);
            if up_pattern != base_pattern || down_pattern != base_pattern {
                // the difference quotient straddles a kink
                skipped += 1;
                continue;
            }
            let numeric = (up - down) / (2.0 * h);
            let analytic = grads.get(idx);
            let err = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(err);
            checked += 1;
        }
    }
    let pass = worst < 1e-4 && skipped * 20 <= checked;
    Verdict::new(
        pass,
        format!("{checked} parameters over 100 nets, max relative error {worst:.3e} (< 1e-4), {skipped} skipped at ReLU kinks"),
    )
}

// ---------------------------------------------------------------------------
// 4. tabular Q-learning against value iteration

/// Deterministic finite MDP: `next(s, a)`, `reward(s, a)`, terminal flags.
struct Mdp {
    states: usize,
    actions: usize,
    next: fn(usize, usize) -> usize,
    reward: fn(usize, usize) -> f64,
    terminal: fn(usize) -> bool,
}

impl Mdp {
    fn value_iteration(&self, gamma: f64) -> Vec<usize> {
        let mut v = vec![0.0; self.states];
        for _ in 0..10_000 {
            let nv: Vec<f64> = (0..self.states)
                .map(|s| if (self.terminal)(s) { 0.0 } else { (0..self.actions).map(|a| self.q(&v, s, a, gamma)).fold(f64::MIN, f64::max) })
                .collect();
            let delta = nv.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            v = nv;
            if delta < 1e-14 {
                break;
            }
        }
        (0..self.states)
            .map(|s| {
                (0..self.actions)
                    .max_by(|&a, &b| self.q(&v, s, a, gamma).total_cmp(&self.q(&v, s, b, gamma)))
                    .unwrap()
            })
            .collect()
    }

    fn q(&self, v: &[f64], s: usize, a: usize, gamma: f64) -> f64 {
        let n = (self.next)(s, a);
        (self.reward)(s, a) + if (self.terminal)(n) { 0.0 } else { gamma * v[n] }
    }
}

fn q_learn(mdp: &Mdp, steps: usize, seed: u64) -> QTable<usize> {
    let params = TabularParams::default();
    let mut table = QTable::new(vec![mdp.actions], params.alpha, params.gamma);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let starts: Vec<usize> = (0..mdp.states).filter(|&s| !(mdp.terminal)(s)).collect();
    let mut s = starts[0];
    for _ in 0..steps {
        let a = table.act(&s, &[true], 1.0, &mut rng)[0];
        let n = (mdp.next)(s, a);
        let done = (mdp.terminal)(n);
        table.update(&s, &[a], &[true], (mdp.reward)(s, a), &n, done);
        s = if done { starts[rng.random_range(0..starts.len())] } else { n };
    }
    table
}

fn grid_next(s: usize, a: usize) -> usize {
    let (r, c) = (s / 2, s % 2);
    let (r, c) = match a {
        0 => (r.saturating_sub(1), c),
        1 => ((r + 1).min(1), c),
        2 => (r, c.saturating_sub(1)),
        _ => (r, (c + 1).min(1)),
    };
    2 * r + c
}

fn tabular_vs_value_iteration() -> Verdict {
    let gamma = TabularParams::default().gamma;
    // action 0 stays, 1 switches; staying in state 1 pays most
    let two_state = Mdp {
        states: 2,
        actions: 2,
        next: |s, a| if a == 0 { s } else { 1 - s },
        reward: |s, a| match (s, a) {
            (0, 0) => 0.5,
            (1, 0) => 2.0,
            _ => 0.0,
        },
        terminal: |_| false,
    };
    // 2x2 grid, cell = 2*row + col; actions up/down/left/right; cell 1 is a
    // trap (-1), cell 3 the goal (+1), both terminal
    let grid = Mdp {
        states: 4,
        actions: 4,
        next: grid_next,
        reward: |s, a| match grid_next(s, a) {
            1 => -1.0,
            3 => 1.0,
            _ => 0.0,
        },
        terminal: |s| s == 1 || s == 3,
    };
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, mdp) in [("2-state", &two_state), ("2x2 grid", &grid)] {
        let oracle = mdp.value_iteration(gamma);
        let table = q_learn(mdp, 10_000, 9);
        let learned: Vec<usize> = (0..mdp.states)
            .map(|s| {
                let row = table.row(&s);
                (0..mdp.actions).max_by(|&a, &b| row[a].total_cmp(&row[b]).then(b.cmp(&a))).unwrap()
            })
            .collect();
        let decisive: Vec<usize> = (0..mdp.states).filter(|&s| !(mdp.terminal)(s)).collect();
        let ok = decisive.iter().all(|&s| learned[s] == oracle[s]);
        pass &= ok;
        let show: Vec<String> = decisive.iter().map(|&s| format!("s{s}:{}/{}", learned[s], oracle[s])).collect();
        parts.push(format!("{name} learned/oracle {}", show.join(" ")));
    }
    Verdict::new(pass, format!("{} after 10^4 steps", parts.join("; ")))
}

// ---------------------------------------------------------------------------
// 5. actor-critic on a two-armed bandit

fn ac_bandit() -> Verdict {
    let s = [1.0];
    let mut probs = Vec::new();
    for seed in 0..5 {
        let mut ac = AcLearner::new(1, vec![2], AcParams::default(), seed).expect("ac");
        for _ in 0..2000 {
            let a = ac.select(&s, &[true], false).expect("select");
            let r = if a[0] == 1 { 1.0 } else { 0.0 };
            if let Err(e) = ac.learn(&s, &a, &[true], r, &s, true) {
                return Verdict::new(false, format!("seed {seed}: {e}"));
            }
        }
        probs.push(ac.policy(&s).expect("policy")[0][1]);
    }
    let pass = probs.iter().all(|&p| p > 0.95);
    let show: Vec<String> = probs.iter().map(|p| format!("{p:.4}")).collect();
    Verdict::new(pass, format!("better-arm probability per seed [{}] (> 0.95)", show.join(", ")))
}

// ---------------------------------------------------------------------------
// 6. greedy coordinate ascent against joint enumeration

fn single_ue_env() -> EnvConfig {
    let mut env = ExperimentConfig::toy(AgentKind::Greedy).env;
    env.scenario.max_areas = 1;
    env.scenario.ues_per_area = 1;
    env.scenario.lambda_a = 0.0;
    env
}

fn brute_force_best(env: &Env) -> f64 {
    let res = env.config().ladder.len();
    let pow = env.config().power_levels_dbm.len();
    let with_ue = env.active_ues() > 0;
    let mut best = f64::NEG_INFINITY;
    for bs in Move::ALL {
        if !with_ue {
            let a = JointAction { bs_move: bs, ue_moves: vec![], area_resolutions: vec![], ue_power_levels: vec![] };
            best = best.max(env.preview_reward(&a).expect("preview"));
            continue;
        }
        for ue in Move::ALL {
            for r in 0..res {
                for p in 0..pow {
                    let a = JointAction {
                        bs_move: bs,
                        ue_moves: vec![ue],
                        area_resolutions: vec![r],
                        ue_power_levels: vec![p],
                    };
                    best = best.max(env.preview_reward(&a).expect("preview"));
                }
            }
        }
    }
    best
}

fn greedy_vs_brute_force() -> Verdict {
    let cfg = single_ue_env();
    let mut env = match Env::new(cfg) {
        Ok(e) => e,
        Err(e) => return Verdict::new(false, e.to_string()),
    };
    let layout = env.layout().clone();
    let sizes = layout.head_sizes();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut agree = 0;
    let trials = 1000;
    for t in 0..trials {
        env.reset(t as u64);
        // wander to a random state
        for _ in 0..rng.random_range(0..30) {
            let choices: Vec<usize> = sizes.iter().map(|&n| rng.random_range(0..n)).collect();
            let a = JointAction::from_head_choices(&layout, env.active_areas(), &choices).expect("action");
            env.step(&a).expect("step");
        }
        let greedy = greedy_act(&env).expect("greedy");
        let got = env.preview_reward(&greedy).expect("preview");
        let best = brute_force_best(&env);
        if got >= best - 1e-12 * best.abs().max(1.0) {
            agree += 1;
        }
    }
    let share = agree as f64 / trials as f64;
    Verdict::new(share >= 0.99, format!("{agree}/{trials} states reach the joint optimum ({:.1}% >= 99%)", 100.0 * share))
}

// ---------------------------------------------------------------------------
// 8. rates below the ladder minimum are punished

fn negative_reward_rule() -> Verdict {
    let ladder = ResolutionLadder::default();
    let w = QoeWeights::default();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut violations = 0;
    let trials = 2000;
    for _ in 0..trials {
        let areas = rng.random_range(1..=5);
        let k = rng.random_range(1..=4);
        let res: Vec<usize> = (0..areas).map(|_| rng.random_range(0..ladder.len())).collect();
        let min_rate = |ue: usize| ladder.get(res[ue / k]).unwrap().min_rate_bps;
        let n = areas * k;
        let rates: Vec<f64> = (0..n).map(|u| min_rate(u) * rng.random_range(1.0..20.0)).collect();
        let prev: Vec<f64> = (0..n).map(|u| quality(&ladder, res[u / k], rates[u]).unwrap()).collect();
        let reward_of = |rates: &[f64]| {
            let times: Vec<f64> = (0..n).map(|u| frame_tx_time(&ladder, res[u / k], rates[u], &w).unwrap()).collect();
            let pairs: Vec<(f64, f64)> = (0..n).map(|u| (quality(&ladder, res[u / k], rates[u]).unwrap(), prev[u])).collect();
            qoe_reward(&pairs, slot_delay(&times, &w), &w, areas, k).reward
        };
        let victim = rng.random_range(0..n);
        let mut parity = rates.clone();
        parity[victim] = min_rate(victim);
        let mut forced = rates.clone();
        forced[victim] = min_rate(victim) * rng.random_range(0.01..0.999);
        let (base, at_min, below) = (reward_of(&rates), reward_of(&parity), reward_of(&forced));
        if !(below < at_min && below < base) {
            violations += 1;
        }
    }
    let mut single_bad = 0;
    for _ in 0..trials {
        let r = rng.random_range(0..ladder.len());
        let rate = ladder.get(r).unwrap().min_rate_bps * rng.random_range(0.01..0.999);
        let q = quality(&ladder, r, rate).unwrap();
        let prev = if rng.random_bool(0.5) { q } else { rng.random_range(-5.0..5.0) };
        let reward = qoe_reward(&[(q, prev)], 0.0, &w, 1, 1).reward;
        if !(reward < 0.0) {
            single_bad += 1;
        }
    }
    Verdict::new(
        violations == 0 && single_bad == 0,
        format!("{violations}/{trials} forced-below-minimum rewards not strictly lower; {single_bad}/{trials} single-UE rewards not negative"),
    )
}

// ---------------------------------------------------------------------------
// 7, 9, 10. toy comparison

fn toy_configs() -> Vec<(String, ExperimentConfig)> {
    [AgentKind::Greedy, AgentKind::Dqn, AgentKind::Ac]
        .into_iter()
        .map(|k| (k.to_string(), ExperimentConfig::toy(k)))
        .collect()
}

fn tti_tables(root: &Path) -> std::io::Result<HashMap<String, Vec<u8>>> {
    let mut out = HashMap::new();
    for agent in fs::read_dir(root)? {
        let agent = agent?;
        if !agent.file_type()?.is_dir() {
            continue;
        }
        for run in fs::read_dir(agent.path())? {
            let run = run?;
            let name = format!("{}/{}", agent.file_name().to_string_lossy(), run.file_name().to_string_lossy());
            out.insert(name, fs::read(run.path().join("ttis.csv"))?);
        }
    }
    Ok(out)
}

fn row<'a>(rows: &'a [ComparisonRow], label: &str) -> &'a ComparisonRow {
    rows.iter().find(|r| r.label == label).expect("compared agent")
}

fn ordering(rows: &[ComparisonRow]) -> Verdict {
    let (g, d, a) = (row(rows, "greedy"), row(rows, "dqn"), row(rows, "ac"));
    let pooled_se = (a.qoe.std_error().powi(2) + g.qoe.std_error().powi(2)).sqrt();
    let pass = a.qoe.mean >= d.qoe.mean && d.qoe.mean >= g.qoe.mean && a.qoe.mean - g.qoe.mean > pooled_se;
    Verdict::new(
        pass,
        format!(
            "eval QoE ac {:.4} (sd {:.4}), dqn {:.4} (sd {:.4}), greedy {:.4} (sd {:.4}); ac-greedy {:.4} vs pooled SE {:.4}",
            a.qoe.mean,
            a.qoe.std,
            d.qoe.mean,
            d.qoe.std,
            g.qoe.mean,
            g.qoe.std,
            a.qoe.mean - g.qoe.mean,
            pooled_se
        ),
    )
}

fn power_trend(rows: &[ComparisonRow]) -> Verdict {
    let (g, a) = (row(rows, "greedy"), row(rows, "ac"));
    let pairs: Vec<(f64, f64)> = a
        .per_seed
        .iter()
        .zip(&g.per_seed)
        .map(|(x, y)| (x.mean_power_dbm_all_areas, y.mean_power_dbm_all_areas))
        .collect();
    // one-sided sign test over 5 seeds: p = 0.5^5 < 0.05 only if every seed agrees
    let favourable = pairs.iter().filter(|(ac, greedy)| ac <= greedy).count();
    let show: Vec<String> = pairs.iter().map(|(x, y)| format!("{x:.2}/{y:.2}")).collect();
    Verdict::new(
        favourable == pairs.len() && !pairs.is_empty(),
        format!("ac/greedy dBm with every area burning, per seed [{}]; {favourable}/{} seeds ac <= greedy", show.join(", "), pairs.len()),
    )
}

fn toy_comparison() -> [Verdict; 3] {
    let configs = toy_configs();
    let seeds: Vec<u64> = (0..5).collect();
    let attempt = || -> Result<(Vec<ComparisonRow>, bool, usize), String> {
        let first = tempfile::tempdir().map_err(|e| e.to_string())?;
        let second = tempfile::tempdir().map_err(|e| e.to_string())?;
        let rows = compare_agents(&configs, &seeds, Some(first.path())).map_err(|e| e.to_string())?;
        compare_agents(&configs, &seeds, Some(second.path())).map_err(|e| e.to_string())?;
        let a = tti_tables(first.path()).map_err(|e| e.to_string())?;
        let b = tti_tables(second.path()).map_err(|e| e.to_string())?;
        let identical = a.len() == configs.len() * seeds.len() && a == b;
        Ok((rows, identical, a.len()))
    };
    match attempt() {
        Ok((rows, identical, files)) => [
            ordering(&rows),
            power_trend(&rows),
            Verdict::new(identical, format!("{files} per-TTI tables rerun, byte-identical: {identical}")),
        ],
        Err(e) => [
            Verdict::new(false, format!("comparison failed: {e}")),
            Verdict::new(false, "comparison failed"),
            Verdict::new(false, "comparison failed"),
        ],
    }
}

// ---------------------------------------------------------------------------

fn report(id: u32, name: &str, limit: Duration, elapsed: Duration, v: Verdict) -> bool {
    let in_time = elapsed <= limit;
    let pass = v.pass && in_time;
    let time = if in_time {
        format!("{:.2}s", elapsed.as_secs_f64())
    } else {
        format!("{:.2}s, over the {:.0}s limit", elapsed.as_secs_f64(), limit.as_secs_f64())
    };
    println!("[{}] {id:>2}. {name}: {} ({time})", if pass { "PASS" } else { "FAIL" }, v.detail);
    pass
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

fn main() -> ExitCode {
    let secs = Duration::from_secs_f64;
    let mut all = true;

    let quick: [(u32, &str, f64, fn() -> Verdict); 6] = [
        (1, "channel closed-form oracle", 1.0, channel_oracle),
        (2, "Rician sampler", 10.0, rician_sampler),
        (3, "gradient check", 30.0, gradient_check),
        (4, "tabular Q vs value iteration", 5.0, tabular_vs_value_iteration),
        (5, "actor-critic bandit", 5.0, ac_bandit),
        (6, "greedy vs brute force", 30.0, greedy_vs_brute_force),
    ];
    for (id, name, limit, f) in quick {
        let (v, t) = timed(f);
        all &= report(id, name, secs(limit), t, v);
    }

    let (v, t) = timed(negative_reward_rule);
    let rule = report(8, "negative-reward rule", secs(1.0), t, v);

    let ([order, power, determinism], t) = timed(toy_comparison);
    let budget = secs(15.0 * 60.0);
    all &= report(7, "toy ordering ac >= dqn >= greedy", budget, t, order);
    all &= rule;
    all &= report(9, "power under full load", budget, t, power);
    all &= report(10, "determinism", budget, t, determinism);

    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
