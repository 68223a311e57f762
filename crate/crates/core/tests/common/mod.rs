//! Checks shared by the integration tests and the acceptance runner. Each returns a short
//! description of what it measured, or the reason it failed.
#![allow(dead_code)]

use optexec::ddql::{
    compute_targets, explore_action, train, Agent, FeatureMode, FeatureScaler, Observation,
    Policy, PriceBounds, TrainConfig, Transition,
};
use optexec::harness::{run_benchmark, ExperimentConfig, Profile, ScenarioKind, Strategy};
use optexec::market_sim::{
    cir_trajectory, constant_trajectory, correlated_normals, expected_cost, linear_trajectory,
    simulate_episode, CirImpactSpec, ImpactModel, ImpactTrajectory, LinearImpactSpec,
    MarketParams, Scenario, CIR_SUBSTEPS,
};
use optexec::neural::{NetConfig, QNetwork, TrainCache};
use optexec::strategies::{largest_remainder, optimal_deterministic_schedule, twap};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($arg:tt)*) => {
        if !$cond {
            return Err(format!($($arg)*));
        }
    };
}

fn ok<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn constant() -> ImpactTrajectory {
    constant_trajectory(0.001, 0.002, 10).unwrap()
}

pub fn increasing() -> ImpactTrajectory {
    linear_trajectory(&LinearImpactSpec::INCREASING, 10).unwrap()
}

pub fn decreasing() -> ImpactTrajectory {
    linear_trajectory(&LinearImpactSpec::DECREASING, 10).unwrap()
}

fn scenario(impact: ImpactModel) -> Scenario {
    Scenario::new(MarketParams::default(), impact).unwrap()
}

pub fn constant_scenario() -> Scenario {
    scenario(ImpactModel::Constant {
        kappa: 0.001,
        alpha: 0.002,
    })
}

/// Uniformly weighted integer split of `q0` into `n` parts.
pub fn random_shares<R: Rng>(q0: u32, n: usize, rng: &mut R) -> Vec<u32> {
    let w: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let total: f64 = w.iter().sum();
    let scaled: Vec<f64> = w.iter().map(|x| x / total * f64::from(q0)).collect();
    largest_remainder(&scaled, q0)
}

/// Replays a fixed schedule; states carry the step index.
fn schedule_policy(shares: &[u32]) -> impl FnMut(&optexec::market_sim::EpisodeState, &ImpactTrajectory) -> optexec::Result<u32> + '_ {
    move |s, _| Ok(shares[s.t].min(s.q))
}

/// Exhaustive minimum of `expected_cost` over every non-negative integer split of `q0` into
/// `traj.len()` parts, with incremental cost accumulation.
pub fn brute_force_min(traj: &ImpactTrajectory, q0: u32) -> (f64, Vec<u32>, u64) {
    fn go(
        t: usize,
        left: u32,
        cost: f64,
        permanent: f64,
        traj: &ImpactTrajectory,
        cur: &mut Vec<u32>,
        best: &mut (f64, Vec<u32>, u64),
    ) {
        let n = traj.len();
        if t + 1 == n {
            let v = f64::from(left);
            let c = cost + traj.alpha_at(t) * v * v + v * permanent;
            best.2 += 1;
            if c < best.0 {
                cur.push(left);
                best.0 = c;
                best.1 = cur.clone();
                cur.pop();
            }
            return;
        }
        for v in 0..=left {
            let x = f64::from(v);
            cur.push(v);
            go(
                t + 1,
                left - v,
                cost + traj.alpha_at(t) * x * x + x * permanent,
                permanent + traj.kappa_at(t) * x,
                traj,
                cur,
                best,
            );
            cur.pop();
        }
    }
    let mut best = (f64::INFINITY, Vec::new(), 0);
    go(0, q0, 0.0, 0.0, traj, &mut Vec::new(), &mut best);
    best
}

pub fn twap_analytic_cost() -> Check {
    let sched = ok(twap(20, 10))?;
    let cost = ok(expected_cost(sched.volumes(), &constant()))?;
    ensure!((cost - 0.26).abs() < 1e-12, "TWAP expected cost {cost}, want 0.26");
    let outcomes = ok(run_benchmark(&Strategy::Twap, &constant_scenario(), 5000, 7))?;
    let is: Vec<f64> = outcomes.iter().map(|o| o.shortfall).collect();
    let (mean, _) = mean_std(&is);
    ensure!((0.25..=0.27).contains(&mean), "simulated TWAP mean IS {mean} outside [0.25, 0.27]");
    Ok(format!("expected cost {cost:.12}, simulated mean IS {mean:.5} over 5000 episodes"))
}

pub fn qp_equals_twap_on_constant() -> Check {
    let qp = ok(optimal_deterministic_schedule(&constant(), 20.0))?;
    let dev = qp.volumes().iter().map(|v| (v - 2.0).abs()).fold(0.0, f64::max);
    ensure!(dev <= 1e-9, "QP deviates from TWAP by {dev:e}");
    Ok(format!("max deviation {dev:.2e}"))
}

/// Rounded QP cost versus the exhaustive integer optimum.
pub fn qp_matches_oracle(traj: &ImpactTrajectory, label: &str) -> Check {
    let start = std::time::Instant::now();
    let (oracle, best, count) = brute_force_min(traj, 20);
    let elapsed = start.elapsed();
    ensure!(count == 10_015_005, "{label}: enumerated {count} splits");
    ensure!(elapsed.as_secs() <= 600, "{label}: oracle took {elapsed:?}");
    let qp = ok(optimal_deterministic_schedule(traj, 20.0))?;
    let shares: Vec<f64> = qp.to_shares().iter().map(|&v| f64::from(v)).collect();
    let rounded = ok(expected_cost(&shares, traj))?;
    let gap = (rounded - oracle) / oracle;
    ensure!(
        (-1e-12..=0.02).contains(&gap),
        "{label}: rounded QP {rounded:.6} vs oracle {oracle:.6} (gap {:.3}%)",
        100.0 * gap
    );
    Ok(format!(
        "{label}: rounded QP {rounded:.5}, oracle {oracle:.5} {best:?}, gap {:.3}%, oracle {:.1?}",
        100.0 * gap,
        elapsed
    ))
}

/// QP beats TWAP by at least `min_saving` (fraction), both continuous and rounded.
pub fn qp_dominates_twap(traj: &ImpactTrajectory, min_saving: f64, label: &str) -> Check {
    let tw = ok(expected_cost(ok(twap(20, 10))?.volumes(), traj))?;
    let qp = ok(optimal_deterministic_schedule(traj, 20.0))?;
    let cont = ok(expected_cost(qp.volumes(), traj))?;
    let shares: Vec<f64> = qp.to_shares().iter().map(|&v| f64::from(v)).collect();
    let rounded = ok(expected_cost(&shares, traj))?;
    for (name, c) in [("continuous", cont), ("rounded", rounded)] {
        ensure!(c <= tw, "{label}: {name} QP {c} above TWAP {tw}");
        let saving = 1.0 - c / tw;
        ensure!(
            saving >= min_saving,
            "{label}: {name} QP saves {:.1}% (< {:.0}%)",
            100.0 * saving,
            100.0 * min_saving
        );
    }
    Ok(format!(
        "{label}: TWAP {tw:.4}, QP {cont:.4} ({:.1}% saved), rounded {rounded:.4} ({:.1}% saved)",
        100.0 * (1.0 - cont / tw),
        100.0 * (1.0 - rounded / tw)
    ))
}

pub fn gradient_check() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut net = ok(QNetwork::new(NetConfig::q_network(4), &mut rng))?;
    for p in net.params_mut() {
        *p += rng.random_range(-0.05..0.05);
    }
    let inputs: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
    let targets = [0.3, -0.7, 1.1, 0.05];
    let mut cache = TrainCache::default();
    let mut grad = Vec::new();
    ok(net.loss_and_gradient(&inputs, &targets, &mut cache, &mut grad))?;
    let h = 1e-5;
    let mut scratch = Vec::new();
    let mut worst: f64 = 0.0;
    for i in 0..net.param_count() {
        let orig = net.params()[i];
        net.params_mut()[i] = orig + h;
        let up = ok(net.loss_and_gradient(&inputs, &targets, &mut cache, &mut scratch))?;
        net.params_mut()[i] = orig - h;
        let dn = ok(net.loss_and_gradient(&inputs, &targets, &mut cache, &mut scratch))?;
        net.params_mut()[i] = orig;
        let fd = (up - dn) / (2.0 * h);
        let rel = (fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-6);
        worst = worst.max(rel);
    }
    ensure!(worst < 1e-4, "worst relative gradient error {worst:e}");
    Ok(format!("{} parameters, worst relative error {worst:.2e}", net.param_count()))
}

pub fn mc_matches_expected_cost() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let params = MarketParams::default();
    let trajs = [constant(), increasing(), decreasing()];
    let mut worst: f64 = 0.0;
    for k in 0..5 {
        let traj = &trajs[k % trajs.len()];
        let shares = random_shares(20, 10, &mut rng);
        let vols: Vec<f64> = shares.iter().map(|&v| f64::from(v)).collect();
        let exact = ok(expected_cost(&vols, traj))?;
        let mut is = Vec::with_capacity(5000);
        for _ in 0..5000 {
            let o = ok(simulate_episode(&params, traj, &mut rng, schedule_policy(&shares)))?;
            is.push(o.shortfall);
        }
        let (mean, std) = mean_std(&is);
        let z = (mean - exact).abs() / (std / (is.len() as f64).sqrt());
        ensure!(z <= 3.0, "schedule {shares:?}: MC {mean} vs exact {exact} ({z:.2} SE)");
        worst = worst.max(z);
    }
    Ok(format!("5 random schedules, worst deviation {worst:.2} SE"))
}

pub fn conservation_and_cash_identity() -> Check {
    let params = MarketParams::default();
    let models = [
        ImpactModel::Constant {
            kappa: 0.001,
            alpha: 0.002,
        },
        ImpactModel::Linear(LinearImpactSpec::INCREASING),
        ImpactModel::Linear(LinearImpactSpec::DECREASING),
        ImpactModel::Cir(CirImpactSpec::LOW_REVERSION),
        ImpactModel::Cir(CirImpactSpec::HIGH_REVERSION),
    ];
    let mut policy_rng = ChaCha8Rng::seed_from_u64(24);
    let mut worst: f64 = 0.0;
    for i in 0..10_000u64 {
        let sc = scenario(models[(i % models.len() as u64) as usize].clone());
        let (traj, mut ep_rng) = ok(sc.episode(5, optexec::market_sim::Phase::Aux, i))?;
        let o = ok(simulate_episode(&params, &traj, &mut ep_rng, |s, _| {
            Ok(if s.t + 1 == params.n_steps {
                s.q
            } else {
                policy_rng.random_range(0..=s.q)
            })
        }))?;
        let sold: u32 = o.volumes().sum();
        ensure!(sold == params.q0, "episode {i} sold {sold}");
        for (w, f) in o.states.windows(2).zip(&o.fills) {
            ensure!(w[1].q + f.volume == w[0].q, "episode {i}: inventory not conserved");
        }
        let proceeds: f64 = o.fills.iter().map(|f| f.exec_price * f64::from(f.volume)).sum();
        let value = params.s0 * f64::from(params.q0);
        let rel_cash = (o.cash - proceeds).abs() / proceeds.abs();
        let rel_is = (o.shortfall - (value - o.cash)).abs() / value;
        worst = worst.max(rel_cash).max(rel_is);
        ensure!(rel_cash <= 1e-9 && rel_is <= 1e-9, "episode {i}: cash identity off by {rel_cash:e}/{rel_is:e}");
        for (s, f) in o.states.iter().zip(&o.fills) {
            let expected = s.mid - traj.alpha_at(s.t) * f64::from(f.volume);
            ensure!((f.exec_price - expected).abs() <= 1e-12, "episode {i}: execution price mismatch");
        }
    }
    Ok(format!("10000 random episodes, worst relative identity error {worst:.1e}"))
}

pub fn cir_properties() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut min_seen = f64::INFINITY;
    for spec in [CirImpactSpec::LOW_REVERSION, CirImpactSpec::HIGH_REVERSION] {
        for _ in 0..2000 {
            let traj = ok(cir_trajectory(&spec, 10, CIR_SUBSTEPS, &mut rng))?;
            for t in 0..10 {
                let (k, a) = (traj.kappa_at(t), traj.alpha_at(t));
                ensure!(k > 0.0 && a > 0.0 && k.is_finite() && a.is_finite(), "non-positive impact at t={t}");
                min_seen = min_seen.min(k).min(a);
            }
        }
    }
    let spec = CirImpactSpec::HIGH_REVERSION;
    let long = ok(cir_trajectory(&spec, 4000, CIR_SUBSTEPS, &mut rng))?;
    let k_avg = long.kappa().iter().sum::<f64>() / long.len() as f64;
    let a_avg = long.alpha().iter().sum::<f64>() / long.len() as f64;
    ensure!((k_avg / spec.theta_kappa - 1.0).abs() < 0.1, "kappa time average {k_avg}");
    ensure!((a_avg / spec.theta_alpha - 1.0).abs() < 0.1, "alpha time average {a_avg}");

    let bad = CirImpactSpec {
        sigma_kappa: 0.1,
        ..CirImpactSpec::LOW_REVERSION
    };
    ensure!(bad.validate().is_err(), "Feller violation accepted");
    ensure!(
        Scenario::new(MarketParams::default(), ImpactModel::Cir(bad)).is_err(),
        "scenario with Feller violation accepted"
    );

    let n = 100_000;
    let mut sums = [0.0; 5];
    for _ in 0..n {
        let (x, y) = correlated_normals(0.9, &mut rng);
        sums[0] += x;
        sums[1] += y;
        sums[2] += x * x;
        sums[3] += y * y;
        sums[4] += x * y;
    }
    let nf = n as f64;
    let (mx, my) = (sums[0] / nf, sums[1] / nf);
    let cov = sums[4] / nf - mx * my;
    let corr = cov / ((sums[2] / nf - mx * mx) * (sums[3] / nf - my * my)).sqrt();
    ensure!((corr - 0.9).abs() < 0.05, "sample correlation {corr}");
    Ok(format!(
        "min impact {min_seen:.2e}, lambda=5 averages {:.3}/{:.3} of theta, Feller rejected, correlation {corr:.4}",
        k_avg / spec.theta_kappa,
        a_avg / spec.theta_alpha
    ))
}

fn tiny_config(seed: u64) -> TrainConfig {
    TrainConfig {
        episodes: 40,
        memory_capacity: 300,
        sync_interval: 10,
        ..TrainConfig::new(FeatureMode::Qts, seed)
    }
}

pub fn epsilon_exactness() -> Check {
    let sc = constant_scenario();
    let cfg = tiny_config(3);
    let mut agent = ok(Agent::new(cfg.clone(), &sc))?;
    let mut product = 1.0f64;
    for i in 0..cfg.episodes {
        ok(agent.run_episode(&sc, i))?;
        let k = agent.actions_taken() / cfg.sync_interval;
        ensure!(
            agent.epsilon() == cfg.epsilon_decay.powi(k as i32),
            "after {} actions epsilon {} != c^{k}",
            agent.actions_taken(),
            agent.epsilon()
        );
        product *= cfg.epsilon_decay;
        ensure!((agent.epsilon() - product).abs() < 1e-12, "epsilon drifted from the running product");
    }
    Ok(format!("epsilon = c^k exactly for k = 1..{}", cfg.episodes))
}

pub fn exploration_mean() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    let n = 20_000;
    let mut worst: f64 = 0.0;
    for (q, t) in [(20u32, 0usize), (13, 3), (7, 6), (20, 8)] {
        let p = 1.0 / (10 - t) as f64;
        let draws: Vec<f64> = (0..n).map(|_| f64::from(explore_action(q, t, 10, &mut rng))).collect();
        ensure!(draws.iter().all(|&d| d <= f64::from(q)), "exploration oversold");
        let mean = draws.iter().sum::<f64>() / n as f64;
        let se = (f64::from(q) * p * (1.0 - p) / n as f64).sqrt();
        let z = (mean - f64::from(q) * p).abs() / se;
        ensure!(z <= 3.0, "q={q} t={t}: mean {mean} vs {} ({z:.2} SE)", f64::from(q) * p);
        worst = worst.max(z);
    }
    ensure!(explore_action(9, 9, 10, &mut rng) == 9, "last step must liquidate");
    Ok(format!("4 states, worst deviation {worst:.2} SE"))
}

pub fn terminal_targets() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let net = ok(QNetwork::new(NetConfig::q_network(4), &mut rng))?;
    let other = ok(QNetwork::new(NetConfig::q_network(4), &mut rng))?;
    let scaler = FeatureScaler {
        mode: FeatureMode::Qts,
        q0: 20,
        n_steps: 10,
    };
    let mut bounds = PriceBounds::starting_at(10.0);
    bounds.observe(9.99);
    let batch: Vec<Transition> = (0..8)
        .map(|k| Transition {
            state: Observation {
                q: 5 + k,
                t: 9,
                mid: 9.995,
            },
            action: 5 + k,
            reward: -0.01 * f64::from(k),
            next: Observation {
                q: 0,
                t: 10,
                mid: 9.993,
            },
            terminal: true,
        })
        .collect();
    let y = compute_targets(&batch, 1.0, &net, &other, &scaler, &bounds);
    for (tr, y) in batch.iter().zip(&y) {
        ensure!(*y == tr.reward, "terminal target {y} != reward {}", tr.reward);
    }
    Ok(format!("{} terminal transitions, y = r bit-exact", batch.len()))
}

pub fn checkpoint_round_trip() -> Check {
    let sc = constant_scenario();
    let (policy, _) = ok(train(&tiny_config(5), &sc))?;
    let bytes = ok(policy.to_bytes())?;
    let back = ok(Policy::from_bytes(&bytes))?;
    ensure!(back == policy, "in-memory round trip changed the policy");
    let dir = ok(tempfile::tempdir())?;
    let path = dir.path().join("policy.bin");
    ok(policy.save(&path))?;
    let loaded = ok(Policy::load(&path))?;
    let same_bits = loaded
        .net()
        .params()
        .iter()
        .zip(policy.net().params())
        .all(|(a, b)| a.to_bits() == b.to_bits());
    ensure!(same_bits && loaded == policy, "file round trip changed the policy");
    Ok(format!("{} bytes, {} parameters bit-exact", bytes.len(), policy.net().param_count()))
}

/// Two smoke-profile training runs with the same seed must agree bit for bit.
pub fn smoke_reproducibility() -> Check {
    let cfg = ExperimentConfig::new(ScenarioKind::Constant, FeatureMode::Qt, 9, Profile::Smoke);
    let sc = ok(cfg.train_scenario())?;
    let tc = cfg.train_config();
    let (a, log_a) = ok(train(&tc, &sc))?;
    let (b, log_b) = ok(train(&tc, &sc))?;
    ensure!(log_a == log_b, "training logs differ");
    let same_bits = a
        .net()
        .params()
        .iter()
        .zip(b.net().params())
        .all(|(x, y)| x.to_bits() == y.to_bits());
    ensure!(same_bits && a == b, "trained policies differ");
    Ok(format!("{} episodes trained twice, identical", tc.episodes))
}

/// The whole no-training property suite, in order.
pub const PROPERTY_SUITE: [(&str, fn() -> Check); 10] = [
    ("gradient check", gradient_check),
    ("MC vs expected cost", mc_matches_expected_cost),
    ("conservation and cash identity", conservation_and_cash_identity),
    ("CIR properties", cir_properties),
    ("epsilon = c^k", epsilon_exactness),
    ("exploration mean", exploration_mean),
    ("terminal targets", terminal_targets),
    ("checkpoint round trip", checkpoint_round_trip),
    ("smoke reproducibility", smoke_reproducibility),
    ("TWAP analytic cost", twap_analytic_cost),
];
