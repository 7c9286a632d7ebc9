use ogr_core::executor::ActionTriple;
use ogr_core::rl::{loss_and_grad, Batch, Learner, PolicyParams, PpoConfig, RolloutBuffer, OBS_LEN};
use ogr_core::rng::rng;
use ogr_core::sim::ObservationMatrix;
use rand::Rng;

const H: f64 = 1e-5;
/// Gradients smaller than this are compared in absolute terms.
const REL_FLOOR: f64 = 1e-6;

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_FLOOR)
}

fn random_batch(p: &PolicyParams, seed: u64, n: usize) -> Batch {
    let mut r = rng(seed);
    let obs: Vec<f64> = (0..n * OBS_LEN).map(|_| r.gen_range(-2.0..2.0)).collect();
    let actions: Vec<[usize; 3]> = (0..n).map(|_| [r.gen_range(0..5), r.gen_range(0..5), r.gen_range(0..3)]).collect();
    // Old log-probabilities chosen so every ratio sits away from the clip kinks.
    let current = current_log_probs(p, &obs, &actions);
    let old_log_probs = current
        .iter()
        .map(|lp| {
            let ratio = loop {
                let x: f64 = r.gen_range(0.5..1.5);
                if (x - 0.8).abs() > 0.05 && (x - 1.2).abs() > 0.05 {
                    break x;
                }
            };
            lp - ratio.ln()
        })
        .collect();
    Batch {
        obs,
        actions,
        old_log_probs,
        advantages: (0..n).map(|_| r.gen_range(-2.0..2.0)).collect(),
        returns: (0..n).map(|_| r.gen_range(-3.0..3.0)).collect(),
    }
}

/// Independent log-probability computation on already-normalised inputs.
fn current_log_probs(p: &PolicyParams, obs: &[f64], actions: &[[usize; 3]]) -> Vec<f64> {
    let n = actions.len();
    let out = p.actor.forward(obs, n);
    out.output()
        .chunks(13)
        .zip(actions)
        .map(|(logits, a)| {
            let mut lp = 0.0;
            for (seg, &ai) in [&logits[..5], &logits[5..10], &logits[10..]].iter().zip(a) {
                let m = seg.iter().cloned().fold(f64::MIN, f64::max);
                let lse = m + seg.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
                lp += seg[ai] - lse;
            }
            lp
        })
        .collect()
}

#[test]
fn analytic_gradient_matches_central_differences() {
    let cfg = PpoConfig::default();
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let mut p = PolicyParams::new(&[8, 8], 100 + seed);
        // Larger output weights than the default init so entropy terms matter.
        p.actor.params.iter_mut().for_each(|w| *w *= 3.0);
        let b = random_batch(&p, 200 + seed, 32);
        let (_, ga, gc) = loss_and_grad(&p, &b, &cfg);
        let total = |p: &PolicyParams| loss_and_grad(p, &b, &cfg).0.total(&cfg);
        for i in 0..p.actor.params.len() {
            let w = p.actor.params[i];
            p.actor.params[i] = w + H;
            let up = total(&p);
            p.actor.params[i] = w - H;
            let down = total(&p);
            p.actor.params[i] = w;
            worst = worst.max(rel_err((up - down) / (2.0 * H), ga[i]));
        }
        for i in 0..p.critic.params.len() {
            let w = p.critic.params[i];
            p.critic.params[i] = w + H;
            let up = total(&p);
            p.critic.params[i] = w - H;
            let down = total(&p);
            p.critic.params[i] = w;
            worst = worst.max(rel_err((up - down) / (2.0 * H), gc[i]));
        }
    }
    assert!(worst < 1e-4, "max relative error {worst}");
}

/// Stateless bandit: every round sees the same observation.
fn bandit_obs() -> ObservationMatrix {
    ObservationMatrix {
        rows: [[0.5, -0.25, 4.0, 0.1], [1e3, 1e3, 0.0, 0.0], [1e3, 1e3, 0.0, 0.0], [1e3, 1e3, 0.0, 0.0], [1e3, 1e3, 0.0, 0.0]],
    }
}

const BANDIT_BATCH: usize = 256;

/// Runs PPO on the bandit and returns the rewarded triple's probability after every update.
fn run_bandit(seed: u64, updates: usize) -> Vec<f64> {
    let target = ActionTriple::new(3, 1, 2).unwrap();
    let o = bandit_obs();
    let mut r = rng(seed);
    let mut l = Learner::new(PolicyParams::new(&ogr_core::rl::HIDDEN, seed), PpoConfig::default());
    let mut probs = vec![l.params.forward_one(&o).unwrap().log_prob(&target).exp()];
    for _ in 0..updates {
        let d = l.params.forward_one(&o).unwrap();
        let mut buf = RolloutBuffer::new();
        for _ in 0..BANDIT_BATCH {
            let a = d.sample(&mut r);
            buf.push(&o, a, d.log_prob(&a), if a == target { 1.0 } else { 0.0 }, d.value);
            buf.finish_terminal();
        }
        buf.compute_gae(0.99, 0.95);
        l.update(&mut buf, &mut r).unwrap();
        let after = l.params.forward_one(&o).unwrap();
        probs.push(after.log_prob(&target).exp());
        if after.greedy() == target && *probs.last().unwrap() > 0.95 {
            break;
        }
    }
    probs
}

#[test]
fn bandit_probability_rises_and_converges() {
    for seed in [1, 2, 3] {
        let probs = run_bandit(seed, 200);
        for w in probs.windows(2).take(10) {
            assert!(w[1] > w[0], "seed {seed}: {probs:?}");
        }
        assert!(*probs.last().unwrap() > 0.95, "seed {seed}: {probs:?}");
    }
}
