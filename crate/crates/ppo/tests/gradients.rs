use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trafficlab_ppo::curiosity::{Curiosity, CuriosityGrad, CuriositySample};
use trafficlab_ppo::policy::{accumulate_ppo, ppo_loss, LossWeights, PolicyGrad, PolicyNet, PpoSample};

const H: f64 = 1e-6;

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

struct Data {
    obs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    old: Vec<f64>,
    adv: Vec<f64>,
    ret: Vec<f64>,
}

fn data(net: &PolicyNet<f64>, rng: &mut ChaCha8Rng) -> Data {
    // offsets keep each ratio well away from the clip boundaries
    let offsets = [-0.6, -0.05, 0.03, 0.7, 0.0, -0.1];
    let mut d = Data { obs: vec![], pre: vec![], old: vec![], adv: vec![], ret: vec![] };
    for (k, off) in offsets.iter().enumerate() {
        let o: Vec<f64> = (0..4).map(|_| rng.random_range(-1.5..1.5)).collect();
        let p: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
        d.old.push(net.log_prob(&o, &p) + off);
        d.adv.push(if k % 2 == 0 { 1.3 } else { -0.8 });
        d.ret.push(rng.random_range(-2.0..2.0));
        d.obs.push(o);
        d.pre.push(p);
    }
    d
}

fn samples(d: &Data) -> Vec<PpoSample<'_, f64>> {
    (0..d.obs.len())
        .map(|i| PpoSample { obs: &d.obs[i], pre_squash: &d.pre[i], old_log_prob: d.old[i], advantage: d.adv[i], ret: d.ret[i] })
        .collect()
}

fn slot(m: &mut PolicyNet<f64>, which: usize, i: usize) -> &mut f64 {
    match which {
        0 => &mut m.actor.params[i],
        1 => &mut m.log_std[i],
        _ => &mut m.critic.params[i],
    }
}

fn check_policy_net(w: LossWeights, zero_adv: bool) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut net = PolicyNet::<f64>::new(4, 2, 6, 2, &mut rng);
    net.log_std = vec![-0.3, 0.2];
    // larger actor output so the policy term has a real gradient
    for p in net.actor.params.iter_mut() {
        *p *= 30.0;
    }
    let mut d = data(&net, &mut rng);
    if zero_adv {
        d.adv.iter_mut().for_each(|a| *a = 0.0);
    }
    let s = samples(&d);
    let mut g = PolicyGrad::zeros_like(&net);
    let n = accumulate_ppo(&net, &s, &w, &mut g).n as f64;
    g.scale(1.0 / n);

    let mut worst: f64 = 0.0;
    let mut nonzero = 0;
    let mut probe = |which: usize, i: usize, analytic: f64| {
        let mut plus = net.clone();
        let mut minus = net.clone();
        *slot(&mut plus, which, i) += H;
        *slot(&mut minus, which, i) -= H;
        let numeric = (ppo_loss(&plus, &s, &w) - ppo_loss(&minus, &s, &w)) / (2.0 * H);
        if numeric.abs() > 1e-9 {
            nonzero += 1;
        }
        worst = worst.max(rel_err(analytic, numeric));
    };
    for i in 0..g.actor.len() {
        probe(0, i, g.actor[i]);
    }
    for i in 0..g.log_std.len() {
        probe(1, i, g.log_std[i]);
    }
    for i in 0..g.critic.len() {
        probe(2, i, g.critic[i]);
    }
    assert!(nonzero > 0, "loss does not depend on parameters");
    assert!(worst < 1e-4, "max relative error {worst}");
}

#[test]
fn policy_loss_gradient() {
    check_policy_net(LossWeights { epsilon: 0.2, beta: 0.0, value_coef: 0.0 }, false);
}

#[test]
fn value_loss_gradient() {
    check_policy_net(LossWeights { epsilon: 0.2, beta: 0.0, value_coef: 0.5 }, true);
}

#[test]
fn entropy_gradient() {
    check_policy_net(LossWeights { epsilon: 0.2, beta: 0.05, value_coef: 0.0 }, true);
}

#[test]
fn combined_loss_gradient() {
    check_policy_net(LossWeights { epsilon: 0.2, beta: 0.05, value_coef: 0.5 }, false);
}

fn cslot(m: &mut Curiosity<f64>, which: usize, i: usize) -> &mut f64 {
    match which {
        0 => &mut m.encoder.params[i],
        1 => &mut m.forward_model.params[i],
        _ => &mut m.inverse_model.params[i],
    }
}

#[test]
fn curiosity_loss_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let c = Curiosity::<f64>::new(4, 2, 5, 2, 0.02, &mut rng);
    let rows: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = (0..5)
        .map(|_| {
            (
                (0..4).map(|_| rng.random_range(-1.0..1.0)).collect(),
                (0..2).map(|_| rng.random_range(-0.9..0.9)).collect(),
                (0..4).map(|_| rng.random_range(-1.0..1.0)).collect(),
            )
        })
        .collect();
    let s: Vec<CuriositySample<'_, f64>> =
        rows.iter().map(|(o, a, n)| CuriositySample { obs: o, action: a, next_obs: n }).collect();
    let mut g = CuriosityGrad::zeros_like(&c);
    let n = c.accumulate(&s, &mut g).n as f64;
    g.scale(1.0 / n);

    let mut worst: f64 = 0.0;
    for which in 0..3 {
        let len = [g.encoder.len(), g.forward_model.len(), g.inverse_model.len()][which];
        for i in 0..len {
            let mut plus = c.clone();
            let mut minus = c.clone();
            *cslot(&mut plus, which, i) += H;
            *cslot(&mut minus, which, i) -= H;
            let numeric = (plus.loss(&s) - minus.loss(&s)) / (2.0 * H);
            let analytic = [&g.encoder, &g.forward_model, &g.inverse_model][which][i];
            worst = worst.max(rel_err(analytic, numeric));
        }
    }
    assert!(worst < 1e-4, "max relative error {worst}");
}
