use fishdip::masking::AdamConfig;
use fishdip::trainer::{fisher_init_sample, run_loop, BatchSampler, LoopConfig, Method, Ranking, Trace};

use super::toy::{self, Linear2, Point};

pub fn config(method: Method, total_steps: usize) -> LoopConfig {
    LoopConfig {
        method,
        k_percent: 50.0,
        m_steps: 1,
        n_regressing: 2,
        fisher_init_samples: 3,
        total_steps,
        batch_size: 4,
        seed: 11,
        ranking: Ranking::FullSet,
        adam: AdamConfig::with_lr(0.05),
        record_params: true,
    }
}

/// What the loop should have done, recomputed by hand.
#[derive(Debug, Default)]
pub struct Expected {
    sweeps: Vec<Vec<f64>>,
    selected: Vec<Vec<usize>>,
    masks: Vec<Vec<bool>>,
    batches: Vec<Vec<usize>>,
    batch_losses: Vec<Vec<f64>>,
    params: Vec<Vec<f64>>,
}

pub fn fisher(w: &[f64], pts: &[Point], ids: &[usize]) -> Vec<f64> {
    let mut f = [0.0; 2];
    for &i in ids {
        let g = toy::gradient(w, &pts[i]);
        for j in 0..2 {
            f[j] += g[j] * g[j];
        }
    }
    f.iter().map(|s| s / ids.len() as f64).collect()
}

pub fn top_k(scores: &[f64], k_percent: f64) -> Vec<bool> {
    let size = (k_percent / 100.0 * scores.len() as f64).ceil() as usize;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
    let mut mask = vec![false; scores.len()];
    for &j in &order[..size] {
        mask[j] = true;
    }
    mask
}

pub fn simulate(cfg: &LoopConfig, pts: &[Point], w_init: [f64; 2]) -> Expected {
    let mut e = Expected::default();
    let mut w = w_init.to_vec();
    let (mut m, mut v) = (vec![0.0; 2], vec![0.0; 2]);
    let a = cfg.adam;
    let mut mask = vec![cfg.method == Method::Full; 2];
    let mut batches = BatchSampler::new(pts.len(), cfg.batch_size, cfg.seed);
    for t in 0..cfg.total_steps {
        if t % cfg.m_steps == 0 {
            let losses: Vec<f64> = pts.iter().map(|p| toy::loss(&w, p)).collect();
            e.sweeps.push(losses.clone());
            let ids = match cfg.method {
                Method::Fishdip => {
                    let mut ranked: Vec<usize> = (0..pts.len()).collect();
                    ranked.sort_by(|&x, &y| losses[y].partial_cmp(&losses[x]).unwrap().then(x.cmp(&y)));
                    ranked.truncate(cfg.n_regressing);
                    e.selected.push(ranked.clone());
                    ranked.sort();
                    Some(ranked)
                }
                Method::FixedFish if t == 0 => Some(fisher_init_sample(pts.len(), cfg.fisher_init_samples, cfg.seed)),
                _ => None,
            };
            if let Some(ids) = ids {
                mask = top_k(&fisher(&w, pts, &ids), cfg.k_percent);
                e.masks.push(mask.clone());
            }
        }
        let batch = batches.next_batch();
        let mut g = [0.0; 2];
        for &i in &batch {
            let gi = toy::gradient(&w, &pts[i]);
            g[0] += gi[0] / batch.len() as f64;
            g[1] += gi[1] / batch.len() as f64;
        }
        e.batch_losses.push(batch.iter().map(|&i| toy::loss(&w, &pts[i])).collect());
        e.batches.push(batch);
        let step = (t + 1) as i32;
        for j in 0..2 {
            m[j] = a.beta1 * m[j] + (1.0 - a.beta1) * g[j];
            v[j] = a.beta2 * v[j] + (1.0 - a.beta2) * g[j] * g[j];
            if mask[j] {
                let mh = m[j] / (1.0 - a.beta1.powi(step));
                let vh = v[j] / (1.0 - a.beta2.powi(step));
                w[j] -= a.lr * mh / (vh.sqrt() + a.eps);
            }
        }
        e.params.push(w.clone());
    }
    e.sweeps.push(pts.iter().map(|p| toy::loss(&w, p)).collect());
    e
}

pub fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

pub fn run(cfg: &LoopConfig) -> Trace {
    let pts = toy::points();
    let refs: Vec<&Point> = pts.iter().collect();
    let mut store = toy::store(0.2, -0.3);
    run_loop(&Linear2, &mut store, &refs, cfg, |_, _| Ok(())).unwrap()
}

pub fn assert_trace_matches(cfg: &LoopConfig, tol: f64) {
    let pts = toy::points();
    let trace = run(cfg);
    let expected = simulate(cfg, &pts, [0.2, -0.3]);
    assert_eq!(trace.sweeps.len(), expected.sweeps.len());
    for (s, e) in trace.sweeps.iter().zip(&expected.sweeps) {
        assert!(close(&s.losses, e, tol), "sweep at t={}: {:?} vs {e:?}", s.t, s.losses);
    }
    assert_eq!(trace.mask_events.len(), expected.masks.len());
    for (i, ev) in trace.mask_events.iter().enumerate() {
        let bits: Vec<bool> = ev.mask.bits().iter().map(|b| *b).collect();
        assert_eq!(bits, expected.masks[i], "mask at t={}", ev.t);
        if cfg.method == Method::Fishdip {
            assert_eq!(ev.selected, expected.selected[i]);
        }
    }
    assert_eq!(trace.steps.len(), cfg.total_steps);
    for (s, t) in trace.steps.iter().zip(0..) {
        assert_eq!(s.batch, expected.batches[t]);
        assert!(close(&s.losses, &expected.batch_losses[t], tol));
        let p = s.params.as_ref().unwrap();
        assert!(close(p, &expected.params[t], tol), "step {t}: {p:?} vs {:?}", expected.params[t]);
    }
}

