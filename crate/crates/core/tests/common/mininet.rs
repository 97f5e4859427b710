use fishdip::autodiff::{accumulate_gradient, loss_value, ParamStore, Tape, Tensor, Var};
use fishdip::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{finite_difference_gradient, max_relative_error};

/// A small random network built from every op the tape supports.
pub struct MiniNet {
    pub store: ParamStore,
    pub input: Tensor,
    pub ids: Vec<usize>,
    pub targets: Vec<usize>,
    pub variant: usize,
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

impl MiniNet {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = rng.random_range(2..5);
        let d_in = rng.random_range(2..6);
        let hidden = rng.random_range(2..7);
        let classes = rng.random_range(2..5);
        let vocab = 5;
        let mut store = ParamStore::new();
        store
            .push("w1", vec![d_in, hidden], uniform(&mut rng, d_in * hidden, 1.0))
            .unwrap();
        store.push("b1", vec![hidden], uniform(&mut rng, hidden, 0.5)).unwrap();
        store
            .push("w2", vec![hidden, classes], uniform(&mut rng, hidden * classes, 1.0))
            .unwrap();
        store.push("b2", vec![classes], uniform(&mut rng, classes, 0.5)).unwrap();
        store.push("g", vec![hidden], uniform(&mut rng, hidden, 1.0)).unwrap();
        store.push("beta", vec![hidden], uniform(&mut rng, hidden, 0.5)).unwrap();
        store
            .push("emb", vec![vocab, d_in], uniform(&mut rng, vocab * d_in, 1.0))
            .unwrap();
        let input = Tensor::matrix(rows, d_in, uniform(&mut rng, rows * d_in, 1.0)).unwrap();
        let ids = (0..rows).map(|_| rng.random_range(0..vocab)).collect();
        let targets = (0..rows).map(|_| rng.random_range(0..classes)).collect();
        Self {
            store,
            input,
            ids,
            targets,
            variant: (seed % 3) as usize,
        }
    }

    pub fn forward(&self, tape: &mut Tape, s: &ParamStore) -> Result<Var> {
        let x = tape.constant(self.input.clone());
        let emb = tape.param(s, "emb")?;
        let e = tape.embedding(emb, &self.ids)?;
        let x = tape.add(x, e)?;
        let w1 = tape.param(s, "w1")?;
        let b1 = tape.param(s, "b1")?;
        let h = tape.matmul(x, w1)?;
        let h = tape.add(h, b1)?;
        let h = match self.variant {
            0 => tape.relu(h)?,
            1 => {
                let g = tape.param(s, "g")?;
                let beta = tape.param(s, "beta")?;
                tape.layer_norm(h, g, beta)?
            }
            _ => {
                let sm = tape.softmax(h)?;
                tape.mul(sm, h)?
            }
        };
        // Split and rejoin the hidden units, and route a copy through a
        // transpose round-trip.
        let cols = tape.value(h).cols();
        let half = cols / 2;
        let h = if half > 0 {
            let a = tape.slice(h, 0, half)?;
            let b = tape.slice(h, half, cols)?;
            tape.concat(&[b, a])?
        } else {
            h
        };
        let ht = tape.transpose(h)?;
        let htt = tape.transpose(ht)?;
        let h = tape.scale(htt, 0.9)?;
        let w2 = tape.param(s, "w2")?;
        let b2 = tape.param(s, "b2")?;
        // `w2` rows were permuted by the concat above; this is just another
        // function of the parameters.
        let logits = tape.matmul(h, w2)?;
        let logits = tape.add(logits, b2)?;
        let ce = tape.cross_entropy(logits, &self.targets, None)?;
        let reg = tape.mul(b2, b2)?;
        let reg = tape.sum(reg)?;
        let reg = tape.scale(reg, 0.1)?;
        tape.add(ce, reg)
    }
}

/// Worst relative error between tape and finite-difference gradients.
pub fn gradcheck_error(seed: u64) -> f64 {
    let net = MiniNet::new(seed);
    let mut store = net.store.clone();
    accumulate_gradient(&mut store, |t, s| net.forward(t, s)).unwrap();
    let auto = store.grad().to_vec();
    let fd = finite_difference_gradient(&net.store, 1e-4, |s| loss_value(s, |t, s| net.forward(t, s)).unwrap());
    max_relative_error(&auto, &fd)
}
