use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamStore, Tape, Tensor, Var};
use crate::error::{contract, Error, Result};

use super::vocab::{BOS, EOS, PAD, RESERVED};
use super::LossModel;

const INIT_RANGE: f64 = 0.08;
const MASKED: f64 = -1e9;

fn default_d_model() -> usize {
    64
}
fn default_heads() -> usize {
    2
}
fn default_layers() -> usize {
    2
}
fn default_d_ff() -> usize {
    128
}
fn default_max_len() -> usize {
    128
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    #[serde(default = "default_d_model")]
    pub d_model: usize,
    #[serde(default = "default_heads")]
    pub n_heads: usize,
    #[serde(default = "default_layers")]
    pub n_enc_layers: usize,
    #[serde(default = "default_layers")]
    pub n_dec_layers: usize,
    #[serde(default = "default_d_ff")]
    pub d_ff: usize,
    #[serde(default = "default_max_len")]
    pub max_len: usize,
    #[serde(default)]
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(vocab_size: usize, seed: u64) -> Self {
        Self {
            vocab_size,
            d_model: default_d_model(),
            n_heads: default_heads(),
            n_enc_layers: default_layers(),
            n_dec_layers: default_layers(),
            d_ff: default_d_ff(),
            max_len: default_max_len(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab_size < RESERVED.len() {
            return Err(Error::Config(format!(
                "vocab_size {} is smaller than the {} reserved ids",
                self.vocab_size,
                RESERVED.len()
            )));
        }
        for (name, v) in [
            ("d_model", self.d_model),
            ("n_heads", self.n_heads),
            ("n_enc_layers", self.n_enc_layers),
            ("n_dec_layers", self.n_dec_layers),
            ("d_ff", self.d_ff),
            ("max_len", self.max_len),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !self.d_model.is_multiple_of(self.n_heads) {
            return Err(Error::Config(format!(
                "d_model {} is not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        Ok(())
    }
}

/// Encoder-decoder transformer with pre-norm blocks, sinusoidal positions and
/// an output projection tied to the token embedding.
#[derive(Clone, Debug)]
pub struct Seq2Seq {
    config: ModelConfig,
}

/// One model input/target pair as token ids. `target` is wrapped
/// `BOS ... EOS`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedPair {
    pub input: Vec<usize>,
    pub target: Vec<usize>,
}

struct AttnParams {
    wq: Var,
    bq: Var,
    wk: Var,
    bk: Var,
    wv: Var,
    bv: Var,
    wo: Var,
    bo: Var,
}

struct FfParams {
    w1: Var,
    b1: Var,
    w2: Var,
    b2: Var,
}

struct Norm {
    g: Var,
    b: Var,
}

struct EncLayer {
    ln1: Norm,
    attn: AttnParams,
    ln2: Norm,
    ff: FfParams,
}

struct DecLayer {
    ln1: Norm,
    self_attn: AttnParams,
    ln2: Norm,
    cross_attn: AttnParams,
    ln3: Norm,
    ff: FfParams,
}

/// Parameter leaves of one tape.
pub struct Bound {
    embed: Var,
    embed_t: Option<Var>,
    enc: Vec<EncLayer>,
    enc_ln: Norm,
    dec: Vec<DecLayer>,
    dec_ln: Norm,
}

fn attn_shapes(prefix: &str, d: usize) -> Vec<(String, Vec<usize>)> {
    ["q", "k", "v", "o"]
        .iter()
        .flat_map(|p| {
            [
                (format!("{prefix}.w{p}"), vec![d, d]),
                (format!("{prefix}.b{p}"), vec![d]),
            ]
        })
        .collect()
}

fn ff_shapes(prefix: &str, d: usize, f: usize) -> Vec<(String, Vec<usize>)> {
    vec![
        (format!("{prefix}.w1"), vec![d, f]),
        (format!("{prefix}.b1"), vec![f]),
        (format!("{prefix}.w2"), vec![f, d]),
        (format!("{prefix}.b2"), vec![d]),
    ]
}

fn ln_shapes(prefix: &str, d: usize) -> Vec<(String, Vec<usize>)> {
    vec![(format!("{prefix}.g"), vec![d]), (format!("{prefix}.b"), vec![d])]
}

/// Sinusoidal position table, `[len, d]`.
pub fn sinusoidal_positions(len: usize, d: usize) -> Vec<f64> {
    let mut pe = vec![0.0; len * d];
    for pos in 0..len {
        for i in 0..d {
            let rate = 1.0 / 10000f64.powf((2 * (i / 2)) as f64 / d as f64);
            let angle = pos as f64 * rate;
            pe[pos * d + i] = if i % 2 == 0 { angle.sin() } else { angle.cos() };
        }
    }
    pe
}

impl Seq2Seq {
    /// Validates `config` and returns the model with freshly initialised
    /// parameters.
    pub fn build(config: ModelConfig) -> Result<(Self, ParamStore)> {
        config.validate()?;
        let model = Self { config };
        let mut rng = ChaCha8Rng::seed_from_u64(model.config.seed);
        let mut store = ParamStore::new();
        for (name, shape) in model.segment_layout() {
            let n: usize = shape.iter().product();
            let values = if name.contains(".ln") && name.ends_with(".g") {
                vec![1.0; n]
            } else if name.contains(".ln") && name.ends_with(".b") {
                vec![0.0; n]
            } else {
                (0..n).map(|_| rng.random_range(-INIT_RANGE..INIT_RANGE)).collect()
            };
            store.push(&name, shape, values)?;
        }
        Ok((model, store))
    }

    /// Wraps an existing parameter vector (e.g. from a checkpoint).
    pub fn with_store(config: ModelConfig, store: &ParamStore) -> Result<Self> {
        config.validate()?;
        let model = Self { config };
        let layout = model.segment_layout();
        if layout.len() != store.segments().len()
            || layout
                .iter()
                .zip(store.segments())
                .any(|((n, s), seg)| *n != seg.name || *s != seg.shape)
        {
            return contract("parameter store does not match the model layout");
        }
        Ok(model)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// Segment names and shapes in storage order.
    pub fn segment_layout(&self) -> Vec<(String, Vec<usize>)> {
        let c = &self.config;
        let (d, f) = (c.d_model, c.d_ff);
        let mut out = vec![("embed".to_string(), vec![c.vocab_size, d])];
        for l in 0..c.n_enc_layers {
            let p = format!("enc.{l}");
            out.extend(ln_shapes(&format!("{p}.ln1"), d));
            out.extend(attn_shapes(&format!("{p}.attn"), d));
            out.extend(ln_shapes(&format!("{p}.ln2"), d));
            out.extend(ff_shapes(&format!("{p}.ff"), d, f));
        }
        out.extend(ln_shapes("enc.ln_f", d));
        for l in 0..c.n_dec_layers {
            let p = format!("dec.{l}");
            out.extend(ln_shapes(&format!("{p}.ln1"), d));
            out.extend(attn_shapes(&format!("{p}.self"), d));
            out.extend(ln_shapes(&format!("{p}.ln2"), d));
            out.extend(attn_shapes(&format!("{p}.cross"), d));
            out.extend(ln_shapes(&format!("{p}.ln3"), d));
            out.extend(ff_shapes(&format!("{p}.ff"), d, f));
        }
        out.extend(ln_shapes("dec.ln_f", d));
        out
    }

    pub fn bind(&self, tape: &mut Tape, store: &ParamStore) -> Result<Bound> {
        let mut p = |name: String| tape.param(store, &name);
        fn norm(p: &mut dyn FnMut(String) -> Result<Var>, prefix: &str) -> Result<Norm> {
            Ok(Norm {
                g: p(format!("{prefix}.g"))?,
                b: p(format!("{prefix}.b"))?,
            })
        }
        fn attn(p: &mut dyn FnMut(String) -> Result<Var>, prefix: &str) -> Result<AttnParams> {
            Ok(AttnParams {
                wq: p(format!("{prefix}.wq"))?,
                bq: p(format!("{prefix}.bq"))?,
                wk: p(format!("{prefix}.wk"))?,
                bk: p(format!("{prefix}.bk"))?,
                wv: p(format!("{prefix}.wv"))?,
                bv: p(format!("{prefix}.bv"))?,
                wo: p(format!("{prefix}.wo"))?,
                bo: p(format!("{prefix}.bo"))?,
            })
        }
        fn ff(p: &mut dyn FnMut(String) -> Result<Var>, prefix: &str) -> Result<FfParams> {
            Ok(FfParams {
                w1: p(format!("{prefix}.w1"))?,
                b1: p(format!("{prefix}.b1"))?,
                w2: p(format!("{prefix}.w2"))?,
                b2: p(format!("{prefix}.b2"))?,
            })
        }
        let embed = p("embed".into())?;
        let mut enc = Vec::new();
        for l in 0..self.config.n_enc_layers {
            let pre = format!("enc.{l}");
            enc.push(EncLayer {
                ln1: norm(&mut p, &format!("{pre}.ln1"))?,
                attn: attn(&mut p, &format!("{pre}.attn"))?,
                ln2: norm(&mut p, &format!("{pre}.ln2"))?,
                ff: ff(&mut p, &format!("{pre}.ff"))?,
            });
        }
        let enc_ln = norm(&mut p, "enc.ln_f")?;
        let mut dec = Vec::new();
        for l in 0..self.config.n_dec_layers {
            let pre = format!("dec.{l}");
            dec.push(DecLayer {
                ln1: norm(&mut p, &format!("{pre}.ln1"))?,
                self_attn: attn(&mut p, &format!("{pre}.self"))?,
                ln2: norm(&mut p, &format!("{pre}.ln2"))?,
                cross_attn: attn(&mut p, &format!("{pre}.cross"))?,
                ln3: norm(&mut p, &format!("{pre}.ln3"))?,
                ff: ff(&mut p, &format!("{pre}.ff"))?,
            });
        }
        let dec_ln = norm(&mut p, "dec.ln_f")?;
        Ok(Bound {
            embed,
            embed_t: None,
            enc,
            enc_ln,
            dec,
            dec_ln,
        })
    }

    fn check_ids(&self, ids: &[usize]) -> Result<()> {
        if ids.len() > self.config.max_len {
            return Err(Error::Length {
                len: ids.len(),
                max: self.config.max_len,
            });
        }
        if let Some(&bad) = ids.iter().find(|&&i| i >= self.config.vocab_size) {
            return contract(format!("token id {bad} outside vocabulary"));
        }
        Ok(())
    }

    fn embed(&self, tape: &mut Tape, b: &Bound, ids: &[usize]) -> Result<Var> {
        let d = self.config.d_model;
        let e = tape.embedding(b.embed, ids)?;
        let e = tape.scale(e, (d as f64).sqrt())?;
        let pe = tape.constant(Tensor::from_parts(
            vec![ids.len(), d],
            sinusoidal_positions(ids.len(), d),
        ));
        tape.add(e, pe)
    }

    fn norm(tape: &mut Tape, x: Var, n: &Norm) -> Result<Var> {
        tape.layer_norm(x, n.g, n.b)
    }

    fn linear(tape: &mut Tape, x: Var, w: Var, b: Var) -> Result<Var> {
        let y = tape.matmul(x, w)?;
        tape.add(y, b)
    }

    fn attention(&self, tape: &mut Tape, q_in: Var, kv_in: Var, a: &AttnParams, causal: bool) -> Result<Var> {
        let heads = self.config.n_heads;
        let dh = self.config.d_model / heads;
        let q = Self::linear(tape, q_in, a.wq, a.bq)?;
        let k = Self::linear(tape, kv_in, a.wk, a.bk)?;
        let v = Self::linear(tape, kv_in, a.wv, a.bv)?;
        let (tq, tk) = (tape.value(q).rows(), tape.value(k).rows());
        let mask = if causal && tk > 1 {
            let mut m = vec![0.0; tq * tk];
            for i in 0..tq {
                for j in (i + 1)..tk {
                    m[i * tk + j] = MASKED;
                }
            }
            Some(tape.constant(Tensor::from_parts(vec![tq, tk], m)))
        } else {
            None
        };
        let mut outs = Vec::with_capacity(heads);
        for h in 0..heads {
            let (s, e) = (h * dh, (h + 1) * dh);
            let qh = tape.slice(q, s, e)?;
            let kh = tape.slice(k, s, e)?;
            let vh = tape.slice(v, s, e)?;
            let kt = tape.transpose(kh)?;
            let scores = tape.matmul(qh, kt)?;
            let mut scores = tape.scale(scores, 1.0 / (dh as f64).sqrt())?;
            if let Some(m) = mask {
                scores = tape.add(scores, m)?;
            }
            let w = tape.softmax(scores)?;
            outs.push(tape.matmul(w, vh)?);
        }
        let cat = if heads == 1 { outs[0] } else { tape.concat(&outs)? };
        Self::linear(tape, cat, a.wo, a.bo)
    }

    fn feed_forward(tape: &mut Tape, x: Var, f: &FfParams) -> Result<Var> {
        let h = Self::linear(tape, x, f.w1, f.b1)?;
        let h = tape.relu(h)?;
        Self::linear(tape, h, f.w2, f.b2)
    }

    /// Encoder states, `[input_len, d_model]`.
    pub fn encode(&self, tape: &mut Tape, b: &Bound, input: &[usize]) -> Result<Var> {
        self.check_ids(input)?;
        if input.is_empty() {
            return contract("empty input sequence");
        }
        let mut x = self.embed(tape, b, input)?;
        for layer in &b.enc {
            let h = Self::norm(tape, x, &layer.ln1)?;
            let a = self.attention(tape, h, h, &layer.attn, false)?;
            x = tape.add(x, a)?;
            let h = Self::norm(tape, x, &layer.ln2)?;
            let f = Self::feed_forward(tape, h, &layer.ff)?;
            x = tape.add(x, f)?;
        }
        Self::norm(tape, x, &b.enc_ln)
    }

    /// Next-token logits `[dec_input_len, vocab]` under teacher forcing.
    pub fn decode_logits(&self, tape: &mut Tape, b: &mut Bound, memory: Var, dec_input: &[usize]) -> Result<Var> {
        self.check_ids(dec_input)?;
        if dec_input.is_empty() {
            return contract("empty decoder input");
        }
        let mut x = self.embed(tape, b, dec_input)?;
        for layer in &b.dec {
            let h = Self::norm(tape, x, &layer.ln1)?;
            let a = self.attention(tape, h, h, &layer.self_attn, true)?;
            x = tape.add(x, a)?;
            let h = Self::norm(tape, x, &layer.ln2)?;
            let a = self.attention(tape, h, memory, &layer.cross_attn, false)?;
            x = tape.add(x, a)?;
            let h = Self::norm(tape, x, &layer.ln3)?;
            let f = Self::feed_forward(tape, h, &layer.ff)?;
            x = tape.add(x, f)?;
        }
        let h = Self::norm(tape, x, &b.dec_ln)?;
        let et = match b.embed_t {
            Some(v) => v,
            None => {
                let v = tape.transpose(b.embed)?;
                b.embed_t = Some(v);
                v
            }
        };
        tape.matmul(h, et)
    }

    fn check_target(&self, target: &[usize]) -> Result<()> {
        if target.len() < 2 || target[0] != BOS || *target.last().unwrap() != EOS {
            return contract("target must be wrapped BOS ... EOS");
        }
        Ok(())
    }

    /// Records `-log p(target | input)`: the summed token NLL under teacher
    /// forcing, PAD positions excluded.
    pub fn loss_on(&self, tape: &mut Tape, b: &mut Bound, pair: &EncodedPair) -> Result<Var> {
        self.check_target(&pair.target)?;
        self.check_ids(&pair.target)?;
        let memory = self.encode(tape, b, &pair.input)?;
        let n = pair.target.len();
        let logits = self.decode_logits(tape, b, memory, &pair.target[..n - 1])?;
        tape.cross_entropy(logits, &pair.target[1..], Some(PAD))
    }

    /// Value of the loss for one example, without gradients.
    pub fn example_loss(&self, store: &ParamStore, pair: &EncodedPair) -> Result<f64> {
        let mut tape = Tape::new();
        let mut b = self.bind(&mut tape, store)?;
        let l = self.loss_on(&mut tape, &mut b, pair)?;
        Ok(tape.value(l).values()[0])
    }

    /// Per-token mean of [`Seq2Seq::example_loss`], for reporting.
    pub fn example_loss_per_token(&self, store: &ParamStore, pair: &EncodedPair) -> Result<f64> {
        let n = pair.target[1..].iter().filter(|&&t| t != PAD).count().max(1);
        Ok(self.example_loss(store, pair)? / n as f64)
    }

    /// Greedy autoregressive decoding from BOS until EOS or `max_out` tokens.
    /// Returns the generated ids without BOS/EOS. Ties go to the lowest id.
    pub fn greedy_decode(&self, store: &ParamStore, input: &[usize], max_out: usize) -> Result<Vec<usize>> {
        if max_out == 0 {
            return Ok(Vec::new());
        }
        let mut tape = Tape::new();
        let mut b = self.bind(&mut tape, store)?;
        let memory = self.encode(&mut tape, &b, input)?;
        let mut prefix = vec![BOS];
        let mut out = Vec::new();
        while out.len() < max_out && prefix.len() <= self.config.max_len {
            let logits = self.decode_logits(&mut tape, &mut b, memory, &prefix)?;
            let t = tape.value(logits);
            let v = t.cols();
            let last = &t.values()[(t.rows() - 1) * v..];
            let mut best = 0;
            for (i, &x) in last.iter().enumerate() {
                if x > last[best] {
                    best = i;
                }
            }
            if best == EOS {
                break;
            }
            out.push(best);
            prefix.push(best);
        }
        Ok(out)
    }

    pub fn param_count(&self) -> usize {
        self.segment_layout()
            .iter()
            .map(|(_, s)| s.iter().product::<usize>())
            .sum()
    }
}

impl LossModel for Seq2Seq {
    type Example = EncodedPair;

    fn losses(&self, tape: &mut Tape, store: &ParamStore, batch: &[&EncodedPair]) -> Result<Vec<Var>> {
        let mut b = self.bind(tape, store)?;
        batch.iter().map(|p| self.loss_on(tape, &mut b, p)).collect()
    }
}
