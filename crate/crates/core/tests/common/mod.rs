//! Test-only oracles shared by the integration suites.
#![allow(dead_code)]

use mgmu::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut impl Rng, shape: &[usize], scale: f64) -> Tensor {
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-scale..scale)).collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}

/// Central finite differences of a scalar function with respect to input
/// `which`, all other inputs held fixed.
pub fn finite_difference(
    f: &dyn Fn(&[Tensor]) -> f64,
    inputs: &[Tensor],
    which: usize,
    step: f64,
) -> Tensor {
    let mut work = inputs.to_vec();
    let n = inputs[which].len();
    let mut grad = vec![0.0; n];
    for i in 0..n {
        let orig = inputs[which].data()[i];
        work[which].data_mut()[i] = orig + step;
        let plus = f(&work);
        work[which].data_mut()[i] = orig - step;
        let minus = f(&work);
        work[which].data_mut()[i] = orig;
        grad[i] = (plus - minus) / (2.0 * step);
    }
    Tensor::new(inputs[which].shape().to_vec(), grad).unwrap()
}

/// `‖a − b‖₂ / max(‖a‖₂, ‖b‖₂)`, zero when both vanish.
pub fn relative_error(a: &Tensor, b: &Tensor) -> f64 {
    assert_eq!(a.shape(), b.shape());
    let norm = |t: &[f64]| t.iter().map(|v| v * v).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.data().iter().zip(b.data()).map(|(x, y)| x - y).collect();
    let denom = norm(a.data()).max(norm(b.data()));
    if denom == 0.0 {
        0.0
    } else {
        norm(&diff) / denom
    }
}

use mgmu::{Tape, Var};

pub type Builder<'a> = dyn for<'t> Fn(&'t Tape, &[Var<'t>]) -> Var<'t> + 'a;

/// Compares tape gradients of `sum(build(inputs) ⊙ R)` with central finite
/// differences for every input. Returns the worst relative error.
pub fn gradient_check(build: &Builder<'_>, inputs: &[Tensor], seed: u64, step: f64) -> f64 {
    let out_shape = {
        let tape = Tape::new();
        let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
        build(&tape, &vars).shape()
    };
    let probe = random_tensor(&mut rng(seed ^ 0x5eed), &out_shape, 1.0);
    let objective = |xs: &[Tensor]| -> f64 {
        let tape = Tape::new();
        let vars: Vec<Var> = xs.iter().map(|t| tape.leaf(t.clone())).collect();
        let out = build(&tape, &vars);
        let v = out.value();
        v.data().iter().zip(probe.data()).map(|(a, b)| a * b).sum()
    };
    let tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t.clone())).collect();
    let out = build(&tape, &vars);
    let r = tape.leaf(probe.clone());
    let loss = out.mul(r).unwrap().sum();
    tape.backward(loss).unwrap();
    let mut worst: f64 = 0.0;
    for (i, v) in vars.iter().enumerate() {
        let analytic = tape
            .grad(*v)
            .unwrap_or_else(|| Tensor::zeros(inputs[i].shape()));
        let numeric = finite_difference(&objective, inputs, i, step);
        worst = worst.max(relative_error(&analytic, &numeric));
    }
    worst
}

use mgmu::features::{embed_text, EmbeddingTable};
use mgmu::models::{Classifier, FusionKind, MgmuVariant, Mode, ModelConfig, MultimodalInput, MultimodalNet, TextNetConfig};
use mgmu::nn::ModelParams;

pub fn toy_table(dim: usize, seed: u64) -> EmbeddingTable {
    let words: Vec<String> = ["alpha", "beta", "gamma", "delta", "eps"].iter().map(|s| s.to_string()).collect();
    let v = random_tensor(&mut rng(seed), &[words.len(), dim], 1.0);
    EmbeddingTable::new(words, v).unwrap()
}

pub fn sentences(spec: &[&[&str]]) -> Vec<Vec<String>> {
    spec.iter().map(|s| s.iter().map(|w| w.to_string()).collect()).collect()
}

pub fn mini_config() -> ModelConfig {
    let mut cfg = ModelConfig::default();
    cfg.fusion.av_lstm_hidden = 4;
    cfg.fusion.d_h = 4;
    cfg.fusion.fc_hidden = vec![5];
    cfg.fusion.text = TextNetConfig {
        conv_channels: vec![3],
        kernel: 3,
        lstm_hidden: 4,
    };
    cfg
}

pub fn mini_input(seed: u64) -> MultimodalInput {
    let mut r = rng(seed);
    MultimodalInput {
        audio: random_tensor(&mut r, &[3, 6], 1.0),
        video: random_tensor(&mut r, &[2, 6], 1.0),
        text: embed_text(&sentences(&[&["alpha", "beta", "gamma"], &["delta"]]), &toy_table(5, seed + 1), 2, 3),
    }
}

/// Loss gradient against central differences for every parameter tensor.
pub fn full_network_gradient_error(kind: FusionKind, variant: MgmuVariant) -> f64 {
    let mut cfg = mini_config();
    cfg.fusion.variant = variant;
    let (net, mut params) = MultimodalNet::new(&cfg, kind, 6, 5, &mut rng(41));
    let input = mini_input(42);
    let weights = Tensor::vector(vec![0.7, 1.1, 1.6]);
    let loss_of = |params: &ModelParams| -> f64 {
        let tape = Tape::new();
        let p = params.bind_frozen(&tape);
        let logits = net.logits(&tape, &p, &input, &mut Mode::Eval).unwrap();
        tape.weighted_cross_entropy(logits, 2, &weights).unwrap().to_tensor().item()
    };
    {
        let tape = Tape::new();
        let p = params.bind(&tape);
        let logits = net.logits(&tape, &p, &input, &mut Mode::Eval).unwrap();
        let loss = tape.weighted_cross_entropy(logits, 2, &weights).unwrap();
        tape.backward(loss).unwrap();
        params.accumulate_grads(&tape, &p);
    }
    let step = 1e-6;
    let mut worst: f64 = 0.0;
    let names = params.names().to_vec();
    for name in &names {
        let id = params.id(name).unwrap();
        let analytic = Tensor::new(params.get(id).shape().to_vec(), params.grad(id).to_vec()).unwrap();
        let mut numeric = vec![0.0; analytic.len()];
        let mut work = params.clone();
        for (i, slot) in numeric.iter_mut().enumerate() {
            let orig = work.get(id).data()[i];
            work.get_mut(id).data_mut()[i] = orig + step;
            let plus = loss_of(&work);
            work.get_mut(id).data_mut()[i] = orig - step;
            let minus = loss_of(&work);
            work.get_mut(id).data_mut()[i] = orig;
            *slot = (plus - minus) / (2.0 * step);
        }
        let numeric = Tensor::new(analytic.shape().to_vec(), numeric).unwrap();
        let err = relative_error(&analytic, &numeric);
        worst = worst.max(err);
    }
    worst
}

/// Recount from the configuration alone.
pub fn expected_parameter_count(cfg: &ModelConfig, emb: usize, text_dim: usize) -> usize {
    let f = &cfg.fusion;
    let lstm = |i: usize, u: usize| 4 * u * (i + u + 1);
    let u = f.av_lstm_hidden;
    let av = 2 * (lstm(emb, u) + lstm(u, u));
    let mut text = 0;
    let mut c_in = text_dim;
    for &c in &f.text.conv_channels {
        text += c * c_in * f.text.kernel + c;
        c_in = c;
    }
    text += lstm(c_in, f.text.lstm_hidden);
    let t = f.text.lstm_hidden;
    let gates = f.d_h * (u + u + 2 * u) + f.d_h * (u + t + u + t) * 2;
    let mut head = 0;
    let mut w = 3 * f.d_h;
    for &h in &f.fc_hidden {
        head += w * h + h;
        w = h;
    }
    head += w * cfg.classes + cfg.classes;
    av + text + gates + head
}
