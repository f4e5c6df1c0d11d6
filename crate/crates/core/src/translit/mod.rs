//! Character-level neural transliteration (target-language string in,
//! English NE out), used to rank NE candidates.

mod io;
mod model;
mod tensor;
mod vocab;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use io::{load_model, read_model, save_model, write_model, FORMAT_VERSION, MAGIC};
pub use model::{
    parameter_count, AttentionStep, AttentionTrace, ForwardOutput, GradientFault, GruParams,
    Params,
};
pub use tensor::Matrix;
pub use vocab::{Vocab, BOS, EOS, PAD, RESERVED, UNK};

use crate::clcb::{PairSource, TrainingPair};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Optimizer {
    Sgd,
    Adam,
}

impl Optimizer {
    pub fn as_str(self) -> &'static str {
        match self {
            Optimizer::Sgd => "sgd",
            Optimizer::Adam => "adam",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "sgd" => Some(Optimizer::Sgd),
            "adam" => Some(Optimizer::Adam),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TranslitConfig {
    pub embedding_dim: usize,
    pub encoder_hidden_per_direction: usize,
    pub decoder_hidden: usize,
    /// Applied to embeddings and to the pre-projection layer while training.
    pub dropout: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Global L2 norm the per-batch gradient is clipped to.
    pub grad_clip_norm: f64,
    /// Plain SGD at the default learning rate makes little progress in 50
    /// epochs on small data, hence Adam by default.
    pub optimizer: Optimizer,
    /// Parameters start uniform in `[-init_scale, init_scale]`.
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for TranslitConfig {
    fn default() -> Self {
        TranslitConfig {
            embedding_dim: 32,
            encoder_hidden_per_direction: 16,
            decoder_hidden: 32,
            dropout: 0.4,
            batch_size: 16,
            learning_rate: 0.01,
            epochs: 50,
            grad_clip_norm: 5.0,
            optimizer: Optimizer::Adam,
            init_scale: 0.08,
            seed: 0,
        }
    }
}

impl TranslitConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if 2 * self.encoder_hidden_per_direction != self.decoder_hidden {
            return bad(format!(
                "decoder_hidden ({}) must be twice encoder_hidden_per_direction ({})",
                self.decoder_hidden, self.encoder_hidden_per_direction
            ));
        }
        if self.embedding_dim == 0 || self.decoder_hidden == 0 {
            return bad("layer sizes must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate {} must be positive", self.learning_rate));
        }
        if self.grad_clip_norm.is_nan() || self.grad_clip_norm <= 0.0 {
            return bad(format!("grad_clip_norm {} must be positive", self.grad_clip_norm));
        }
        if !(self.init_scale > 0.0 && self.init_scale.is_finite()) {
            return bad(format!("init_scale {} must be positive", self.init_scale));
        }
        Ok(())
    }
}

/// Input vocabulary from the target strings, output vocabulary from the
/// English strings, characters in first-occurrence order.
pub fn build_vocabs(pairs: &[TrainingPair]) -> (Vocab, Vocab) {
    let input = Vocab::from_chars(pairs.iter().flat_map(|p| p.target.chars()));
    let output = Vocab::from_chars(pairs.iter().flat_map(|p| p.english.chars()));
    (input, output)
}

fn replicate_to(items: &[TrainingPair], count: usize, rng: &mut impl Rng) -> Vec<TrainingPair> {
    let mut out = Vec::with_capacity(count);
    for _ in 0..count / items.len() {
        out.extend_from_slice(items);
    }
    out.extend(items.choose_multiple(rng, count % items.len()).cloned());
    out
}

/// Mix bootstrapped pairs with one `("", english)` pair per augmentation
/// NE, oversampling whichever side is smaller so that both sources are
/// equally represented, then shuffle.
pub fn augment(
    bootstrapped: &[TrainingPair],
    english_nes: &[String],
    seed: u64,
) -> Result<Vec<TrainingPair>> {
    if bootstrapped.is_empty() || english_nes.is_empty() {
        return Err(Error::InvalidInput(
            "augmentation needs bootstrapped pairs and English NEs".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let augmented: Vec<TrainingPair> = english_nes
        .iter()
        .map(|e| TrainingPair::augmented(e.clone()))
        .collect();
    let n = bootstrapped.len().max(augmented.len());
    let mut out = replicate_to(bootstrapped, n, &mut rng);
    out.extend(replicate_to(&augmented, n, &mut rng));
    out.shuffle(&mut rng);
    Ok(out)
}

/// A trained (or randomly initialized) transliteration model.
#[derive(Debug, Clone, PartialEq)]
pub struct TranslitModel {
    pub input_vocab: Vocab,
    pub output_vocab: Vocab,
    pub config: TranslitConfig,
    pub params: Params,
    /// Mean per-pair training loss of every epoch.
    pub loss_curve: Vec<f64>,
}

impl TranslitModel {
    /// Parameters uniform in `[-scale, scale]`.
    pub fn random(
        input_vocab: Vocab,
        output_vocab: Vocab,
        config: TranslitConfig,
        scale: f64,
        rng: &mut impl Rng,
    ) -> Self {
        let mut params = Params::zeros(input_vocab.len(), output_vocab.len(), &config);
        for (_, t) in params.tensors_mut() {
            let (r, c) = t.dims();
            *t = Matrix::uniform(r, c, scale, rng);
        }
        TranslitModel {
            input_vocab,
            output_vocab,
            config,
            params,
            loss_curve: Vec::new(),
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.params.count()
    }

    fn encode(&self, input: &str, output: &str) -> Result<(Vec<usize>, Vec<usize>)> {
        if output.is_empty() {
            return Err(Error::InvalidInput("output string is empty".into()));
        }
        Ok(model::encode_pair(
            &self.input_vocab,
            &self.output_vocab,
            input,
            output,
        ))
    }

    /// Teacher-forced pass in inference mode (no dropout).
    pub fn forward(&self, input: &str, output: &str) -> Result<ForwardOutput> {
        let (src, tgt) = self.encode(input, output)?;
        Ok(model::run(&self.params, &self.config, &src, &tgt, None, None, GradientFault::None))
    }

    /// Teacher-forced pass with dropout drawn from `rng`.
    pub fn forward_train(&self, input: &str, output: &str, rng: &mut dyn RngCore) -> Result<ForwardOutput> {
        let (src, tgt) = self.encode(input, output)?;
        Ok(model::run(&self.params, &self.config, &src, &tgt, Some(rng), None, GradientFault::None))
    }

    /// Loss and its gradient with respect to every parameter, without
    /// dropout.
    pub fn loss_and_gradient(&self, input: &str, output: &str) -> Result<(f64, Params)> {
        self.loss_and_gradient_with(input, output, GradientFault::None)
    }

    #[doc(hidden)]
    pub fn loss_and_gradient_with(
        &self,
        input: &str,
        output: &str,
        fault: GradientFault,
    ) -> Result<(f64, Params)> {
        let (src, tgt) = self.encode(input, output)?;
        let mut grads = self.params.zeros_like();
        let out = model::run(&self.params, &self.config, &src, &tgt, None, Some(&mut grads), fault);
        Ok((out.loss, grads))
    }

    /// Mean log-likelihood per output symbol (EOS included) of producing
    /// `english` from `candidate`. Always `<= 0`; higher is better.
    pub fn score(&self, candidate: &str, english: &str) -> Result<f64> {
        let out = self.forward(candidate, english)?;
        Ok(-out.loss / (english.chars().count() + 1) as f64)
    }
}

struct AdamState {
    m: Params,
    v: Params,
    t: i32,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

fn apply_update(params: &mut Params, grads: &Params, config: &TranslitConfig, adam: &mut Option<AdamState>) {
    match adam {
        None => params.add_scaled(-config.learning_rate, grads),
        Some(state) => {
            state.t += 1;
            let bc1 = 1.0 - ADAM_BETA1.powi(state.t);
            let bc2 = 1.0 - ADAM_BETA2.powi(state.t);
            let step = config.learning_rate;
            let tensors = params
                .tensors_mut()
                .into_iter()
                .zip(grads.tensors())
                .zip(state.m.tensors_mut())
                .zip(state.v.tensors_mut());
            for ((((_, p), (_, g)), (_, m)), (_, v)) in tensors {
                let iter = p
                    .as_mut_slice()
                    .iter_mut()
                    .zip(g.as_slice())
                    .zip(m.as_mut_slice())
                    .zip(v.as_mut_slice());
                for (((p, &g), m), v) in iter {
                    *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                    *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                    *p -= step * (*m / bc1) / ((*v / bc2).sqrt() + ADAM_EPS);
                }
            }
        }
    }
}

/// Train on bootstrapped pairs mixed with empty-input augmentation pairs
/// built from `english_nes`.
///
/// Minibatch training for a fixed number of epochs; each batch gradient is
/// the mean over its pairs, clipped to `grad_clip_norm`. Fully determined by
/// `config.seed`.
pub fn train(
    pairs: &[TrainingPair],
    english_nes: &[String],
    config: &TranslitConfig,
) -> Result<TranslitModel> {
    config.validate()?;
    let bootstrapped: Vec<TrainingPair> = pairs
        .iter()
        .filter(|p| p.source == PairSource::Bootstrapped)
        .cloned()
        .collect();
    if bootstrapped.is_empty() {
        return Err(Error::InvalidInput("no bootstrapped training pairs".into()));
    }
    let data = if english_nes.is_empty() {
        log::warn!("no augmentation NEs given; training on bootstrapped pairs only");
        bootstrapped
    } else {
        augment(&bootstrapped, english_nes, config.seed)?
    };
    if let Some(p) = data.iter().find(|p| p.english.is_empty()) {
        return Err(Error::InvalidInput(format!(
            "training pair with empty English side (target {:?})",
            p.target
        )));
    }

    let (input_vocab, output_vocab) = build_vocabs(&data);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = TranslitModel::random(
        input_vocab,
        output_vocab,
        config.clone(),
        config.init_scale,
        &mut rng,
    );
    let encoded: Vec<(Vec<usize>, Vec<usize>)> = data
        .iter()
        .map(|p| model.encode(&p.target, &p.english))
        .collect::<Result<_>>()?;

    let mut adam = match config.optimizer {
        Optimizer::Sgd => None,
        Optimizer::Adam => Some(AdamState {
            m: model.params.zeros_like(),
            v: model.params.zeros_like(),
            t: 0,
        }),
    };
    let mut order: Vec<usize> = (0..encoded.len()).collect();
    let mut grads = model.params.zeros_like();
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (batch_no, batch) in order.chunks(config.batch_size).enumerate() {
            grads.fill(0.0);
            let mut batch_loss = 0.0;
            for &i in batch {
                let (src, tgt) = &encoded[i];
                let out = model::run(
                    &model.params,
                    &model.config,
                    src,
                    tgt,
                    Some(&mut rng),
                    Some(&mut grads),
                    GradientFault::None,
                );
                batch_loss += out.loss;
            }
            if !batch_loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch: epoch + 1,
                    batch: batch_no + 1,
                });
            }
            epoch_loss += batch_loss;
            grads.scale(1.0 / batch.len() as f64);
            let norm = grads.l2_norm();
            if norm > config.grad_clip_norm {
                grads.scale(config.grad_clip_norm / norm);
            }
            apply_update(&mut model.params, &grads, config, &mut adam);
            if !model.params.all_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch: epoch + 1,
                    batch: batch_no + 1,
                });
            }
        }
        let mean = epoch_loss / encoded.len() as f64;
        log::debug!("epoch {} mean loss {mean:.4}", epoch + 1);
        model.loss_curve.push(mean);
    }
    Ok(model)
}

/// `|a - b| / max(|a|, |b|)`, with the denominator floored at
/// `GRAD_CHECK_FLOOR` so gradients that are both tiny compare absolutely.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR);
    (analytic - numeric).abs() / denom
}

pub const GRAD_CHECK_FLOOR: f64 = 1e-6;

/// Compare analytic gradients with central finite differences on `sample`
/// randomly chosen scalar parameters (all of them when `sample` is at least
/// the parameter count) and return the largest relative error. Dropout is
/// off.
pub fn gradient_check(
    model: &TranslitModel,
    pair: &TrainingPair,
    epsilon: f64,
    sample: usize,
    seed: u64,
) -> Result<f64> {
    gradient_check_with(model, pair, epsilon, sample, seed, GradientFault::None)
}

#[doc(hidden)]
pub fn gradient_check_with(
    model: &TranslitModel,
    pair: &TrainingPair,
    epsilon: f64,
    sample: usize,
    seed: u64,
    fault: GradientFault,
) -> Result<f64> {
    if sample == 0 {
        return Ok(0.0);
    }
    let (_, grads) = model.loss_and_gradient_with(&pair.target, &pair.english, fault)?;
    let coords: Vec<(usize, usize)> = model
        .params
        .tensors()
        .iter()
        .enumerate()
        .flat_map(|(t, (_, m))| (0..m.len()).map(move |i| (t, i)))
        .collect();
    let chosen: Vec<(usize, usize)> = if sample >= coords.len() {
        coords
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        coords.choose_multiple(&mut rng, sample).copied().collect()
    };

    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    let grad_tensors = grads.tensors();
    for (t, i) in chosen {
        let original = model.params.tensors()[t].1.as_slice()[i];
        let mut loss_at = |value: f64| -> Result<f64> {
            probe.params.tensors_mut()[t].1.as_mut_slice()[i] = value;
            Ok(probe.forward(&pair.target, &pair.english)?.loss)
        };
        let plus = loss_at(original + epsilon)?;
        let minus = loss_at(original - epsilon)?;
        loss_at(original)?;
        let numeric = (plus - minus) / (2.0 * epsilon);
        let analytic = grad_tensors[t].1.as_slice()[i];
        worst = worst.max(relative_error(analytic, numeric));
    }
    Ok(worst)
}
