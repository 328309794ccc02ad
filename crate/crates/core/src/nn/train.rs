use alloc::string::ToString;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::model::{validate_ids, validate_source, Graph, ModelParams};
use super::NnError;
use crate::masking::{EncodedPair, PAD};

/// Mean cross-entropy of `logits` rows against `targets`, skipping `pad`.
pub fn cross_entropy_loss(logits: &Matrix, targets: &[u32], pad: u32) -> Result<f64, NnError> {
    if logits.rows() != targets.len() {
        return Err(NnError::Misaligned {
            rows: logits.rows(),
            targets: targets.len(),
        });
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for (i, &t) in targets.iter().enumerate() {
        if t == pad {
            continue;
        }
        if t as usize >= logits.cols() {
            return Err(NnError::IdOutOfRange {
                side: "target",
                id: t,
                vocab: logits.cols(),
            });
        }
        let r = logits.row(i);
        let max = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + libm::log(r.iter().map(|x| libm::exp(x - max)).sum::<f64>());
        total += lse - r[t as usize];
        count += 1;
    }
    if count == 0 {
        return Err(NnError::AllPadTarget);
    }
    Ok(total / count as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Schedule {
    /// `base * d^-0.5 * min(t^-0.5, t * warmup^-1.5)`
    Warmup { base_rate: f64, warmup_steps: u64 },
    Constant { rate: f64 },
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule::Warmup {
            base_rate: 0.5,
            warmup_steps: 4000,
        }
    }
}

impl Schedule {
    /// Learning rate for the 1-based step `t`.
    pub fn rate(&self, t: u64, d_model: usize) -> f64 {
        match *self {
            Schedule::Constant { rate } => rate,
            Schedule::Warmup { base_rate, warmup_steps } => {
                let t = t.max(1) as f64;
                let decay = 1.0 / libm::sqrt(t);
                let ramp = if warmup_steps == 0 {
                    decay
                } else {
                    t / libm::pow(warmup_steps as f64, 1.5)
                };
                base_rate / libm::sqrt(d_model as f64) * decay.min(ramp)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub schedule: Schedule,
    step: u64,
    m: Vec<Matrix>,
    v: Vec<Matrix>,
}

impl OptimizerState {
    pub fn new(params: &ModelParams, schedule: Schedule) -> Self {
        let zeros = || params.tensors().iter().map(|t| Matrix::zeros(t.rows(), t.cols())).collect();
        Self {
            beta1: 0.9,
            beta2: 0.98,
            eps: 1e-9,
            schedule,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    /// One Adam update with bias correction.
    pub fn apply(&mut self, params: &mut ModelParams, grads: &[Matrix]) {
        self.step += 1;
        let t = self.step as f64;
        let lr = self.schedule.rate(self.step, params.config().d_model);
        let c1 = 1.0 - libm::pow(self.beta1, t);
        let c2 = 1.0 - libm::pow(self.beta2, t);
        for (((p, g), m), v) in params
            .tensors_mut()
            .iter_mut()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            let it = p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut().iter_mut().zip(v.data_mut()));
            for ((p, &g), (m, v)) in it {
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                let mhat = *m / c1;
                let vhat = *v / c2;
                *p -= lr * mhat / (libm::sqrt(vhat) + self.eps);
            }
        }
    }
}

fn split_target(pair: &EncodedPair) -> (&[u32], &[u32]) {
    let n = pair.target.len();
    (&pair.target[..n.saturating_sub(1)], &pair.target[1.min(n)..])
}

fn check_pair(params: &ModelParams, pair: &EncodedPair) -> Result<usize, NnError> {
    validate_source(&pair.source, params.config())?;
    let (prefix, labels) = split_target(pair);
    validate_ids("target", prefix, params.config())?;
    validate_ids("target", labels, params.config())?;
    Ok(labels.iter().filter(|&&t| t != PAD).count())
}

/// Mean per-token loss over the batch and its gradient for every tensor.
/// Dropout is applied when `dropout_seed` is given.
pub fn batch_loss_and_gradients(
    params: &ModelParams,
    batch: &[EncodedPair],
    dropout_seed: Option<u64>,
) -> Result<(f64, Vec<Matrix>), NnError> {
    if batch.is_empty() {
        return Err(NnError::EmptyBatch);
    }
    let mut tokens = 0;
    for p in batch {
        tokens += check_pair(params, p)?;
    }
    if tokens == 0 {
        return Err(NnError::AllPadTarget);
    }
    let mut grads: Vec<Matrix> = params
        .tensors()
        .iter()
        .map(|t| Matrix::zeros(t.rows(), t.cols()))
        .collect();
    let mut seeds = dropout_seed.map(ChaCha8Rng::seed_from_u64);
    let mut total = 0.0;
    let scale = 1.0 / tokens as f64;
    for pair in batch {
        let (prefix, labels) = split_target(pair);
        let mut g = Graph::new(params);
        if let Some(rng) = &mut seeds {
            g = g.with_dropout(rng.next_u64());
        }
        let memory = g.encode(&pair.source);
        let logits = g.decode(memory, &pair.source, prefix);
        let targets = labels
            .iter()
            .map(|&t| (t != PAD).then_some(t as usize))
            .collect();
        let loss = g.tape.cross_entropy_sum(logits, targets);
        total += g.tape.value(loss).get(0, 0);
        g.tape.backward(loss, scale, &mut grads);
    }
    Ok((total * scale, grads))
}

/// Mean per-token loss without dropout.
pub fn batch_loss(params: &ModelParams, batch: &[EncodedPair]) -> Result<f64, NnError> {
    if batch.is_empty() {
        return Err(NnError::EmptyBatch);
    }
    let mut total = 0.0;
    let mut tokens = 0;
    for pair in batch {
        let n = check_pair(params, pair)?;
        if n == 0 {
            continue;
        }
        let (prefix, labels) = split_target(pair);
        let logits = super::model::forward(params, &pair.source, prefix)?;
        total += cross_entropy_loss(&logits, labels, PAD)? * n as f64;
        tokens += n;
    }
    if tokens == 0 {
        return Err(NnError::AllPadTarget);
    }
    Ok(total / tokens as f64)
}

/// Owns the parameters and optimizer and threads the dropout stream.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub params: ModelParams,
    pub optimizer: OptimizerState,
    rng: ChaCha8Rng,
}

impl Trainer {
    pub fn new(params: ModelParams, schedule: Schedule) -> Self {
        let optimizer = OptimizerState::new(&params, schedule);
        let rng = ChaCha8Rng::seed_from_u64(params.config().seed ^ 0x5eed_d20f);
        Self { params, optimizer, rng }
    }

    /// Forward, backward and one Adam update. A non-finite loss or gradient
    /// aborts the step before any parameter changes.
    pub fn train_step(&mut self, batch: &[EncodedPair]) -> Result<f64, NnError> {
        let seed = self.rng.next_u64();
        let (loss, grads) = batch_loss_and_gradients(&self.params, batch, Some(seed))?;
        let step = self.optimizer.step() + 1;
        if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
            return Err(NnError::NonFiniteLoss { step });
        }
        self.optimizer.apply(&mut self.params, &grads);
        if let Some(name) = self.params.first_non_finite() {
            return Err(NnError::NonFiniteParam {
                name: name.to_string(),
                step,
            });
        }
        Ok(loss)
    }

    fn shuffle(&mut self, order: &mut [usize]) {
        order.shuffle(&mut self.rng);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub batch_size: usize,
    pub max_steps: u64,
    /// Steps between evaluations of the clean training and held-out loss.
    pub eval_every: u64,
    /// Evaluations without held-out improvement before stopping.
    pub patience: usize,
    /// Stop once the clean training loss falls below this value.
    pub target_loss: Option<f64>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            max_steps: 2000,
            eval_every: 50,
            patience: 5,
            target_loss: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub step: u64,
    pub batch_loss: f64,
    pub train_loss: Option<f64>,
    pub heldout_loss: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    MaxSteps,
    TargetLoss,
    Plateau,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub log: Vec<LossRecord>,
    pub stop: StopReason,
    pub final_train_loss: f64,
}

/// Minibatch training over shuffled epochs. When `heldout` is empty the
/// clean training loss drives early stopping.
pub fn fit(
    trainer: &mut Trainer,
    train: &[EncodedPair],
    heldout: &[EncodedPair],
    config: &FitConfig,
    mut on_record: impl FnMut(&LossRecord),
) -> Result<FitReport, NnError> {
    if train.is_empty() || config.batch_size == 0 {
        return Err(NnError::EmptyBatch);
    }
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut cursor = order.len();
    let mut log = Vec::new();
    let mut best = f64::INFINITY;
    let mut stale = 0;
    let mut batch = Vec::with_capacity(config.batch_size);
    let eval_every = config.eval_every.max(1);
    let mut stop = StopReason::MaxSteps;
    let mut last_train = f64::NAN;

    for step in 1..=config.max_steps {
        batch.clear();
        while batch.len() < config.batch_size.min(train.len()) {
            if cursor == order.len() {
                trainer.shuffle(&mut order);
                cursor = 0;
            }
            batch.push(train[order[cursor]].clone());
            cursor += 1;
        }
        let loss = trainer.train_step(&batch)?;
        let mut rec = LossRecord {
            step,
            batch_loss: loss,
            train_loss: None,
            heldout_loss: None,
        };
        if step % eval_every == 0 || step == config.max_steps {
            let tl = batch_loss(&trainer.params, train)?;
            last_train = tl;
            rec.train_loss = Some(tl);
            let watched = if heldout.is_empty() {
                tl
            } else {
                let hl = batch_loss(&trainer.params, heldout)?;
                rec.heldout_loss = Some(hl);
                hl
            };
            on_record(&rec);
            log.push(rec);
            if config.target_loss.is_some_and(|t| tl < t) {
                stop = StopReason::TargetLoss;
                break;
            }
            if watched < best {
                best = watched;
                stale = 0;
            } else {
                stale += 1;
                if stale >= config.patience {
                    stop = StopReason::Plateau;
                    break;
                }
            }
        } else {
            on_record(&rec);
            log.push(rec);
        }
    }
    if last_train.is_nan() {
        last_train = batch_loss(&trainer.params, train)?;
    }
    Ok(FitReport {
        log,
        stop,
        final_train_loss: last_train,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use crate::nn::model::init_params;
    use crate::nn::TransformerConfig;

    fn tiny() -> TransformerConfig {
        TransformerConfig {
            encoder_layers: 1,
            decoder_layers: 1,
            heads: 2,
            d_model: 8,
            d_ff: 16,
            vocab_size: 11,
            max_len: 8,
            dropout_rate: 0.0,
            seed: 1,
        }
    }

    #[test]
    fn uniform_logits_give_log_vocab() {
        let l = Matrix::zeros(3, 7);
        let loss = cross_entropy_loss(&l, &[1, 5, 6], PAD).unwrap();
        assert!((loss - libm::log(7.0)).abs() <= 1e-6);
    }

    #[test]
    fn hand_computed_two_token_case() {
        // row 0: softmax(1, 2, 3), target 2 -> -ln(e^3 / (e+e^2+e^3))
        // row 1: softmax(0, 0, ln 2), target 0 -> -ln(1/4)
        let l = Matrix::from_vec(2, 3, vec![1.0, 2.0, 3.0, 0.0, 0.0, libm::log(2.0)]);
        let e = core::f64::consts::E;
        let row0 = -libm::log(e * e * e / (e + e * e + e * e * e));
        let row1 = libm::log(4.0);
        let loss = cross_entropy_loss(&l, &[2, 0], 99).unwrap();
        assert!((loss - (row0 + row1) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn pad_targets_are_skipped() {
        let l = Matrix::from_vec(2, 2, vec![0.0, 50.0, 3.0, 1.0]);
        let with_pad = cross_entropy_loss(&l, &[1, 0], 0).unwrap();
        assert!(with_pad < 1e-12);
        assert_eq!(cross_entropy_loss(&l, &[0, 0], 0), Err(NnError::AllPadTarget));
        assert!(matches!(cross_entropy_loss(&l, &[1], 0), Err(NnError::Misaligned { .. })));
    }

    #[test]
    fn large_margin_gives_near_zero_loss() {
        let l = Matrix::from_vec(1, 3, vec![0.0, 1e3, 0.0]);
        assert!(cross_entropy_loss(&l, &[1], PAD).unwrap() < 1e-12);
    }

    #[test]
    fn schedule_shape() {
        let s = Schedule::Warmup {
            base_rate: 0.5,
            warmup_steps: 100,
        };
        assert!(s.rate(1, 64) < s.rate(50, 64));
        assert!(s.rate(100, 64) > s.rate(400, 64));
        assert!((s.rate(100, 64) - 0.5 / 8.0 / 10.0).abs() < 1e-15);
        assert_eq!(Schedule::Constant { rate: 0.1 }.rate(7, 64), 0.1);
    }

    #[test]
    fn zero_rate_leaves_parameters_unchanged() {
        let params = init_params(&tiny()).unwrap();
        let mut t = Trainer::new(params.clone(), Schedule::Constant { rate: 0.0 });
        let pair = EncodedPair {
            source: vec![1, 5, 6, 2],
            target: vec![1, 7, 2],
        };
        t.train_step(&[pair]).unwrap();
        assert_eq!(t.params, params);
        assert_eq!(t.optimizer.step(), 1);
    }

    #[test]
    fn training_is_deterministic() {
        let cfg = TransformerConfig {
            dropout_rate: 0.1,
            ..tiny()
        };
        let pairs = vec![
            EncodedPair {
                source: vec![1, 5, 6, 2],
                target: vec![1, 7, 2],
            },
            EncodedPair {
                source: vec![1, 4, 8, 2],
                target: vec![1, 9, 10, 2],
            },
        ];
        let run = || {
            let mut t = Trainer::new(init_params(&cfg).unwrap(), Schedule::Constant { rate: 0.01 });
            (0..5).map(|_| t.train_step(&pairs).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }
}
