//! Optimization: Adam with inverse-square-root schedule, token-budget
//! batching, dynamic context sampling, and early stopping on validation
//! perplexity.

mod adam;

pub use adam::{adam_step, clip_gradients, lr_at, AdamState};

use std::collections::BTreeMap;

use thiserror::Error;

use crate::corpus::{ParallelCorpus, Vocabulary, PAD};
use crate::model::{
    build_batch, Model, ModelError, ParamLeaves, SequenceBatch, TargetContext,
};
use crate::numerics::{NumericsError, Tape, Tensor};
use crate::rng::Prng;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("non-finite gradient {value} in parameter {param}")]
    NonFiniteGradient { param: String, value: f64 },
    #[error("{0} corpus has no sentences")]
    EmptyCorpus(&'static str),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Schedule scale: the peak learning rate times sqrt(warmup).
    pub lr_scale: f64,
    pub warmup: usize,
    pub label_smoothing: f64,
    /// Input-token budget per optimizer step; a lone oversized example still
    /// forms a batch of one.
    pub batch_tokens: usize,
    pub max_epochs: usize,
    /// Consecutive non-improving evaluations tolerated before stopping.
    pub patience: usize,
    /// Steps between evaluations; 0 evaluates twice per epoch.
    pub eval_interval: usize,
    /// Global gradient-norm ceiling; 0 disables clipping.
    pub clip_norm: f64,
    pub seed: u64,
}

impl TrainConfig {
    /// Desk-scale defaults: peak learning rate 5e-4 at warmup step 400.
    pub fn desk(seed: u64) -> TrainConfig {
        TrainConfig {
            beta1: 0.9,
            beta2: 0.98,
            eps: 1e-8,
            lr_scale: 5e-4 * 400f64.sqrt(),
            warmup: 400,
            label_smoothing: 0.1,
            batch_tokens: 256,
            max_epochs: 40,
            patience: 5,
            eval_interval: 0,
            clip_norm: 1.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let fail = |msg: String| Err(TrainError::Config(msg));
        if !(0.0 < self.beta1 && self.beta1 < 1.0) || !(0.0 < self.beta2 && self.beta2 < 1.0) {
            return fail(format!("betas ({}, {}) outside (0, 1)", self.beta1, self.beta2));
        }
        if self.eps.is_nan() || self.eps <= 0.0 {
            return fail(format!("eps {} must be positive", self.eps));
        }
        if !(self.lr_scale >= 0.0 && self.lr_scale.is_finite()) {
            return fail(format!("lr_scale {} must be finite and non-negative", self.lr_scale));
        }
        if self.warmup < 1 {
            return fail("warmup must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return fail(format!("label_smoothing {} outside [0, 1)", self.label_smoothing));
        }
        if self.batch_tokens == 0 || self.max_epochs == 0 {
            return fail("batch_tokens and max_epochs must be positive".into());
        }
        if self.patience < 1 {
            return fail("patience must be at least 1".into());
        }
        if self.clip_norm.is_nan() || self.clip_norm < 0.0 {
            return fail(format!("clip_norm {} must be non-negative", self.clip_norm));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    /// `patience` evaluations passed without improvement.
    EarlyStopped,
    MaxEpochs,
    /// Training loss or validation perplexity went non-finite.
    Diverged,
}

pub struct TrainOutcome {
    /// Parameters from the evaluation with the lowest validation perplexity.
    pub model: Model,
    pub best_valid_ppl: f64,
    pub final_valid_ppl: f64,
    pub steps: usize,
    pub stop: StopReason,
    /// One record per optimizer step: `step TAB lr TAB train_loss TAB
    /// valid_ppl`, with `-` on steps without an evaluation.
    pub log: String,
    /// How often each context width was drawn; index k counts draws of k.
    pub k_histogram: Vec<usize>,
}

/// Token-weighted sum of per-example cross entropies on one tape. Equals the
/// mean smoothed cross entropy over every non-pad target token in the batch,
/// context tokens included. Returns the loss and the token count.
pub fn batch_loss(
    model: &Model,
    tape: &mut Tape,
    leaves: &ParamLeaves,
    batch: &[SequenceBatch],
    smoothing: f64,
    mut dropout_rng: Option<&mut Prng>,
) -> Result<(Tensor, usize), TrainError> {
    assert!(!batch.is_empty(), "batch_loss needs at least one example");
    let counts: Vec<usize> = batch
        .iter()
        .map(|b| b.tgt_output.iter().filter(|&&t| t != PAD).count())
        .collect();
    let total: usize = counts.iter().sum();
    let mut acc: Option<Tensor> = None;
    for (b, &n) in batch.iter().zip(&counts) {
        let (logits, _) = model.forward_on(tape, leaves, b, dropout_rng.as_deref_mut(), false)?;
        let ce = tape.cross_entropy(logits, &b.tgt_output, smoothing, PAD)?;
        let scaled = tape.scale(ce, n as f64 / total as f64);
        acc = Some(match acc {
            None => scaled,
            Some(a) => tape.add(a, scaled),
        });
    }
    Ok((acc.expect("non-empty batch"), total))
}

/// Teacher-forced validation perplexity: exp of the mean unsmoothed cross
/// entropy over current-sentence tokens, with full gold context
/// (k = max_context). Context rows are excluded so scores are comparable
/// across architectures.
pub fn valid_perplexity(
    model: &Model,
    corpus: &ParallelCorpus,
    src_vocab: &Vocabulary,
    tgt_vocab: &Vocabulary,
) -> Result<f64, TrainError> {
    let k = model.config.max_context;
    let mut sum = 0.0;
    let mut tokens = 0usize;
    for doc in &corpus.docs {
        let mut tape = Tape::new();
        let leaves = model.inject(&mut tape);
        for i in 0..doc.sentences.len() {
            let b = build_batch(
                model.config.arch,
                doc,
                i,
                k,
                src_vocab,
                tgt_vocab,
                TargetContext::Gold,
            )?;
            let (logits, _) = model.forward_on(&mut tape, &leaves, &b, None, false)?;
            let start = b.layout.scored_output_start();
            let mut labels = b.tgt_output.clone();
            for l in labels[..start].iter_mut() {
                *l = PAD;
            }
            let ce = tape.cross_entropy(logits, &labels, 0.0, PAD)?;
            let n = labels.len() - start;
            sum += tape.value(ce)[0] * n as f64;
            tokens += n;
        }
    }
    if tokens == 0 {
        return Err(TrainError::EmptyCorpus("validation"));
    }
    Ok((sum / tokens as f64).exp())
}

/// Input-token cost of one example, the quantity the batch budget meters.
fn example_cost(b: &SequenceBatch) -> usize {
    b.src.len() + b.src_ctx.len() + b.tgt_ctx.len() + b.tgt_input.len()
}

/// Trains `model` and returns the best checkpoint by validation perplexity.
///
/// Each epoch revisits every training sentence in a fresh shuffled order and
/// redraws its context width k uniformly from {0, ..., max_context}, the same
/// k on both sides. Divergence aborts the loop and the best checkpoint seen
/// so far (the initial parameters if none) is returned with
/// [`StopReason::Diverged`].
pub fn train(
    model: Model,
    train_set: &ParallelCorpus,
    valid_set: &ParallelCorpus,
    src_vocab: &Vocabulary,
    tgt_vocab: &Vocabulary,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    if train_set.sentence_count() == 0 {
        return Err(TrainError::EmptyCorpus("training"));
    }
    if valid_set.sentence_count() == 0 {
        return Err(TrainError::EmptyCorpus("validation"));
    }

    let initial = model.clone();
    let mut model = model;
    let rng = Prng::new(cfg.seed).fork("train");
    let mut state = AdamState::new(&model);
    let kmax = model.config.max_context;
    let mut k_histogram = vec![0usize; kmax + 1];
    let mut log = String::new();
    let mut best: Option<(f64, Model)> = None;
    let mut bad_evals = 0usize;
    let mut step = 0usize;
    let mut stop = None;
    let mut last_step_ppl: Option<f64> = None;

    let examples: Vec<(usize, usize)> = train_set
        .docs
        .iter()
        .enumerate()
        .flat_map(|(d, doc)| (0..doc.sentences.len()).map(move |i| (d, i)))
        .collect();

    'epochs: for epoch in 0..cfg.max_epochs {
        let mut order = examples.clone();
        rng.fork_idx("epoch.shuffle", epoch as u64).shuffle(&mut order);
        let mut k_rng = rng.fork_idx("epoch.k", epoch as u64);

        // Assemble the epoch's batches up front so the half-epoch
        // evaluation points are known.
        let mut batches: Vec<Vec<SequenceBatch>> = Vec::new();
        let mut current: Vec<SequenceBatch> = Vec::new();
        let mut current_cost = 0usize;
        for &(d, i) in &order {
            let k = k_rng.below(kmax + 1);
            k_histogram[k] += 1;
            let b = build_batch(
                model.config.arch,
                &train_set.docs[d],
                i,
                k,
                src_vocab,
                tgt_vocab,
                TargetContext::Gold,
            )?;
            let cost = example_cost(&b);
            if !current.is_empty() && current_cost + cost > cfg.batch_tokens {
                batches.push(std::mem::take(&mut current));
                current_cost = 0;
            }
            current_cost += cost;
            current.push(b);
        }
        if !current.is_empty() {
            batches.push(current);
        }

        let n_batches = batches.len();
        for (idx, batch) in batches.iter().enumerate() {
            step += 1;
            last_step_ppl = None;
            let lr = lr_at(step, cfg.warmup, cfg.lr_scale);
            let mut tape = Tape::new();
            let leaves = model.inject(&mut tape);
            let mut drop_rng = rng.fork_idx("dropout", step as u64);
            let (loss, _) = batch_loss(
                &model,
                &mut tape,
                &leaves,
                batch,
                cfg.label_smoothing,
                Some(&mut drop_rng),
            )?;
            let loss_val = tape.value(loss)[0];
            if !loss_val.is_finite() {
                log.push_str(&format!("{step}\t{lr}\t{loss_val}\t-\n"));
                stop = Some(StopReason::Diverged);
                break 'epochs;
            }
            tape.backward(loss)?;
            let mut grads: BTreeMap<String, Vec<f64>> = leaves
                .0
                .iter()
                .map(|(name, &t)| (name.clone(), tape.grad(t).to_vec()))
                .collect();
            drop(tape);
            clip_gradients(&mut grads, cfg.clip_norm);
            adam_step(&mut model.params, &grads, &mut state, step, lr, cfg)?;

            let eval_due = if cfg.eval_interval == 0 {
                idx == (n_batches - 1) / 2 || idx == n_batches - 1
            } else {
                step.is_multiple_of(cfg.eval_interval)
            };
            let mut ppl_field = "-".to_string();
            let mut evaled = None;
            if eval_due {
                let ppl = valid_perplexity(&model, valid_set, src_vocab, tgt_vocab)?;
                ppl_field = format!("{ppl}");
                evaled = Some(ppl);
                last_step_ppl = Some(ppl);
            }
            log.push_str(&format!("{step}\t{lr}\t{loss_val}\t{ppl_field}\n"));

            if let Some(ppl) = evaled {
                if !ppl.is_finite() {
                    stop = Some(StopReason::Diverged);
                    break 'epochs;
                }
                match &best {
                    Some((b, _)) if ppl >= *b => bad_evals += 1,
                    _ => {
                        best = Some((ppl, model.clone()));
                        bad_evals = 0;
                    }
                }
                if bad_evals >= cfg.patience {
                    stop = Some(StopReason::EarlyStopped);
                    break 'epochs;
                }
            }
        }
    }

    let stop = stop.unwrap_or(StopReason::MaxEpochs);
    let final_valid_ppl = match (stop, last_step_ppl) {
        (StopReason::Diverged, _) => f64::INFINITY,
        (_, Some(ppl)) => ppl,
        // The final state was never evaluated; score it now so the best
        // checkpoint can never be worse than what train() leaves behind.
        (_, None) => valid_perplexity(&model, valid_set, src_vocab, tgt_vocab)?,
    };
    if stop != StopReason::Diverged {
        match &best {
            Some((b, _)) if final_valid_ppl >= *b => {}
            _ => best = Some((final_valid_ppl, model.clone())),
        }
    }
    let (best_valid_ppl, best_model) = best.unwrap_or((f64::INFINITY, initial));

    Ok(TrainOutcome {
        model: best_model,
        best_valid_ppl,
        final_valid_ppl,
        steps: step,
        stop,
        log,
        k_histogram,
    })
}
