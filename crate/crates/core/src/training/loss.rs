use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{TrainConfig, TrainError};
use crate::model::ForwardOutput;
use crate::schema::LabelSchema;
use crate::tensor::{Graph, Real, Var};

/// Per-task loss values and their weighted total.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub lemma: f64,
    pub pos: f64,
    pub feats: BTreeMap<String, f64>,
    pub total: f64,
}

impl LossBreakdown {
    /// `λ_lemma·lemma + λ_pos·pos + Σ λ_k·feats[k]`
    pub fn weighted_total(&self, config: &TrainConfig) -> f64 {
        config.lambda_lemma * self.lemma
            + config.lambda_pos * self.pos
            + self
                .feats
                .iter()
                .map(|(k, v)| config.lambda_for(k) * v)
                .sum::<f64>()
    }
}

/// Masked mean cross-entropy over rows whose target is present.
fn masked_mean<T: Real>(
    g: &mut Graph<'_, T>,
    probs: Var,
    targets: &[Option<usize>],
) -> Result<Option<Var>, TrainError> {
    let count = targets.iter().filter(|t| t.is_some()).count();
    if count == 0 {
        return Ok(None);
    }
    let weight = T::of(1.0 / count as f64);
    let indices: Vec<usize> = targets.iter().map(|t| t.unwrap_or(0)).collect();
    let weights: Vec<T> = targets
        .iter()
        .map(|t| if t.is_some() { weight } else { T::zero() })
        .collect();
    Ok(Some(g.cross_entropy(probs, &indices, &weights)?))
}

/// Assemble the weighted multitask loss. POS and feature losses are means
/// over words with a target; the lemma loss is the mean over decoded words
/// of each word's mean per-step cross-entropy.
pub fn multitask_loss<T: Real>(
    g: &mut Graph<'_, T>,
    out: &ForwardOutput,
    schema: &LabelSchema,
    config: &TrainConfig,
) -> Result<(Var, LossBreakdown), TrainError> {
    let mut terms: Vec<(Var, f64)> = Vec::new();
    let mut breakdown = LossBreakdown::default();

    if let Some(pos) = masked_mean(g, out.pos, &out.pos_targets)? {
        breakdown.pos = g.scalar(pos).as_f64();
        terms.push((pos, config.lambda_pos));
    }

    for ((set, &probs), targets) in schema.features.iter().zip(&out.feats).zip(&out.feat_targets) {
        let value = match masked_mean(g, probs, targets)? {
            Some(loss) => {
                terms.push((loss, config.lambda_for(&set.key)));
                g.scalar(loss).as_f64()
            }
            None => 0.0,
        };
        breakdown.feats.insert(set.key.clone(), value);
    }

    if let Some(lemma) = &out.lemma {
        let words = lemma.targets.len() as f64;
        let mut lemma_total: Option<Var> = None;
        for (j, &probs) in lemma.steps.iter().enumerate() {
            let mut indices = Vec::with_capacity(lemma.targets.len());
            let mut weights = Vec::with_capacity(lemma.targets.len());
            for target in &lemma.targets {
                match target.get(j) {
                    Some(&symbol) => {
                        indices.push(symbol);
                        weights.push(T::of(1.0 / (target.len() as f64 * words)));
                    }
                    None => {
                        indices.push(0);
                        weights.push(T::zero());
                    }
                }
            }
            let step = g.cross_entropy(probs, &indices, &weights)?;
            lemma_total = Some(match lemma_total {
                Some(acc) => g.add(acc, step)?,
                None => step,
            });
        }
        if let Some(total) = lemma_total {
            breakdown.lemma = g.scalar(total).as_f64();
            terms.push((total, config.lambda_lemma));
        }
    }

    if terms.is_empty() {
        return Err(TrainError::NoTargets);
    }

    let mut total: Option<Var> = None;
    for (var, lambda) in terms {
        let scaled = g.scale(var, T::of(lambda))?;
        total = Some(match total {
            Some(acc) => g.add(acc, scaled)?,
            None => scaled,
        });
    }
    let total = total.expect("non-empty terms");
    breakdown.total = g.scalar(total).as_f64();
    Ok((total, breakdown))
}

/// Weighted running average of loss breakdowns.
#[derive(Clone, Debug, Default)]
pub struct LossAccumulator {
    weight: f64,
    sum: LossBreakdown,
}

impl LossAccumulator {
    pub fn add(&mut self, loss: &LossBreakdown, weight: f64) {
        self.weight += weight;
        self.sum.lemma += weight * loss.lemma;
        self.sum.pos += weight * loss.pos;
        for (k, v) in &loss.feats {
            *self.sum.feats.entry(k.clone()).or_default() += weight * v;
        }
    }

    pub fn finish(&self, config: &TrainConfig) -> LossBreakdown {
        let w = if self.weight > 0.0 { self.weight } else { 1.0 };
        let mut out = LossBreakdown {
            lemma: self.sum.lemma / w,
            pos: self.sum.pos / w,
            feats: self.sum.feats.iter().map(|(k, v)| (k.clone(), v / w)).collect(),
            total: 0.0,
        };
        out.total = out.weighted_total(config);
        out
    }
}
