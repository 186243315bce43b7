//! Noise injection for denoising pre-training.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::syntax::{tokenize, TokenKind};

#[derive(Debug, Error, PartialEq)]
pub enum NoiseError {
    #[error("noise ratios must lie in [0, 1], got r0={r0} r1={r1}")]
    Ratio { r0: f64, r1: f64 },
    #[error("at least one corruption mode must be enabled")]
    NoModes,
    #[error("r0 ({r0}) must not exceed r1 ({r1})")]
    Order { r0: f64, r1: f64 },
    #[error("ramp_steps must be positive")]
    RampSteps,
    #[error("shuffle window must be at least 1")]
    Window,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseModes {
    pub mask: bool,
    pub shuffle: bool,
    pub drop: bool,
    /// Selected keywords are removed instead of receiving a random action.
    pub keyword_drop: bool,
    pub lang_token_insert: bool,
}

impl Default for NoiseModes {
    fn default() -> Self {
        NoiseModes {
            mask: true,
            shuffle: true,
            drop: true,
            keyword_drop: true,
            lang_token_insert: true,
        }
    }
}

/// Corruption ratio ramps linearly from `r0` to `r1` over `ramp_steps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSchedule {
    pub r0: f64,
    pub r1: f64,
    pub ramp_steps: u64,
    pub modes: NoiseModes,
    pub mask_token: String,
    pub lang_token: String,
    pub shuffle_window: usize,
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        NoiseSchedule {
            r0: 0.15,
            r1: 0.5,
            ramp_steps: 10_000,
            modes: NoiseModes::default(),
            mask_token: "<mask>".into(),
            lang_token: "<omp>".into(),
            shuffle_window: 3,
        }
    }
}

// Keywords are this many times more likely to be picked than other tokens.
const KEYWORD_BOOST: f64 = 3.0;

impl NoiseSchedule {
    pub fn validate(&self) -> Result<(), NoiseError> {
        if !(0.0..=1.0).contains(&self.r0) || !(0.0..=1.0).contains(&self.r1) {
            return Err(NoiseError::Ratio {
                r0: self.r0,
                r1: self.r1,
            });
        }
        if self.r0 > self.r1 {
            return Err(NoiseError::Order {
                r0: self.r0,
                r1: self.r1,
            });
        }
        if self.ramp_steps == 0 {
            return Err(NoiseError::RampSteps);
        }
        let m = self.modes;
        if !(m.mask || m.shuffle || m.drop || m.keyword_drop) {
            return Err(NoiseError::NoModes);
        }
        if self.shuffle_window == 0 {
            return Err(NoiseError::Window);
        }
        Ok(())
    }

    pub fn ratio(&self, step: u64) -> f64 {
        let t = (step as f64 / self.ramp_steps.max(1) as f64).min(1.0);
        self.r0 + (self.r1 - self.r0) * t
    }
}

/// Per-token selection probabilities with mean exactly `ratio`.
///
/// Keywords get `KEYWORD_BOOST` times the base rate; anything that would
/// exceed 1 is capped and the excess spread over the rest.
fn selection_probs(is_keyword: &[bool], ratio: f64) -> Vec<f64> {
    let n = is_keyword.len();
    if n == 0 {
        return Vec::new();
    }
    let raw: Vec<f64> = is_keyword
        .iter()
        .map(|&k| if k { KEYWORD_BOOST } else { 1.0 })
        .collect();
    let target = ratio * n as f64;
    let mut capped = vec![false; n];
    loop {
        let fixed = capped.iter().filter(|&&c| c).count() as f64;
        let free: f64 = raw.iter().zip(&capped).filter(|(_, &c)| !c).map(|(w, _)| w).sum();
        if free == 0.0 {
            return vec![1.0; n];
        }
        let scale = (target - fixed) / free;
        let mut changed = false;
        for i in 0..n {
            if !capped[i] && raw[i] * scale >= 1.0 {
                capped[i] = true;
                changed = true;
            }
        }
        if !changed {
            return (0..n)
                .map(|i| {
                    if capped[i] {
                        1.0
                    } else {
                        (raw[i] * scale).clamp(0.0, 1.0)
                    }
                })
                .collect();
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Action {
    Keep,
    Mask,
    Drop,
    Shuffle,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CorruptionOutcome {
    pub text: String,
    /// Tokens that were selected for corruption.
    pub affected: usize,
    /// Tokens eligible for selection (non-whitespace, non-comment).
    pub maskable: usize,
}

/// RNG for one corruption call; deterministic in `(seed, step)`.
pub fn corruption_rng(seed: u64, step: u64) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(step.to_le_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

/// Seed for one file of a corpus, so files do not share noise.
pub fn file_seed(seed: u64, name: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(name.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

/// Corrupt `code` at training step `step`, deterministically in `(seed, step)`.
///
/// Whitespace and comments stay in place, so the output keeps the input layout.
pub fn corrupt(code: &str, schedule: &NoiseSchedule, step: u64, seed: u64) -> Result<CorruptionOutcome, NoiseError> {
    corrupt_with_rng(code, schedule, step, &mut corruption_rng(seed, step))
}

pub fn corrupt_with_rng(
    code: &str,
    schedule: &NoiseSchedule,
    step: u64,
    rng: &mut impl Rng,
) -> Result<CorruptionOutcome, NoiseError> {
    schedule.validate()?;
    let tokens = tokenize(code);
    let sig: Vec<usize> = (0..tokens.len()).filter(|&i| !tokens[i].is_trivia()).collect();
    let kw: Vec<bool> = sig.iter().map(|&i| tokens[i].kind == TokenKind::Keyword).collect();
    let probs = selection_probs(&kw, schedule.ratio(step));

    let m = schedule.modes;
    let mut general = Vec::new();
    if m.mask {
        general.push(Action::Mask);
    }
    if m.drop {
        general.push(Action::Drop);
    }
    if m.shuffle {
        general.push(Action::Shuffle);
    }
    if general.is_empty() {
        // Only keyword dropping is on; other picks fall back to dropping.
        general.push(Action::Drop);
    }

    let mut affected = 0;
    let mut actions = Vec::with_capacity(sig.len());
    for (k, &p) in probs.iter().enumerate() {
        if !rng.gen_bool(p) {
            actions.push(Action::Keep);
            continue;
        }
        affected += 1;
        actions.push(if kw[k] && m.keyword_drop {
            Action::Drop
        } else {
            general[rng.gen_range(0..general.len())]
        });
    }

    let mut lexemes: Vec<&str> = sig.iter().map(|&i| tokens[i].lexeme.as_str()).collect();
    let w = schedule.shuffle_window;
    for (k, &action) in actions.iter().enumerate() {
        if action == Action::Shuffle {
            let lo = k.saturating_sub(w);
            let hi = (k + w).min(lexemes.len() - 1);
            lexemes.swap(k, rng.gen_range(lo..=hi));
        }
    }

    let mut text = String::with_capacity(code.len() + 16);
    if m.lang_token_insert {
        text.push_str(&schedule.lang_token);
        text.push(' ');
    }
    let mut k = 0;
    for (i, t) in tokens.iter().enumerate() {
        if k < sig.len() && sig[k] == i {
            match actions[k] {
                Action::Drop => {}
                Action::Mask => text.push_str(&schedule.mask_token),
                Action::Keep | Action::Shuffle => text.push_str(lexemes[k]),
            }
            k += 1;
        } else {
            text.push_str(&t.lexeme);
        }
    }
    Ok(CorruptionOutcome {
        text,
        affected,
        maskable: sig.len(),
    })
}
