//! Prompt rendering, tokenization and the reference text encoder.
//!
//! A pair `(h, t)` becomes the sentence
//! `I finally discovered the relation between <h> and <t> : <mask>`.
//! The representation at `<mask>` is the encoder-side relation vector; the
//! mean over each word's span is its word vector.
//!
//! The reference encoder is deliberately small: each token's input is its
//! embedding plus a position embedding plus the mean of all token embeddings
//! in the prompt, followed by a residual two-layer mixer. The global mean is
//! what lets the mask position depend on both words. Any encoder that
//! produces per-token rows with this shape can stand in for it.

use std::collections::HashMap;
use std::ops::RangeInclusive;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::autodiff::{Matrix, ParamId, ParamStore, Tape, Var};
use crate::error::{Error, Result};

pub const TEMPLATE_PREFIX: &str = "I finally discovered the relation between";
pub const MASK_TOKEN: &str = "<mask>";
pub const UNK_TOKEN: &str = "<unk>";
pub const DEFAULT_MAX_LEN: usize = 64;

const PREFIX_TOKENS: usize = 6;

/// Renders the relation prompt for a pair. Words are trimmed first.
pub fn render_template(head: &str, tail: &str) -> Result<String> {
    let (head, tail) = (head.trim(), tail.trim());
    if head.is_empty() || tail.is_empty() {
        return Err(Error::Prompt("head and tail must be non-empty".into()));
    }
    Ok(format!("{TEMPLATE_PREFIX} {head} and {tail} : {MASK_TOKEN}"))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenizedPrompt {
    pub tokens: Vec<String>,
    pub mask_index: usize,
    pub head_span: RangeInclusive<usize>,
    pub tail_span: RangeInclusive<usize>,
}

impl TokenizedPrompt {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Tokenizes a pair directly, truncating to `max_len` tokens.
pub fn tokenize_pair(head: &str, tail: &str, max_len: usize) -> Result<TokenizedPrompt> {
    let sentence = render_template(head, tail)?;
    let head_len = head.split_whitespace().count();
    let tail_len = tail.split_whitespace().count();
    let tokens: Vec<String> = sentence.split_whitespace().map(str::to_owned).collect();
    build_prompt(tokens, head_len, tail_len, max_len)
}

/// Tokenizes a sentence produced by [`render_template`], with the default
/// 64-token limit. Fails when the head/tail boundary is ambiguous, i.e. when
/// the middle part contains more than one standalone `and`.
pub fn tokenize(sentence: &str) -> Result<TokenizedPrompt> {
    tokenize_with_limit(sentence, DEFAULT_MAX_LEN)
}

pub fn tokenize_with_limit(sentence: &str, max_len: usize) -> Result<TokenizedPrompt> {
    let tokens: Vec<String> = sentence.split_whitespace().map(str::to_owned).collect();
    let prefix: Vec<&str> = TEMPLATE_PREFIX.split_whitespace().collect();
    let n = tokens.len();
    let well_formed = n >= PREFIX_TOKENS + 5
        && tokens[..PREFIX_TOKENS].iter().zip(&prefix).all(|(a, b)| a == b)
        && tokens[n - 1] == MASK_TOKEN
        && tokens[n - 2] == ":";
    if !well_formed {
        return Err(Error::Prompt(format!("not a relation prompt: {sentence:?}")));
    }
    let middle = &tokens[PREFIX_TOKENS..n - 2];
    let ands: Vec<usize> = middle
        .iter()
        .enumerate()
        .filter(|(i, t)| *t == "and" && *i > 0 && *i + 1 < middle.len())
        .map(|(i, _)| i)
        .collect();
    if ands.len() != 1 {
        return Err(Error::Prompt(format!(
            "cannot resolve head/tail spans in {sentence:?}"
        )));
    }
    let head_len = ands[0];
    let tail_len = middle.len() - head_len - 1;
    build_prompt(tokens, head_len, tail_len, max_len)
}

fn build_prompt(
    mut tokens: Vec<String>,
    head_len: usize,
    tail_len: usize,
    max_len: usize,
) -> Result<TokenizedPrompt> {
    let n = tokens.len();
    debug_assert_eq!(n, PREFIX_TOKENS + head_len + tail_len + 3);
    // Drop from the left; the mask is the last token and always survives.
    let cut = n.saturating_sub(max_len);
    if cut >= n {
        return Err(Error::Prompt("maximum length leaves no room for the mask".into()));
    }
    tokens.drain(..cut);
    let shift = |i: usize| i.checked_sub(cut);
    let head_start = PREFIX_TOKENS.max(cut);
    let head_end = PREFIX_TOKENS + head_len - 1;
    let tail_start = PREFIX_TOKENS + head_len + 1;
    let tail_end = tail_start + tail_len - 1;
    if head_start > head_end || shift(tail_start).is_none() {
        return Err(Error::Prompt(format!(
            "truncation to {max_len} tokens removes the head word"
        )));
    }
    Ok(TokenizedPrompt {
        mask_index: tokens.len() - 1,
        head_span: head_start - cut..=head_end - cut,
        tail_span: tail_start - cut..=tail_end - cut,
        tokens,
    })
}

/// Case-folded token vocabulary. Id 0 is `<unk>`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Scaffold tokens first, then every whitespace token of `words` in
    /// first-seen order.
    pub fn build<'a>(words: impl IntoIterator<Item = &'a str>) -> Self {
        let mut v = Self {
            tokens: Vec::new(),
            index: HashMap::new(),
        };
        v.push(UNK_TOKEN);
        v.push(MASK_TOKEN);
        for t in TEMPLATE_PREFIX.split_whitespace().chain(["and", ":"]) {
            v.push(t);
        }
        for w in words {
            for t in w.split_whitespace() {
                v.push(t);
            }
        }
        v
    }

    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Checkpoint(format!("duplicate vocabulary token {t:?}")));
            }
        }
        if tokens.first().map(String::as_str) != Some(UNK_TOKEN) {
            return Err(Error::Checkpoint("vocabulary must start with <unk>".into()));
        }
        Ok(Self { tokens, index })
    }

    fn push(&mut self, token: &str) {
        let folded = fold(token);
        if !self.index.contains_key(&folded) {
            self.index.insert(folded.clone(), self.tokens.len());
            self.tokens.push(folded);
        }
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(&fold(token)).copied().unwrap_or(0)
    }

    pub fn ids(&self, prompt: &TokenizedPrompt) -> Vec<usize> {
        prompt.tokens.iter().map(|t| self.id(t)).collect()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

fn fold(token: &str) -> String {
    if token == MASK_TOKEN {
        token.to_owned()
    } else {
        token.to_lowercase()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EncoderParams {
    pub token_embeddings: ParamId,
    pub position_embeddings: ParamId,
    pub mixer_in: ParamId,
    pub mixer_in_bias: ParamId,
    pub mixer_out: ParamId,
    pub mixer_out_bias: ParamId,
}

impl EncoderParams {
    pub fn init(
        store: &mut ParamStore,
        vocab_size: usize,
        max_len: usize,
        dim: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if dim == 0 || max_len == 0 {
            return Err(Error::Config(
                "encoder dimension and max_len must be positive".into(),
            ));
        }
        let mut gaussian = |rows: usize, cols: usize, sigma: f64| {
            let normal = Normal::new(0.0, sigma).expect("valid sigma");
            Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| normal.sample(rng)).collect())
                .expect("sized")
        };
        let width = 1.0 / (dim as f64).sqrt();
        Ok(Self {
            token_embeddings: store.add("textenc.token_embeddings", gaussian(vocab_size, dim, 0.5)),
            position_embeddings: store.add("textenc.position_embeddings", gaussian(max_len, dim, 0.02)),
            mixer_in: store.add("textenc.mixer_in", gaussian(dim, dim, width)),
            mixer_in_bias: store.add("textenc.mixer_in_bias", Matrix::zeros(1, dim)),
            mixer_out: store.add("textenc.mixer_out", gaussian(dim, dim, width)),
            mixer_out_bias: store.add("textenc.mixer_out_bias", Matrix::zeros(1, dim)),
        })
    }

    pub fn bind(store: &ParamStore) -> Result<Self> {
        let find = |name: &str| {
            store
                .find(name)
                .ok_or_else(|| Error::Checkpoint(format!("missing parameter {name}")))
        };
        Ok(Self {
            token_embeddings: find("textenc.token_embeddings")?,
            position_embeddings: find("textenc.position_embeddings")?,
            mixer_in: find("textenc.mixer_in")?,
            mixer_in_bias: find("textenc.mixer_in_bias")?,
            mixer_out: find("textenc.mixer_out")?,
            mixer_out_bias: find("textenc.mixer_out_bias")?,
        })
    }

    pub fn dim(&self, store: &ParamStore) -> usize {
        store.get(self.token_embeddings).cols()
    }

    pub fn max_len(&self, store: &ParamStore) -> usize {
        store.get(self.position_embeddings).rows()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct EncoderOutput {
    /// `1 × D` representation at the mask position.
    pub mask: Var,
    pub head: Var,
    pub tail: Var,
    /// `n × D`, one row per token.
    pub tokens: Var,
}

/// Encodes a tokenized prompt whose token ids come from `token_ids`.
pub fn encode(
    tape: &mut Tape,
    store: &ParamStore,
    params: &EncoderParams,
    prompt: &TokenizedPrompt,
    token_ids: &[usize],
) -> Result<EncoderOutput> {
    let n = prompt.len();
    if n > params.max_len(store) {
        return Err(Error::Prompt(format!(
            "prompt of {n} tokens exceeds encoder max_len {}",
            params.max_len(store)
        )));
    }
    if token_ids.len() != n {
        return Err(Error::shape("encode", "token ids do not match prompt"));
    }
    let table = tape.param(store, params.token_embeddings)?;
    let embeds = tape.select_rows(table, token_ids)?;
    let positions = tape.param(store, params.position_embeddings)?;
    let rows: Vec<usize> = (0..n).collect();
    let positions = tape.select_rows(positions, &rows)?;
    let mean = tape.mean_rows(embeds)?;
    let context = tape.repeat_rows(mean, n)?;
    let x = tape.add(embeds, positions)?;
    let x = tape.add(x, context)?;

    let hidden = affine(tape, store, x, params.mixer_in, params.mixer_in_bias)?;
    let hidden = tape.tanh(hidden)?;
    let delta = affine(tape, store, hidden, params.mixer_out, params.mixer_out_bias)?;
    let reps = tape.add(x, delta)?;

    let mask = tape.select_rows(reps, &[prompt.mask_index])?;
    let head = span_mean(tape, reps, &prompt.head_span)?;
    let tail = span_mean(tape, reps, &prompt.tail_span)?;
    Ok(EncoderOutput {
        mask,
        head,
        tail,
        tokens: reps,
    })
}

fn affine(tape: &mut Tape, store: &ParamStore, x: Var, w: ParamId, b: ParamId) -> Result<Var> {
    let n = tape.value(x).rows();
    let w = tape.param(store, w)?;
    let wt = tape.transpose(w)?;
    let y = tape.matmul(x, wt)?;
    let b = tape.param(store, b)?;
    let b = tape.repeat_rows(b, n)?;
    tape.add(y, b)
}

fn span_mean(tape: &mut Tape, reps: Var, span: &RangeInclusive<usize>) -> Result<Var> {
    let rows: Vec<usize> = span.clone().collect();
    let picked = tape.select_rows(reps, &rows)?;
    tape.mean_rows(picked)
}
