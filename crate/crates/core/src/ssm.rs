//! The generalized multi-layer state-space machine.
//!
//! Layer `ℓ` at time `t` evolves by
//!
//! ```text
//! h[ℓ,t] = A[ℓ,t] · h[ℓ,t-1] + u[ℓ,t]
//! y[ℓ,t] = out[ℓ,t](h[ℓ,t], y[ℓ-1,t])
//! ```
//!
//! where `A[ℓ,t]` and the injected vector `u[ℓ,t]` may depend on the layer,
//! the time, the stream length and the current layer input `y[ℓ-1,t]`, and
//! `y[0,t] = emb(x[t], t)`. A [`LayerRule`] packages the per-token affine map
//! `(A, u)` together with the readout.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ring::{AffineMap, Precision, RingVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenKind {
    Data,
    Read,
    Thought,
    Padding,
}

impl TokenKind {
    pub const ALL: [TokenKind; 4] = [
        TokenKind::Data,
        TokenKind::Read,
        TokenKind::Thought,
        TokenKind::Padding,
    ];

    /// Bits needed to store a kind tag.
    pub const CODE_BITS: u32 = 2;

    pub fn code(self) -> u64 {
        match self {
            TokenKind::Data => 0,
            TokenKind::Read => 1,
            TokenKind::Thought => 2,
            TokenKind::Padding => 3,
        }
    }

    pub fn from_code(code: u64) -> Result<Self> {
        Self::ALL
            .get(code as usize)
            .copied()
            .ok_or_else(|| Error::Parse(format!("unknown token kind code {code}")))
    }
}

/// A tagged token; the payload holds integers of the consuming machine's precision.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Token {
    pub kind: TokenKind,
    pub payload: Vec<u64>,
}

impl Token {
    pub fn new(kind: TokenKind, payload: Vec<u64>) -> Self {
        Self { kind, payload }
    }

    pub fn data(payload: Vec<u64>) -> Self {
        Self::new(TokenKind::Data, payload)
    }

    pub fn scalar(value: u64) -> Self {
        Self::data(vec![value])
    }

    pub fn zeros(kind: TokenKind, width: usize) -> Self {
        Self::new(kind, vec![0; width])
    }

    pub fn width(&self) -> usize {
        self.payload.len()
    }

    /// Same kind, all-zero payload.
    pub fn zeroed(&self) -> Self {
        Self::zeros(self.kind, self.width())
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.kind {
            TokenKind::Data => "",
            TokenKind::Read => "read",
            TokenKind::Thought => "thought",
            TokenKind::Padding => "pad",
        };
        write!(f, "{tag}(")?;
        for (i, v) in self.payload.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

/// Where a rule is being evaluated. `n` is `None` when the stream length is
/// not known in advance (chain-of-thought runs).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StepContext {
    pub layer: usize,
    pub t: usize,
    pub n: Option<usize>,
}

impl StepContext {
    pub fn error(&self, message: impl Into<String>) -> Error {
        Error::Rule {
            layer: self.layer,
            t: self.t,
            message: message.into(),
        }
    }
}

/// One layer's dynamics: the per-token affine update and the readout.
///
/// Implementations must be pure: equal arguments give equal results.
pub trait LayerRule: Send + Sync {
    /// The map `h ↦ A·h + u` applied at this step.
    fn update(&self, ctx: &StepContext, input: &Token) -> Result<AffineMap>;

    fn readout(&self, ctx: &StepContext, state: &RingVector, input: &Token) -> Result<Token>;

    /// `false` when the readout ignores its input token, so the layer output
    /// is determined by `(ℓ, t, h)` alone.
    fn readout_reads_input(&self) -> bool {
        true
    }
}

pub type EmbedFn = Arc<dyn Fn(&Token, usize) -> Result<Token> + Send + Sync>;

/// The input embedding `emb(x, t)`.
#[derive(Clone, Default)]
pub enum Embed {
    #[default]
    Identity,
    /// Reduce every payload entry mod `2ᵖ`.
    Mask,
    Custom(EmbedFn),
}

impl fmt::Debug for Embed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Embed::Identity => write!(f, "Identity"),
            Embed::Mask => write!(f, "Mask"),
            Embed::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// Shape of the raw exogenous tokens a machine accepts: `width` coordinates
/// of at most `bits` bits each, optionally with a meaningful kind tag.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputAlphabet {
    pub width: usize,
    pub bits: u32,
    pub kinds: bool,
}

/// An `L`-layer machine with state dimension `d`, precision `p` and token
/// width `m`.
#[derive(Clone)]
pub struct SSMachine {
    dim: usize,
    precision: Precision,
    token_width: usize,
    embed: Embed,
    layers: Vec<Arc<dyn LayerRule>>,
    initial: Vec<RingVector>,
    alphabet: InputAlphabet,
}

impl fmt::Debug for SSMachine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SSMachine")
            .field("layers", &self.layers.len())
            .field("dim", &self.dim)
            .field("precision", &self.precision)
            .field("token_width", &self.token_width)
            .field("embed", &self.embed)
            .field("alphabet", &self.alphabet)
            .finish_non_exhaustive()
    }
}

impl SSMachine {
    pub fn new(
        dim: usize,
        precision: Precision,
        token_width: usize,
        layers: Vec<Arc<dyn LayerRule>>,
    ) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidMachine("at least one layer is required".into()));
        }
        if dim == 0 {
            return Err(Error::InvalidMachine("state dimension must be positive".into()));
        }
        if token_width == 0 {
            return Err(Error::InvalidMachine("token width must be positive".into()));
        }
        let initial = vec![RingVector::zeros(dim, precision); layers.len()];
        Ok(Self {
            dim,
            precision,
            token_width,
            embed: Embed::Identity,
            layers,
            initial,
            alphabet: InputAlphabet {
                width: token_width,
                bits: precision.bits(),
                kinds: false,
            },
        })
    }

    pub fn with_initial_states(mut self, initial: Vec<RingVector>) -> Result<Self> {
        if initial.len() != self.layers.len() {
            return Err(Error::DimensionMismatch {
                expected: self.layers.len(),
                actual: initial.len(),
            });
        }
        for h in &initial {
            self.check_state(h)?;
        }
        self.initial = initial;
        Ok(self)
    }

    pub fn with_embed(mut self, embed: Embed) -> Self {
        self.embed = embed;
        self
    }

    pub fn with_alphabet(mut self, alphabet: InputAlphabet) -> Self {
        self.alphabet = alphabet;
        self
    }

    /// Appends pass-through layers (`A = I`, `u = 0`, output = input) on top
    /// until the machine has `total` layers.
    pub fn pad_layers(&self, total: usize) -> Result<Self> {
        if total < self.layers.len() {
            return Err(Error::InvalidMachine(format!(
                "cannot pad {} layers down to {total}",
                self.layers.len()
            )));
        }
        let mut padded = self.clone();
        while padded.layers.len() < total {
            padded.layers.push(Arc::new(PassThroughLayer {
                dim: self.dim,
                precision: self.precision,
            }));
            padded.initial.push(RingVector::zeros(self.dim, self.precision));
        }
        Ok(padded)
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    pub fn token_width(&self) -> usize {
        self.token_width
    }

    pub fn alphabet(&self) -> InputAlphabet {
        self.alphabet
    }

    pub fn initial_states(&self) -> &[RingVector] {
        &self.initial
    }

    /// Rule of layer `layer` (1-based).
    pub fn rule(&self, layer: usize) -> &Arc<dyn LayerRule> {
        &self.layers[layer - 1]
    }

    /// True when the network output depends only on the top state and time.
    pub fn output_is_state_determined(&self) -> bool {
        !self.layers.last().expect("nonempty").readout_reads_input()
    }

    pub fn embed(&self, raw: &Token, t: usize) -> Result<Token> {
        let y = match &self.embed {
            Embed::Identity => raw.clone(),
            Embed::Mask => Token::new(
                raw.kind,
                raw.payload.iter().map(|&v| self.precision.reduce(v)).collect(),
            ),
            Embed::Custom(f) => f(raw, t)?,
        };
        self.check_token(&y, StepContext { layer: 0, t, n: None })?;
        Ok(y)
    }

    fn check_token(&self, y: &Token, ctx: StepContext) -> Result<()> {
        if y.width() != self.token_width {
            return Err(ctx.error(format!(
                "token width {} differs from machine width {}",
                y.width(),
                self.token_width
            )));
        }
        if let Some(&v) = y.payload.iter().find(|&&v| v > self.precision.mask()) {
            return Err(ctx.error(format!(
                "token entry {v} exceeds {} bits",
                self.precision.bits()
            )));
        }
        Ok(())
    }

    fn check_state(&self, h: &RingVector) -> Result<()> {
        if h.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: h.dim(),
            });
        }
        if h.precision() != self.precision {
            return Err(Error::PrecisionMismatch {
                left: self.precision.bits(),
                right: h.precision().bits(),
            });
        }
        Ok(())
    }

    /// The rule's affine map at `ctx`, shape-checked.
    pub fn layer_update(&self, ctx: &StepContext, input: &Token) -> Result<AffineMap> {
        let map = self.rule(ctx.layer).update(ctx, input)?;
        if map.dim() != self.dim || map.precision() != self.precision {
            return Err(ctx.error(format!(
                "rule produced a map of dimension {} at {} bits",
                map.dim(),
                map.precision()
            )));
        }
        Ok(map)
    }

    pub fn layer_readout(&self, ctx: &StepContext, state: &RingVector, input: &Token) -> Result<Token> {
        let y = self.rule(ctx.layer).readout(ctx, state, input)?;
        self.check_token(&y, *ctx)?;
        Ok(y)
    }

    /// One time step through all layers. Updates `states` in place and
    /// returns `y[0,t], …, y[L,t]`.
    pub fn step(
        &self,
        states: &mut [RingVector],
        raw: &Token,
        t: usize,
        n: Option<usize>,
    ) -> Result<Vec<Token>> {
        if states.len() != self.layers.len() {
            return Err(Error::DimensionMismatch {
                expected: self.layers.len(),
                actual: states.len(),
            });
        }
        if t == 0 {
            return Err(Error::MalformedStream("time starts at 1".into()));
        }
        let mut outputs = Vec::with_capacity(self.layers.len() + 1);
        outputs.push(self.embed(raw, t)?);
        for layer in 1..=self.layers.len() {
            let ctx = StepContext { layer, t, n };
            let input = &outputs[layer - 1];
            let h = &mut states[layer - 1];
            self.check_state(h)?;
            *h = self.layer_update(&ctx, input)?.apply(h)?;
            let y = self.layer_readout(&ctx, h, input)?;
            outputs.push(y);
        }
        Ok(outputs)
    }

    /// Runs the machine and records every state and output.
    pub fn run(&self, stream: &[Token]) -> Result<RunTrace> {
        if stream.is_empty() {
            return Err(Error::MalformedStream("empty stream".into()));
        }
        let n = stream.len();
        let layers = self.layers.len();
        let mut states = self.initial.clone();
        let mut trace = RunTrace {
            n,
            states: states.iter().map(|h| vec![h.clone()]).collect(),
            outputs: vec![Vec::with_capacity(n); layers + 1],
        };
        for (i, raw) in stream.iter().enumerate() {
            let outputs = self.step(&mut states, raw, i + 1, Some(n))?;
            for (l, h) in states.iter().enumerate() {
                trace.states[l].push(h.clone());
            }
            for (l, y) in outputs.into_iter().enumerate() {
                trace.outputs[l].push(y);
            }
        }
        Ok(trace)
    }

    /// Runs without recording a trace and returns `y[L,n]`.
    pub fn run_output(&self, stream: &[Token]) -> Result<Token> {
        if stream.is_empty() {
            return Err(Error::MalformedStream("empty stream".into()));
        }
        let n = stream.len();
        let mut states = self.initial.clone();
        let mut last = None;
        for (i, raw) in stream.iter().enumerate() {
            last = self.step(&mut states, raw, i + 1, Some(n))?.pop();
        }
        Ok(last.expect("nonempty stream"))
    }

    /// Affine summary of layer `layer` over the interval starting at time
    /// `start` and covering `inputs.len()` steps, given the layer inputs
    /// `y[ℓ-1,t]` on that interval. An empty interval yields the identity.
    pub fn block_summary(
        &self,
        layer: usize,
        start: usize,
        inputs: &[Token],
        n: Option<usize>,
    ) -> Result<AffineMap> {
        let mut acc = AffineMap::identity(self.dim, self.precision);
        for (offset, input) in inputs.iter().enumerate() {
            let ctx = StepContext {
                layer,
                t: start + offset,
                n,
            };
            acc = self.layer_update(&ctx, input)?.compose(&acc)?;
        }
        Ok(acc)
    }

    /// Recomputes one layer over an interval from its incoming state and
    /// inputs, returning the states and outputs at each time.
    pub fn replay_layer(
        &self,
        layer: usize,
        start: usize,
        incoming: &RingVector,
        inputs: &[Token],
        n: Option<usize>,
    ) -> Result<(Vec<RingVector>, Vec<Token>)> {
        let mut h = incoming.clone();
        let mut states = Vec::with_capacity(inputs.len());
        let mut outputs = Vec::with_capacity(inputs.len());
        for (offset, input) in inputs.iter().enumerate() {
            let ctx = StepContext {
                layer,
                t: start + offset,
                n,
            };
            h = self.layer_update(&ctx, input)?.apply(&h)?;
            outputs.push(self.layer_readout(&ctx, &h, input)?);
            states.push(h.clone());
        }
        Ok((states, outputs))
    }
}

/// `A = I`, `u = 0`, output = input.
#[derive(Clone, Copy, Debug)]
pub struct PassThroughLayer {
    pub dim: usize,
    pub precision: Precision,
}

impl LayerRule for PassThroughLayer {
    fn update(&self, _ctx: &StepContext, _input: &Token) -> Result<AffineMap> {
        Ok(AffineMap::identity(self.dim, self.precision))
    }

    fn readout(&self, _ctx: &StepContext, _state: &RingVector, input: &Token) -> Result<Token> {
        Ok(input.clone())
    }
}

/// Full execution record of a run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunTrace {
    n: usize,
    /// `states[ℓ-1][t]` for `t ∈ 0..=n`.
    states: Vec<Vec<RingVector>>,
    /// `outputs[ℓ][t-1]` for `ℓ ∈ 0..=L`, `t ∈ 1..=n`.
    outputs: Vec<Vec<Token>>,
}

impl RunTrace {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn layer_count(&self) -> usize {
        self.states.len()
    }

    /// `h[ℓ,t]` with `ℓ` 1-based and `t ∈ 0..=n`.
    pub fn state(&self, layer: usize, t: usize) -> &RingVector {
        &self.states[layer - 1][t]
    }

    /// `y[ℓ,t]` with `ℓ ∈ 0..=L` and `t ∈ 1..=n`.
    pub fn output(&self, layer: usize, t: usize) -> &Token {
        &self.outputs[layer][t - 1]
    }

    /// Layer inputs `y[ℓ-1,t]` over an inclusive time range.
    pub fn layer_inputs(&self, layer: usize, from: usize, to: usize) -> &[Token] {
        &self.outputs[layer - 1][from - 1..to]
    }

    pub fn final_output(&self) -> &Token {
        self.output(self.layer_count(), self.n)
    }

    /// Re-checks the recurrence at every recorded position by re-evaluating
    /// the rules on the recorded inputs. Returns the first violating `(ℓ, t)`.
    pub fn find_recurrence_violation(&self, machine: &SSMachine) -> Result<Option<(usize, usize)>> {
        for layer in 1..=self.layer_count() {
            for t in 1..=self.n {
                let ctx = StepContext {
                    layer,
                    t,
                    n: Some(self.n),
                };
                let input = self.output(layer - 1, t);
                let map = machine.rule(layer).update(&ctx, input)?;
                let expected = map
                    .linear()
                    .mul_vec(self.state(layer, t - 1))?
                    .add(map.offset())?;
                let out = machine.rule(layer).readout(&ctx, &expected, input)?;
                if &expected != self.state(layer, t) || &out != self.output(layer, t) {
                    return Ok(Some((layer, t)));
                }
            }
        }
        Ok(None)
    }

    /// One CSV row per `(ℓ, t)`: `layer,t,state,output`, vector entries
    /// separated by spaces.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("layer,t,state,output\n");
        for layer in 1..=self.layer_count() {
            for t in 1..=self.n {
                let join = |v: &[u64]| v.iter().map(u64::to_string).collect::<Vec<_>>().join(" ");
                out.push_str(&format!(
                    "{layer},{t},{},{}\n",
                    join(self.state(layer, t).values()),
                    join(&self.output(layer, t).payload)
                ));
            }
        }
        out
    }
}
