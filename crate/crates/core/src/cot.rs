//! Chain-of-thought execution and its equivalence with bounded-memory
//! streaming.
//!
//! After each exogenous token (online mode) or only after the last one
//! (offline mode), a [`ThoughtPolicy`] inspects the machine configuration and
//! may feed further thought tokens before the next exogenous token.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::protocol::{compile_ssm_forward_protocol, ForwardTranscript};
use crate::ring::{ceil_log2, BitString, Precision, RingMatrix, RingVector, AffineMap};
use crate::rules::FnRule;
use crate::ssm::{Embed, InputAlphabet, SSMachine, StepContext, Token, TokenKind};
use crate::streaming::{OutputAlphabet, OutputFn, StreamingAlgorithm, TransitionFn};
use crate::task::CompositionInstance;

/// Everything a policy may look at: the layer states, the top output of the
/// last processed step, the number of processed steps and the number of
/// thoughts already emitted since the last exogenous token.
#[derive(Clone, Copy, Debug)]
pub struct Configuration<'a> {
    pub states: &'a [RingVector],
    pub last_output: &'a Token,
    pub t: usize,
    pub emitted: usize,
}

/// Decides the next thought token, or `None` to let the next exogenous
/// token in. Must be deterministic.
pub trait ThoughtPolicy: Send + Sync {
    fn next_thought(&self, config: &Configuration<'_>) -> Result<Option<Token>>;
}

/// Never thinks.
#[derive(Clone, Copy, Debug, Default)]
pub struct NullPolicy;

impl ThoughtPolicy for NullPolicy {
    fn next_thought(&self, _config: &Configuration<'_>) -> Result<Option<Token>> {
        Ok(None)
    }
}

/// Emits `count` copies of `token` at every opportunity.
#[derive(Clone, Debug)]
pub struct RepeatPolicy {
    pub count: usize,
    pub token: Token,
}

impl ThoughtPolicy for RepeatPolicy {
    fn next_thought(&self, config: &Configuration<'_>) -> Result<Option<Token>> {
        Ok((config.emitted < self.count).then(|| self.token.clone()))
    }
}

/// Re-emits the last output, retagged as a thought, exactly once.
#[derive(Clone, Copy, Debug, Default)]
pub struct ExposePolicy;

impl ThoughtPolicy for ExposePolicy {
    fn next_thought(&self, config: &Configuration<'_>) -> Result<Option<Token>> {
        Ok((config.emitted == 0)
            .then(|| Token::new(TokenKind::Thought, config.last_output.payload.clone())))
    }
}

pub struct FnPolicy<F>(pub F);

impl<F> ThoughtPolicy for FnPolicy<F>
where
    F: Fn(&Configuration<'_>) -> Result<Option<Token>> + Send + Sync,
{
    fn next_thought(&self, config: &Configuration<'_>) -> Result<Option<Token>> {
        (self.0)(config)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CoTMode {
    Online,
    Offline,
}

#[derive(Clone)]
pub struct CoTMachine {
    pub base: SSMachine,
    pub policy: Arc<dyn ThoughtPolicy>,
    pub mode: CoTMode,
    /// Maximum number of thoughts after any one exogenous token.
    pub budget: usize,
}

impl fmt::Debug for CoTMachine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoTMachine")
            .field("base", &self.base)
            .field("mode", &self.mode)
            .field("budget", &self.budget)
            .finish_non_exhaustive()
    }
}

impl CoTMachine {
    pub fn new(base: SSMachine, policy: Arc<dyn ThoughtPolicy>, mode: CoTMode, budget: usize) -> Self {
        Self {
            base,
            policy,
            mode,
            budget,
        }
    }

    /// The base machine without chain of thought.
    pub fn plain(base: SSMachine) -> Self {
        Self::new(base, Arc::new(NullPolicy), CoTMode::Online, 0)
    }

    pub fn memory_account(&self, horizon: usize) -> MemoryAccount {
        MemoryAccount::for_machine(&self.base, horizon)
    }

    /// Feeds thoughts from the current configuration until the policy stops.
    /// Returns the number fed; `position` is only used for error reporting.
    fn think(
        &self,
        states: &mut [RingVector],
        last: &mut Token,
        t: &mut usize,
        position: usize,
        horizon: Option<usize>,
        mut record: Option<&mut Vec<Token>>,
    ) -> Result<usize> {
        let mut emitted = 0;
        loop {
            let config = Configuration {
                states: &*states,
                last_output: &*last,
                t: *t,
                emitted,
            };
            let Some(thought) = self.policy.next_thought(&config)? else {
                return Ok(emitted);
            };
            if emitted == self.budget {
                return Err(Error::ThoughtBudgetExceeded {
                    position,
                    budget: self.budget,
                });
            }
            *t += 1;
            if let Some(h) = horizon {
                if *t > h {
                    return Err(Error::HorizonExceeded { horizon: h });
                }
            }
            *last = self.base.step(states, &thought, *t, None)?.pop().expect("nonempty");
            if let Some(r) = record.as_deref_mut() {
                r.push(thought);
            }
            emitted += 1;
        }
    }
}

/// Persistent-memory accounting for simulating a machine by a streaming
/// algorithm.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct MemoryAccount {
    /// `L·d·p`.
    pub state_bits: usize,
    /// `⌈log₂(horizon + 1)⌉`.
    pub counter_bits: usize,
    /// Register for the last top output; zero when the top readout depends
    /// only on the time and the top state.
    pub output_bits: usize,
    pub total: usize,
}

impl MemoryAccount {
    pub fn for_machine(machine: &SSMachine, horizon: usize) -> Self {
        let p = machine.precision().bits() as usize;
        let state_bits = machine.layer_count() * machine.dim() * p;
        let counter_bits = ceil_log2(horizon as u128 + 1) as usize;
        let output_bits = if machine.output_is_state_determined() {
            0
        } else {
            TokenKind::CODE_BITS as usize + machine.token_width() * p
        };
        Self {
            state_bits,
            counter_bits,
            output_bits,
            total: state_bits + counter_bits + output_bits,
        }
    }
}

/// One processed step of a chain-of-thought run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ProcessedToken {
    pub token: Token,
    pub exogenous: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CoTRunRecord {
    pub processed: Vec<ProcessedToken>,
    /// `k_i` for each exogenous position `i`.
    pub thoughts: Vec<usize>,
    pub output: Token,
    /// Accounting with the horizon set to the number of processed steps.
    pub memory: MemoryAccount,
}

impl CoTRunRecord {
    pub fn steps(&self) -> usize {
        self.processed.len()
    }

    pub fn total_thoughts(&self) -> usize {
        self.thoughts.iter().sum()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "stream": self.processed,
            "thoughts": self.thoughts,
            "output": self.output,
            "memory": self.memory,
        })
    }
}

pub fn run_cot(machine: &CoTMachine, stream: &[Token]) -> Result<CoTRunRecord> {
    if stream.is_empty() {
        return Err(Error::MalformedStream("empty stream".into()));
    }
    let base = &machine.base;
    let mut states = base.initial_states().to_vec();
    let mut t = 0;
    let mut last = Token::zeros(TokenKind::Data, base.token_width());
    let mut thoughts = Vec::with_capacity(stream.len());
    let mut processed = Vec::with_capacity(stream.len());
    for (i, x) in stream.iter().enumerate() {
        t += 1;
        last = base.step(&mut states, x, t, None)?.pop().expect("nonempty");
        processed.push(ProcessedToken {
            token: x.clone(),
            exogenous: true,
        });
        let may_think = machine.mode == CoTMode::Online || i + 1 == stream.len();
        let mut fed = Vec::new();
        let k = if may_think {
            machine.think(&mut states, &mut last, &mut t, i + 1, None, Some(&mut fed))?
        } else {
            0
        };
        processed.extend(fed.into_iter().map(|token| ProcessedToken {
            token,
            exogenous: false,
        }));
        thoughts.push(k);
    }
    Ok(CoTRunRecord {
        processed,
        thoughts,
        output: last,
        memory: machine.memory_account(t),
    })
}

/// Serialized `(h[1], …, h[L], t, y_last)` for the streaming simulation.
#[derive(Clone, Copy, Debug)]
struct MachineMemory {
    layers: usize,
    dim: usize,
    precision: Precision,
    counter_bits: usize,
    width: usize,
    register: bool,
}

impl MachineMemory {
    fn bits(&self) -> usize {
        let p = self.precision.bits() as usize;
        self.layers * self.dim * p
            + self.counter_bits
            + if self.register {
                TokenKind::CODE_BITS as usize + self.width * p
            } else {
                0
            }
    }

    fn encode(&self, states: &[RingVector], t: usize, last: &Token) -> Result<BitString> {
        let p = self.precision.bits();
        let mut out = BitString::with_capacity(self.bits());
        for h in states {
            for &v in h.values() {
                out.push_uint(v, p);
            }
        }
        if self.counter_bits < 64 && (t as u64) >> self.counter_bits != 0 {
            return Err(Error::HorizonExceeded {
                horizon: (1usize << self.counter_bits) - 1,
            });
        }
        out.push_uint(t as u64, self.counter_bits as u32);
        if self.register {
            out.push_uint(last.kind.code(), TokenKind::CODE_BITS);
            for &v in &last.payload {
                out.push_uint(v, p);
            }
        }
        Ok(out)
    }

    fn decode(&self, bits: &BitString) -> Result<(Vec<RingVector>, usize, Option<Token>)> {
        if bits.len() != self.bits() {
            return Err(Error::DimensionMismatch {
                expected: self.bits(),
                actual: bits.len(),
            });
        }
        let p = self.precision.bits();
        let mut at = 0;
        let mut read = |w: u32| {
            let v = bits.read_uint(at, w);
            at += w as usize;
            v
        };
        let states = (0..self.layers)
            .map(|_| RingVector::new(self.precision, (0..self.dim).map(|_| read(p)).collect()))
            .collect::<Result<Vec<_>>>()?;
        let t = read(self.counter_bits as u32) as usize;
        let last = if self.register {
            let kind = TokenKind::from_code(read(TokenKind::CODE_BITS))?;
            Some(Token::new(kind, (0..self.width).map(|_| read(p)).collect()))
        } else {
            None
        };
        Ok((states, t, last))
    }
}

fn top_output(machine: &SSMachine, states: &[RingVector], t: usize, register: Option<Token>) -> Result<Token> {
    match register {
        Some(y) => Ok(y),
        None => {
            let layer = machine.layer_count();
            let ctx = StepContext { layer, t, n: None };
            let dummy = Token::zeros(TokenKind::Data, machine.token_width());
            machine.layer_readout(&ctx, &states[layer - 1], &dummy)
        }
    }
}

/// A streaming algorithm computing the same output as `machine` on every
/// stream whose chain-of-thought run takes at most `horizon` internal steps.
///
/// The memory is the serialized layer stack, a step counter and, when the
/// top readout looks at its input, a register for the last output. Offline
/// continuations run inside the output function.
pub fn ssm_to_streaming(machine: &CoTMachine, horizon: usize) -> Result<(StreamingAlgorithm, MemoryAccount)> {
    let account = machine.memory_account(horizon);
    let layout = MachineMemory {
        layers: machine.base.layer_count(),
        dim: machine.base.dim(),
        precision: machine.base.precision(),
        counter_bits: account.counter_bits,
        width: machine.base.token_width(),
        register: account.output_bits > 0,
    };
    debug_assert_eq!(layout.bits(), account.total);
    let empty = Token::zeros(TokenKind::Data, layout.width);
    let initial = layout.encode(machine.base.initial_states(), 0, &empty)?;

    let m = machine.clone();
    let transition: TransitionFn = Arc::new(move |memory: &BitString, x: &Token| {
        let (mut states, mut t, _) = layout.decode(memory)?;
        t += 1;
        if t > horizon {
            return Err(Error::HorizonExceeded { horizon });
        }
        let mut last = m.base.step(&mut states, x, t, None)?.pop().expect("nonempty");
        if m.mode == CoTMode::Online {
            let position = t;
            m.think(&mut states, &mut last, &mut t, position, Some(horizon), None)?;
        }
        layout.encode(&states, t, &last)
    });

    let m = machine.clone();
    let output: OutputFn = Arc::new(move |memory: &BitString| {
        let (mut states, mut t, register) = layout.decode(memory)?;
        if t == 0 {
            return Err(Error::MalformedStream("empty stream".into()));
        }
        let mut last = top_output(&m.base, &states, t, register)?;
        if m.mode == CoTMode::Offline {
            let position = t;
            m.think(&mut states, &mut last, &mut t, position, Some(horizon), None)?;
        }
        Ok(last)
    });

    let alg = StreamingAlgorithm::new(
        layout.bits(),
        initial,
        transition,
        output,
        machine.base.alphabet(),
        OutputAlphabet {
            width: layout.width,
            bits: layout.precision.bits(),
            kinds: true,
        },
    )?
    .with_description(format!(
        "simulation of a {}-layer machine (d = {}, p = {})",
        layout.layers,
        layout.dim,
        layout.precision.bits()
    ));
    Ok((alg, account))
}

/// Splits tokens of a `(width, bits, kinds)` alphabet into limbs of
/// `limb_bits` bits, the kind code first, every coordinate MSB-first.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LimbCodec {
    pub width: usize,
    pub bits: u32,
    pub kinds: bool,
    pub limb_bits: u32,
}

impl LimbCodec {
    fn per_value(&self) -> usize {
        self.bits.max(1).div_ceil(self.limb_bits) as usize
    }

    fn kind_limbs(&self) -> usize {
        if self.kinds {
            TokenKind::CODE_BITS.div_ceil(self.limb_bits) as usize
        } else {
            0
        }
    }

    pub fn len(&self) -> usize {
        self.kind_limbs() + self.width * self.per_value()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn split(&self, v: u64, limbs: usize, out: &mut Vec<u64>) {
        let mask = if self.limb_bits >= 64 {
            u64::MAX
        } else {
            (1u64 << self.limb_bits) - 1
        };
        for k in (0..limbs).rev() {
            let shift = k as u32 * self.limb_bits;
            out.push(if shift >= 64 { 0 } else { (v >> shift) & mask });
        }
    }

    fn join(&self, limbs: &[u64]) -> u64 {
        limbs.iter().fold(0u64, |acc, &l| {
            if self.limb_bits >= 64 {
                l
            } else {
                (acc << self.limb_bits) | l
            }
        })
    }

    pub fn encode(&self, x: &Token) -> Result<Vec<u64>> {
        if x.width() != self.width {
            return Err(Error::DimensionMismatch {
                expected: self.width,
                actual: x.width(),
            });
        }
        let mut out = Vec::with_capacity(self.len());
        if self.kinds {
            self.split(x.kind.code(), self.kind_limbs(), &mut out);
        }
        for &v in &x.payload {
            if self.bits < 64 && v >> self.bits != 0 {
                return Err(Error::ValueOutOfRange {
                    value: v,
                    bits: self.bits,
                });
            }
            self.split(v, self.per_value(), &mut out);
        }
        Ok(out)
    }

    pub fn decode(&self, limbs: &[u64]) -> Result<Token> {
        if limbs.len() < self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                actual: limbs.len(),
            });
        }
        let (kind_part, rest) = limbs.split_at(self.kind_limbs());
        let kind = if self.kinds {
            TokenKind::from_code(self.join(kind_part))?
        } else {
            TokenKind::Data
        };
        let payload = rest[..self.width * self.per_value()]
            .chunks(self.per_value())
            .map(|c| {
                let v = self.join(c);
                if self.bits < 64 && v >> self.bits != 0 {
                    Err(Error::NotInEncodingImage)
                } else {
                    Ok(v)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Token::new(kind, payload))
    }
}

/// `Enc`: the `S` memory bits, left-padded with zeros to `d·p` bits, cut
/// into `d` blocks of `p` bits, most significant block first.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MemoryEncoding {
    pub state_bits: usize,
    pub dim: usize,
    pub precision: Precision,
}

impl MemoryEncoding {
    pub fn new(state_bits: usize, dim: usize, precision: Precision) -> Result<Self> {
        let available = dim * precision.bits() as usize;
        if available < state_bits {
            return Err(Error::InsufficientMemory {
                needed: state_bits,
                available,
            });
        }
        Ok(Self {
            state_bits,
            dim,
            precision,
        })
    }

    fn pad(&self) -> usize {
        self.dim * self.precision.bits() as usize - self.state_bits
    }

    pub fn encode(&self, memory: &BitString) -> Result<RingVector> {
        if memory.len() != self.state_bits {
            return Err(Error::DimensionMismatch {
                expected: self.state_bits,
                actual: memory.len(),
            });
        }
        let mut bits = BitString::zeros(self.pad());
        bits.extend(memory);
        let p = self.precision.bits();
        let values = (0..self.dim).map(|i| bits.read_uint(i * p as usize, p)).collect();
        RingVector::new(self.precision, values)
    }

    pub fn decode(&self, h: &RingVector) -> Result<BitString> {
        if h.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: h.dim(),
            });
        }
        let mut bits = BitString::with_capacity(self.dim * self.precision.bits() as usize);
        for &v in h.values() {
            bits.push_uint(v, self.precision.bits());
        }
        if bits.bits()[..self.pad()].iter().any(|&b| b) {
            return Err(Error::NotInEncodingImage);
        }
        Ok(bits.slice(self.pad(), self.state_bits))
    }

    pub fn contains(&self, h: &RingVector) -> bool {
        self.decode(h).is_ok()
    }
}

/// A single-layer online chain-of-thought machine simulating a streaming
/// algorithm, with the codecs needed to read its output.
#[derive(Clone, Debug)]
pub struct CompiledStreaming {
    pub machine: CoTMachine,
    pub input_codec: LimbCodec,
    pub output_codec: LimbCodec,
    pub encoding: MemoryEncoding,
}

impl CompiledStreaming {
    /// The algorithm's output from the machine's final output token.
    pub fn decode_output(&self, y: &Token) -> Result<Token> {
        self.output_codec.decode(&y.payload)
    }

    pub fn run(&self, stream: &[Token]) -> Result<(Token, CoTRunRecord)> {
        let record = run_cot(&self.machine, stream)?;
        Ok((self.decode_output(&record.output)?, record))
    }
}

/// Compiles a streaming algorithm into a one-layer machine with state
/// dimension `d`, precision `p` and one thought per exogenous token.
///
/// Token layout (width `m`): `[x limbs (m_x) | h (d) | bias 1 | zeros]`.
/// At odd times `A = I`, `u = 0` and the readout exposes `(x, h, 1)`; the
/// policy feeds it back as a thought, and at the following even time
/// `A = 0`, `u = Enc(F(Dec(h), x)) · bias`, with readout `Enc_Y(G(Dec(h)))`.
pub fn streaming_to_cot_ssm(alg: &StreamingAlgorithm, dim: usize, bits: u32) -> Result<CompiledStreaming> {
    let precision = Precision::new(bits)?;
    let encoding = MemoryEncoding::new(alg.state_bits(), dim, precision)?;
    let input = alg.input_alphabet();
    let input_codec = LimbCodec {
        width: input.width,
        bits: input.bits,
        kinds: input.kinds,
        limb_bits: bits,
    };
    let out = alg.output_alphabet();
    let output_codec = LimbCodec {
        width: out.width,
        bits: out.bits,
        kinds: out.kinds,
        limb_bits: bits,
    };
    let mx = input_codec.len();
    let bias = mx + dim;
    let width = (bias + 1).max(output_codec.len());

    let embed = Embed::Custom(Arc::new(move |raw: &Token, t: usize| {
        if t % 2 == 1 {
            let mut payload = input_codec.encode(raw)?;
            payload.resize(width, 0);
            payload[bias] = 1;
            Ok(Token::data(payload))
        } else {
            Ok(raw.clone())
        }
    }));

    let step_alg = alg.clone();
    let update = move |ctx: &StepContext, y: &Token| -> Result<AffineMap> {
        if ctx.t % 2 == 1 {
            return Ok(AffineMap::identity(dim, precision));
        }
        let memory = encoding.decode(&RingVector::new(precision, y.payload[mx..bias].to_vec())?)?;
        let x = input_codec.decode(&y.payload[..mx])?;
        let next = encoding.encode(&step_alg.step(&memory, &x)?)?;
        let scale = y.payload[bias];
        let u = RingVector::wrapping(
            precision,
            next.values().iter().map(|&v| v.wrapping_mul(scale)).collect(),
        );
        AffineMap::new(RingMatrix::zeros(dim, precision), u)
    };
    let out_alg = alg.clone();
    let readout = move |ctx: &StepContext, h: &RingVector, y: &Token| -> Result<Token> {
        let mut payload;
        if ctx.t % 2 == 1 {
            payload = y.payload[..mx].to_vec();
            payload.extend_from_slice(h.values());
            payload.push(1);
        } else {
            payload = output_codec.encode(&out_alg.output(&encoding.decode(h)?)?)?;
        }
        payload.resize(width, 0);
        Ok(Token::data(payload))
    };
    let base = SSMachine::new(dim, precision, width, vec![Arc::new(FnRule::new(update, readout))])?
        .with_embed(embed)
        .with_alphabet(InputAlphabet {
            width: input.width,
            bits: input.bits,
            kinds: input.kinds,
        })
        .with_initial_states(vec![encoding.encode(alg.initial())?])?;
    Ok(CompiledStreaming {
        machine: CoTMachine::new(base, Arc::new(ExposePolicy), CoTMode::Online, 1),
        input_codec,
        output_codec,
        encoding,
    })
}

/// The forward protocol on the exogenous stream, followed by player `K`'s
/// local simulation of the offline continuation.
#[derive(Clone, Debug)]
pub struct OfflineProtocolRun {
    pub transcript: ForwardTranscript,
    pub thoughts: usize,
    pub output: Token,
}

pub fn offline_protocol_compile(machine: &CoTMachine, inst: &CompositionInstance) -> Result<OfflineProtocolRun> {
    if machine.mode != CoTMode::Offline {
        return Err(Error::Protocol("offline compilation needs an offline machine".into()));
    }
    let transcript = compile_ssm_forward_protocol(&machine.base, inst)?;
    let k = transcript.players();
    let mut states: Vec<RingVector> = transcript.outgoing.iter().map(|layer| layer[k - 1].clone()).collect();
    let mut last = transcript.output.clone();
    let mut t = transcript.setup.n;
    let thoughts = machine.think(&mut states, &mut last, &mut t, transcript.setup.n, None, None)?;
    Ok(OfflineProtocolRun {
        transcript,
        thoughts,
        output: last,
    })
}

/// Streaming simulation followed by recompilation into a `d`-dimensional
/// machine at precision `p`.
#[derive(Clone, Debug)]
pub struct Reencoded {
    pub streaming: StreamingAlgorithm,
    pub account: MemoryAccount,
    pub compiled: CompiledStreaming,
}

impl Reencoded {
    pub fn run(&self, stream: &[Token]) -> Result<Token> {
        Ok(self.compiled.run(stream)?.0)
    }
}

pub fn reencode(machine: &CoTMachine, dim: usize, bits: u32, horizon: usize) -> Result<Reencoded> {
    let (streaming, account) = ssm_to_streaming(machine, horizon)?;
    let compiled = streaming_to_cot_ssm(&streaming, dim, bits)?;
    Ok(Reencoded {
        streaming,
        account,
        compiled,
    })
}

/// Width `w`, precision `p` → width 1, precision `p′ =` streaming memory bits.
pub fn width_precision_roundtrip(machine: &CoTMachine, horizon: usize) -> Result<Reencoded> {
    let bits = machine.memory_account(horizon).total;
    reencode(machine, 1, u32::try_from(bits).map_err(|_| Error::InvalidPrecision(u32::MAX))?, horizon)
}

/// Width 1 (or any width) → width `w` at the least precision with
/// `w·p ≥ p′`.
pub fn precision_to_width(machine: &CoTMachine, width: usize, horizon: usize) -> Result<Reencoded> {
    let total = machine.memory_account(horizon).total;
    let bits = total.div_ceil(width).max(1);
    reencode(machine, width, u32::try_from(bits).map_err(|_| Error::InvalidPrecision(u32::MAX))?, horizon)
}
