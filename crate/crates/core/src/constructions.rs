//! Explicit machines: the `(K+1)`-layer composition model, the
//! logarithmic-memory streaming composition algorithm, the universal
//! one-layer affine machine and the mod-8 counter.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::ring::{ceil_log2, AffineMap, BitString, Precision, RingMatrix, RingVector};
use crate::rules::{EmbedSpec, FnRule, LinearDynamics, MachineSpec, Readout, RuleSpec, Segment};
use crate::ssm::{InputAlphabet, RunTrace, SSMachine, StepContext, Token, TokenKind};
use crate::streaming::{bits_to_code, code_to_bits, OutputAlphabet, OutputFn, StreamingAlgorithm, TransitionFn};
use crate::task::{block_end, block_start, CompositionInstance};

/// `⌈log₂(N+1)⌉ + 1`.
pub fn composition_precision(domain: usize) -> u32 {
    ceil_log2(domain as u128 + 1) + 1
}

/// Declarative form of [`build_composition_ssm`].
pub fn composition_machine_spec(domain: usize, functions: usize) -> Result<MachineSpec> {
    if domain == 0 || functions == 0 {
        return Err(Error::InvalidMachine("N and K must be positive".into()));
    }
    let hold = LinearDynamics::scalar(1, 0);
    let gate = |i: usize| Readout::IndexGate {
        start: block_start(domain, i),
        len: domain,
    };
    let accumulate = |i: usize| Segment {
        from: block_start(domain, i),
        to: Some(block_end(domain, i)),
        dynamics: LinearDynamics::scalar(1, 1),
    };
    let mut layers = Vec::with_capacity(functions + 1);
    layers.push(RuleSpec::Piecewise {
        segments: vec![Segment {
            from: 1,
            to: Some(1),
            dynamics: LinearDynamics::scalar(0, 1),
        }],
        default: hold.clone(),
        readout: gate(1),
    });
    for layer in 2..=functions {
        layers.push(RuleSpec::Piecewise {
            segments: vec![accumulate(layer - 1)],
            default: hold.clone(),
            readout: gate(layer),
        });
    }
    layers.push(RuleSpec::Piecewise {
        segments: vec![accumulate(functions)],
        default: hold,
        readout: Readout::State,
    });
    Ok(MachineSpec {
        dim: 1,
        precision: Precision::new(composition_precision(domain))?,
        token_width: 1,
        embed: EmbedSpec::Identity,
        initial_states: None,
        alphabet: Some(InputAlphabet {
            width: 1,
            bits: ceil_log2(domain as u128 + 1),
            kinds: false,
        }),
        layers,
    })
}

/// The `(K+1)`-layer, `d = 1` machine whose output on the row-major
/// encoding of an instance is `f_K ∘ … ∘ f_1(a)`.
pub fn build_composition_ssm(domain: usize, functions: usize) -> Result<SSMachine> {
    composition_machine_spec(domain, functions)?.build()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Phase {
    Initial,
    /// Pointer `z` not yet reached; `j < z` entries of the block read.
    Pending { z: usize, j: usize },
    /// Pointer already advanced to `z` in this block; `j ∈ [1, N-1]` read.
    Advanced { z: usize, j: usize },
}

struct PhaseCode {
    domain: usize,
}

impl PhaseCode {
    fn count(&self) -> u128 {
        let n = self.domain as u128;
        1 + n * (n + 1) / 2 + n * (n - 1)
    }

    fn encode(&self, phase: Phase) -> u128 {
        let n = self.domain as u128;
        match phase {
            Phase::Initial => 0,
            Phase::Pending { z, j } => {
                let z = z as u128;
                1 + z * (z - 1) / 2 + j as u128
            }
            Phase::Advanced { z, j } => {
                1 + n * (n + 1) / 2 + (z as u128 - 1) * (n - 1) + (j as u128 - 1)
            }
        }
    }

    fn decode(&self, code: u128) -> Result<Phase> {
        if code == 0 {
            return Ok(Phase::Initial);
        }
        let n = self.domain as u128;
        let c = code - 1;
        if c < n * (n + 1) / 2 {
            let mut z = 1u128;
            while (z + 1) * z / 2 <= c {
                z += 1;
            }
            return Ok(Phase::Pending {
                z: z as usize,
                j: (c - z * (z - 1) / 2) as usize,
            });
        }
        let c = c - n * (n + 1) / 2;
        if n < 2 || c >= n * (n - 1) {
            return Err(Error::NotInEncodingImage);
        }
        Ok(Phase::Advanced {
            z: (c / (n - 1)) as usize + 1,
            j: (c % (n - 1)) as usize + 1,
        })
    }

    fn step(&self, phase: Phase, v: usize) -> Phase {
        let n = self.domain;
        match phase {
            Phase::Initial => Phase::Pending { z: v, j: 0 },
            Phase::Pending { z, j } => {
                let j = j + 1;
                if j < z {
                    Phase::Pending { z, j }
                } else if j == n {
                    Phase::Pending { z: v, j: 0 }
                } else {
                    Phase::Advanced { z: v, j }
                }
            }
            Phase::Advanced { z, j } => {
                let j = j + 1;
                if j == n {
                    Phase::Pending { z, j: 0 }
                } else {
                    Phase::Advanced { z, j }
                }
            }
        }
    }
}

/// Memory size of [`streaming_composition_alg`]: `2⌈log₂(N+1)⌉` bits, or
/// more when the exact phase count needs it.
pub fn streaming_composition_bits(domain: usize) -> usize {
    let pair = 2 * ceil_log2(domain as u128 + 1);
    let exact = ceil_log2(PhaseCode { domain }.count());
    pair.max(exact) as usize
}

/// One-pass pointer-following algorithm over the row-major encoding.
///
/// The memory holds the current pointer, the position inside the current
/// block and whether the pointer has already advanced in this block.
pub fn streaming_composition_alg(domain: usize, functions: usize) -> Result<StreamingAlgorithm> {
    if domain == 0 || functions == 0 {
        return Err(Error::InvalidMachine("N and K must be positive".into()));
    }
    let bits = streaming_composition_bits(domain);
    let value_bits = ceil_log2(domain as u128 + 1);
    let transition: TransitionFn = Arc::new(move |memory: &BitString, x: &Token| {
        let code = PhaseCode { domain };
        let v = x.payload[0] as usize;
        if !(1..=domain).contains(&v) {
            return Err(Error::MalformedStream(format!(
                "token {v} is outside [1, {domain}]"
            )));
        }
        let phase = code.decode(bits_to_code(memory)?)?;
        code_to_bits(code.encode(code.step(phase, v)), bits)
    });
    let output: OutputFn = Arc::new(move |memory: &BitString| {
        let phase = PhaseCode { domain }.decode(bits_to_code(memory)?)?;
        Ok(Token::scalar(match phase {
            Phase::Initial => 0,
            Phase::Pending { z, .. } | Phase::Advanced { z, .. } => z as u64,
        }))
    });
    Ok(StreamingAlgorithm::new(
        bits,
        BitString::zeros(bits),
        transition,
        output,
        InputAlphabet {
            width: 1,
            bits: value_bits,
            kinds: false,
        },
        OutputAlphabet {
            width: 1,
            bits: value_bits,
            kinds: false,
        },
    )?
    .with_expected_len(1 + domain * functions)
    .with_description(format!("pointer following, N = {domain}, K = {functions}")))
}

/// One-layer machine of width `w` and precision `p` that reads `x`, then an
/// affine map `T = (A, b)` packed row-major into `w² + w` scalars, then a
/// read marker, and outputs `T(x)` at time 3.
pub fn universal_affine_machine(width: usize, bits: u32) -> Result<SSMachine> {
    if width == 0 {
        return Err(Error::InvalidMachine("width must be positive".into()));
    }
    let precision = Precision::new(bits)?;
    let m = width * width + width;
    let rule = FnRule::new(
        move |ctx: &StepContext, y: &Token| {
            if let Some(n) = ctx.n {
                if n != 3 {
                    return Err(ctx.error(format!("expected the 3-token shape (x, T, read), got {n} tokens")));
                }
            }
            match (ctx.t, y.kind) {
                (1, TokenKind::Data) => {
                    if y.payload[width..].iter().any(|&v| v != 0) {
                        return Err(ctx.error("state token has nonzero padding"));
                    }
                    Ok(AffineMap::new(
                        RingMatrix::zeros(width, precision),
                        RingVector::new(precision, y.payload[..width].to_vec())?,
                    )?)
                }
                (2, TokenKind::Data) => {
                    let linear = RingMatrix::new(precision, width, y.payload[..width * width].to_vec())?;
                    let offset = RingVector::new(precision, y.payload[width * width..].to_vec())?;
                    AffineMap::new(linear, offset)
                }
                (3, TokenKind::Read) => Ok(AffineMap::identity(width, precision)),
                (t, kind) => Err(ctx.error(format!("unexpected {kind:?} token at time {t}"))),
            }
        },
        move |_ctx: &StepContext, h: &RingVector, y: &Token| {
            let mut payload = vec![0; m];
            if y.kind == TokenKind::Read {
                payload[..width].copy_from_slice(h.values());
            }
            Ok(Token::data(payload))
        },
    );
    Ok(SSMachine::new(width, precision, m, vec![Arc::new(rule)])?.with_alphabet(InputAlphabet {
        width: m,
        bits,
        kinds: true,
    }))
}

/// The stream `(x, T, read)` for [`universal_affine_machine`].
pub fn universal_stream(x: &RingVector, map: &AffineMap) -> Result<Vec<Token>> {
    let w = map.dim();
    if x.dim() != w {
        return Err(Error::DimensionMismatch {
            expected: w,
            actual: x.dim(),
        });
    }
    let m = w * w + w;
    let mut first = x.values().to_vec();
    first.resize(m, 0);
    let mut second = map.linear().values().to_vec();
    second.extend_from_slice(map.offset().values());
    Ok(vec![
        Token::data(first),
        Token::data(second),
        Token::zeros(TokenKind::Read, m),
    ])
}

/// Width 1, precision 3: the first token loads `s ∈ ℤ/8`, each later token
/// (the increment token is the scalar `1`) adds itself, readout = state.
pub fn mod_counter_spec() -> MachineSpec {
    MachineSpec {
        dim: 1,
        precision: Precision::new(3).expect("valid"),
        token_width: 1,
        embed: EmbedSpec::Identity,
        initial_states: None,
        alphabet: None,
        layers: vec![RuleSpec::Piecewise {
            segments: vec![Segment {
                from: 1,
                to: Some(1),
                dynamics: LinearDynamics::scalar(0, 1),
            }],
            default: LinearDynamics::scalar(1, 1),
            readout: Readout::State,
        }],
    }
}

pub fn mod_counter_machine() -> SSMachine {
    mod_counter_spec().build().expect("static spec is valid")
}

pub fn inc_token() -> Token {
    Token::scalar(1)
}

/// `(s, inc, …, inc)` with `incs` increments.
pub fn mod_counter_stream(start: u64, incs: usize) -> Vec<Token> {
    std::iter::once(Token::scalar(start))
        .chain(std::iter::repeat(inc_token()).take(incs))
        .collect()
}

/// Checks a composition-machine trace against the chain `v_0..v_K`:
/// `h[i+1,t] = v_i` from the end of block `i` on, zero before block `i`
/// starts, and exactly one nonzero output of layer `i` inside block `i`,
/// at position `v_{i-1}`. Returns the first violated condition.
pub fn composition_trace_violation(inst: &CompositionInstance, trace: &RunTrace) -> Option<String> {
    let stream = inst.encode_row_major();
    let chain = inst.chain();
    if trace.layer_count() != inst.functions() + 1 || trace.len() != stream.len() {
        return Some("trace shape does not match the instance".into());
    }
    for i in 0..=inst.functions() {
        let end = if i == 0 { 1 } else { stream.block_end(i) };
        for t in end..=stream.len() {
            if trace.state(i + 1, t).values() != [chain[i] as u64] {
                return Some(format!("layer {} at t={t} does not hold v_{i}", i + 1));
            }
        }
        if i == 0 {
            continue;
        }
        for t in 0..stream.block_start(i) {
            if !trace.state(i + 1, t).is_zero() {
                return Some(format!("layer {} at t={t} is nonzero before block {i}", i + 1));
            }
        }
        let nonzero: Vec<usize> = (stream.block_start(i)..=stream.block_end(i))
            .filter(|&t| trace.output(i, t).payload.iter().any(|&v| v != 0))
            .collect();
        if nonzero.len() != 1 {
            return Some(format!("layer {i} emits {} nonzero outputs in block {i}", nonzero.len()));
        }
        let t = nonzero[0];
        if trace.output(i, t).payload[0] != chain[i] as u64 || t - stream.block_start(i) + 1 != chain[i - 1] {
            return Some(format!("layer {i} gates the wrong entry of block {i}"));
        }
    }
    None
}
