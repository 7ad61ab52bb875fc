//! Built-in layer-rule families and the declarative machine description.
//!
//! Four families are provided:
//!
//! * **constant**: the same `(A, b)` at every step;
//! * **piecewise**: `A` and an input matrix `B` chosen by time window, with
//!   injection `u = B·y`;
//! * **table**: `(A, b)` looked up from the input payload;
//! * **programmatic**: arbitrary closures ([`FnRule`]).
//!
//! The first three, together with the [`Readout`] variants, are plain data
//! and round-trip through [`MachineSpec`].

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ring::{AffineMap, Precision, RingMatrix, RingVector};
use crate::ssm::{Embed, InputAlphabet, LayerRule, SSMachine, StepContext, Token, TokenKind};

/// Row-major matrix literal.
pub type Matrix = Vec<Vec<u64>>;

/// Readout maps `out(h, y)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Readout {
    /// Emit the state, zero-padded to the token width.
    State,
    PassThrough,
    Zero,
    /// Inside `[start, start+len-1]` pass `y` iff `h[0]` equals the
    /// 1-based position within the window, else emit zeros; outside the
    /// window pass `y` through.
    IndexGate { start: usize, len: usize },
    /// `C·h + E·y + g` with `C` of shape `m×d` and `E` of shape `m×m`.
    Affine {
        state_coef: Matrix,
        input_coef: Matrix,
        bias: Vec<u64>,
    },
}

impl Readout {
    fn validate(&self, dim: usize, precision: Precision, width: usize) -> Result<()> {
        match self {
            Readout::State if dim > width => Err(Error::InvalidMachine(format!(
                "state readout needs token width ≥ {dim}, got {width}"
            ))),
            Readout::Affine {
                state_coef,
                input_coef,
                bias,
            } => {
                check_shape(state_coef, width, dim, precision)?;
                check_shape(input_coef, width, width, precision)?;
                check_vec(bias, width, precision)
            }
            _ => Ok(()),
        }
    }

    pub fn reads_input(&self) -> bool {
        match self {
            Readout::State | Readout::Zero => false,
            Readout::PassThrough | Readout::IndexGate { .. } => true,
            Readout::Affine { input_coef, .. } => input_coef.iter().flatten().any(|&v| v != 0),
        }
    }

    fn eval(
        &self,
        ctx: &StepContext,
        state: &RingVector,
        input: &Token,
        precision: Precision,
        width: usize,
    ) -> Result<Token> {
        Ok(match self {
            Readout::State => {
                let mut payload = state.values().to_vec();
                payload.resize(width, 0);
                Token::data(payload)
            }
            Readout::PassThrough => input.clone(),
            Readout::Zero => Token::zeros(TokenKind::Data, width),
            Readout::IndexGate { start, len } => {
                let t = ctx.t;
                if t >= *start && t < start + len {
                    let position = (t - start + 1) as u64;
                    if state.values().first() == Some(&position) {
                        input.clone()
                    } else {
                        input.zeroed()
                    }
                } else {
                    input.clone()
                }
            }
            Readout::Affine {
                state_coef,
                input_coef,
                bias,
            } => {
                let payload = (0..width)
                    .map(|r| {
                        let from_state = dot(&state_coef[r], state.values());
                        let from_input = dot(&input_coef[r], &input.payload);
                        precision.reduce(from_state.wrapping_add(from_input).wrapping_add(bias[r]))
                    })
                    .collect();
                Token::data(payload)
            }
        })
    }
}

fn dot(row: &[u64], v: &[u64]) -> u64 {
    row.iter()
        .zip(v)
        .fold(0u64, |acc, (&a, &b)| acc.wrapping_add(a.wrapping_mul(b)))
}

fn check_vec(v: &[u64], len: usize, precision: Precision) -> Result<()> {
    if v.len() != len {
        return Err(Error::DimensionMismatch {
            expected: len,
            actual: v.len(),
        });
    }
    for &x in v {
        precision.check(x)?;
    }
    Ok(())
}

fn check_shape(m: &Matrix, rows: usize, cols: usize, precision: Precision) -> Result<()> {
    if m.len() != rows {
        return Err(Error::DimensionMismatch {
            expected: rows,
            actual: m.len(),
        });
    }
    m.iter().try_for_each(|row| check_vec(row, cols, precision))
}

/// `A` together with an input matrix `B` (shape `d×m`), giving `u = B·y`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinearDynamics {
    pub transition: Matrix,
    pub inject: Matrix,
}

impl LinearDynamics {
    pub fn scalar(a: u64, b: u64) -> Self {
        Self {
            transition: vec![vec![a]],
            inject: vec![vec![b]],
        }
    }

    fn validate(&self, dim: usize, precision: Precision, width: usize) -> Result<()> {
        check_shape(&self.transition, dim, dim, precision)?;
        check_shape(&self.inject, dim, width, precision)
    }

    fn map(&self, precision: Precision, input: &Token) -> Result<AffineMap> {
        let offset = self
            .inject
            .iter()
            .map(|row| precision.reduce(dot(row, &input.payload)))
            .collect();
        AffineMap::new(
            RingMatrix::from_rows(precision, &self.transition)?,
            RingVector::new(precision, offset)?,
        )
    }
}

/// Dynamics active on the inclusive time window `[from, to]` (`to = None`
/// means unbounded).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub from: usize,
    pub to: Option<usize>,
    #[serde(flatten)]
    pub dynamics: LinearDynamics,
}

impl Segment {
    fn contains(&self, t: usize) -> bool {
        t >= self.from && self.to.map_or(true, |end| t <= end)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableEntry {
    pub key: Vec<u64>,
    pub transition: Matrix,
    pub offset: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AffineLiteral {
    pub transition: Matrix,
    pub offset: Vec<u64>,
}

impl AffineLiteral {
    fn build(&self, precision: Precision) -> Result<AffineMap> {
        AffineMap::from_parts(precision, &self.transition, self.offset.clone())
    }

    pub fn from_map(map: &AffineMap) -> Self {
        Self {
            transition: map.linear().rows(),
            offset: map.offset().values().to_vec(),
        }
    }
}

/// Declarative description of one layer.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum RuleSpec {
    Constant {
        #[serde(flatten)]
        map: AffineLiteral,
        readout: Readout,
    },
    Piecewise {
        segments: Vec<Segment>,
        default: LinearDynamics,
        readout: Readout,
    },
    Table {
        entries: Vec<TableEntry>,
        default: AffineLiteral,
        readout: Readout,
    },
}

impl RuleSpec {
    pub fn compile(
        &self,
        dim: usize,
        precision: Precision,
        width: usize,
    ) -> Result<Arc<dyn LayerRule>> {
        let ctx = CompiledReadout {
            readout: self.readout().clone(),
            precision,
            width,
        };
        self.readout().validate(dim, precision, width)?;
        Ok(match self {
            RuleSpec::Constant { map, .. } => {
                let map = map.build(precision)?;
                check_dim(&map, dim)?;
                Arc::new(ConstantRule { map, readout: ctx })
            }
            RuleSpec::Piecewise {
                segments, default, ..
            } => {
                default.validate(dim, precision, width)?;
                for s in segments {
                    s.dynamics.validate(dim, precision, width)?;
                }
                Arc::new(PiecewiseRule {
                    segments: segments.clone(),
                    default: default.clone(),
                    readout: ctx,
                })
            }
            RuleSpec::Table {
                entries, default, ..
            } => {
                let mut table = BTreeMap::new();
                for e in entries {
                    check_vec(&e.key, width, precision)?;
                    let map = AffineMap::from_parts(precision, &e.transition, e.offset.clone())?;
                    check_dim(&map, dim)?;
                    table.insert(e.key.clone(), map);
                }
                let default = default.build(precision)?;
                check_dim(&default, dim)?;
                Arc::new(TableRule {
                    table,
                    default,
                    readout: ctx,
                })
            }
        })
    }

    pub fn readout(&self) -> &Readout {
        match self {
            RuleSpec::Constant { readout, .. }
            | RuleSpec::Piecewise { readout, .. }
            | RuleSpec::Table { readout, .. } => readout,
        }
    }
}

fn check_dim(map: &AffineMap, dim: usize) -> Result<()> {
    if map.dim() == dim {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected: dim,
            actual: map.dim(),
        })
    }
}

#[derive(Clone, Debug)]
struct CompiledReadout {
    readout: Readout,
    precision: Precision,
    width: usize,
}

impl CompiledReadout {
    fn eval(&self, ctx: &StepContext, state: &RingVector, input: &Token) -> Result<Token> {
        self.readout
            .eval(ctx, state, input, self.precision, self.width)
    }
}

#[derive(Clone, Debug)]
struct ConstantRule {
    map: AffineMap,
    readout: CompiledReadout,
}

impl LayerRule for ConstantRule {
    fn update(&self, _ctx: &StepContext, _input: &Token) -> Result<AffineMap> {
        Ok(self.map.clone())
    }

    fn readout(&self, ctx: &StepContext, state: &RingVector, input: &Token) -> Result<Token> {
        self.readout.eval(ctx, state, input)
    }

    fn readout_reads_input(&self) -> bool {
        self.readout.readout.reads_input()
    }
}

#[derive(Clone, Debug)]
struct PiecewiseRule {
    segments: Vec<Segment>,
    default: LinearDynamics,
    readout: CompiledReadout,
}

impl LayerRule for PiecewiseRule {
    fn update(&self, ctx: &StepContext, input: &Token) -> Result<AffineMap> {
        let dynamics = self
            .segments
            .iter()
            .find(|s| s.contains(ctx.t))
            .map_or(&self.default, |s| &s.dynamics);
        dynamics.map(self.readout.precision, input)
    }

    fn readout(&self, ctx: &StepContext, state: &RingVector, input: &Token) -> Result<Token> {
        self.readout.eval(ctx, state, input)
    }

    fn readout_reads_input(&self) -> bool {
        self.readout.readout.reads_input()
    }
}

#[derive(Clone, Debug)]
struct TableRule {
    table: BTreeMap<Vec<u64>, AffineMap>,
    default: AffineMap,
    readout: CompiledReadout,
}

impl LayerRule for TableRule {
    fn update(&self, _ctx: &StepContext, input: &Token) -> Result<AffineMap> {
        Ok(self
            .table
            .get(&input.payload)
            .unwrap_or(&self.default)
            .clone())
    }

    fn readout(&self, ctx: &StepContext, state: &RingVector, input: &Token) -> Result<Token> {
        self.readout.eval(ctx, state, input)
    }

    fn readout_reads_input(&self) -> bool {
        self.readout.readout.reads_input()
    }
}

/// A rule given by closures.
pub struct FnRule<U, R> {
    update: U,
    readout: R,
    reads_input: bool,
}

impl<U, R> FnRule<U, R>
where
    U: Fn(&StepContext, &Token) -> Result<AffineMap> + Send + Sync,
    R: Fn(&StepContext, &RingVector, &Token) -> Result<Token> + Send + Sync,
{
    pub fn new(update: U, readout: R) -> Self {
        Self {
            update,
            readout,
            reads_input: true,
        }
    }

    /// Declares that the readout never looks at its input token.
    pub fn state_only(mut self) -> Self {
        self.reads_input = false;
        self
    }
}

impl<U, R> LayerRule for FnRule<U, R>
where
    U: Fn(&StepContext, &Token) -> Result<AffineMap> + Send + Sync,
    R: Fn(&StepContext, &RingVector, &Token) -> Result<Token> + Send + Sync,
{
    fn update(&self, ctx: &StepContext, input: &Token) -> Result<AffineMap> {
        (self.update)(ctx, input)
    }

    fn readout(&self, ctx: &StepContext, state: &RingVector, input: &Token) -> Result<Token> {
        (self.readout)(ctx, state, input)
    }

    fn readout_reads_input(&self) -> bool {
        self.reads_input
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbedSpec {
    #[default]
    Identity,
    Mask,
}

/// Declarative machine description, serializable to TOML or JSON.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MachineSpec {
    pub dim: usize,
    pub precision: Precision,
    pub token_width: usize,
    #[serde(default)]
    pub embed: EmbedSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_states: Option<Vec<Vec<u64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphabet: Option<InputAlphabet>,
    pub layers: Vec<RuleSpec>,
}

impl MachineSpec {
    pub fn build(&self) -> Result<SSMachine> {
        let layers = self
            .layers
            .iter()
            .map(|r| r.compile(self.dim, self.precision, self.token_width))
            .collect::<Result<Vec<_>>>()?;
        let mut machine = SSMachine::new(self.dim, self.precision, self.token_width, layers)?
            .with_embed(match self.embed {
                EmbedSpec::Identity => Embed::Identity,
                EmbedSpec::Mask => Embed::Mask,
            });
        if let Some(initial) = &self.initial_states {
            let states = initial
                .iter()
                .map(|h| RingVector::new(self.precision, h.clone()))
                .collect::<Result<Vec<_>>>()?;
            machine = machine.with_initial_states(states)?;
        }
        if let Some(alphabet) = self.alphabet {
            machine = machine.with_alphabet(alphabet);
        }
        Ok(machine)
    }
}
