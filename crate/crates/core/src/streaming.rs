//! Deterministic one-pass streaming algorithms with an `S`-bit memory.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::ring::BitString;
use crate::ssm::{InputAlphabet, Token};

pub type TransitionFn = Arc<dyn Fn(&BitString, &Token) -> Result<BitString> + Send + Sync>;
pub type OutputFn = Arc<dyn Fn(&BitString) -> Result<Token> + Send + Sync>;

/// Shape of the values `G` produces: `width` coordinates of `bits` bits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OutputAlphabet {
    pub width: usize,
    pub bits: u32,
    pub kinds: bool,
}

/// `M₀`, `Mᵢ = F(Mᵢ₋₁, xᵢ)`, output `G(Mₙ)`, every memory exactly `S` bits.
#[derive(Clone)]
pub struct StreamingAlgorithm {
    state_bits: usize,
    initial: BitString,
    transition: TransitionFn,
    output: OutputFn,
    input: InputAlphabet,
    output_alphabet: OutputAlphabet,
    expected_len: Option<usize>,
    description: String,
}

impl fmt::Debug for StreamingAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StreamingAlgorithm")
            .field("description", &self.description)
            .field("state_bits", &self.state_bits)
            .field("input", &self.input)
            .field("output", &self.output_alphabet)
            .finish_non_exhaustive()
    }
}

impl StreamingAlgorithm {
    pub fn new(
        state_bits: usize,
        initial: BitString,
        transition: TransitionFn,
        output: OutputFn,
        input: InputAlphabet,
        output_alphabet: OutputAlphabet,
    ) -> Result<Self> {
        if initial.len() != state_bits {
            return Err(Error::DimensionMismatch {
                expected: state_bits,
                actual: initial.len(),
            });
        }
        Ok(Self {
            state_bits,
            initial,
            transition,
            output,
            input,
            output_alphabet,
            expected_len: None,
            description: String::new(),
        })
    }

    /// Streams of any other length are rejected by [`run`](Self::run).
    pub fn with_expected_len(mut self, n: usize) -> Self {
        self.expected_len = Some(n);
        self
    }

    pub fn with_description(mut self, description: impl Into<String>) -> Self {
        self.description = description.into();
        self
    }

    pub fn state_bits(&self) -> usize {
        self.state_bits
    }

    pub fn initial(&self) -> &BitString {
        &self.initial
    }

    pub fn input_alphabet(&self) -> InputAlphabet {
        self.input
    }

    pub fn output_alphabet(&self) -> OutputAlphabet {
        self.output_alphabet
    }

    pub fn expected_len(&self) -> Option<usize> {
        self.expected_len
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn check_input(&self, x: &Token) -> Result<()> {
        if x.width() != self.input.width {
            return Err(Error::MalformedStream(format!(
                "token width {} differs from declared width {}",
                x.width(),
                self.input.width
            )));
        }
        if self.input.bits < 64 {
            if let Some(&v) = x.payload.iter().find(|&&v| v >> self.input.bits != 0) {
                return Err(Error::ValueOutOfRange {
                    value: v,
                    bits: self.input.bits,
                });
            }
        }
        Ok(())
    }

    pub fn step(&self, memory: &BitString, x: &Token) -> Result<BitString> {
        self.check_input(x)?;
        let next = (self.transition)(memory, x)?;
        if next.len() != self.state_bits {
            return Err(Error::InsufficientMemory {
                needed: next.len(),
                available: self.state_bits,
            });
        }
        Ok(next)
    }

    pub fn output(&self, memory: &BitString) -> Result<Token> {
        (self.output)(memory)
    }

    /// All memories `M₀, …, Mₙ`.
    pub fn memories(&self, stream: &[Token]) -> Result<Vec<BitString>> {
        self.check_len(stream.len())?;
        let mut out = Vec::with_capacity(stream.len() + 1);
        out.push(self.initial.clone());
        for x in stream {
            let next = self.step(out.last().expect("nonempty"), x)?;
            out.push(next);
        }
        Ok(out)
    }

    pub fn run(&self, stream: &[Token]) -> Result<Token> {
        self.check_len(stream.len())?;
        let mut memory = self.initial.clone();
        for x in stream {
            memory = self.step(&memory, x)?;
        }
        self.output(&memory)
    }

    fn check_len(&self, n: usize) -> Result<()> {
        match self.expected_len {
            Some(expected) if expected != n => Err(Error::MalformedStream(format!(
                "expected {expected} tokens, got {n}"
            ))),
            _ => Ok(()),
        }
    }
}

/// Packs an integer memory code into exactly `bits` bits.
pub fn code_to_bits(code: u128, bits: usize) -> Result<BitString> {
    if bits < 128 && code >> bits != 0 {
        return Err(Error::InsufficientMemory {
            needed: 128 - code.leading_zeros() as usize,
            available: bits,
        });
    }
    let mut out = BitString::with_capacity(bits);
    for i in (0..bits).rev() {
        out.push(i < 128 && (code >> i) & 1 == 1);
    }
    Ok(out)
}

pub fn bits_to_code(bits: &BitString) -> Result<u128> {
    let extra = bits.len().saturating_sub(128);
    if bits.bits()[..extra].iter().any(|&b| b) {
        return Err(Error::NotInEncodingImage);
    }
    Ok(bits.bits()[extra..]
        .iter()
        .fold(0u128, |acc, &b| (acc << 1) | u128::from(b)))
}
