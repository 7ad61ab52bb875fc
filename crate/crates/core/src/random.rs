//! Seeded random machines, streams and thought policies.
//!
//! All randomness comes from `ChaCha8Rng::seed_from_u64`, so a seed fixes
//! every generated object across platforms and releases of this crate.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cot::{CoTMachine, CoTMode, Configuration, ThoughtPolicy};
use crate::error::Result;
use crate::ring::Precision;
use crate::rules::{AffineLiteral, EmbedSpec, Matrix, MachineSpec, Readout, RuleSpec, TableEntry};
use crate::ssm::{InputAlphabet, SSMachine, Token, TokenKind};

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Shape of a random table-driven machine.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MachineShape {
    pub layers: usize,
    pub dim: usize,
    pub bits: u32,
    pub width: usize,
    /// Make the top readout ignore its input.
    pub state_only_top: bool,
}

pub fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, precision: Precision) -> Matrix {
    (0..rows)
        .map(|_| (0..cols).map(|_| rng.gen::<u64>() & precision.mask()).collect())
        .collect()
}

fn random_vec<R: Rng>(rng: &mut R, len: usize, precision: Precision) -> Vec<u64> {
    (0..len).map(|_| rng.gen::<u64>() & precision.mask()).collect()
}

/// Every layer is a table rule with one random `(A, b)` per possible input
/// payload, and an affine readout `C·h + E·y + g`.
pub fn random_machine_spec<R: Rng>(rng: &mut R, shape: MachineShape) -> Result<MachineSpec> {
    let precision = Precision::new(shape.bits)?;
    let (d, m) = (shape.dim, shape.width);
    let keys: Vec<Vec<u64>> = (0..1u64 << (shape.bits as usize * m))
        .map(|idx| {
            (0..m)
                .map(|c| (idx >> ((m - 1 - c) as u32 * shape.bits)) & precision.mask())
                .collect()
        })
        .collect();
    let layers = (1..=shape.layers)
        .map(|layer| {
            let entries = keys
                .iter()
                .map(|key| TableEntry {
                    key: key.clone(),
                    transition: random_matrix(rng, d, d, precision),
                    offset: random_vec(rng, d, precision),
                })
                .collect();
            let input_coef = if shape.state_only_top && layer == shape.layers {
                vec![vec![0; m]; m]
            } else {
                random_matrix(rng, m, m, precision)
            };
            RuleSpec::Table {
                entries,
                default: AffineLiteral {
                    transition: random_matrix(rng, d, d, precision),
                    offset: random_vec(rng, d, precision),
                },
                readout: Readout::Affine {
                    state_coef: random_matrix(rng, m, d, precision),
                    input_coef,
                    bias: random_vec(rng, m, precision),
                },
            }
        })
        .collect();
    let initial = (0..shape.layers).map(|_| random_vec(rng, d, precision)).collect();
    Ok(MachineSpec {
        dim: d,
        precision,
        token_width: m,
        embed: EmbedSpec::Mask,
        initial_states: Some(initial),
        alphabet: None,
        layers,
    })
}

pub fn random_machine<R: Rng>(rng: &mut R, shape: MachineShape) -> Result<SSMachine> {
    random_machine_spec(rng, shape)?.build()
}

pub fn random_token<R: Rng>(rng: &mut R, alphabet: InputAlphabet) -> Token {
    let mask = if alphabet.bits >= 64 {
        u64::MAX
    } else {
        (1u64 << alphabet.bits) - 1
    };
    let kind = if alphabet.kinds {
        TokenKind::ALL[rng.gen_range(0..TokenKind::ALL.len())]
    } else {
        TokenKind::Data
    };
    Token::new(kind, (0..alphabet.width).map(|_| rng.gen::<u64>() & mask).collect())
}

pub fn random_stream<R: Rng>(rng: &mut R, alphabet: InputAlphabet, len: usize) -> Vec<Token> {
    (0..len).map(|_| random_token(rng, alphabet)).collect()
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the `index`-th independent job under a master seed.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    mix(seed ^ mix(index))
}

/// Deterministic pseudo-random policy: continues while a hash of the
/// configuration says so (at most `max` times) and emits a thought derived
/// from the same hash.
#[derive(Clone, Copy, Debug)]
pub struct HashPolicy {
    pub seed: u64,
    pub max: usize,
    pub width: usize,
    pub precision: Precision,
}

impl HashPolicy {
    fn digest(&self, config: &Configuration<'_>) -> u64 {
        let mut h = mix(self.seed);
        for s in config.states {
            for &v in s.values() {
                h = mix(h ^ v);
            }
        }
        for &v in &config.last_output.payload {
            h = mix(h ^ v.rotate_left(17));
        }
        h = mix(h ^ config.t as u64);
        mix(h ^ (config.emitted as u64).rotate_left(40))
    }
}

impl ThoughtPolicy for HashPolicy {
    fn next_thought(&self, config: &Configuration<'_>) -> Result<Option<Token>> {
        if config.emitted >= self.max {
            return Ok(None);
        }
        let h = self.digest(config);
        if h % 3 == 0 {
            return Ok(None);
        }
        let payload = (0..self.width)
            .map(|c| mix(h ^ c as u64) & self.precision.mask())
            .collect();
        Ok(Some(Token::new(TokenKind::Thought, payload)))
    }
}

pub fn random_cot_machine<R: Rng>(
    rng: &mut R,
    shape: MachineShape,
    mode: CoTMode,
    max_thoughts: usize,
) -> Result<CoTMachine> {
    let base = random_machine(rng, shape)?;
    let policy = HashPolicy {
        seed: rng.gen(),
        max: max_thoughts,
        width: shape.width,
        precision: base.precision(),
    };
    Ok(CoTMachine::new(base, Arc::new(policy), mode, max_thoughts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cot::run_cot;

    #[test]
    fn seeds_reproduce() {
        let shape = MachineShape {
            layers: 2,
            dim: 2,
            bits: 2,
            width: 1,
            state_only_top: false,
        };
        let a = random_machine_spec(&mut seeded(3), shape).unwrap();
        let b = random_machine_spec(&mut seeded(3), shape).unwrap();
        let c = random_machine_spec(&mut seeded(4), shape).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn random_cot_runs_within_budget() {
        let shape = MachineShape {
            layers: 1,
            dim: 1,
            bits: 3,
            width: 2,
            state_only_top: true,
        };
        let mut rng = seeded(11);
        let m = random_cot_machine(&mut rng, shape, CoTMode::Online, 3).unwrap();
        assert!(m.base.output_is_state_determined());
        let stream = random_stream(&mut rng, m.base.alphabet(), 20);
        let rec = run_cot(&m, &stream).unwrap();
        assert!(rec.thoughts.iter().all(|&k| k <= 3));
        assert!(rec.total_thoughts() > 0);
    }
}
