//! K-function composition and two-party pointer chasing.
//!
//! Domain elements are 1-based throughout: `[N] = {1, …, N}`.

use std::fmt::Write as _;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ring::Budget;
use crate::ssm::Token;

/// An element `a ∈ [N]` and truth tables of `f₁, …, f_K : [N] → [N]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CompositionInstance {
    domain: usize,
    start: usize,
    tables: Vec<Vec<usize>>,
}

impl CompositionInstance {
    /// `tables[i][j-1] = f_{i+1}(j)`.
    pub fn new(domain: usize, start: usize, tables: Vec<Vec<usize>>) -> Result<Self> {
        if domain == 0 {
            return Err(Error::InvalidInstance("domain size must be positive".into()));
        }
        if tables.is_empty() {
            return Err(Error::InvalidInstance("at least one function is required".into()));
        }
        if !(1..=domain).contains(&start) {
            return Err(Error::InvalidInstance(format!("a = {start} is outside [1, {domain}]")));
        }
        for (i, table) in tables.iter().enumerate() {
            if table.len() != domain {
                return Err(Error::InvalidInstance(format!(
                    "table {} has {} entries, expected {domain}",
                    i + 1,
                    table.len()
                )));
            }
            if let Some(&v) = table.iter().find(|&&v| !(1..=domain).contains(&v)) {
                return Err(Error::InvalidInstance(format!(
                    "table {} maps to {v}, outside [1, {domain}]",
                    i + 1
                )));
            }
        }
        Ok(Self {
            domain,
            start,
            tables,
        })
    }

    pub fn domain(&self) -> usize {
        self.domain
    }

    pub fn functions(&self) -> usize {
        self.tables.len()
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn tables(&self) -> &[Vec<usize>] {
        &self.tables
    }

    /// `f_i(j)` with both indices 1-based.
    pub fn apply(&self, i: usize, j: usize) -> usize {
        self.tables[i - 1][j - 1]
    }

    /// The chain `v₀ = a, vᵢ = fᵢ(vᵢ₋₁)`; the answer is the last entry.
    pub fn chain(&self) -> Vec<usize> {
        let mut chain = Vec::with_capacity(self.tables.len() + 1);
        chain.push(self.start);
        for table in &self.tables {
            let prev = *chain.last().expect("nonempty");
            chain.push(table[prev - 1]);
        }
        chain
    }

    pub fn eval(&self) -> usize {
        *self.chain().last().expect("nonempty")
    }

    pub fn encode_row_major(&self) -> TokenStream {
        let mut tokens = Vec::with_capacity(1 + self.domain * self.tables.len());
        tokens.push(self.start as u64);
        for table in &self.tables {
            tokens.extend(table.iter().map(|&v| v as u64));
        }
        TokenStream {
            tokens,
            domain: self.domain,
            functions: self.tables.len(),
        }
    }

    /// `N K a` on the first line, then one line of `N` integers per function.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {} {}\n", self.domain, self.tables.len(), self.start);
        for table in &self.tables {
            let row: Vec<String> = table.iter().map(usize::to_string).collect();
            writeln!(out, "{}", row.join(" ")).expect("write to string");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut numbers = text.split_whitespace().map(|w| {
            w.parse::<usize>()
                .map_err(|e| Error::Parse(format!("{w:?}: {e}")))
        });
        let mut next = |what: &str| {
            numbers
                .next()
                .ok_or_else(|| Error::Parse(format!("missing {what}")))?
        };
        let domain = next("N")?;
        let functions = next("K")?;
        let start = next("a")?;
        let mut tables = Vec::with_capacity(functions);
        for _ in 0..functions {
            tables.push((0..domain).map(|_| next("table entry")).collect::<Result<Vec<_>>>()?);
        }
        if numbers.next().is_some() {
            return Err(Error::Parse("trailing data after the last table".into()));
        }
        Self::new(domain, start, tables)
    }
}

/// Row-major token encoding of a composition instance.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenStream {
    tokens: Vec<u64>,
    domain: usize,
    functions: usize,
}

impl TokenStream {
    pub fn new(tokens: Vec<u64>, domain: usize, functions: usize) -> Result<Self> {
        if tokens.len() != 1 + domain * functions {
            return Err(Error::MalformedStream(format!(
                "{} tokens cannot encode N = {domain}, K = {functions}",
                tokens.len()
            )));
        }
        Ok(Self {
            tokens,
            domain,
            functions,
        })
    }

    pub fn tokens(&self) -> &[u64] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn domain(&self) -> usize {
        self.domain
    }

    pub fn functions(&self) -> usize {
        self.functions
    }

    /// First time of block `i`: `sᵢ = 2 + (i−1)N`.
    pub fn block_start(&self, i: usize) -> usize {
        block_start(self.domain, i)
    }

    /// Last time of block `i`: `eᵢ = 1 + iN`.
    pub fn block_end(&self, i: usize) -> usize {
        block_end(self.domain, i)
    }

    pub fn to_data_tokens(&self) -> Vec<Token> {
        self.tokens.iter().map(|&v| Token::scalar(v)).collect()
    }

    pub fn decode(&self) -> Result<CompositionInstance> {
        let start = self.tokens[0] as usize;
        let tables = self.tokens[1..]
            .chunks(self.domain)
            .map(|c| c.iter().map(|&v| v as usize).collect())
            .collect();
        CompositionInstance::new(self.domain, start, tables)
    }

    /// Whitespace-separated integers.
    pub fn to_text(&self) -> String {
        let words: Vec<String> = self.tokens.iter().map(u64::to_string).collect();
        words.join(" ")
    }
}

pub fn block_start(domain: usize, i: usize) -> usize {
    2 + (i - 1) * domain
}

pub fn block_end(domain: usize, i: usize) -> usize {
    1 + i * domain
}

/// Two-party `k`-step pointer chasing on `[N]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PCInstance {
    domain: usize,
    alice: Vec<usize>,
    bob: Vec<usize>,
    steps: usize,
}

impl PCInstance {
    pub fn new(domain: usize, alice: Vec<usize>, bob: Vec<usize>, steps: usize) -> Result<Self> {
        for (name, f) in [("f_A", &alice), ("f_B", &bob)] {
            if f.len() != domain || f.iter().any(|&v| !(1..=domain).contains(&v)) {
                return Err(Error::InvalidInstance(format!("{name} is not a map [N] → [N]")));
            }
        }
        Ok(Self {
            domain,
            alice,
            bob,
            steps,
        })
    }

    pub fn domain(&self) -> usize {
        self.domain
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn alice(&self) -> &[usize] {
        &self.alice
    }

    pub fn bob(&self) -> &[usize] {
        &self.bob
    }

    /// `(pt_k, pt_k mod 2)` with `pt₀ = 1`, odd steps applying `f_A` and
    /// even steps `f_B`.
    pub fn eval(&self) -> (usize, u8) {
        let pt = pointer_chase(&self.alice, &self.bob, self.steps);
        (pt, (pt % 2) as u8)
    }

    /// The composition instance with `a = 1` and `gᵢ` alternating `f_A`, `f_B`.
    pub fn to_composition(&self) -> Result<CompositionInstance> {
        pc_to_composition(&self.alice, &self.bob, self.steps)
    }
}

pub fn pointer_chase(alice: &[usize], bob: &[usize], steps: usize) -> usize {
    (1..=steps).fold(1, |pt, r| if r % 2 == 1 { alice[pt - 1] } else { bob[pt - 1] })
}

pub fn pc_to_composition(alice: &[usize], bob: &[usize], functions: usize) -> Result<CompositionInstance> {
    if functions == 0 {
        return Err(Error::InvalidInstance("K must be at least 1".into()));
    }
    let tables = (1..=functions)
        .map(|i| if i % 2 == 1 { alice.to_vec() } else { bob.to_vec() })
        .collect();
    CompositionInstance::new(alice.len(), 1, tables)
}

/// How [`instances`] picks instances.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InstanceMode {
    Exhaustive,
    Random { seed: u64, count: usize },
}

/// Exhaustive or seeded random composition instances for fixed `(N, K)`.
pub fn instances(
    domain: usize,
    functions: usize,
    mode: InstanceMode,
    budget: Budget,
) -> Result<Box<dyn Iterator<Item = CompositionInstance>>> {
    if domain == 0 || functions == 0 {
        return Err(Error::InvalidInstance("N and K must be positive".into()));
    }
    match mode {
        InstanceMode::Exhaustive => {
            let digits = domain * functions + 1;
            let total = (domain as u128).checked_pow(digits as u32);
            let total = budget.check(total)?;
            Ok(Box::new((0..total).map(move |mut idx| {
                let mut values = vec![0usize; digits];
                for v in values.iter_mut().rev() {
                    *v = (idx % domain as u128) as usize + 1;
                    idx /= domain as u128;
                }
                let tables = values[1..].chunks(domain).map(<[usize]>::to_vec).collect();
                CompositionInstance::new(domain, values[0], tables).expect("in range")
            })))
        }
        InstanceMode::Random { seed, count } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok(Box::new((0..count).map(move |_| random_instance(&mut rng, domain, functions))))
        }
    }
}

pub fn random_instance<R: Rng>(rng: &mut R, domain: usize, functions: usize) -> CompositionInstance {
    let start = rng.gen_range(1..=domain);
    let tables = (0..functions)
        .map(|_| (0..domain).map(|_| rng.gen_range(1..=domain)).collect())
        .collect();
    CompositionInstance::new(domain, start, tables).expect("in range")
}

pub fn random_map<R: Rng>(rng: &mut R, domain: usize) -> Vec<usize> {
    (0..domain).map(|_| rng.gen_range(1..=domain)).collect()
}

/// All `N^N` maps `[N] → [N]` in lexicographic order.
pub fn all_maps(domain: usize, budget: Budget) -> Result<impl Iterator<Item = Vec<usize>>> {
    let total = budget.check((domain as u128).checked_pow(domain as u32))?;
    Ok((0..total).map(move |mut idx| {
        let mut f = vec![0usize; domain];
        for v in f.iter_mut().rev() {
            *v = (idx % domain as u128) as usize + 1;
            idx /= domain as u128;
        }
        f
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn running_example() -> CompositionInstance {
        CompositionInstance::new(3, 2, vec![vec![3, 1, 2], vec![2, 3, 1]]).unwrap()
    }

    #[test]
    fn eval_examples() {
        let inst = running_example();
        assert_eq!(inst.chain(), vec![2, 1, 2]);
        assert_eq!(inst.eval(), 2);
        let id = CompositionInstance::new(4, 3, vec![vec![1, 2, 3, 4]; 5]).unwrap();
        assert_eq!(id.eval(), 3);
        let single = CompositionInstance::new(1, 1, vec![vec![1]; 3]).unwrap();
        assert_eq!(single.eval(), 1);
    }

    #[test]
    fn encode_examples() {
        let inst = CompositionInstance::new(2, 2, vec![vec![2, 1]]).unwrap();
        let s = inst.encode_row_major();
        assert_eq!(s.tokens(), &[2, 2, 1]);
        assert_eq!(s.len(), 3);
        let inst = CompositionInstance::new(1, 1, vec![vec![1], vec![1]]).unwrap();
        assert_eq!(inst.encode_row_major().tokens(), &[1, 1, 1]);
    }

    #[test]
    fn block_boundaries() {
        let s = CompositionInstance::new(2, 1, vec![vec![1, 2], vec![2, 2]])
            .unwrap()
            .encode_row_major();
        assert_eq!((s.block_start(1), s.block_end(1)), (2, 3));
        assert_eq!((s.block_start(2), s.block_end(2)), (4, 5));
    }

    #[test]
    fn pc_examples() {
        let id = vec![1, 2, 3];
        for k in 0..5 {
            assert_eq!(PCInstance::new(3, id.clone(), id.clone(), k).unwrap().eval(), (1, 1));
        }
        let pc = PCInstance::new(2, vec![2, 1], vec![1, 2], 2).unwrap();
        assert_eq!(pc.eval(), (2, 0));
        assert_eq!(pointer_chase(&[2, 1], &[1, 2], 0), 1);
    }

    #[test]
    fn pc_to_composition_examples() {
        let fa = vec![3, 1, 2];
        let fb = vec![2, 2, 1];
        let one = pc_to_composition(&fa, &fb, 1).unwrap();
        assert_eq!(one.start(), 1);
        assert_eq!(one.tables(), std::slice::from_ref(&fa));
        assert_eq!(one.eval(), 3);
        assert!(pc_to_composition(&fa, &fb, 0).is_err());
        let id = vec![1, 2, 3];
        for k in 1..6 {
            assert_eq!(pc_to_composition(&id, &id, k).unwrap().eval(), 1);
        }
    }

    #[test]
    fn instance_iteration() {
        let all: Vec<_> = instances(2, 1, InstanceMode::Exhaustive, Budget::DEFAULT)
            .unwrap()
            .collect();
        assert_eq!(all.len(), 8);
        let distinct: std::collections::HashSet<_> = all.iter().cloned().collect();
        assert_eq!(distinct.len(), 8);
        assert_eq!(
            instances(1, 3, InstanceMode::Exhaustive, Budget::DEFAULT)
                .unwrap()
                .count(),
            1
        );
        let mode = InstanceMode::Random { seed: 7, count: 100 };
        let a: Vec<_> = instances(5, 3, mode, Budget::DEFAULT).unwrap().collect();
        let b: Vec<_> = instances(5, 3, mode, Budget::DEFAULT).unwrap().collect();
        assert_eq!(a.len(), 100);
        assert_eq!(a, b);
        assert!(matches!(
            instances(4, 4, InstanceMode::Exhaustive, Budget(1000)),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn text_format() {
        let inst = running_example();
        assert_eq!(inst.to_text(), "3 2 2\n3 1 2\n2 3 1\n");
        assert_eq!(CompositionInstance::from_text(&inst.to_text()).unwrap(), inst);
        assert!(CompositionInstance::from_text("3 1 2\n1 2").is_err());
        assert!(CompositionInstance::from_text("2 1 3\n1 2").is_err());
        assert!(CompositionInstance::from_text("2 1 1\n1 2 2").is_err());
        assert_eq!(inst.encode_row_major().to_text(), "2 3 1 2 2 3 1");
    }

    #[test]
    fn invalid_instances() {
        assert!(CompositionInstance::new(0, 1, vec![vec![]]).is_err());
        assert!(CompositionInstance::new(2, 0, vec![vec![1, 1]]).is_err());
        assert!(CompositionInstance::new(2, 1, vec![vec![1, 3]]).is_err());
        assert!(CompositionInstance::new(2, 1, vec![]).is_err());
        assert!(TokenStream::new(vec![1, 2], 2, 1).is_err());
    }
}
