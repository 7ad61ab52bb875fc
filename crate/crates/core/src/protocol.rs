//! Forward multi-party communication, the compilation of a multi-layer
//! machine into a forward protocol, and its serialization into an
//! alternating two-party protocol.
//!
//! Player `i` holds the tokens of interval `Iᵢ`. In round `ℓ` every player
//! `i < K` broadcasts the affine summary of layer `ℓ` over its interval to all
//! players `j > i`; a player composes the summaries it received to recover
//! the state entering its interval and replays layer `ℓ` locally.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ring::{ceil_log2, AffineMap, BitString, Budget, Precision, RingVector};
use crate::ssm::{SSMachine, Token};
use crate::task::{block_end, pointer_chase, all_maps, CompositionInstance, TokenStream};

/// Inclusive 1-based time interval `[start, end]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Interval {
    pub start: usize,
    pub end: usize,
}

impl Interval {
    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end < self.start
    }
}

/// `I₁ = [1, e₁]` (the start element and `f₁`), `Iᵢ = [sᵢ, eᵢ]` for `i ≥ 2`.
pub fn partition_stream(stream: &TokenStream) -> Result<Vec<Interval>> {
    partition_blocks(stream.len(), stream.domain(), stream.functions())
}

pub fn partition_blocks(n: usize, domain: usize, functions: usize) -> Result<Vec<Interval>> {
    if functions == 0 || n != 1 + domain * functions {
        return Err(Error::Protocol(format!(
            "stream of length {n} does not split into {functions} blocks of {domain}"
        )));
    }
    Ok((1..=functions)
        .map(|i| Interval {
            start: if i == 1 { 1 } else { block_end(domain, i - 1) + 1 },
            end: block_end(domain, i),
        })
        .collect())
}

/// Checks that intervals are nonempty, consecutive and cover `[1, n]`.
pub fn check_partition(intervals: &[Interval], n: usize) -> Result<()> {
    let mut next = 1;
    for (i, iv) in intervals.iter().enumerate() {
        if iv.start != next || iv.is_empty() {
            return Err(Error::Protocol(format!("interval {} is not [{next}, ..]", i + 1)));
        }
        next = iv.end + 1;
    }
    if intervals.is_empty() || next != n + 1 {
        return Err(Error::Protocol(format!("intervals do not cover [1, {n}]")));
    }
    Ok(())
}

/// A point-to-multipoint message of the forward model.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Message {
    pub round: usize,
    pub sender: usize,
    pub recipients: Vec<usize>,
    pub payload: BitString,
    pub padding: bool,
}

impl Message {
    pub fn bit_count(&self) -> usize {
        if self.padding {
            0
        } else {
            self.payload.len()
        }
    }
}

/// What the players hold before any communication.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProtocolSetup {
    pub n: usize,
    pub intervals: Vec<Interval>,
    /// Raw tokens of player `i` at index `i-1`.
    pub inputs: Vec<Vec<Token>>,
}

impl ProtocolSetup {
    pub fn new(stream: &[Token], intervals: Vec<Interval>) -> Result<Self> {
        check_partition(&intervals, stream.len())?;
        let inputs = intervals
            .iter()
            .map(|iv| stream[iv.start - 1..iv.end].to_vec())
            .collect();
        Ok(Self {
            n: stream.len(),
            intervals,
            inputs,
        })
    }

    pub fn players(&self) -> usize {
        self.intervals.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ForwardTranscript {
    pub setup: ProtocolSetup,
    pub layers: usize,
    pub dim: usize,
    pub precision: Precision,
    /// `messages[ℓ-1]` holds the round-`ℓ` messages in sender order.
    pub messages: Vec<Vec<Message>>,
    /// `incoming[ℓ-1][i-1]`: player `i`'s reconstruction of `h[ℓ, sᵢ-1]`.
    pub incoming: Vec<Vec<RingVector>>,
    /// `outgoing[ℓ-1][i-1]`: player `i`'s `h[ℓ, eᵢ]`.
    pub outgoing: Vec<Vec<RingVector>>,
    pub output: Token,
}

impl ForwardTranscript {
    pub fn players(&self) -> usize {
        self.setup.players()
    }

    pub fn all_messages(&self) -> impl Iterator<Item = &Message> {
        self.messages.iter().flatten()
    }

    pub fn message_count(&self) -> usize {
        self.all_messages().filter(|m| !m.padding).count()
    }

    pub fn total_bits(&self) -> usize {
        self.all_messages().map(Message::bit_count).sum()
    }

    pub fn max_message_bits(&self) -> usize {
        self.all_messages().map(Message::bit_count).max().unwrap_or(0)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let rounds: Vec<_> = self
            .messages
            .iter()
            .enumerate()
            .map(|(r, msgs)| {
                serde_json::json!({
                    "round": r + 1,
                    "messages": msgs.iter().map(message_json).collect::<Vec<_>>(),
                })
            })
            .collect();
        serde_json::json!({
            "players": self.players(),
            "layers": self.layers,
            "dim": self.dim,
            "precision": self.precision.bits(),
            "intervals": self.setup.intervals,
            "rounds": rounds,
            "output": self.output.payload,
            "max_message_bits": self.max_message_bits(),
            "total_bits": self.total_bits(),
        })
    }
}

fn message_json(m: &Message) -> serde_json::Value {
    serde_json::json!({
        "sender": m.sender,
        "recipients": m.recipients,
        "hex": m.payload.to_hex(),
        "bits": m.bit_count(),
        "padding": m.padding,
    })
}

/// One player's local view: its interval and the current layer's inputs on it.
struct PlayerView<'a> {
    machine: &'a SSMachine,
    interval: Interval,
    n: usize,
    inputs: Vec<Token>,
}

impl<'a> PlayerView<'a> {
    fn new(machine: &'a SSMachine, interval: Interval, n: usize, raw: &[Token]) -> Result<Self> {
        let inputs = raw
            .iter()
            .enumerate()
            .map(|(k, x)| machine.embed(x, interval.start + k))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            machine,
            interval,
            n,
            inputs,
        })
    }

    fn summary(&self, layer: usize) -> Result<AffineMap> {
        self.machine
            .block_summary(layer, self.interval.start, &self.inputs, Some(self.n))
    }

    /// Composes the received prefix summaries (in sender order) onto the
    /// initial state and replays the layer. Returns the incoming and final
    /// states.
    fn advance(&mut self, layer: usize, received: &[AffineMap]) -> Result<(RingVector, RingVector)> {
        let mut incoming = self.machine.initial_states()[layer - 1].clone();
        for s in received {
            incoming = s.apply(&incoming)?;
        }
        let (states, outputs) = self.machine.replay_layer(
            layer,
            self.interval.start,
            &incoming,
            &self.inputs,
            Some(self.n),
        )?;
        self.inputs = outputs;
        let last = states.last().cloned().unwrap_or_else(|| incoming.clone());
        Ok((incoming, last))
    }

    fn last_output(&self) -> Token {
        self.inputs.last().cloned().expect("nonempty interval")
    }
}

/// Runs the forward protocol for `machine` on an arbitrary partition.
pub fn run_forward_protocol(machine: &SSMachine, setup: ProtocolSetup) -> Result<ForwardTranscript> {
    let k = setup.players();
    let (d, p) = (machine.dim(), machine.precision());
    let mut views = setup
        .intervals
        .iter()
        .zip(&setup.inputs)
        .map(|(iv, raw)| PlayerView::new(machine, *iv, setup.n, raw))
        .collect::<Result<Vec<_>>>()?;
    let mut messages = Vec::with_capacity(machine.layer_count());
    let mut incoming = Vec::with_capacity(machine.layer_count());
    let mut outgoing = Vec::with_capacity(machine.layer_count());
    for layer in 1..=machine.layer_count() {
        let round: Vec<Message> = views[..k - 1]
            .iter()
            .enumerate()
            .map(|(i, v)| {
                Ok(Message {
                    round: layer,
                    sender: i + 1,
                    recipients: (i + 2..=k).collect(),
                    payload: v.summary(layer)?.to_bits(),
                    padding: false,
                })
            })
            .collect::<Result<_>>()?;
        let decoded = round
            .iter()
            .map(|m| AffineMap::from_bits(d, p, &m.payload))
            .collect::<Result<Vec<_>>>()?;
        let mut ins = Vec::with_capacity(k);
        let mut outs = Vec::with_capacity(k);
        for (i, view) in views.iter_mut().enumerate() {
            let (h_in, h_out) = view.advance(layer, &decoded[..i])?;
            ins.push(h_in);
            outs.push(h_out);
        }
        messages.push(round);
        incoming.push(ins);
        outgoing.push(outs);
    }
    Ok(ForwardTranscript {
        layers: machine.layer_count(),
        dim: d,
        precision: p,
        messages,
        incoming,
        outgoing,
        output: views[k - 1].last_output(),
        setup,
    })
}

/// The forward protocol on the row-major encoding with the block partition.
pub fn compile_ssm_forward_protocol(
    machine: &SSMachine,
    inst: &CompositionInstance,
) -> Result<ForwardTranscript> {
    let stream = inst.encode_row_major();
    let setup = ProtocolSetup::new(&stream.to_data_tokens(), partition_stream(&stream)?)?;
    run_forward_protocol(machine, setup)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub message: usize,
    pub round: usize,
    pub sender: usize,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CausalityReport {
    pub messages_checked: usize,
    pub violations: Vec<Violation>,
}

impl CausalityReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn flag(&mut self, message: usize, round: usize, sender: usize, reason: impl Into<String>) {
        self.violations.push(Violation {
            message,
            round,
            sender,
            reason: reason.into(),
        });
    }
}

/// Recomputes every message from its sender's input and the messages of
/// strictly earlier rounds, and the final output from player `K`'s view.
pub fn validate_causality(machine: &SSMachine, transcript: &ForwardTranscript) -> Result<CausalityReport> {
    let mut report = CausalityReport::default();
    let setup = &transcript.setup;
    let k = setup.players();
    let (d, p) = (machine.dim(), machine.precision());
    if transcript.messages.len() != machine.layer_count() {
        report.flag(0, 0, 0, format!(
            "{} rounds recorded for a {}-layer machine",
            transcript.messages.len(),
            machine.layer_count()
        ));
        return Ok(report);
    }
    let mut views = setup
        .intervals
        .iter()
        .zip(&setup.inputs)
        .map(|(iv, raw)| PlayerView::new(machine, *iv, setup.n, raw))
        .collect::<Result<Vec<_>>>()?;
    for (r, round) in transcript.messages.iter().enumerate() {
        let layer = r + 1;
        let mut by_sender: BTreeMap<usize, &Message> = BTreeMap::new();
        for m in round.iter().filter(|m| !m.padding) {
            report.messages_checked += 1;
            if m.round != layer {
                report.flag(0, m.round, m.sender, format!("filed under round {layer}"));
            }
            if m.sender == 0 || m.sender >= k {
                report.flag(0, layer, m.sender, "sender has no higher players");
                continue;
            }
            if m.recipients != (m.sender + 1..=k).collect::<Vec<_>>() {
                report.flag(0, layer, m.sender, "recipients are not all higher players");
            }
            if by_sender.insert(m.sender, m).is_some() {
                report.flag(0, layer, m.sender, "duplicate message");
            }
        }
        let mut decoded = Vec::with_capacity(k.saturating_sub(1));
        for (i, view) in views[..k - 1].iter().enumerate() {
            let expected = view.summary(layer)?.to_bits();
            match by_sender.get(&(i + 1)) {
                None => {
                    report.flag(0, layer, i + 1, "missing message");
                    decoded.push(AffineMap::from_bits(d, p, &expected)?);
                }
                Some(m) => {
                    if m.payload != expected {
                        report.flag(
                            0,
                            layer,
                            i + 1,
                            "payload is not a function of the sender's input and earlier rounds",
                        );
                    }
                    match AffineMap::from_bits(d, p, &m.payload) {
                        Ok(map) => decoded.push(map),
                        Err(e) => {
                            report.flag(0, layer, i + 1, format!("undecodable payload: {e}"));
                            decoded.push(AffineMap::from_bits(d, p, &expected)?);
                        }
                    }
                }
            }
        }
        for (i, view) in views.iter_mut().enumerate() {
            view.advance(layer, &decoded[..i])?;
        }
    }
    if views[k - 1].last_output() != transcript.output {
        report.flag(0, transcript.layers, k, "recorded output differs from player K's recomputation");
    }
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Party {
    Alice,
    Bob,
}

impl Party {
    /// Odd players belong to Alice, even players to Bob.
    pub fn of_player(i: usize) -> Self {
        if i % 2 == 1 {
            Party::Alice
        } else {
            Party::Bob
        }
    }

    pub fn other(self) -> Self {
        match self {
            Party::Alice => Party::Bob,
            Party::Bob => Party::Alice,
        }
    }
}

/// One forward message carried inside a two-party message.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Component {
    pub round: usize,
    pub sender: usize,
    pub payload: BitString,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TwoPartyMessage {
    pub speaker: Party,
    pub components: Vec<Component>,
    pub output_bit: Option<u8>,
    pub padding: bool,
}

impl TwoPartyMessage {
    pub fn bit_count(&self) -> usize {
        if self.padding {
            return 0;
        }
        self.components.iter().map(|c| c.payload.len()).sum::<usize>()
            + usize::from(self.output_bit.is_some())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TwoPartyTranscript {
    pub setup: ProtocolSetup,
    pub layers: usize,
    pub dim: usize,
    pub precision: Precision,
    pub messages: Vec<TwoPartyMessage>,
    pub output_bit: u8,
}

impl TwoPartyTranscript {
    pub fn players(&self) -> usize {
        self.setup.players()
    }

    /// Number of non-padding messages.
    pub fn message_count(&self) -> usize {
        self.messages.iter().filter(|m| !m.padding).count()
    }

    pub fn total_bits(&self) -> usize {
        self.messages.iter().map(TwoPartyMessage::bit_count).sum()
    }

    pub fn last_speaker(&self) -> Option<Party> {
        self.messages.iter().rev().find(|m| !m.padding).map(|m| m.speaker)
    }

    /// Appends zero-bit dummy messages, continuing the alternation, until
    /// there are `total` messages.
    pub fn pad_to(&mut self, total: usize) -> Result<()> {
        if total < self.messages.len() {
            return Err(Error::Protocol(format!(
                "cannot pad {} messages down to {total}",
                self.messages.len()
            )));
        }
        while self.messages.len() < total {
            let speaker = self.messages.last().map_or(Party::Alice, |m| m.speaker.other());
            self.messages.push(TwoPartyMessage {
                speaker,
                components: Vec::new(),
                output_bit: None,
                padding: true,
            });
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        let messages: Vec<_> = self
            .messages
            .iter()
            .enumerate()
            .map(|(j, m)| {
                serde_json::json!({
                    "index": j + 1,
                    "speaker": m.speaker,
                    "padding": m.padding,
                    "bits": m.bit_count(),
                    "output_bit": m.output_bit,
                    "components": m.components.iter().map(|c| serde_json::json!({
                        "round": c.round,
                        "sender": c.sender,
                        "hex": c.payload.to_hex(),
                        "bits": c.payload.len(),
                    })).collect::<Vec<_>>(),
                })
            })
            .collect();
        serde_json::json!({
            "players": self.players(),
            "layers": self.layers,
            "messages": messages,
            "output_bit": self.output_bit,
            "total_bits": self.total_bits(),
        })
    }
}

/// `m₁ = a₁`, `m₂ᵣ = (b₂ᵣ₋₁, b₂ᵣ)`, `m₂ᵣ₊₁ = (a₂ᵣ, a₂ᵣ₊₁)`, rounds beyond
/// `L` omitted; the last speaker appends the output parity.
pub fn serialize_two_party(transcript: &ForwardTranscript) -> Result<TwoPartyTranscript> {
    let k = transcript.players();
    let l = transcript.layers;
    if (k + l) % 2 == 0 {
        return Err(Error::Protocol(format!(
            "K - L must be odd for the last speaker to hold player K (K = {k}, L = {l})"
        )));
    }
    let component_of = |round: usize, party: Party| -> Vec<Component> {
        if round == 0 || round > l {
            return Vec::new();
        }
        transcript.messages[round - 1]
            .iter()
            .filter(|m| !m.padding && Party::of_player(m.sender) == party)
            .map(|m| Component {
                round,
                sender: m.sender,
                payload: m.payload.clone(),
            })
            .collect()
    };
    let output_bit = (transcript.output.payload.first().copied().unwrap_or(0) % 2) as u8;
    let mut messages = Vec::with_capacity(l + 1);
    for j in 1..=l + 1 {
        let speaker = if j % 2 == 1 { Party::Alice } else { Party::Bob };
        let mut components = Vec::new();
        if j > 1 {
            components.extend(component_of(j - 1, speaker));
        }
        components.extend(component_of(j, speaker));
        messages.push(TwoPartyMessage {
            speaker,
            components,
            output_bit: (j == l + 1).then_some(output_bit),
            padding: false,
        });
    }
    Ok(TwoPartyTranscript {
        setup: transcript.setup.clone(),
        layers: l,
        dim: transcript.dim,
        precision: transcript.precision,
        messages,
        output_bit,
    })
}

/// Checks alternation, the message bound, that each component was
/// computable by its speaker when sent, payload recomputation and the
/// appended output bit.
pub fn validate_two_party(machine: &SSMachine, transcript: &TwoPartyTranscript) -> Result<CausalityReport> {
    let mut report = CausalityReport::default();
    let k = transcript.players();
    let l = transcript.layers;
    let mut expected_speaker = Party::Alice;
    for (j, m) in transcript.messages.iter().enumerate() {
        if m.speaker != expected_speaker {
            report.flag(j + 1, 0, 0, "speakers do not alternate starting with Alice");
        }
        expected_speaker = m.speaker.other();
    }
    if transcript.message_count() > l + 1 {
        report.flag(0, 0, 0, format!("{} messages exceed L + 1 = {}", transcript.message_count(), l + 1));
    }
    // delivered[(round, sender)] = index of the message that carried it.
    let mut delivered: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut forward: Vec<Vec<Message>> = vec![Vec::new(); l];
    for (j, m) in transcript.messages.iter().enumerate().filter(|(_, m)| !m.padding) {
        for c in &m.components {
            report.messages_checked += 1;
            if c.round == 0 || c.round > l || c.sender == 0 || c.sender >= k {
                report.flag(j + 1, c.round, c.sender, "component outside the forward protocol");
                continue;
            }
            if Party::of_player(c.sender) != m.speaker {
                report.flag(j + 1, c.round, c.sender, "speaker does not simulate the sender");
            }
            for r in 1..c.round {
                for s in (1..c.sender).filter(|&s| Party::of_player(s) != m.speaker) {
                    if delivered.get(&(r, s)).map_or(true, |&at| at >= j) {
                        report.flag(
                            j + 1,
                            c.round,
                            c.sender,
                            format!("needs round-{r} message of player {s} before it was received"),
                        );
                    }
                }
            }
            if delivered.insert((c.round, c.sender), j).is_some() {
                report.flag(j + 1, c.round, c.sender, "forward message sent twice");
            }
            forward[c.round - 1].push(Message {
                round: c.round,
                sender: c.sender,
                recipients: (c.sender + 1..=k).collect(),
                payload: c.payload.clone(),
                padding: false,
            });
        }
    }
    for round in &mut forward {
        round.sort_by_key(|m| m.sender);
    }
    let players = transcript.players();
    let setup = transcript.setup.clone();
    let replayed = ForwardTranscript {
        layers: l,
        dim: transcript.dim,
        precision: transcript.precision,
        messages: forward,
        incoming: Vec::new(),
        outgoing: Vec::new(),
        // Compared against player K's recomputation below instead.
        output: Token::zeros(crate::ssm::TokenKind::Data, machine.token_width()),
        setup,
    };
    let inner = validate_causality(machine, &replayed)?;
    report.violations.extend(
        inner
            .violations
            .into_iter()
            .filter(|v| !v.reason.starts_with("recorded output")),
    );
    let recomputed = run_forward_protocol(machine, transcript.setup.clone())?;
    let parity = (recomputed.output.payload.first().copied().unwrap_or(0) % 2) as u8;
    let last = transcript.messages.iter().rev().find(|m| !m.padding);
    match last {
        Some(m) if m.output_bit == Some(transcript.output_bit) => {
            if Party::of_player(players) != m.speaker {
                report.flag(0, 0, players, "last speaker does not simulate player K");
            }
        }
        _ => report.flag(0, 0, players, "last message does not carry the output bit"),
    }
    if transcript.output_bit != parity {
        report.flag(0, 0, players, "output bit differs from the recomputed parity");
    }
    Ok(report)
}

/// Exact deterministic one-message (Alice → Bob, Bob answers) cost of
/// `k`-step pointer-chasing parity on `[N]`: `⌈log₂ #classes⌉`, where `f_A`
/// values are grouped by their answer vectors over all `f_B`.
pub fn min_one_round_cc(domain: usize, steps: usize, budget: Budget) -> Result<u32> {
    let per_side = (domain as u128).checked_pow(domain as u32);
    budget.check(per_side.and_then(|s| s.checked_mul(s)))?;
    let fbs: Vec<Vec<usize>> = all_maps(domain, budget)?.collect();
    let mut classes: BTreeSet<Vec<u8>> = BTreeSet::new();
    for fa in all_maps(domain, budget)? {
        let row = fbs
            .iter()
            .map(|fb| (pointer_chase(&fa, fb, steps) % 2) as u8)
            .collect();
        classes.insert(row);
    }
    Ok(ceil_log2(classes.len() as u128))
}

/// One summary row of a protocol benchmark run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[allow(non_snake_case)]
pub struct ProtocolSummary {
    pub N: usize,
    pub K: usize,
    pub L: usize,
    pub d: usize,
    pub p: u32,
    pub max_message_bits: usize,
    pub total_bits: usize,
    pub output: u64,
    pub oracle_output: u64,
    #[serde(rename = "match")]
    pub matches: bool,
}

impl ProtocolSummary {
    pub fn new(inst: &CompositionInstance, transcript: &ForwardTranscript) -> Self {
        let output = transcript.output.payload.first().copied().unwrap_or(0);
        let oracle_output = inst.eval() as u64;
        Self {
            N: inst.domain(),
            K: inst.functions(),
            L: transcript.layers,
            d: transcript.dim,
            p: transcript.precision.bits(),
            max_message_bits: transcript.max_message_bits(),
            total_bits: transcript.total_bits(),
            output,
            oracle_output,
            matches: output == oracle_output,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::build_composition_ssm;
    use crate::task::pc_to_composition;

    fn running_example() -> CompositionInstance {
        CompositionInstance::new(3, 2, vec![vec![3, 1, 2], vec![2, 3, 1]]).unwrap()
    }

    #[test]
    fn partition_examples() {
        let iv = partition_blocks(5, 2, 2).unwrap();
        assert_eq!(iv, vec![Interval { start: 1, end: 3 }, Interval { start: 4, end: 5 }]);
        assert_eq!(partition_blocks(4, 3, 1).unwrap(), vec![Interval { start: 1, end: 4 }]);
        assert!(partition_blocks(6, 2, 2).is_err());
    }

    #[test]
    fn compiled_protocol_reproduces_output() {
        let inst = running_example();
        let m = build_composition_ssm(3, 2).unwrap();
        let tr = compile_ssm_forward_protocol(&m, &inst).unwrap();
        assert_eq!(tr.output, Token::scalar(2));
        assert_eq!(tr.messages.len(), 3);
        assert!(tr.all_messages().all(|msg| msg.bit_count() == 2 * 3));
        assert_eq!(tr.message_count(), 3);
        assert!(validate_causality(&m, &tr).unwrap().is_valid());
    }

    #[test]
    fn single_player_sends_nothing() {
        let inst = CompositionInstance::new(2, 1, vec![vec![2, 1]]).unwrap();
        let m = build_composition_ssm(2, 1).unwrap();
        let tr = compile_ssm_forward_protocol(&m, &inst).unwrap();
        assert_eq!(tr.message_count(), 0);
        assert_eq!(tr.output, Token::scalar(2));
        let report = validate_causality(&m, &tr).unwrap();
        assert!(report.is_valid());
        assert_eq!(report.messages_checked, 0);
    }

    #[test]
    fn same_round_dependence_is_flagged() {
        let inst = CompositionInstance::new(2, 1, vec![vec![2, 1], vec![1, 1], vec![2, 2]]).unwrap();
        let m = build_composition_ssm(2, 3).unwrap();
        let mut tr = compile_ssm_forward_protocol(&m, &inst).unwrap();
        let (d, p) = (tr.dim, tr.precision);
        let peer = AffineMap::from_bits(d, p, &tr.messages[1][0].payload).unwrap();
        let own = AffineMap::from_bits(d, p, &tr.messages[1][1].payload).unwrap();
        let cheat = own.compose(&peer).unwrap();
        assert_ne!(cheat.to_bits(), tr.messages[1][1].payload);
        tr.messages[1][1].payload = cheat.to_bits();
        let report = validate_causality(&m, &tr).unwrap();
        assert!(!report.is_valid());
        assert_eq!((report.violations[0].round, report.violations[0].sender), (2, 2));
    }

    #[test]
    fn two_party_schedules() {
        // K = 1, L = 2: a single player, so every component is empty.
        let fa = vec![2, 3, 1];
        let fb = vec![3, 3, 2];
        let inst = pc_to_composition(&fa, &fb, 1).unwrap();
        let m = build_composition_ssm(3, 1).unwrap();
        let tr = compile_ssm_forward_protocol(&m, &inst).unwrap();
        let tp = serialize_two_party(&tr).unwrap();
        assert_eq!(tp.message_count(), 3);
        assert_eq!(tp.last_speaker(), Some(Party::Alice));
        let rounds: Vec<Vec<usize>> = tp
            .messages
            .iter()
            .map(|msg| msg.components.iter().map(|c| c.round).collect())
            .collect();
        assert_eq!(rounds, vec![Vec::<usize>::new(), vec![], vec![]]);
        assert!(validate_two_party(&m, &tp).unwrap().is_valid());

        let inst = pc_to_composition(&fa, &fb, 3).unwrap();
        let m = build_composition_ssm(3, 3).unwrap().pad_layers(5).unwrap();
        let tr = compile_ssm_forward_protocol(&m, &inst).unwrap();
        assert!(serialize_two_party(&tr).is_err());
    }

    #[test]
    fn two_party_l2_layout_and_padding() {
        let fa = vec![2, 3, 1];
        let fb = vec![3, 1, 2];
        // K = 5 players on a 2-layer machine: the machine only needs to be
        // some 2-layer model; use the K = 1 composition machine on the
        // 5-function stream with an explicit partition.
        let inst = pc_to_composition(&fa, &fb, 5).unwrap();
        let m = build_composition_ssm(3, 1).unwrap();
        let stream = inst.encode_row_major();
        let setup = ProtocolSetup::new(&stream.to_data_tokens(), partition_stream(&stream).unwrap()).unwrap();
        let tr = run_forward_protocol(&m, setup).unwrap();
        let mut tp = serialize_two_party(&tr).unwrap();
        let layout: Vec<Vec<(usize, usize)>> = tp
            .messages
            .iter()
            .map(|msg| msg.components.iter().map(|c| (c.round, c.sender)).collect())
            .collect();
        assert_eq!(
            layout,
            vec![
                vec![(1, 1), (1, 3)],
                vec![(1, 2), (1, 4), (2, 2), (2, 4)],
                vec![(2, 1), (2, 3)],
            ]
        );
        assert!(validate_two_party(&m, &tp).unwrap().is_valid());
        let bits = tp.total_bits();
        tp.pad_to(4).unwrap();
        assert_eq!(tp.total_bits(), bits);
        assert_eq!(tp.message_count(), 3);
        assert!(validate_two_party(&m, &tp).unwrap().is_valid());

        let mut bad = tp.clone();
        bad.messages.swap(0, 2);
        assert!(!validate_two_party(&m, &bad).unwrap().is_valid());
    }

    #[test]
    fn one_round_cc_small_cases() {
        assert_eq!(min_one_round_cc(1, 3, Budget::DEFAULT).unwrap(), 0);
        for n in 2..=3 {
            assert_eq!(min_one_round_cc(n, 1, Budget::DEFAULT).unwrap(), 1);
        }
        assert!(min_one_round_cc(5, 2, Budget(1000)).is_err());
    }
}
