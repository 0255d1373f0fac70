//! Symbolic finite agent automata and Turing machines, their one-hot
//! encodings, and teaching/verifying a [`DevNetwork`] on their control.
//!
//! A transition `(q, sigma) -> action` is taught as one supervised step:
//! the motor area is clamped to the state `q`, the sensory input is
//! `sigma`, and the teacher imposes the action. For a finite automaton the
//! action is the next state; for a Turing machine it is
//! `(next state, write symbol, head move)`, one concept zone each.

use std::collections::HashMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::dn::{argmax_positive, zone_slices, DevNetwork, Motor};
use crate::error::{Error, Result};
use crate::rng::{rng_for, Stream};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteAgentAutomaton {
    states: Vec<String>,
    alphabet: Vec<String>,
    /// Row-major `|Q| x |Sigma|` table of next-state indices.
    table: Vec<usize>,
    initial: usize,
}

impl FiniteAgentAutomaton {
    pub fn new(
        states: Vec<String>,
        alphabet: Vec<String>,
        table: Vec<usize>,
        initial: usize,
    ) -> Result<Self> {
        if states.is_empty() || alphabet.is_empty() {
            return Err(Error::InvalidArgument(
                "automaton needs at least one state and one symbol".into(),
            ));
        }
        if table.len() != states.len() * alphabet.len() {
            return Err(Error::InvalidArgument(format!(
                "transition table has {} entries, expected {}",
                table.len(),
                states.len() * alphabet.len()
            )));
        }
        if initial >= states.len() || table.iter().any(|&q| q >= states.len()) {
            return Err(Error::InvalidArgument("state index out of range".into()));
        }
        Ok(Self {
            states,
            alphabet,
            table,
            initial,
        })
    }

    /// A random total automaton; state and symbol names are `q0..`, `s0..`.
    pub fn random<R: Rng>(n_states: usize, n_symbols: usize, rng: &mut R) -> Self {
        let states = (0..n_states).map(|i| format!("q{i}")).collect();
        let alphabet = (0..n_symbols).map(|i| format!("s{i}")).collect();
        let table = (0..n_states * n_symbols)
            .map(|_| rng.gen_range(0..n_states))
            .collect();
        Self::new(states, alphabet, table, 0).expect("valid random automaton")
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn alphabet(&self) -> &[String] {
        &self.alphabet
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn transition_count(&self) -> usize {
        self.table.len()
    }

    pub fn next(&self, q: usize, sigma: usize) -> usize {
        self.table[q * self.alphabet.len() + sigma]
    }

    pub fn symbol_index(&self, sym: &str) -> Result<usize> {
        self.alphabet
            .iter()
            .position(|s| s == sym)
            .ok_or_else(|| Error::UnknownSymbol(sym.to_string()))
    }

    /// States visited after each input symbol, `(q_1, ..., q_n)`.
    pub fn run(&self, input: &[usize]) -> Result<Vec<usize>> {
        let mut q = self.initial;
        let mut out = Vec::with_capacity(input.len());
        for &s in input {
            if s >= self.alphabet.len() {
                return Err(Error::UnknownSymbol(format!("#{s}")));
            }
            q = self.next(q, s);
            out.push(q);
        }
        Ok(out)
    }

    pub fn run_symbols(&self, input: &[&str]) -> Result<Vec<String>> {
        let idx = input
            .iter()
            .map(|s| self.symbol_index(s))
            .collect::<Result<Vec<_>>>()?;
        Ok(self
            .run(&idx)?
            .into_iter()
            .map(|q| self.states[q].clone())
            .collect())
    }

    /// Codec with the alphabet as sensory space and one motor zone of states.
    pub fn codec(&self) -> OneHotCodec {
        OneHotCodec::new(self.alphabet.clone(), vec![self.states.clone()])
    }

    /// Control entries in lexicographic `(q, sigma)` order.
    pub fn control(&self) -> Vec<ControlEntry> {
        let mut out = Vec::with_capacity(self.table.len());
        for q in 0..self.states.len() {
            for s in 0..self.alphabet.len() {
                out.push(ControlEntry {
                    state: q,
                    symbol: s,
                    action: vec![self.next(q, s)],
                });
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Move {
    Left,
    Right,
    Halt,
}

impl Move {
    pub const ALL: [Move; 3] = [Move::Left, Move::Right, Move::Halt];

    pub fn index(self) -> usize {
        match self {
            Move::Left => 0,
            Move::Right => 1,
            Move::Halt => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Move::Left => "L",
            Move::Right => "R",
            Move::Halt => "H",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "L" => Some(Move::Left),
            "R" => Some(Move::Right),
            "H" => Some(Move::Halt),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TmAction {
    pub next: usize,
    pub write: usize,
    pub movement: Move,
}

/// Deterministic single-tape machine with a total transition table.
/// Halting is the explicit `H` move, applied after the write.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TuringMachine {
    states: Vec<String>,
    symbols: Vec<String>,
    blank: usize,
    table: Vec<TmAction>,
    initial: usize,
}

impl TuringMachine {
    pub fn new(
        states: Vec<String>,
        symbols: Vec<String>,
        blank: usize,
        table: Vec<TmAction>,
        initial: usize,
    ) -> Result<Self> {
        if states.is_empty() || symbols.is_empty() {
            return Err(Error::InvalidArgument(
                "machine needs at least one state and one symbol".into(),
            ));
        }
        if table.len() != states.len() * symbols.len() {
            return Err(Error::InvalidArgument(format!(
                "transition table has {} entries, expected {}",
                table.len(),
                states.len() * symbols.len()
            )));
        }
        if blank >= symbols.len()
            || initial >= states.len()
            || table
                .iter()
                .any(|a| a.next >= states.len() || a.write >= symbols.len())
        {
            return Err(Error::InvalidArgument("index out of range".into()));
        }
        Ok(Self {
            states,
            symbols,
            blank,
            table,
            initial,
        })
    }

    /// Unary successor: walk right over `1`s, write `1` on the first blank, halt.
    pub fn unary_increment() -> Self {
        let r = TmAction {
            next: 0,
            write: 1,
            movement: Move::Right,
        };
        let h = TmAction {
            next: 0,
            write: 1,
            movement: Move::Halt,
        };
        // symbols: 0 = "_", 1 = "1"
        Self::new(
            vec!["scan".into()],
            vec!["_".into(), "1".into()],
            0,
            vec![h, r],
            0,
        )
        .expect("valid machine")
    }

    /// Halts on the first step without changing the tape.
    pub fn immediate_halt(symbols: Vec<String>) -> Self {
        let table = (0..symbols.len())
            .map(|s| TmAction {
                next: 0,
                write: s,
                movement: Move::Halt,
            })
            .collect();
        Self::new(vec!["start".into()], symbols, 0, table, 0).expect("valid machine")
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn blank(&self) -> usize {
        self.blank
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn action(&self, q: usize, s: usize) -> TmAction {
        self.table[q * self.symbols.len() + s]
    }

    pub fn symbol_index(&self, sym: &str) -> Result<usize> {
        self.symbols
            .iter()
            .position(|s| s == sym)
            .ok_or_else(|| Error::UnknownSymbol(sym.to_string()))
    }

    /// Parse a tape where each character is one symbol.
    pub fn parse_tape(&self, tape: &str) -> Result<Vec<usize>> {
        tape.chars()
            .map(|c| self.symbol_index(&c.to_string()))
            .collect()
    }

    pub fn render_tape(&self, tape: &[usize]) -> String {
        tape.iter().map(|&s| self.symbols[s].as_str()).collect()
    }

    /// Codec: sensory space = tape symbols; motor zones = states, write
    /// symbols, head moves.
    pub fn codec(&self) -> OneHotCodec {
        OneHotCodec::new(
            self.symbols.clone(),
            vec![
                self.states.clone(),
                self.symbols.clone(),
                Move::ALL.iter().map(|m| m.symbol().to_string()).collect(),
            ],
        )
    }

    pub fn control(&self) -> Vec<ControlEntry> {
        let mut out = Vec::with_capacity(self.table.len());
        for q in 0..self.states.len() {
            for s in 0..self.symbols.len() {
                let a = self.action(q, s);
                out.push(ControlEntry {
                    state: q,
                    symbol: s,
                    action: vec![a.next, a.write, a.movement.index()],
                });
            }
        }
        out
    }

    pub fn run(&self, input: &[usize], step_budget: u64) -> Result<TmRun> {
        run_machine(self, input, step_budget, |q, s| Ok(Some(self.action(q, s))))
    }
}

/// Two-sided tape that grows on demand.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tape {
    cells: Vec<usize>,
    /// Index into `cells` of tape position 0.
    origin: usize,
    blank: usize,
}

impl Tape {
    pub fn new(input: &[usize], blank: usize) -> Self {
        Self {
            cells: if input.is_empty() {
                vec![blank]
            } else {
                input.to_vec()
            },
            origin: 0,
            blank,
        }
    }

    fn slot(&mut self, pos: i64) -> usize {
        let mut idx = self.origin as i64 + pos;
        while idx < 0 {
            self.cells.insert(0, self.blank);
            self.origin += 1;
            idx += 1;
        }
        let idx = idx as usize;
        if idx >= self.cells.len() {
            self.cells.resize(idx + 1, self.blank);
        }
        idx
    }

    pub fn read(&mut self, pos: i64) -> usize {
        let i = self.slot(pos);
        self.cells[i]
    }

    pub fn write(&mut self, pos: i64, sym: usize) {
        let i = self.slot(pos);
        self.cells[i] = sym;
    }

    /// Contents with leading and trailing blanks removed.
    pub fn trimmed(&self) -> Vec<usize> {
        let start = self.cells.iter().position(|&s| s != self.blank);
        match start {
            None => Vec::new(),
            Some(a) => {
                let b = self.cells.iter().rposition(|&s| s != self.blank).unwrap();
                self.cells[a..=b].to_vec()
            }
        }
    }
}

/// One executed step of a machine run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TmStepRecord {
    pub step: u64,
    pub state: usize,
    pub read: usize,
    /// Action actually applied; `None` if the controller produced no
    /// decodable action.
    pub action: Option<TmAction>,
    /// Whether the controller disagreed with the reference table.
    pub mismatch: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TmRun {
    /// Final tape, blanks trimmed at both ends.
    pub tape: Vec<usize>,
    pub halted: bool,
    pub steps: u64,
    pub log: Vec<TmStepRecord>,
}

impl TmRun {
    pub fn first_mismatch(&self) -> Option<&TmStepRecord> {
        self.log.iter().find(|r| r.mismatch)
    }
}

fn run_machine<F>(tm: &TuringMachine, input: &[usize], step_budget: u64, mut control: F) -> Result<TmRun>
where
    F: FnMut(usize, usize) -> Result<Option<TmAction>>,
{
    if let Some(&bad) = input.iter().find(|&&s| s >= tm.symbols.len()) {
        return Err(Error::UnknownSymbol(format!("#{bad}")));
    }
    let mut tape = Tape::new(input, tm.blank);
    let mut head: i64 = 0;
    let mut q = tm.initial;
    let mut steps = 0;
    let mut log = Vec::new();
    let mut halted = false;
    while steps < step_budget {
        let read = tape.read(head);
        let action = control(q, read)?;
        let reference = tm.action(q, read);
        steps += 1;
        log.push(TmStepRecord {
            step: steps,
            state: q,
            read,
            action,
            mismatch: action != Some(reference),
        });
        let Some(a) = action else {
            break;
        };
        tape.write(head, a.write);
        q = a.next;
        match a.movement {
            Move::Left => head -= 1,
            Move::Right => head += 1,
            Move::Halt => {
                halted = true;
                break;
            }
        }
    }
    Ok(TmRun {
        tape: tape.trimmed(),
        halted,
        steps,
        log,
    })
}

/// One-hot codes for the sensory alphabet and for each motor concept zone.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OneHotCodec {
    inputs: Vec<String>,
    zones: Vec<Vec<String>>,
    input_index: HashMap<String, usize>,
}

impl OneHotCodec {
    pub fn new(inputs: Vec<String>, zones: Vec<Vec<String>>) -> Self {
        let input_index = inputs
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        Self {
            inputs,
            zones,
            input_index,
        }
    }

    pub fn x_dim(&self) -> usize {
        self.inputs.len()
    }

    pub fn zone_sizes(&self) -> Vec<usize> {
        self.zones.iter().map(Vec::len).collect()
    }

    pub fn z_dim(&self) -> usize {
        self.zones.iter().map(Vec::len).sum()
    }

    pub fn encode_input(&self, sym: &str) -> Result<Vec<f64>> {
        let i = *self
            .input_index
            .get(sym)
            .ok_or_else(|| Error::UnknownSymbol(sym.to_string()))?;
        Ok(self.encode_input_index(i))
    }

    pub fn encode_input_index(&self, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.inputs.len()];
        v[i] = 1.0;
        v
    }

    pub fn decode_input(&self, x: &[f64]) -> Option<&str> {
        argmax_positive(x).map(|i| self.inputs[i].as_str())
    }

    /// Motor vector with one active component per zone.
    pub fn encode_motor(&self, choice: &[usize]) -> Vec<f64> {
        debug_assert_eq!(choice.len(), self.zones.len());
        let mut z = vec![0.0; self.z_dim()];
        let mut start = 0;
        for (zone, &c) in self.zones.iter().zip(choice) {
            z[start + c] = 1.0;
            start += zone.len();
        }
        z
    }

    /// Motor vector carrying only the state (first zone).
    pub fn encode_state(&self, q: usize) -> Vec<f64> {
        let mut z = vec![0.0; self.z_dim()];
        z[q] = 1.0;
        z
    }

    /// Argmax per zone; `None` if any zone is silent.
    pub fn decode_motor(&self, z: &[f64]) -> Option<Vec<usize>> {
        zone_slices(z, &self.zone_sizes())
            .into_iter()
            .map(argmax_positive)
            .collect()
    }

    pub fn motor_names(&self, choice: &[usize]) -> Vec<&str> {
        self.zones
            .iter()
            .zip(choice)
            .map(|(z, &c)| z[c].as_str())
            .collect()
    }
}

/// One transition of a control table: in `state` reading `symbol`,
/// emit `action` (one index per motor zone).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControlEntry {
    pub state: usize,
    pub symbol: usize,
    pub action: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TeachOrder {
    Lexicographic,
    /// Fresh permutation every epoch, derived from the seed and epoch number.
    Shuffled(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TeachingLog {
    /// Mean prediction error per epoch: the fraction of transitions whose
    /// motor output, before the teacher imposed it, was wrong.
    pub epoch_errors: Vec<f64>,
    /// The network had fewer hidden neurons than transitions, so the
    /// error-free guarantee does not apply.
    pub capacity_warning: bool,
    pub capacity_events: u64,
}

/// Teach every entry of `control` as one supervised step per epoch.
pub fn teach_control(
    net: &mut DevNetwork,
    codec: &OneHotCodec,
    control: &[ControlEntry],
    epochs: usize,
    order: TeachOrder,
) -> Result<TeachingLog> {
    if epochs == 0 {
        return Err(Error::InvalidArgument("epochs must be positive".into()));
    }
    check_codec(net, codec)?;
    let capacity_warning = net.y_area().capacity() < control.len();
    let events_before = net.capacity_events();
    let mut epoch_errors = Vec::with_capacity(epochs);
    let mut idx: Vec<usize> = (0..control.len()).collect();
    for epoch in 0..epochs {
        if let TeachOrder::Shuffled(seed) = order {
            idx = (0..control.len()).collect();
            idx.shuffle(&mut rng_for(seed, Stream::Shuffle, epoch as u64));
        }
        let mut errors = 0.0;
        for &i in &idx {
            let entry = &control[i];
            net.clamp_motor(&codec.encode_state(entry.state))?;
            let x = codec.encode_input_index(entry.symbol);
            let target = codec.encode_motor(&entry.action);
            let out = net.step(&x, Motor::Supervised(&target))?;
            errors += out.prediction_error.unwrap_or(0.0);
        }
        epoch_errors.push(if control.is_empty() {
            0.0
        } else {
            errors / control.len() as f64
        });
    }
    Ok(TeachingLog {
        epoch_errors,
        capacity_warning,
        capacity_events: net.capacity_events() - events_before,
    })
}

fn check_codec(net: &DevNetwork, codec: &OneHotCodec) -> Result<()> {
    if net.config().x_dim != codec.x_dim() || net.config().zones != codec.zone_sizes() {
        return Err(Error::InvalidArgument(
            "codec does not match the network's sensory/motor layout".into(),
        ));
    }
    Ok(())
}

pub fn teach_fa(
    net: &mut DevNetwork,
    fa: &FiniteAgentAutomaton,
    codec: &OneHotCodec,
    epochs: usize,
    order: TeachOrder,
) -> Result<TeachingLog> {
    teach_control(net, codec, &fa.control(), epochs, order)
}

/// Drive a copy of the network with each entry's `(state, symbol)` and
/// return the entries whose decoded motor output differs from the action.
pub fn verify_control(
    net: &DevNetwork,
    codec: &OneHotCodec,
    control: &[ControlEntry],
) -> Result<Vec<ControlEntry>> {
    check_codec(net, codec)?;
    let results: Vec<Result<Option<ControlEntry>>> = control
        .par_iter()
        .map(|entry| {
            let mut probe = net.clone();
            probe.clamp_motor(&codec.encode_state(entry.state))?;
            let out = probe.step(&codec.encode_input_index(entry.symbol), Motor::Free)?;
            let ok = codec.decode_motor(&out.z).as_deref() == Some(entry.action.as_slice());
            Ok((!ok).then(|| entry.clone()))
        })
        .collect();
    let mut mismatches = Vec::new();
    for r in results {
        if let Some(e) = r? {
            mismatches.push(e);
        }
    }
    Ok(mismatches)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EquivalenceReport {
    /// `(state, symbol)` names of every mismatching transition.
    pub mismatches: Vec<(String, String)>,
    pub checked: usize,
}

impl EquivalenceReport {
    pub fn is_equivalent(&self) -> bool {
        self.mismatches.is_empty()
    }
}

impl fmt::Display for EquivalenceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{} mismatches out of {} transitions",
            self.mismatches.len(),
            self.checked
        )?;
        for (q, s) in &self.mismatches {
            writeln!(f, "  mismatch: state {q}, input {s}")?;
        }
        Ok(())
    }
}

pub fn verify_fa_equivalence(
    net: &DevNetwork,
    fa: &FiniteAgentAutomaton,
    codec: &OneHotCodec,
) -> Result<EquivalenceReport> {
    let control = fa.control();
    let bad = verify_control(net, codec, &control)?;
    Ok(EquivalenceReport {
        mismatches: bad
            .into_iter()
            .map(|e| (fa.states[e.state].clone(), fa.alphabet[e.symbol].clone()))
            .collect(),
        checked: control.len(),
    })
}

pub fn teach_tm(
    net: &mut DevNetwork,
    tm: &TuringMachine,
    codec: &OneHotCodec,
    epochs: usize,
    order: TeachOrder,
) -> Result<TeachingLog> {
    teach_control(net, codec, &tm.control(), epochs, order)
}

/// Run `tm`'s tape semantics with the network as the controller. Each step
/// clamps the motor area to the current state, presents the symbol under
/// the head, and decodes `(next, write, move)` from the motor output. A
/// silent motor zone stops the run with `halted = false`; any disagreement
/// with `tm`'s own table is flagged in the log.
pub fn run_tm_via_dn(
    net: &mut DevNetwork,
    tm: &TuringMachine,
    codec: &OneHotCodec,
    input: &[usize],
    step_budget: u64,
) -> Result<TmRun> {
    check_codec(net, codec)?;
    run_machine(tm, input, step_budget, |q, s| {
        net.clamp_motor(&codec.encode_state(q))?;
        let out = net.step(&codec.encode_input_index(s), Motor::Free)?;
        Ok(codec.decode_motor(&out.z).and_then(|c| {
            Some(TmAction {
                next: c[0],
                write: c[1],
                movement: Move::from_index(c[2])?,
            })
        }))
    })
}

/// A parsed machine description.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MachineSpec {
    Fa(FiniteAgentAutomaton),
    Tm(TuringMachine),
}

/// Parse the line-based machine format:
///
/// ```text
/// # comment
/// kind: fa            # or tm; default fa
/// states: even odd
/// alphabet: 0 1
/// initial: even       # default: first state
/// blank: _            # tm only; default: first symbol
/// even 0 -> even      # fa transition
/// scan 1 -> scan 1 R  # tm transition: next write move(L|R|H)
/// ```
///
/// Every `(state, symbol)` pair needs exactly one transition.
pub fn parse_machine(text: &str) -> Result<MachineSpec> {
    let err = |line: usize, message: String| Error::Parse { line, message };
    let mut kind: Option<String> = None;
    let mut states: Option<Vec<String>> = None;
    let mut alphabet: Option<Vec<String>> = None;
    let mut initial: Option<(usize, String)> = None;
    let mut blank: Option<(usize, String)> = None;
    let mut transitions: Vec<(usize, Vec<String>, Vec<String>)> = Vec::new();
    let mut last_line = 0;

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        last_line = line_no;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some((lhs, rhs)) = line.split_once("->") {
            let lhs: Vec<String> = lhs.split_whitespace().map(String::from).collect();
            let rhs: Vec<String> = rhs.split_whitespace().map(String::from).collect();
            if lhs.len() != 2 {
                return Err(err(
                    line_no,
                    "transition needs `state symbol -> ...`".into(),
                ));
            }
            transitions.push((line_no, lhs, rhs));
            continue;
        }
        let Some((key, value)) = line.split_once(':') else {
            return Err(err(line_no, format!("cannot parse `{line}`")));
        };
        let values: Vec<String> = value.split_whitespace().map(String::from).collect();
        let single = |name: &str| -> Result<String> {
            match values.as_slice() {
                [v] => Ok(v.clone()),
                _ => Err(err(line_no, format!("`{name}` takes exactly one value"))),
            }
        };
        let set_once = |slot_is_some: bool, name: &str| -> Result<()> {
            if slot_is_some {
                Err(err(line_no, format!("duplicate `{name}` header")))
            } else {
                Ok(())
            }
        };
        match key.trim() {
            "kind" => {
                set_once(kind.is_some(), "kind")?;
                let k = single("kind")?;
                if k != "fa" && k != "tm" {
                    return Err(err(line_no, format!("unknown kind `{k}` (expected fa or tm)")));
                }
                kind = Some(k);
            }
            "states" => {
                set_once(states.is_some(), "states")?;
                states = Some(unique_list(values, line_no, "state")?);
            }
            "alphabet" => {
                set_once(alphabet.is_some(), "alphabet")?;
                alphabet = Some(unique_list(values, line_no, "symbol")?);
            }
            "initial" => {
                set_once(initial.is_some(), "initial")?;
                initial = Some((line_no, single("initial")?));
            }
            "blank" => {
                set_once(blank.is_some(), "blank")?;
                blank = Some((line_no, single("blank")?));
            }
            other => return Err(err(line_no, format!("unknown header `{other}`"))),
        }
    }

    let states = states.ok_or_else(|| err(last_line.max(1), "missing `states` header".into()))?;
    let alphabet =
        alphabet.ok_or_else(|| err(last_line.max(1), "missing `alphabet` header".into()))?;
    let state_idx = |name: &str, line: usize| {
        states
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| err(line, format!("unknown state `{name}`")))
    };
    let sym_idx = |name: &str, line: usize| {
        alphabet
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| err(line, format!("unknown symbol `{name}`")))
    };
    let initial = match &initial {
        Some((line, name)) => state_idx(name, *line)?,
        None => 0,
    };
    let is_tm = kind.as_deref() == Some("tm");
    if let (false, Some((line, _))) = (is_tm, &blank) {
        return Err(err(*line, "`blank` is only valid for kind tm".into()));
    }

    let width = alphabet.len();
    let mut seen: Vec<Option<usize>> = vec![None; states.len() * width];
    let mut fa_table = vec![0; states.len() * width];
    let mut tm_table = vec![
        TmAction {
            next: 0,
            write: 0,
            movement: Move::Halt
        };
        states.len() * width
    ];
    for (line, lhs, rhs) in &transitions {
        let q = state_idx(&lhs[0], *line)?;
        let s = sym_idx(&lhs[1], *line)?;
        let slot = q * width + s;
        if let Some(prev) = seen[slot] {
            return Err(err(
                *line,
                format!(
                    "duplicate transition for ({}, {}), first given on line {prev}",
                    lhs[0], lhs[1]
                ),
            ));
        }
        seen[slot] = Some(*line);
        if is_tm {
            let [next, write, mv] = rhs.as_slice() else {
                return Err(err(*line, "tm transition needs `-> next write move`".into()));
            };
            let movement = Move::parse(mv)
                .ok_or_else(|| err(*line, format!("unknown move `{mv}` (expected L, R or H)")))?;
            tm_table[slot] = TmAction {
                next: state_idx(next, *line)?,
                write: sym_idx(write, *line)?,
                movement,
            };
        } else {
            let [next] = rhs.as_slice() else {
                return Err(err(*line, "fa transition needs `-> next`".into()));
            };
            fa_table[slot] = state_idx(next, *line)?;
        }
    }
    if let Some(missing) = seen.iter().position(Option::is_none) {
        return Err(err(
            last_line.max(1),
            format!(
                "missing transition for ({}, {})",
                states[missing / width],
                alphabet[missing % width]
            ),
        ));
    }

    if is_tm {
        let blank = match &blank {
            Some((line, name)) => sym_idx(name, *line)?,
            None => 0,
        };
        Ok(MachineSpec::Tm(TuringMachine::new(
            states, alphabet, blank, tm_table, initial,
        )?))
    } else {
        Ok(MachineSpec::Fa(FiniteAgentAutomaton::new(
            states, alphabet, fa_table, initial,
        )?))
    }
}

fn unique_list(values: Vec<String>, line: usize, what: &str) -> Result<Vec<String>> {
    if values.is_empty() {
        return Err(Error::Parse {
            line,
            message: format!("empty {what} list"),
        });
    }
    for (i, v) in values.iter().enumerate() {
        if values[..i].contains(v) {
            return Err(Error::Parse {
                line,
                message: format!("duplicate {what} `{v}`"),
            });
        }
    }
    Ok(values)
}
