//! Boolean circuit for one max-out neuron: ripple-carry reconstruction of
//! the shared preactivations, signed reinterpretation (free), a tournament
//! of max-of-two comparators, and masking by a random ring element.
//!
//! Gates are AND, XOR, and NOT only; XOR and NOT later garble for free, so
//! the AND count is the size that matters. The neuron circuit uses
//! p*l + 3(p-1)*l + l = (4p-2)*l AND gates in paper-exact mode.

use std::fmt::Write as _;

use crate::error::{Error, Result};

pub type WireId = usize;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum GateKind {
    And,
    Xor,
    Not,
}

#[derive(Clone, Copy, Debug)]
pub struct Gate {
    pub kind: GateKind,
    pub a: WireId,
    /// absent for NOT
    pub b: Option<WireId>,
    pub out: WireId,
}

/// Sign-bit handling of the comparators.
///
/// `PaperExact` takes the sign from an l-bit subtraction, which is correct
/// only when all pairwise differences fit Z_q (certified upstream) and
/// requires p to be a power of two. `SafeSign` subtracts at l+1 bits after
/// sign extension, is always correct, and costs one extra AND per
/// comparator.
#[derive(Clone, Copy, PartialEq, Eq, Debug, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CircuitMode {
    PaperExact,
    SafeSign,
}

impl CircuitMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            CircuitMode::PaperExact => "paper_exact",
            CircuitMode::SafeSign => "safe_sign",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "paper_exact" | "paper-exact" => Ok(CircuitMode::PaperExact),
            "safe_sign" | "safe-sign" => Ok(CircuitMode::SafeSign),
            other => Err(Error::CircuitBuild(format!("unknown circuit mode {other:?}"))),
        }
    }
}

/// Parameters of the neuron circuit.
#[derive(Clone, Copy, Debug)]
pub struct NeuronCircuitSpec {
    pub p: usize,
    pub l: u8,
    pub mode: CircuitMode,
}

/// An acyclic netlist with labelled input wires. Output wires are the l
/// bits of the masked maximum, LSB first.
#[derive(Clone, Debug)]
pub struct Circuit {
    pub wire_count: usize,
    pub gates: Vec<Gate>,
    pub garbler_inputs: Vec<(WireId, String)>,
    pub evaluator_inputs: Vec<(WireId, String)>,
    pub outputs: Vec<WireId>,
}

impl Circuit {
    pub fn and_count(&self) -> usize {
        self.gates.iter().filter(|g| g.kind == GateKind::And).count()
    }

    pub fn xor_count(&self) -> usize {
        self.gates.iter().filter(|g| g.kind == GateKind::Xor).count()
    }

    pub fn not_count(&self) -> usize {
        self.gates.iter().filter(|g| g.kind == GateKind::Not).count()
    }
}

/// Incremental netlist construction; wires are allocated in order, so the
/// gate list is topologically sorted by construction.
#[derive(Default)]
pub struct CircuitBuilder {
    wire_count: usize,
    gates: Vec<Gate>,
    garbler_inputs: Vec<(WireId, String)>,
    evaluator_inputs: Vec<(WireId, String)>,
}

impl CircuitBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn fresh(&mut self) -> WireId {
        let id = self.wire_count;
        self.wire_count += 1;
        id
    }

    pub fn garbler_input(&mut self, name: impl Into<String>) -> WireId {
        let w = self.fresh();
        self.garbler_inputs.push((w, name.into()));
        w
    }

    pub fn evaluator_input(&mut self, name: impl Into<String>) -> WireId {
        let w = self.fresh();
        self.evaluator_inputs.push((w, name.into()));
        w
    }

    pub fn and(&mut self, a: WireId, b: WireId) -> WireId {
        let out = self.fresh();
        self.gates.push(Gate {
            kind: GateKind::And,
            a,
            b: Some(b),
            out,
        });
        out
    }

    pub fn xor(&mut self, a: WireId, b: WireId) -> WireId {
        let out = self.fresh();
        self.gates.push(Gate {
            kind: GateKind::Xor,
            a,
            b: Some(b),
            out,
        });
        out
    }

    pub fn not(&mut self, a: WireId) -> WireId {
        let out = self.fresh();
        self.gates.push(Gate {
            kind: GateKind::Not,
            a,
            b: None,
            out,
        });
        out
    }

    pub fn finish(self, outputs: Vec<WireId>) -> Circuit {
        Circuit {
            wire_count: self.wire_count,
            gates: self.gates,
            garbler_inputs: self.garbler_inputs,
            evaluator_inputs: self.evaluator_inputs,
            outputs,
        }
    }
}

/// Carry input of a ripple-carry stage.
#[derive(Clone, Copy, Debug)]
pub enum CarryIn {
    Zero,
    One,
    Wire(WireId),
}

/// Full adder: sum = x ^ y ^ cin, cout = ((x ^ cin) & (y ^ cin)) ^ cin.
/// Exactly one AND gate.
pub fn build_full_adder(
    b: &mut CircuitBuilder,
    x: WireId,
    y: WireId,
    cin: WireId,
) -> (WireId, WireId) {
    let xy = b.xor(x, y);
    let sum = b.xor(xy, cin);
    let t1 = b.xor(x, cin);
    let t2 = b.xor(y, cin);
    let a = b.and(t1, t2);
    let cout = b.xor(a, cin);
    (sum, cout)
}

/// Ripple-carry adder mod 2^l; the final carry is dropped. One AND per bit
/// regardless of the carry-in kind.
pub fn build_adder(
    b: &mut CircuitBuilder,
    x: &[WireId],
    y: &[WireId],
    cin: CarryIn,
) -> Result<Vec<WireId>> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::CircuitBuild(format!(
            "adder operands must have equal nonzero width ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    let mut sums = Vec::with_capacity(x.len());
    let mut carry = cin;
    for (&xj, &yj) in x.iter().zip(y) {
        let (sum, cout) = match carry {
            CarryIn::Wire(c) => build_full_adder(b, xj, yj, c),
            CarryIn::Zero => {
                // half adder
                let sum = b.xor(xj, yj);
                let cout = b.and(xj, yj);
                (sum, cout)
            }
            CarryIn::One => {
                // FA with cin = 1: sum = !(x ^ y), cout = x | y
                let xy = b.xor(xj, yj);
                let sum = b.not(xy);
                let nx = b.not(xj);
                let ny = b.not(yj);
                let nor = b.and(nx, ny);
                let cout = b.not(nor);
                (sum, cout)
            }
        };
        sums.push(sum);
        carry = CarryIn::Wire(cout);
    }
    Ok(sums)
}

/// Two's-complement subtraction x - y = x + !y + 1 mod 2^l; l AND gates.
pub fn build_subtractor(b: &mut CircuitBuilder, x: &[WireId], y: &[WireId]) -> Result<Vec<WireId>> {
    let ny: Vec<WireId> = y.iter().map(|&w| b.not(w)).collect();
    build_adder(b, x, &ny, CarryIn::One)
}

/// max of two signed l-bit words. The sign bit sigma of a - b selects via
/// out_j = (a_j & !sigma) ^ (b_j & sigma); a wins ties (sigma = 0).
pub fn build_max_of_two(
    b: &mut CircuitBuilder,
    lhs: &[WireId],
    rhs: &[WireId],
    mode: CircuitMode,
) -> Result<Vec<WireId>> {
    if lhs.len() != rhs.len() || lhs.is_empty() {
        return Err(Error::CircuitBuild(format!(
            "max operands must have equal nonzero width ({} vs {})",
            lhs.len(),
            rhs.len()
        )));
    }
    let sigma = match mode {
        CircuitMode::PaperExact => {
            let diff = build_subtractor(b, lhs, rhs)?;
            *diff.last().expect("nonzero width")
        }
        CircuitMode::SafeSign => {
            // sign-extend by one bit, subtract at l + 1
            let ext = |v: &[WireId]| -> Vec<WireId> {
                let mut e = v.to_vec();
                e.push(*v.last().expect("nonzero width"));
                e
            };
            let diff = build_subtractor(b, &ext(lhs), &ext(rhs))?;
            *diff.last().expect("nonzero width")
        }
    };
    let nsigma = b.not(sigma);
    let out = lhs
        .iter()
        .zip(rhs)
        .map(|(&aj, &bj)| {
            let ta = b.and(aj, nsigma);
            let tb = b.and(bj, sigma);
            b.xor(ta, tb)
        })
        .collect();
    Ok(out)
}

/// The complete neuron circuit computing
/// (max_i mu(g_i + e_i mod q) + r) mod q as l unsigned output bits, where
/// g is the garbler's share vector, e the evaluator's, and r the garbler's
/// mask.
pub fn build_neuron_circuit(spec: &NeuronCircuitSpec) -> Result<Circuit> {
    if spec.p == 0 {
        return Err(Error::CircuitBuild("p must be at least 1".into()));
    }
    if spec.l == 0 || spec.l > 64 {
        return Err(Error::InvalidWidth(spec.l));
    }
    if spec.mode == CircuitMode::PaperExact && !spec.p.is_power_of_two() {
        return Err(Error::CircuitBuild(format!(
            "paper_exact mode requires p to be a power of two, got {}",
            spec.p
        )));
    }
    let l = spec.l as usize;
    let mut b = CircuitBuilder::new();
    let g_shares: Vec<Vec<WireId>> = (0..spec.p)
        .map(|i| {
            (0..l)
                .map(|j| b.garbler_input(format!("g[{i}].b{j}")))
                .collect()
        })
        .collect();
    let r_bits: Vec<WireId> = (0..l).map(|j| b.garbler_input(format!("r.b{j}"))).collect();
    let e_shares: Vec<Vec<WireId>> = (0..spec.p)
        .map(|i| {
            (0..l)
                .map(|j| b.evaluator_input(format!("e[{i}].b{j}")))
                .collect()
        })
        .collect();

    // share reconstruction: (g_i + e_i) mod q, final carry cut off; the
    // following mu is a free reinterpretation of the same wires as signed
    let mut entries: Vec<Vec<WireId>> = g_shares
        .iter()
        .zip(&e_shares)
        .map(|(g, e)| build_adder(&mut b, g, e, CarryIn::Zero))
        .collect::<Result<_>>()?;

    // tournament; odd survivors get a bye (safe_sign only)
    while entries.len() > 1 {
        let mut next = Vec::with_capacity(entries.len() / 2 + 1);
        let mut it = entries.chunks(2);
        for pair in &mut it {
            match pair {
                [a, c] => next.push(build_max_of_two(&mut b, a, c, spec.mode)?),
                [a] => next.push(a.clone()),
                _ => unreachable!(),
            }
        }
        entries = next;
    }
    let winner = entries.pop().expect("p >= 1");

    // unsigned reinterpretation is free; mask with r mod q
    let masked = build_adder(&mut b, &winner, &r_bits, CarryIn::Zero)?;
    Ok(b.finish(masked))
}

/// Deterministic gate-by-gate evaluation; the reference oracle for
/// garbling.
pub fn evaluate_plaintext(
    c: &Circuit,
    garbler_bits: &[bool],
    evaluator_bits: &[bool],
) -> Result<Vec<bool>> {
    if garbler_bits.len() != c.garbler_inputs.len() || evaluator_bits.len() != c.evaluator_inputs.len()
    {
        return Err(Error::CircuitBuild(format!(
            "expected {}+{} input bits, got {}+{}",
            c.garbler_inputs.len(),
            c.evaluator_inputs.len(),
            garbler_bits.len(),
            evaluator_bits.len()
        )));
    }
    let mut values: Vec<Option<bool>> = vec![None; c.wire_count];
    for ((w, _), &bit) in c.garbler_inputs.iter().zip(garbler_bits) {
        values[*w] = Some(bit);
    }
    for ((w, _), &bit) in c.evaluator_inputs.iter().zip(evaluator_bits) {
        values[*w] = Some(bit);
    }
    for g in &c.gates {
        let a = values[g.a].ok_or(Error::UnassignedWire(g.a))?;
        let out = match g.kind {
            GateKind::And => a & values[g.b.unwrap()].ok_or(Error::UnassignedWire(g.b.unwrap()))?,
            GateKind::Xor => a ^ values[g.b.unwrap()].ok_or(Error::UnassignedWire(g.b.unwrap()))?,
            GateKind::Not => !a,
        };
        values[g.out] = Some(out);
    }
    c.outputs
        .iter()
        .map(|&w| values[w].ok_or(Error::UnassignedWire(w)))
        .collect()
}

/// Line-oriented netlist export; identical circuits yield identical bytes.
pub fn export_netlist(c: &Circuit) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "WIRES {}", c.wire_count);
    let _ = writeln!(
        out,
        "GATES {} AND {} XOR {} NOT {}",
        c.gates.len(),
        c.and_count(),
        c.xor_count(),
        c.not_count()
    );
    for (w, name) in &c.garbler_inputs {
        let _ = writeln!(out, "GARBLER_INPUT {w} {name}");
    }
    for (w, name) in &c.evaluator_inputs {
        let _ = writeln!(out, "EVALUATOR_INPUT {w} {name}");
    }
    for g in &c.gates {
        match g.kind {
            GateKind::And => {
                let _ = writeln!(out, "AND {} {} {}", g.a, g.b.unwrap(), g.out);
            }
            GateKind::Xor => {
                let _ = writeln!(out, "XOR {} {} {}", g.a, g.b.unwrap(), g.out);
            }
            GateKind::Not => {
                let _ = writeln!(out, "NOT {} {}", g.a, g.out);
            }
        }
    }
    for w in &c.outputs {
        let _ = writeln!(out, "OUTPUT {w}");
    }
    out
}

/// Arithmetic reference for the neuron circuit:
/// (max_i mu((g_i + e_i) mod q) + r) mod q.
pub fn neuron_oracle(g: &[u64], e: &[u64], r: u64, l: u8) -> u64 {
    let q = 1u64 << l;
    let max = g
        .iter()
        .zip(e)
        .map(|(&a, &b)| crate::ring::mu_raw((a + b) % q, l))
        .max()
        .expect("p >= 1");
    ((max.rem_euclid(q as i64)) as u64 + r) % q
}

/// Packs a residue into LSB-first bits for circuit input.
pub fn value_to_bits(v: u64, l: u8) -> Vec<bool> {
    (0..l).map(|j| (v >> j) & 1 == 1).collect()
}

/// Recomposes LSB-first output bits into a residue.
pub fn bits_to_value(bits: &[bool]) -> u64 {
    bits.iter()
        .enumerate()
        .fold(0, |acc, (j, &b)| acc | ((b as u64) << j))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval_wires(c: &Circuit, g: &[bool], e: &[bool]) -> Vec<bool> {
        evaluate_plaintext(c, g, e).unwrap()
    }

    #[test]
    fn full_adder_truth_table() {
        for x in [false, true] {
            for y in [false, true] {
                for cin in [false, true] {
                    let mut b = CircuitBuilder::new();
                    let wx = b.garbler_input("x");
                    let wy = b.garbler_input("y");
                    let wc = b.garbler_input("c");
                    let (s, co) = build_full_adder(&mut b, wx, wy, wc);
                    let c = b.finish(vec![s, co]);
                    assert_eq!(c.and_count(), 1);
                    let out = eval_wires(&c, &[x, y, cin], &[]);
                    let total = x as u8 + y as u8 + cin as u8;
                    assert_eq!(out[0], total & 1 == 1, "sum of {x} {y} {cin}");
                    assert_eq!(out[1], total >= 2, "carry of {x} {y} {cin}");
                }
            }
        }
    }

    fn adder_circuit(l: u8, cin: CarryIn) -> Circuit {
        let mut b = CircuitBuilder::new();
        let x: Vec<_> = (0..l).map(|j| b.garbler_input(format!("x{j}"))).collect();
        let y: Vec<_> = (0..l).map(|j| b.evaluator_input(format!("y{j}"))).collect();
        let s = build_adder(&mut b, &x, &y, cin).unwrap();
        b.finish(s)
    }

    #[test]
    fn adder_worked_examples() {
        let c = adder_circuit(3, CarryIn::Zero);
        assert_eq!(c.and_count(), 3);
        // 3 + 6 = 9 -> 001 (carry cut off), 5 + 2 = 7 -> 111
        let run = |x: u64, y: u64| -> u64 {
            bits_to_value(&eval_wires(&c, &value_to_bits(x, 3), &value_to_bits(y, 3)))
        };
        assert_eq!(run(3, 6), 1);
        assert_eq!(run(5, 2), 7);
        for x in 0..8 {
            assert_eq!(run(x, 0), x);
        }
    }

    #[test]
    fn adder_exhaustive_with_all_carry_kinds() {
        for (cin, offset) in [(CarryIn::Zero, 0u64), (CarryIn::One, 1)] {
            let c = adder_circuit(4, cin);
            assert_eq!(c.and_count(), 4);
            for x in 0..16u64 {
                for y in 0..16u64 {
                    let got =
                        bits_to_value(&eval_wires(&c, &value_to_bits(x, 4), &value_to_bits(y, 4)));
                    assert_eq!(got, (x + y + offset) % 16);
                }
            }
        }
    }

    fn subtractor_circuit(l: u8) -> Circuit {
        let mut b = CircuitBuilder::new();
        let x: Vec<_> = (0..l).map(|j| b.garbler_input(format!("x{j}"))).collect();
        let y: Vec<_> = (0..l).map(|j| b.evaluator_input(format!("y{j}"))).collect();
        let s = build_subtractor(&mut b, &x, &y).unwrap();
        b.finish(s)
    }

    #[test]
    fn subtractor_examples() {
        let c = subtractor_circuit(4);
        assert_eq!(c.and_count(), 4);
        let run = |x: u64, y: u64| -> u64 {
            bits_to_value(&eval_wires(&c, &value_to_bits(x, 4), &value_to_bits(y, 4)))
        };
        assert_eq!(run(5, 2), 3);
        assert_eq!(run(2, 5), 13); // -3, sign bit set
        for x in 0..16 {
            assert_eq!(run(x, x), 0);
        }
    }

    fn max_circuit(l: u8, mode: CircuitMode) -> Circuit {
        let mut b = CircuitBuilder::new();
        let x: Vec<_> = (0..l).map(|j| b.garbler_input(format!("x{j}"))).collect();
        let y: Vec<_> = (0..l).map(|j| b.evaluator_input(format!("y{j}"))).collect();
        let s = build_max_of_two(&mut b, &x, &y, mode).unwrap();
        b.finish(s)
    }

    #[test]
    fn max_of_two_signed_pairs() {
        let l = 4u8;
        for mode in [CircuitMode::PaperExact, CircuitMode::SafeSign] {
            let c = max_circuit(l, mode);
            for a in -8i64..8 {
                for b in -8i64..8 {
                    // paper_exact needs the difference to fit Z_16
                    if mode == CircuitMode::PaperExact && !(-8..8).contains(&(a - b)) {
                        continue;
                    }
                    let ua = (a as u64) & 15;
                    let ub = (b as u64) & 15;
                    let got = bits_to_value(&eval_wires(
                        &c,
                        &value_to_bits(ua, l),
                        &value_to_bits(ub, l),
                    ));
                    let want = (a.max(b) as u64) & 15;
                    assert_eq!(got, want, "max({a}, {b}) in {mode:?}");
                }
            }
        }
    }

    #[test]
    fn max_of_two_ties_select_first() {
        let c = max_circuit(4, CircuitMode::PaperExact);
        for a in 0..16u64 {
            let bits = value_to_bits(a, 4);
            assert_eq!(bits_to_value(&eval_wires(&c, &bits, &bits)), a);
        }
    }

    #[test]
    fn max_safe_sign_handles_wide_differences() {
        // a - b overflows Z_16 here; safe_sign must still be right
        let c = max_circuit(4, CircuitMode::SafeSign);
        let got = bits_to_value(&eval_wires(
            &c,
            &value_to_bits(7, 4),           // +7
            &value_to_bits(8, 4),           // -8
        ));
        assert_eq!(got, 7);
    }

    #[test]
    fn neuron_gate_budget() {
        for p in [2usize, 4, 8, 16] {
            for l in [3u8, 16, 32] {
                let c = build_neuron_circuit(&NeuronCircuitSpec {
                    p,
                    l,
                    mode: CircuitMode::PaperExact,
                })
                .unwrap();
                assert_eq!(c.and_count(), (4 * p - 2) * l as usize, "p={p} l={l}");
                let safe = build_neuron_circuit(&NeuronCircuitSpec {
                    p,
                    l,
                    mode: CircuitMode::SafeSign,
                })
                .unwrap();
                assert_eq!(safe.and_count(), (4 * p - 2) * l as usize + (p - 1));
            }
        }
        // paper table values
        let count = |p, l| {
            build_neuron_circuit(&NeuronCircuitSpec {
                p,
                l,
                mode: CircuitMode::PaperExact,
            })
            .unwrap()
            .and_count()
        };
        assert_eq!(count(8, 16), 480);
        assert_eq!(count(16, 32), 1984);
    }

    #[test]
    fn neuron_rejects_bad_p_in_paper_exact() {
        assert!(build_neuron_circuit(&NeuronCircuitSpec {
            p: 3,
            l: 4,
            mode: CircuitMode::PaperExact,
        })
        .is_err());
        // safe_sign pads with byes
        let c = build_neuron_circuit(&NeuronCircuitSpec {
            p: 3,
            l: 4,
            mode: CircuitMode::SafeSign,
        })
        .unwrap();
        // two comparators at (3*4 + 1) ANDs each plus 3*4 adds and 4 mask
        assert_eq!(c.and_count(), 3 * 4 + 2 * (3 * 4 + 1) + 4);
    }

    fn eval_neuron(c: &Circuit, p: usize, l: u8, g: &[u64], e: &[u64], r: u64) -> u64 {
        let mut gb = Vec::new();
        for &v in g.iter().take(p) {
            gb.extend(value_to_bits(v, l));
        }
        gb.extend(value_to_bits(r, l));
        let mut eb = Vec::new();
        for &v in e.iter().take(p) {
            eb.extend(value_to_bits(v, l));
        }
        bits_to_value(&eval_wires(c, &gb, &eb))
    }

    #[test]
    fn neuron_matches_oracle_sampled() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(4);
        for mode in [CircuitMode::PaperExact, CircuitMode::SafeSign] {
            let (p, l) = (4usize, 5u8);
            let c = build_neuron_circuit(&NeuronCircuitSpec { p, l, mode }).unwrap();
            for _ in 0..500 {
                let g: Vec<u64> = (0..p).map(|_| rng.gen_range(0..32)).collect();
                // keep reconstructed entries small so paper_exact
                // differences fit Z_q
                let vals: Vec<i64> = (0..p).map(|_| rng.gen_range(-8..8)).collect();
                let e: Vec<u64> = g
                    .iter()
                    .zip(&vals)
                    .map(|(&gi, &v)| (v as u64).wrapping_sub(gi) & 31)
                    .collect();
                let r = rng.gen_range(0..32);
                let got = eval_neuron(&c, p, l, &g, &e, r);
                assert_eq!(got, neuron_oracle(&g, &e, r, l));
            }
        }
    }

    #[test]
    fn netlist_deterministic_and_counts() {
        let spec = NeuronCircuitSpec {
            p: 8,
            l: 16,
            mode: CircuitMode::PaperExact,
        };
        let a = export_netlist(&build_neuron_circuit(&spec).unwrap());
        let b = export_netlist(&build_neuron_circuit(&spec).unwrap());
        assert_eq!(a, b);
        assert!(a.contains("AND 480"));

        // single AND gate netlist
        let mut builder = CircuitBuilder::new();
        let x = builder.garbler_input("x");
        let y = builder.evaluator_input("y");
        let o = builder.and(x, y);
        let c = builder.finish(vec![o]);
        let text = export_netlist(&c);
        assert_eq!(
            text,
            "WIRES 3\nGATES 1 AND 1 XOR 0 NOT 0\nGARBLER_INPUT 0 x\nEVALUATOR_INPUT 1 y\nAND 0 1 2\nOUTPUT 2\n"
        );
    }

    #[test]
    fn plaintext_eval_gate_basics() {
        let mut b = CircuitBuilder::new();
        let x = b.garbler_input("x");
        let y = b.evaluator_input("y");
        let o = b.and(x, y);
        let c = b.finish(vec![o]);
        assert_eq!(eval_wires(&c, &[true], &[true]), vec![true]);
        assert_eq!(eval_wires(&c, &[true], &[false]), vec![false]);
        assert!(evaluate_plaintext(&c, &[true, false], &[true]).is_err());

        let mut b = CircuitBuilder::new();
        let x = b.garbler_input("x");
        let y = b.evaluator_input("y");
        let o = b.xor(x, y);
        let c = b.finish(vec![o]);
        assert_eq!(eval_wires(&c, &[true], &[true]), vec![false]);
    }
}
