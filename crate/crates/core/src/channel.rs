//! Interaction channels: one combine and one split applied to the two
//! interacting particle/waves, typed against a vertex rule table.

use std::collections::HashSet;
use std::fmt;


use crate::error::{Error, Result};
use crate::kinematics::{rotate_from_z, two_body_momentum, FourMomentum};
use crate::particle::ParticleType;
use crate::qstate::{Path, SpinState, StateElement};

/// Embedded QED vertex table: one lepton-photon vertex per charged lepton,
/// read as `combine(in1, in2) -> out` and `split(out) -> (in1, in2)`.
pub const QED_RULES: &str = "\
# in1 in2 -> out
e- e+ -> gamma
e- gamma -> e-
e+ gamma -> e+
mu- mu+ -> gamma
mu- gamma -> mu-
mu+ gamma -> mu+
tau- tau+ -> gamma
tau- gamma -> tau-
tau+ gamma -> tau+
";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VertexRule {
    /// Ordered as listed; the order fixes the output order of the split reading.
    pub combine_in: (ParticleType, ParticleType),
    pub combine_out: ParticleType,
}

impl VertexRule {
    pub fn new(a: ParticleType, b: ParticleType, out: ParticleType) -> Result<Self> {
        let rule = VertexRule { combine_in: (a, b), combine_out: out };
        rule.validate()?;
        Ok(rule)
    }

    pub fn validate(&self) -> Result<()> {
        let (a, b) = self.combine_in;
        let c = self.combine_out;
        if a.charge() + b.charge() != c.charge() {
            return Err(Error::Structure(format!("vertex {self} violates charge conservation")));
        }
        let bosons = [a, b, c].iter().filter(|t| !t.is_fermion()).count();
        if bosons != 1 {
            return Err(Error::Structure(format!("vertex {self} must have exactly one boson leg")));
        }
        Ok(())
    }

    pub fn combines(&self, x: ParticleType, y: ParticleType) -> bool {
        self.combine_in == (x, y) || self.combine_in == (y, x)
    }
}

impl fmt::Display for VertexRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} -> {}", self.combine_in.0, self.combine_in.1, self.combine_out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuleTable {
    pub rules: Vec<VertexRule>,
}

impl RuleTable {
    pub fn qed() -> Self {
        RuleTable::parse(QED_RULES).expect("embedded QED table is valid")
    }

    /// One rule per line, `in1 in2 -> out` (`→` also accepted); `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rules = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::RuleTable { line: lineno + 1, message };
            let normalized = line.replace('→', "->");
            let (lhs, rhs) = normalized
                .split_once("->")
                .ok_or_else(|| err("expected `in1 in2 -> out`".into()))?;
            let ins: Vec<&str> = lhs.split_whitespace().collect();
            let outs: Vec<&str> = rhs.split_whitespace().collect();
            if ins.len() != 2 || outs.len() != 1 {
                return Err(err("expected two inputs and one output".into()));
            }
            let parse = |s: &str| s.parse::<ParticleType>().map_err(|e| err(e.to_string()));
            let rule = VertexRule { combine_in: (parse(ins[0])?, parse(ins[1])?), combine_out: parse(outs[0])? };
            rule.validate().map_err(|e| err(e.to_string()))?;
            rules.push(rule);
        }
        if rules.is_empty() {
            return Err(Error::RuleTable { line: 0, message: "rule table is empty".into() });
        }
        Ok(RuleTable { rules })
    }

    /// Outputs of `combine(x, y)`.
    pub fn combine_results(&self, x: ParticleType, y: ParticleType) -> Vec<ParticleType> {
        self.rules.iter().filter(|r| r.combines(x, y)).map(|r| r.combine_out).collect()
    }

    /// Ordered output pairs of `split(x)`.
    pub fn split_results(&self, x: ParticleType) -> Vec<(ParticleType, ParticleType)> {
        self.rules.iter().filter(|r| r.combine_out == x).map(|r| r.combine_in).collect()
    }
}

/// Abstract operands of a channel shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sym {
    Pw1,
    Pw2,
    A,
    B,
    C,
}

impl Sym {
    fn index(self) -> usize {
        self as usize
    }

    fn name(self) -> &'static str {
        match self {
            Sym::Pw1 => "pw1",
            Sym::Pw2 => "pw2",
            Sym::A => "a",
            Sym::B => "b",
            Sym::C => "c",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Op {
    /// `combine(x, y) -> out`
    Combine(Sym, Sym, Sym),
    /// `split(x) -> (out1, out2)`
    Split(Sym, Sym, Sym),
}

impl Op {
    pub fn inputs(&self) -> Vec<Sym> {
        match *self {
            Op::Combine(x, y, _) => vec![x, y],
            Op::Split(x, _, _) => vec![x],
        }
    }

    pub fn outputs(&self) -> Vec<Sym> {
        match *self {
            Op::Combine(_, _, o) => vec![o],
            Op::Split(_, o1, o2) => vec![o1, o2],
        }
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Op::Combine(x, y, o) => write!(f, "combine({},{})->{}", x.name(), y.name(), o.name()),
            Op::Split(x, a, b) => write!(f, "split({})->({},{})", x.name(), a.name(), b.name()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ChannelShape {
    /// 1-based position in the list of five shapes.
    pub index: usize,
    pub ops: [Op; 2],
}

impl ChannelShape {
    /// Rule2 (one combine, one split) and Rule1 (starts from pw1 and pw2,
    /// leaves exactly two out symbols).
    pub fn validate(&self) -> Result<()> {
        let combines = self.ops.iter().filter(|o| matches!(o, Op::Combine(..))).count();
        if combines != 1 {
            return Err(Error::Structure(format!("shape {self} needs one combine and one split")));
        }
        let mut live: Vec<Sym> = vec![Sym::Pw1, Sym::Pw2];
        let mut consumed = Vec::new();
        for op in &self.ops {
            for s in op.inputs() {
                let pos = live
                    .iter()
                    .position(|x| *x == s)
                    .ok_or_else(|| Error::Structure(format!("shape {self} uses unavailable symbol {}", s.name())))?;
                live.remove(pos);
                consumed.push(s);
            }
            for s in op.outputs() {
                if live.contains(&s) || consumed.contains(&s) {
                    return Err(Error::Structure(format!("shape {self} reuses symbol {}", s.name())));
                }
                live.push(s);
            }
        }
        if !consumed.contains(&Sym::Pw1) || !consumed.contains(&Sym::Pw2) {
            return Err(Error::Structure(format!("shape {self} leaves an in particle/wave untouched")));
        }
        if live.len() != 2 {
            return Err(Error::Structure(format!("shape {self} does not end with two out symbols")));
        }
        Ok(())
    }

    /// The two out symbols in the order they are produced.
    pub fn outputs(&self) -> [Sym; 2] {
        let consumed: Vec<Sym> = self.ops.iter().flat_map(|o| o.inputs()).collect();
        let outs: Vec<Sym> = self
            .ops
            .iter()
            .flat_map(|o| o.outputs())
            .filter(|s| !consumed.contains(s))
            .collect();
        [outs[0], outs[1]]
    }

    /// Symbol produced by the first operation and consumed by the second.
    pub fn internal(&self) -> Sym {
        let second = self.ops[1].inputs();
        self.ops[0]
            .outputs()
            .into_iter()
            .find(|s| second.contains(s))
            .expect("shape links its two operations")
    }
}

impl fmt::Display for ChannelShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}; {}", self.ops[0], self.ops[1])
    }
}

/// The five channel shapes in canonical order.
pub fn enumerate_shapes() -> Vec<ChannelShape> {
    use Op::*;
    use Sym::*;
    vec![
        ChannelShape { index: 1, ops: [Combine(Pw1, Pw2, A), Split(A, B, C)] },
        ChannelShape { index: 2, ops: [Split(Pw1, A, B), Combine(A, Pw2, C)] },
        ChannelShape { index: 3, ops: [Split(Pw1, A, B), Combine(B, Pw2, C)] },
        ChannelShape { index: 4, ops: [Split(Pw2, A, B), Combine(Pw1, A, C)] },
        ChannelShape { index: 5, ops: [Split(Pw2, A, B), Combine(Pw1, B, C)] },
    ]
}

/// External or internal line of a channel diagram.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Line {
    In(usize),
    /// Canonical out position.
    Out(usize),
    Internal,
}

impl Line {
    fn slot(self) -> Option<usize> {
        match self {
            Line::In(i) => Some(i),
            Line::Out(i) => Some(2 + i),
            Line::Internal => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VertexLeg {
    pub line: Line,
    pub ptype: ParticleType,
    /// Flows into the vertex in the channel's operation order.
    pub incoming: bool,
}

impl VertexLeg {
    /// Fermion-number arrow points into the vertex.
    pub fn arrow_in(&self) -> bool {
        self.ptype.is_fermion() && (self.incoming != self.ptype.is_antifermion())
    }

    pub fn arrow_out(&self) -> bool {
        self.ptype.is_fermion() && !self.arrow_in()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vertex {
    pub legs: [VertexLeg; 3],
}

impl Vertex {
    pub fn arrow_in_leg(&self) -> &VertexLeg {
        self.legs.iter().find(|l| l.arrow_in()).expect("QED vertex has an incoming fermion arrow")
    }

    pub fn arrow_out_leg(&self) -> &VertexLeg {
        self.legs.iter().find(|l| l.arrow_out()).expect("QED vertex has an outgoing fermion arrow")
    }

    pub fn photon_leg(&self) -> &VertexLeg {
        self.legs.iter().find(|l| !l.ptype.is_fermion()).expect("QED vertex has a photon leg")
    }

    pub fn has_internal(&self) -> bool {
        self.legs.iter().any(|l| l.line == Line::Internal)
    }
}


/// One typed application of a shape.
#[derive(Debug, Clone, PartialEq)]
pub struct IaChannel {
    pub shape: ChannelShape,
    pub in_types: [ParticleType; 2],
    pub intermediate_type: ParticleType,
    /// Canonical order, shared by every channel with the same out multiset.
    pub out_types: [ParticleType; 2],
    /// Fermi-statistics sign relative to the first channel with these out types.
    pub sign: i8,
    /// Operation order: `vertices[0]` is the first operator application.
    pub vertices: [Vertex; 2],
    /// Types of `pw1, pw2, a, b, c`.
    pub symbol_types: [ParticleType; 5],
    /// Out paths, canonical element order; empty until processed.
    pub paths: Vec<Path>,
    /// `(cos theta bin, phi bin)` of each path.
    pub bins: Vec<(usize, usize)>,
}

impl IaChannel {
    /// Typed operator listing, e.g. `combine(e-,e+)->gamma; split(gamma)->(e-,e+)`.
    pub fn describe(&self) -> String {
        let ty = |s: Sym| self.symbol_types[s.index()];
        let op = |o: &Op| match *o {
            Op::Combine(x, y, c) => format!("combine({},{})->{}", ty(x), ty(y), ty(c)),
            Op::Split(x, a, b) => format!("split({})->({},{})", ty(x), ty(a), ty(b)),
        };
        format!("{}; {}", op(&self.shape.ops[0]), op(&self.shape.ops[1]))
    }

    /// Coefficients of the internal momentum over `[in0, in1, out0, out1]`,
    /// momentum flowing from the first to the second operation.
    pub fn internal_momentum_coefficients(&self) -> [i32; 4] {
        let mut c = [0i32; 4];
        for leg in &self.vertices[0].legs {
            if let Some(slot) = leg.line.slot() {
                c[slot] += if leg.incoming { 1 } else { -1 };
            }
        }
        c
    }

    /// Internal four-momentum for the given external momenta.
    pub fn internal_momentum(&self, ins: [&FourMomentum; 2], outs: [&FourMomentum; 2]) -> FourMomentum {
        let c = self.internal_momentum_coefficients();
        let ext = [ins[0], ins[1], outs[0], outs[1]];
        c.iter().zip(ext).fold(FourMomentum::ZERO, |q, (k, p)| match k {
            1 => q + *p,
            -1 => q - *p,
            _ => q,
        })
    }

    /// Reading of the internal line used to decide equivalence: fermion
    /// lines as the particle with antiparticle momenta reversed, photon
    /// momenta up to sign, and the expression reduced with
    /// `out1 = in0 + in1 - out0`.
    pub fn propagator_key(&self) -> (ParticleType, [i32; 3]) {
        let c = self.internal_momentum_coefficients();
        let mut reduced = [c[0] + c[3], c[1] + c[3], c[2] - c[3]];
        let mut ty = self.intermediate_type;
        if ty.is_antifermion() {
            ty = ty.antiparticle();
            reduced = reduced.map(|x| -x);
        } else if !ty.is_fermion() && reduced.iter().find(|x| **x != 0).is_some_and(|x| *x < 0) {
            reduced = reduced.map(|x| -x);
        }
        (ty, reduced)
    }

    /// External fermion legs joined by a spinor chain, as
    /// `(adjoint end, spinor end)`.
    pub fn fermion_pairs(&self) -> Vec<(Line, Line)> {
        if !self.intermediate_type.is_fermion() {
            return self
                .vertices
                .iter()
                .map(|v| (v.arrow_out_leg().line, v.arrow_in_leg().line))
                .collect();
        }
        let (end, start) = if self.vertices[0].arrow_in_leg().line == Line::Internal {
            (&self.vertices[0], &self.vertices[1])
        } else {
            (&self.vertices[1], &self.vertices[0])
        };
        vec![(end.arrow_out_leg().line, start.arrow_in_leg().line)]
    }

    pub fn total_in_charge(&self) -> i32 {
        self.in_types.iter().map(|t| t.charge()).sum()
    }

    pub fn total_out_charge(&self) -> i32 {
        self.out_types.iter().map(|t| t.charge()).sum()
    }
}

/// All type-consistent applications of the five shapes to `(t1, t2)`, in
/// canonical order (shape index, then rule order).
pub fn instantiate_channels(t1: ParticleType, t2: ParticleType, rules: &RuleTable) -> Result<Vec<IaChannel>> {
    let mut channels = Vec::new();
    for shape in enumerate_shapes() {
        let mut typings: Vec<[Option<ParticleType>; 5]> = vec![{
            let mut t = [None; 5];
            t[Sym::Pw1.index()] = Some(t1);
            t[Sym::Pw2.index()] = Some(t2);
            t
        }];
        for op in &shape.ops {
            let mut next = Vec::new();
            for t in &typings {
                match *op {
                    Op::Combine(x, y, o) => {
                        let (tx, ty) = (t[x.index()].unwrap(), t[y.index()].unwrap());
                        for out in rules.combine_results(tx, ty) {
                            let mut n = *t;
                            n[o.index()] = Some(out);
                            next.push(n);
                        }
                    }
                    Op::Split(x, o1, o2) => {
                        for (a, b) in rules.split_results(t[x.index()].unwrap()) {
                            let mut n = *t;
                            n[o1.index()] = Some(a);
                            n[o2.index()] = Some(b);
                            next.push(n);
                        }
                    }
                }
            }
            typings = next;
        }
        for t in typings {
            let types = t.map(|x| x.expect("every symbol typed"));
            channels.push(build_channel(shape, types));
        }
    }
    if channels.is_empty() {
        return Err(Error::EmptyChannelSet(t1, t2));
    }
    assign_signs(&mut channels)?;
    Ok(channels)
}

fn build_channel(shape: ChannelShape, types: [ParticleType; 5]) -> IaChannel {
    let outs = shape.outputs();
    let natural = [types[outs[0].index()], types[outs[1].index()]];
    let position = if natural[1] < natural[0] { [1, 0] } else { [0, 1] };
    let mut out_types = natural;
    if position == [1, 0] {
        out_types.swap(0, 1);
    }
    let internal = shape.internal();
    let line = |s: Sym| -> Line {
        match s {
            Sym::Pw1 => Line::In(0),
            Sym::Pw2 => Line::In(1),
            s if s == internal => Line::Internal,
            s => Line::Out(position[outs.iter().position(|o| *o == s).expect("out symbol")]),
        }
    };
    let vertex = |op: &Op| -> Vertex {
        let mut legs = Vec::with_capacity(3);
        for s in op.inputs() {
            legs.push(VertexLeg { line: line(s), ptype: types[s.index()], incoming: true });
        }
        for s in op.outputs() {
            legs.push(VertexLeg { line: line(s), ptype: types[s.index()], incoming: false });
        }
        Vertex { legs: [legs[0], legs[1], legs[2]] }
    };
    IaChannel {
        shape,
        in_types: [types[0], types[1]],
        intermediate_type: types[internal.index()],
        out_types,
        sign: 1,
        vertices: [vertex(&shape.ops[0]), vertex(&shape.ops[1])],
        symbol_types: types,
        paths: Vec::new(),
        bins: Vec::new(),
    }
}

fn assign_signs(channels: &mut [IaChannel]) -> Result<()> {
    for i in 0..channels.len() {
        let first = channels
            .iter()
            .position(|c| c.out_types == channels[i].out_types)
            .expect("channel matches itself");
        channels[i].sign = relative_sign(&channels[first], &channels[i])?;
    }
    Ok(())
}

/// One representative (lowest shape index) per equivalence class.
pub fn reduce_equivalent(channels: &[IaChannel]) -> Vec<IaChannel> {
    let mut seen = HashSet::new();
    let mut ordered: Vec<&IaChannel> = channels.iter().collect();
    ordered.sort_by_key(|c| c.shape.index);
    let keep: Vec<&IaChannel> = ordered
        .into_iter()
        .filter(|c| seen.insert((c.propagator_key(), sorted_pair(c.out_types))))
        .collect();
    // preserve the caller's order among the representatives
    channels
        .iter()
        .filter(|c| keep.iter().any(|k| std::ptr::eq(*k, *c)))
        .cloned()
        .collect()
}

fn sorted_pair(mut t: [ParticleType; 2]) -> [ParticleType; 2] {
    t.sort();
    t
}

/// `-1` when the two channels pair the external fermion lines through an
/// odd permutation, `+1` otherwise.
pub fn relative_sign(c1: &IaChannel, c2: &IaChannel) -> Result<i8> {
    if c1.out_types != c2.out_types || c1.in_types != c2.in_types {
        return Err(Error::Structure(format!(
            "channels with different external legs: ({},{}) vs ({},{})",
            c1.out_types[0], c1.out_types[1], c2.out_types[0], c2.out_types[1]
        )));
    }
    let mut p1 = c1.fermion_pairs();
    let mut p2 = c2.fermion_pairs();
    p1.sort();
    p2.sort();
    let adj1: Vec<Line> = p1.iter().map(|p| p.0).collect();
    let adj2: Vec<Line> = p2.iter().map(|p| p.0).collect();
    if adj1 != adj2 {
        return Err(Error::Structure("channels disagree on external fermion lines".into()));
    }
    let perm: Vec<usize> = p2
        .iter()
        .map(|(_, s)| p1.iter().position(|(_, t)| t == s).expect("same spinor ends"))
        .collect();
    let inversions = (0..perm.len())
        .flat_map(|i| (i + 1..perm.len()).map(move |j| (i, j)))
        .filter(|&(i, j)| perm[i] > perm[j])
        .count();
    Ok(if inversions % 2 == 0 { 1 } else { -1 })
}

/// `combine(a, b)`: the rule output carrying `p_a + p_b`, marked intermediate.
pub fn combine_elements(a: &StateElement, b: &StateElement, rules: &RuleTable) -> Result<StateElement> {
    let out = *rules
        .combine_results(a.ptype, b.ptype)
        .first()
        .ok_or(Error::Vertex(a.ptype, b.ptype))?;
    Ok(StateElement::intermediate(out, a.p + b.p, a.x.clone()))
}

/// One discrete two-body outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutcomePoint {
    pub bin: (usize, usize),
    pub pb: FourMomentum,
    pub pc: FourMomentum,
}

/// Discretized two-body final states of total momentum `total`.
///
/// Directions are bin centres uniform in `cos theta` and `phi` about `axis`
/// in the rest frame of `total`, boosted back. `pb` is snapped to the
/// momentum grid and `pc = total - pb`, so a grid-aligned `total` is
/// reproduced exactly. Returns `None` below threshold.
pub fn outcome_grid(
    total: &FourMomentum,
    types: (ParticleType, ParticleType),
    graining: usize,
    axis: [f64; 3],
) -> Result<Option<Vec<OutcomePoint>>> {
    let s = total.m2();
    if !(s > 0.0) || total.e <= 0.0 {
        return Err(Error::Kinematics(format!("split needs a timelike momentum, got p^2 = {s:e}")));
    }
    if graining == 0 {
        return Err(Error::Config("graining must be at least 1".into()));
    }
    let sqrt_s = s.sqrt();
    let (mb, mc) = (types.0.mass(), types.1.mass());
    let Some(pstar) = two_body_momentum(sqrt_s, mb, mc) else {
        return Ok(None);
    };
    let eb = (mb * mb + pstar * pstar).sqrt();
    let beta = total.velocity();
    let g = graining as f64;
    let mut points = Vec::with_capacity(graining * graining);
    for i in 0..graining {
        let cos_t = -1.0 + (2.0 * i as f64 + 1.0) / g;
        let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
        for j in 0..graining {
            let phi = std::f64::consts::TAU * (j as f64 + 0.5) / g;
            let n = rotate_from_z([sin_t * phi.cos(), sin_t * phi.sin(), cos_t], axis);
            let rest = FourMomentum::new(eb, pstar * n[0], pstar * n[1], pstar * n[2]);
            let pb = rest.boost(beta).quantized();
            let pc = *total - pb;
            points.push(OutcomePoint { bin: (i, j), pb, pc });
        }
    }
    Ok(Some(points))
}

/// Split outcomes of `a` with the polar axis along z.
pub fn split_outcomes(a: &StateElement, graining: usize, rules: &RuleTable) -> Result<Vec<(StateElement, StateElement)>> {
    split_outcomes_along(a, graining, rules, [0.0, 0.0, 1.0])
}

/// Every rule-allowed flavor pair above threshold, every direction bin and
/// every spin assignment.
pub fn split_outcomes_along(
    a: &StateElement,
    graining: usize,
    rules: &RuleTable,
    axis: [f64; 3],
) -> Result<Vec<(StateElement, StateElement)>> {
    let mut out = Vec::new();
    for (tb, tc) in rules.split_results(a.ptype) {
        let Some(grid) = outcome_grid(&a.p, (tb, tc), graining, axis)? else {
            continue;
        };
        for pt in grid {
            for sb in SpinState::domain(tb) {
                for sc in SpinState::domain(tc) {
                    out.push((
                        StateElement::external_unchecked(tb, pt.pb, sb, a.x.clone()),
                        StateElement::external_unchecked(tc, pt.pc, sc, a.x.clone()),
                    ));
                }
            }
        }
    }
    Ok(out)
}
