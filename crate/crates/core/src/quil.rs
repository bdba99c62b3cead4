//! Parser for the small `DEFCIRCUIT` dialect used to describe circuit ansätze.
//!
//! ```text
//! DEFCIRCUIT CNOT2(%theta0, %theta1):
//!     RX(%theta0) 0
//!     RX(%theta1) 1
//!     CNOT 0 1
//! ```
//!
//! Only `RX`, `H`, `CNOT` and `CZ` are recognised. An `RX` angle is either a
//! declared `%parameter` or a constant expression built from decimal
//! literals and `pi` with `*`, `/` and unary minus. Lines starting with `#`
//! are comments. Measurement is implicit: every qubit is read out once in
//! the computational basis after the last gate.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GateKind {
    Rx,
    H,
    Cnot,
    Cz,
}

impl GateKind {
    pub fn name(self) -> &'static str {
        match self {
            GateKind::Rx => "RX",
            GateKind::H => "H",
            GateKind::Cnot => "CNOT",
            GateKind::Cz => "CZ",
        }
    }
}

/// Angle slot of a template gate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Angle {
    /// Index into the template's declared parameter list.
    Param(usize),
    Literal(f64),
}

/// A gate with its angle type left generic: `GateOp<Angle>` inside templates,
/// `GateOp<f64>` once parameters are bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GateOp<A> {
    Rx { qubit: usize, angle: A },
    H { qubit: usize },
    Cnot { control: usize, target: usize },
    Cz { a: usize, b: usize },
}

impl<A> GateOp<A> {
    pub fn kind(&self) -> GateKind {
        match self {
            GateOp::Rx { .. } => GateKind::Rx,
            GateOp::H { .. } => GateKind::H,
            GateOp::Cnot { .. } => GateKind::Cnot,
            GateOp::Cz { .. } => GateKind::Cz,
        }
    }

    pub fn max_qubit(&self) -> usize {
        match *self {
            GateOp::Rx { qubit, .. } | GateOp::H { qubit } => qubit,
            GateOp::Cnot { control, target } => control.max(target),
            GateOp::Cz { a, b } => a.max(b),
        }
    }

    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            GateOp::Rx { qubit, .. } | GateOp::H { qubit } => vec![qubit],
            GateOp::Cnot { control, target } => vec![control, target],
            GateOp::Cz { a, b } => vec![a, b],
        }
    }

    fn map_angle<B>(&self, f: impl FnOnce(&A) -> B) -> GateOp<B> {
        match self {
            GateOp::Rx { qubit, angle } => GateOp::Rx {
                qubit: *qubit,
                angle: f(angle),
            },
            GateOp::H { qubit } => GateOp::H { qubit: *qubit },
            GateOp::Cnot { control, target } => GateOp::Cnot {
                control: *control,
                target: *target,
            },
            GateOp::Cz { a, b } => GateOp::Cz { a: *a, b: *b },
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown gate `{name}` at line {line}, column {column}")]
    UnknownGate { line: usize, column: usize, name: String },
    #[error("parameter `%{name}` at line {line}, column {column} is not declared")]
    UndeclaredParameter { line: usize, column: usize, name: String },
    #[error("parameter `%{name}` is declared twice")]
    DuplicateParameter { name: String },
    #[error("declared parameter `%{name}` is never used")]
    UnusedParameter { name: String },
    #[error("qubit {qubit} repeated in {gate} at line {line}")]
    RepeatedQubit {
        line: usize,
        gate: &'static str,
        qubit: usize,
    },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("template `{template}` takes {expected} parameters, got {got}")]
pub struct ArityError {
    pub template: String,
    pub expected: usize,
    pub got: usize,
}

/// A parsed `DEFCIRCUIT`. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitTemplate {
    name: String,
    params: Vec<String>,
    gates: Vec<GateOp<Angle>>,
    num_qubits: usize,
}

/// A template with every angle bound to radians.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcreteCircuit {
    pub gates: Vec<GateOp<f64>>,
    pub num_qubits: usize,
}

impl CircuitTemplate {
    pub fn parse(source: &str) -> Result<Self, ParseError> {
        Parser::new(source).parse()
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn params(&self) -> &[String] {
        &self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn gates(&self) -> &[GateOp<Angle>] {
        &self.gates
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn count(&self, kind: GateKind) -> usize {
        self.gates.iter().filter(|g| g.kind() == kind).count()
    }

    pub fn instantiate(&self, theta: &[f64]) -> Result<ConcreteCircuit, ArityError> {
        self.check_arity(theta.len())?;
        let gates = self.gates.iter().map(|g| g.map_angle(|a| resolve(*a, theta))).collect();
        Ok(ConcreteCircuit {
            gates,
            num_qubits: self.num_qubits,
        })
    }

    pub fn check_arity(&self, got: usize) -> Result<(), ArityError> {
        if got != self.params.len() {
            return Err(ArityError {
                template: self.name.clone(),
                expected: self.params.len(),
                got,
            });
        }
        Ok(())
    }

    /// Concatenates `layers` copies of the template, each with its own block
    /// of parameters. Layer `l` reads parameters `l*k .. (l+1)*k`.
    pub fn layered(&self, layers: usize) -> CircuitTemplate {
        assert!(layers >= 1, "layer count must be at least 1");
        if layers == 1 {
            return self.clone();
        }
        let k = self.params.len();
        let params = (0..layers)
            .flat_map(|l| self.params.iter().map(move |p| format!("{p}_l{l}")))
            .collect();
        let gates = (0..layers)
            .flat_map(|l| {
                self.gates.iter().map(move |g| {
                    g.map_angle(|a| match *a {
                        Angle::Param(i) => Angle::Param(l * k + i),
                        lit => lit,
                    })
                })
            })
            .collect();
        CircuitTemplate {
            name: format!("{}_L{}", self.name, layers),
            params,
            gates,
            num_qubits: self.num_qubits,
        }
    }
}

#[inline]
pub(crate) fn resolve(angle: Angle, theta: &[f64]) -> f64 {
    match angle {
        Angle::Param(i) => theta[i],
        Angle::Literal(x) => x,
    }
}

impl fmt::Display for CircuitTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DEFCIRCUIT {}", self.name)?;
        if !self.params.is_empty() {
            let names: Vec<String> = self.params.iter().map(|p| format!("%{p}")).collect();
            write!(f, "({})", names.join(", "))?;
        }
        writeln!(f, ":")?;
        for gate in &self.gates {
            match *gate {
                GateOp::Rx { qubit, angle } => match angle {
                    Angle::Param(i) => writeln!(f, "    RX(%{}) {qubit}", self.params[i])?,
                    Angle::Literal(x) => writeln!(f, "    RX({x:?}) {qubit}")?,
                },
                GateOp::H { qubit } => writeln!(f, "    H {qubit}")?,
                GateOp::Cnot { control, target } => writeln!(f, "    CNOT {control} {target}")?,
                GateOp::Cz { a, b } => writeln!(f, "    CZ {a} {b}")?,
            }
        }
        Ok(())
    }
}

struct Parser<'a> {
    lines: Vec<(usize, &'a str)>,
}

/// Cursor over a single line. Columns are 1-based character positions.
struct Cursor<'a> {
    line: usize,
    text: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn column(&self) -> usize {
        self.text[..self.pos].chars().count() + 1
    }

    fn err(&self, message: impl Into<String>) -> ParseError {
        ParseError::Syntax {
            line: self.line,
            column: self.column(),
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        let rest = &self.text[self.pos..];
        self.pos += rest.len() - rest.trim_start_matches([' ', '\t']).len();
    }

    fn peek(&self) -> Option<char> {
        self.text[self.pos..].chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.err(format!("expected `{c}`")))
        }
    }

    fn ident(&mut self) -> Option<&'a str> {
        self.skip_ws();
        let rest = &self.text[self.pos..];
        let mut chars = rest.char_indices();
        match chars.next() {
            Some((_, c)) if c.is_ascii_alphabetic() || c == '_' => {}
            _ => return None,
        }
        let end = chars
            .find(|(_, c)| !(c.is_ascii_alphanumeric() || *c == '_' || *c == '-'))
            .map_or(rest.len(), |(i, _)| i);
        self.pos += end;
        Some(&rest[..end])
    }

    fn number(&mut self) -> Option<f64> {
        self.skip_ws();
        let rest = &self.text[self.pos..];
        let bytes = rest.as_bytes();
        let mut end = 0;
        while end < bytes.len() && (bytes[end].is_ascii_digit() || bytes[end] == b'.') {
            end += 1;
        }
        if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
            let mut e = end + 1;
            if e < bytes.len() && (bytes[e] == b'+' || bytes[e] == b'-') {
                e += 1;
            }
            let digits = e;
            while e < bytes.len() && bytes[e].is_ascii_digit() {
                e += 1;
            }
            if e > digits {
                end = e;
            }
        }
        let value = rest[..end].parse::<f64>().ok()?;
        self.pos += end;
        Some(value)
    }

    fn qubit(&mut self) -> Result<usize, ParseError> {
        self.skip_ws();
        let rest = &self.text[self.pos..];
        let end = rest.find(|c: char| !c.is_ascii_digit()).unwrap_or(rest.len());
        if end == 0 {
            return Err(self.err("expected qubit index"));
        }
        let q = rest[..end]
            .parse::<usize>()
            .map_err(|_| self.err("qubit index out of range"))?;
        self.pos += end;
        Ok(q)
    }

    fn finish(&mut self) -> Result<(), ParseError> {
        self.skip_ws();
        match self.peek() {
            None | Some('#') => Ok(()),
            Some(c) => Err(self.err(format!("unexpected `{c}`"))),
        }
    }
}

impl<'a> Parser<'a> {
    fn new(source: &'a str) -> Self {
        let source = source.strip_prefix('\u{feff}').unwrap_or(source);
        let lines = source
            .split('\n')
            .enumerate()
            .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
            .filter(|(_, l)| {
                let t = l.trim();
                !t.is_empty() && !t.starts_with('#')
            })
            .collect();
        Parser { lines }
    }

    fn parse(self) -> Result<CircuitTemplate, ParseError> {
        let mut lines = self.lines.into_iter();
        let Some((line_no, header)) = lines.next() else {
            return Err(ParseError::Syntax {
                line: 1,
                column: 1,
                message: "expected DEFCIRCUIT".into(),
            });
        };
        let (name, params) = parse_header(line_no, header)?;
        let index: HashMap<&str, usize> = params.iter().enumerate().map(|(i, p)| (p.as_str(), i)).collect();
        if index.len() != params.len() {
            let mut seen = HashMap::new();
            for p in &params {
                if seen.insert(p.as_str(), ()).is_some() {
                    return Err(ParseError::DuplicateParameter { name: p.clone() });
                }
            }
        }

        let mut gates = Vec::new();
        let mut used = vec![false; params.len()];
        for (line_no, text) in lines {
            if !text.starts_with([' ', '\t']) {
                let mut cur = Cursor {
                    line: line_no,
                    text,
                    pos: 0,
                };
                return Err(if cur.ident() == Some("DEFCIRCUIT") {
                    ParseError::Syntax {
                        line: line_no,
                        column: 1,
                        message: "only one DEFCIRCUIT per source is supported".into(),
                    }
                } else {
                    ParseError::Syntax {
                        line: line_no,
                        column: 1,
                        message: "gate lines must be indented".into(),
                    }
                });
            }
            let gate = parse_gate(line_no, text, &index)?;
            if let GateOp::Rx {
                angle: Angle::Param(i), ..
            } = gate
            {
                used[i] = true;
            }
            gates.push(gate);
        }
        if let Some(i) = used.iter().position(|u| !u) {
            return Err(ParseError::UnusedParameter {
                name: params[i].clone(),
            });
        }
        let num_qubits = gates.iter().map(|g| g.max_qubit() + 1).max().unwrap_or(1);
        Ok(CircuitTemplate {
            name,
            params,
            gates,
            num_qubits,
        })
    }
}

fn parse_header(line: usize, text: &str) -> Result<(String, Vec<String>), ParseError> {
    let mut cur = Cursor { line, text, pos: 0 };
    if cur.ident() != Some("DEFCIRCUIT") {
        return Err(cur.err("expected DEFCIRCUIT"));
    }
    let name = cur.ident().ok_or_else(|| cur.err("expected circuit name"))?.to_string();
    let mut params = Vec::new();
    if cur.eat('(') {
        loop {
            cur.expect('%')?;
            let p = cur.ident().ok_or_else(|| cur.err("expected parameter name"))?;
            params.push(p.to_string());
            if cur.eat(')') {
                break;
            }
            cur.expect(',')?;
        }
    }
    cur.expect(':')?;
    cur.finish()?;
    Ok((name, params))
}

fn parse_gate(line: usize, text: &str, params: &HashMap<&str, usize>) -> Result<GateOp<Angle>, ParseError> {
    let mut cur = Cursor { line, text, pos: 0 };
    cur.skip_ws();
    let column = cur.column();
    let name = cur.ident().ok_or_else(|| cur.err("expected gate name"))?;
    let gate = match name {
        "RX" => {
            cur.expect('(')?;
            let angle = parse_angle(&mut cur, params)?;
            cur.expect(')')?;
            GateOp::Rx {
                qubit: cur.qubit()?,
                angle,
            }
        }
        "H" => GateOp::H { qubit: cur.qubit()? },
        "CNOT" | "CZ" => {
            let a = cur.qubit()?;
            let b = cur.qubit()?;
            let gate = if name == "CNOT" {
                GateOp::Cnot { control: a, target: b }
            } else {
                GateOp::Cz { a, b }
            };
            if a == b {
                return Err(ParseError::RepeatedQubit {
                    line,
                    gate: gate.kind().name(),
                    qubit: a,
                });
            }
            gate
        }
        other => {
            return Err(ParseError::UnknownGate {
                line,
                column,
                name: other.to_string(),
            })
        }
    };
    cur.finish()?;
    Ok(gate)
}

fn parse_angle(cur: &mut Cursor<'_>, params: &HashMap<&str, usize>) -> Result<Angle, ParseError> {
    cur.skip_ws();
    if cur.peek() == Some('%') {
        let column = cur.column();
        cur.pos += 1;
        let name = cur.ident().ok_or_else(|| cur.err("expected parameter name"))?;
        return params
            .get(name)
            .map(|&i| Angle::Param(i))
            .ok_or_else(|| ParseError::UndeclaredParameter {
                line: cur.line,
                column,
                name: name.to_string(),
            });
    }
    Ok(Angle::Literal(const_expr(cur)?))
}

// expr := ['-'] atom (('*' | '/') atom)*
fn const_expr(cur: &mut Cursor<'_>) -> Result<f64, ParseError> {
    let negate = cur.eat('-');
    let mut value = const_atom(cur)?;
    loop {
        if cur.eat('*') {
            value *= const_atom(cur)?;
        } else if cur.eat('/') {
            value /= const_atom(cur)?;
        } else {
            break;
        }
    }
    Ok(if negate { -value } else { value })
}

fn const_atom(cur: &mut Cursor<'_>) -> Result<f64, ParseError> {
    cur.skip_ws();
    if cur.peek() == Some('%') {
        return Err(cur.err("parameters cannot appear inside arithmetic"));
    }
    if let Some(x) = cur.number() {
        return Ok(x);
    }
    let save = cur.pos;
    match cur.ident() {
        Some("pi") => Ok(PI),
        _ => {
            cur.pos = save;
            Err(cur.err("expected angle"))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const P4: &str = include_str!("../ansatz/p4.quil");

    #[test]
    fn parses_p4_counts() {
        let t = CircuitTemplate::parse(P4).unwrap();
        assert_eq!(t.name(), "P4");
        assert_eq!(t.num_params(), 4);
        assert_eq!(t.count(GateKind::Rx), 4);
        assert_eq!(t.count(GateKind::Cnot), 4);
        assert_eq!(t.num_qubits(), 4);
        assert_eq!(t.gates()[4], GateOp::Cnot { control: 0, target: 2 });
    }

    #[test]
    fn empty_body_is_identity() {
        let t = CircuitTemplate::parse("DEFCIRCUIT ID:\n").unwrap();
        assert_eq!(t.num_params(), 0);
        assert!(t.gates().is_empty());
        assert_eq!(t.num_qubits(), 1);
    }

    #[test]
    fn crlf_and_comments() {
        let src = "# header\r\nDEFCIRCUIT A(%x):\r\n    RX(%x) 1 # trailing\r\n\tH 0\r\n";
        let t = CircuitTemplate::parse(src).unwrap();
        assert_eq!(t.gates().len(), 2);
        assert_eq!(t.num_qubits(), 2);
    }

    #[test]
    fn pi_literals() {
        let src = "DEFCIRCUIT L:\n    RX(pi/2) 0\n    RX(-3*pi/4) 0\n    RX(0.25) 0\n";
        let t = CircuitTemplate::parse(src).unwrap();
        let c = t.instantiate(&[]).unwrap();
        let angles: Vec<f64> = c
            .gates
            .iter()
            .map(|g| match g {
                GateOp::Rx { angle, .. } => *angle,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(angles, vec![PI / 2.0, -3.0 * PI / 4.0, 0.25]);
    }

    #[test]
    fn unknown_gate_reports_position() {
        let err = CircuitTemplate::parse("DEFCIRCUIT A:\n    RY(0.1) 0\n").unwrap_err();
        assert_eq!(
            err,
            ParseError::UnknownGate {
                line: 2,
                column: 5,
                name: "RY".into()
            }
        );
    }

    #[test]
    fn undeclared_parameter() {
        let err = CircuitTemplate::parse("DEFCIRCUIT A(%a):\n    RX(%a) 0\n    RX(%b) 1\n").unwrap_err();
        assert!(matches!(err, ParseError::UndeclaredParameter { line: 3, ref name, .. } if name == "b"));
    }

    #[test]
    fn unused_parameter() {
        let err = CircuitTemplate::parse("DEFCIRCUIT A(%a, %b):\n    RX(%a) 0\n").unwrap_err();
        assert_eq!(err, ParseError::UnusedParameter { name: "b".into() });
    }

    #[test]
    fn repeated_qubit() {
        let err = CircuitTemplate::parse("DEFCIRCUIT A:\n    CNOT 1 1\n").unwrap_err();
        assert!(matches!(err, ParseError::RepeatedQubit { line: 2, qubit: 1, .. }));
        let err = CircuitTemplate::parse("DEFCIRCUIT A:\n    CZ 0 0\n").unwrap_err();
        assert!(matches!(err, ParseError::RepeatedQubit { gate: "CZ", .. }));
    }

    #[test]
    fn syntax_errors_have_columns() {
        let err = CircuitTemplate::parse("DEFCIRCUIT A(%a:\n    RX(%a) 0\n").unwrap_err();
        assert!(
            matches!(
                err,
                ParseError::Syntax {
                    line: 1,
                    column: 16,
                    ..
                }
            ),
            "{err}"
        );
        let err = CircuitTemplate::parse("DEFCIRCUIT A:\n    H\n").unwrap_err();
        assert!(matches!(err, ParseError::Syntax { line: 2, .. }));
        let err = CircuitTemplate::parse("DEFCIRCUIT A:\nH 0\n").unwrap_err();
        assert!(matches!(err, ParseError::Syntax { line: 2, column: 1, .. }));
        let err = CircuitTemplate::parse("").unwrap_err();
        assert!(matches!(err, ParseError::Syntax { line: 1, .. }));
    }

    #[test]
    fn second_defcircuit_rejected() {
        let err = CircuitTemplate::parse("DEFCIRCUIT A:\n    H 0\nDEFCIRCUIT B:\n    H 0\n").unwrap_err();
        assert!(matches!(err, ParseError::Syntax { line: 3, .. }));
    }

    #[test]
    fn instantiate_substitutes_in_order() {
        let t = CircuitTemplate::parse(P4).unwrap();
        let c = t.instantiate(&[PI, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(c.gates[0], GateOp::Rx { qubit: 0, angle: PI });
        for g in &c.gates[1..4] {
            assert!(matches!(g, GateOp::Rx { angle, .. } if *angle == 0.0));
        }
        assert_eq!(&c.gates[4..], &t.instantiate(&[0.0; 4]).unwrap().gates[4..]);
    }

    #[test]
    fn arity_mismatch() {
        let t = CircuitTemplate::parse(P4).unwrap();
        let err = t.instantiate(&[0.0; 3]).unwrap_err();
        assert_eq!(err.expected, 4);
        assert_eq!(err.got, 3);
    }

    #[test]
    fn shared_parameter_substituted_everywhere() {
        let t = CircuitTemplate::parse("DEFCIRCUIT S(%a):\n    RX(%a) 0\n    RX(%a) 1\n").unwrap();
        let c = t.instantiate(&[0.7]).unwrap();
        assert!(c
            .gates
            .iter()
            .all(|g| matches!(g, GateOp::Rx { angle, .. } if *angle == 0.7)));
    }

    #[test]
    fn layered_offsets_parameters() {
        let t = CircuitTemplate::parse(include_str!("../ansatz/cnot2.quil")).unwrap();
        let l = t.layered(3);
        assert_eq!(l.num_params(), 6);
        assert_eq!(l.gates().len(), 9);
        assert_eq!(
            l.gates()[3],
            GateOp::Rx {
                qubit: 0,
                angle: Angle::Param(2)
            }
        );
        assert_eq!(l.params()[5], "theta1_l2");
        let reparsed = CircuitTemplate::parse(&l.to_string()).unwrap();
        assert_eq!(reparsed, l);
    }
}
