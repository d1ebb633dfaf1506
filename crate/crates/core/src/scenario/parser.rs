use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_complex::Complex64;

use super::literal::{eval_amplitude, tokenize, Tok, Token};
use super::{
    Amplitude, EventStmt, MatrixEntry, ParticleDecl, Point, Query, Scenario, UnitaryDecl, UnitaryDef, UnitaryRef, WaveLiteral,
};
use crate::frc::builtin_transforms;
use crate::ALGEBRAIC_TOLERANCE;

/// A positioned problem in scenario source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}:{}: {}", self.line, self.column, self.message)
    }
}

/// Every error found in one source text, in line order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseErrors(pub Vec<ParseError>);

impl ParseErrors {
    pub fn iter(&self) -> impl Iterator<Item = &ParseError> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for ParseErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ParseErrors {}

const KEYWORDS: [&str; 15] = [
    "scenario",
    "particle",
    "unitary",
    "prepare",
    "interact",
    "measure",
    "distribution",
    "check",
    "transform",
    "at",
    "from",
    "given",
    "identity",
    "beamsplitter",
    "swap",
];

const BUILTIN_UNITARIES: [&str; 3] = ["identity", "beamsplitter", "swap"];

type Fail = (usize, String);

struct Cursor<'a> {
    toks: &'a [Token],
    pos: usize,
    /// Column just past the end of the line, for "expected ..." at EOL.
    eol: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<&'a Token> {
        self.toks.get(self.pos)
    }

    fn col(&self) -> usize {
        self.peek().map_or(self.eol, |t| t.col)
    }

    fn next(&mut self) -> Option<&'a Token> {
        let t = self.toks.get(self.pos);
        self.pos += 1;
        t
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.peek().is_some_and(|t| t.is_punct(p)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> Result<(), Fail> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            Err((self.col(), format!("expected '{p}'{}", self.found())))
        }
    }

    fn eat_ident(&mut self, s: &str) -> bool {
        if self.peek().is_some_and(|t| t.is_ident(s)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn found(&self) -> String {
        match self.peek() {
            Some(t) => format!(", found '{}'", t.text),
            None => ", found end of line".to_string(),
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, usize), Fail> {
        match self.peek() {
            Some(Token {
                tok: Tok::Ident(s), col, ..
            }) => {
                self.pos += 1;
                Ok((s.clone(), *col))
            }
            _ => Err((self.col(), format!("expected {what}{}", self.found()))),
        }
    }

    fn int(&mut self) -> Result<i64, Fail> {
        let col = self.col();
        let negative = self.eat_punct("-");
        if !negative {
            self.eat_punct("+");
        }
        match self.next() {
            Some(Token { tok: Tok::Int(n), .. }) => Ok(if negative { -n } else { *n }),
            _ => {
                self.pos -= 1;
                Err((col, format!("expected an integer{}", self.found())))
            }
        }
    }

    fn count(&mut self) -> Result<usize, Fail> {
        match self.next() {
            Some(Token { tok: Tok::Int(n), .. }) => Ok(*n as usize),
            _ => {
                self.pos -= 1;
                Err((self.col(), format!("expected an event count{}", self.found())))
            }
        }
    }

    fn end(&self) -> Result<(), Fail> {
        match self.peek() {
            None => Ok(()),
            Some(t) => Err((t.col, format!("unexpected '{}'", t.text))),
        }
    }

    /// Tokens up to (not including) one of `stops` at bracket depth zero.
    fn until(&mut self, stops: &[&str]) -> &'a [Token] {
        let start = self.pos;
        let mut depth = 0i32;
        while let Some(t) = self.peek() {
            if depth == 0 && stops.iter().any(|s| t.is_punct(s)) {
                break;
            }
            if t.is_punct("[") || t.is_punct("(") {
                depth += 1;
            } else if t.is_punct("]") || t.is_punct(")") {
                if depth == 0 {
                    break;
                }
                depth -= 1;
            }
            self.pos += 1;
        }
        &self.toks[start..self.pos]
    }
}

/// Canonical spelling of an amplitude: tokens joined without spaces except
/// where two words or numbers would merge.
fn canonical(tokens: &[Token]) -> String {
    let mut out = String::new();
    let mut prev: Option<&Tok> = None;
    for t in tokens {
        let word = |k: &Tok| matches!(k, Tok::Ident(_) | Tok::Int(_) | Tok::Float(_));
        if let Some(p) = prev {
            let merges = match (p, &t.tok) {
                (Tok::Ident(_), k) => word(k),
                (Tok::Int(_) | Tok::Float(_), Tok::Int(_) | Tok::Float(_)) => true,
                _ => false,
            };
            if merges {
                out.push(' ');
            }
        }
        out.push_str(&t.text);
        prev = Some(&t.tok);
    }
    out
}

fn amplitude(cur: &mut Cursor<'_>, stops: &[&str]) -> Result<Amplitude, Fail> {
    let col = cur.col();
    if cur.peek().is_some_and(|t| t.is_punct("[")) {
        cur.next();
        let re_toks = cur.until(&[","]);
        let re = eval_amplitude(re_toks).map_err(|(c, m)| (if re_toks.is_empty() { col } else { c }, m))?;
        cur.expect_punct(",")?;
        let im_toks = cur.until(&["]"]);
        let im = eval_amplitude(im_toks).map_err(|(c, m)| (if im_toks.is_empty() { cur.col() } else { c }, m))?;
        cur.expect_punct("]")?;
        if re.im != 0.0 || im.im != 0.0 {
            return Err((col, "malformed complex literal: [re, im] parts must be real".into()));
        }
        return Ok(Amplitude {
            text: format!("[{}, {}]", canonical(re_toks), canonical(im_toks)),
            value: Complex64::new(re.re, im.re),
        });
    }
    let toks = cur.until(stops);
    if toks.is_empty() {
        return Err((col, format!("malformed complex literal: expected an amplitude{}", cur.found())));
    }
    let value = eval_amplitude(toks)?;
    if !value.re.is_finite() || !value.im.is_finite() {
        return Err((col, "malformed complex literal: not finite".into()));
    }
    Ok(Amplitude {
        text: canonical(toks),
        value,
    })
}

fn wave(cur: &mut Cursor<'_>) -> Result<WaveLiteral, Fail> {
    let open = cur.col();
    cur.expect_punct("{")?;
    let mut entries = Vec::new();
    let mut seen = BTreeSet::new();
    if !cur.eat_punct("}") {
        loop {
            let col = cur.col();
            let label = match cur.peek() {
                Some(Token { tok: Tok::Str(s), .. }) => {
                    cur.next();
                    s.trim().parse::<i64>().map_err(|_| (col, format!("momentum label \"{s}\" is not an integer")))?
                }
                _ => cur.int()?,
            };
            if !seen.insert(label) {
                return Err((col, format!("momentum label {label} appears twice")));
            }
            cur.expect_punct(":")?;
            let a = amplitude(cur, &[",", "}"])?;
            entries.push((label, a));
            if cur.eat_punct("}") {
                break;
            }
            cur.expect_punct(",")?;
        }
    }
    if entries.is_empty() {
        return Err((open, "wavefunction has no coefficients".into()));
    }
    let norm: f64 = entries.iter().map(|(_, a)| a.value.norm_sqr()).sum();
    if (norm - 1.0).abs() > ALGEBRAIC_TOLERANCE {
        return Err((open, format!("wavefunction is not normalized (sum of |c|^2 = {norm})")));
    }
    Ok(WaveLiteral { entries })
}

fn unitary_def(cur: &mut Cursor<'_>) -> Result<Option<UnitaryDef>, Fail> {
    if cur.eat_ident("identity") {
        return Ok(Some(UnitaryDef::Identity));
    }
    if cur.eat_ident("beamsplitter") {
        return Ok(Some(UnitaryDef::Beamsplitter));
    }
    if cur.eat_ident("swap") {
        let col = cur.col();
        let lo = cur.int()?;
        cur.expect_punct("..")?;
        let hi = cur.int()?;
        if lo > hi {
            return Err((col, format!("empty swap range {lo}..{hi}")));
        }
        return Ok(Some(UnitaryDef::Swap { lo, hi }));
    }
    if !cur.eat_punct("[") {
        return Ok(None);
    }
    let mut entries = Vec::new();
    loop {
        cur.expect_punct("(")?;
        let a = cur.int()?;
        cur.expect_punct(",")?;
        let b = cur.int()?;
        cur.expect_punct(")")?;
        cur.expect_punct("->")?;
        cur.expect_punct("(")?;
        let c = cur.int()?;
        cur.expect_punct(",")?;
        let d = cur.int()?;
        cur.expect_punct(")")?;
        cur.expect_punct(":")?;
        let amp = amplitude(cur, &[";", "]"])?;
        entries.push(MatrixEntry {
            input: (a, b),
            output: (c, d),
            amplitude: amp,
        });
        if cur.eat_punct("]") {
            break;
        }
        cur.expect_punct(";")?;
    }
    Ok(Some(UnitaryDef::Matrix(entries)))
}

struct PendingQuery {
    line: usize,
    col: usize,
    point: Option<usize>,
    /// `(particle, column)` pairs that must be measured before the point.
    given: Vec<(String, usize)>,
}

#[derive(Default)]
struct Parser {
    sc: Scenario,
    errors: Vec<ParseError>,
    particle_lines: BTreeMap<String, usize>,
    unitary_lines: BTreeMap<String, usize>,
    prepared: BTreeMap<String, usize>,
    /// Event index of each measurement.
    measures: Vec<(usize, String)>,
    pending: Vec<PendingQuery>,
}

impl Parser {
    fn particle(&self, name: &str, col: usize) -> Result<(), Fail> {
        if self.particle_lines.contains_key(name) {
            Ok(())
        } else {
            Err((col, format!("undeclared particle '{name}'")))
        }
    }

    fn new_name(&self, name: &str, col: usize) -> Result<(), Fail> {
        if KEYWORDS.contains(&name) {
            return Err((col, format!("'{name}' is a reserved word")));
        }
        if let Some(l) = self.particle_lines.get(name).or(self.unitary_lines.get(name)) {
            return Err((col, format!("'{name}' is already declared on line {l}")));
        }
        Ok(())
    }

    fn subset(&self, cur: &mut Cursor<'_>) -> Result<Vec<String>, Fail> {
        let mut names = Vec::new();
        loop {
            let (name, col) = cur.ident("a particle name")?;
            self.particle(&name, col)?;
            if names.contains(&name) {
                return Err((col, format!("particle '{name}' listed twice")));
            }
            names.push(name);
            if !cur.eat_punct(",") {
                return Ok(names);
            }
        }
    }

    fn point(cur: &mut Cursor<'_>, keyword: &str) -> Result<Option<usize>, Fail> {
        if cur.eat_ident(keyword) {
            Ok(Some(cur.count()?))
        } else {
            Ok(None)
        }
    }

    fn statement(&mut self, line: usize, cur: &mut Cursor<'_>) -> Result<(), Fail> {
        let (kw, kw_col) = cur.ident("a statement keyword")?;
        match kw.as_str() {
            "scenario" => {
                if self.sc.name.is_some() {
                    return Err((kw_col, "scenario name given twice".into()));
                }
                let (name, _) = cur.ident("a scenario name")?;
                cur.end()?;
                self.sc.name = Some(name);
            }
            "particle" => {
                let (name, col) = cur.ident("a particle name")?;
                self.new_name(&name, col)?;
                let state = if cur.eat_punct("=") { Some(wave(cur)?) } else { None };
                cur.end()?;
                if !self.sc.events.is_empty() {
                    return Err((kw_col, "particles must be declared before the first event".into()));
                }
                self.particle_lines.insert(name.clone(), line);
                self.sc.particles.push(ParticleDecl { name, state });
            }
            "unitary" => {
                let (name, col) = cur.ident("a unitary name")?;
                if BUILTIN_UNITARIES.contains(&name.as_str()) {
                    return Err((col, format!("'{name}' is a built-in unitary and cannot be redefined")));
                }
                self.new_name(&name, col)?;
                cur.expect_punct("=")?;
                let def_col = cur.col();
                let def = unitary_def(cur)?
                    .ok_or_else(|| (def_col, format!("expected identity, beamsplitter, swap or [..]{}", cur.found())))?;
                cur.end()?;
                self.unitary_lines.insert(name.clone(), line);
                self.sc.unitaries.push(UnitaryDecl { name, def });
            }
            "prepare" => {
                let (frame, fc) = cur.ident("a frame name")?;
                self.particle(&frame, fc)?;
                let (system, sc) = cur.ident("a system name")?;
                self.particle(&system, sc)?;
                if frame == system {
                    return Err((sc, format!("'{frame}' cannot prepare itself")));
                }
                if let Some(l) = self.prepared.get(&system) {
                    return Err((sc, format!("'{system}' was already prepared on line {l}")));
                }
                let chi = wave(cur)?;
                cur.end()?;
                self.prepared.insert(system.clone(), line);
                self.sc.events.push(EventStmt::Prepare { frame, system, chi });
            }
            "interact" => {
                let (p, pc) = cur.ident("a particle name")?;
                self.particle(&p, pc)?;
                let (q, qc) = cur.ident("a particle name")?;
                self.particle(&q, qc)?;
                if p == q {
                    return Err((qc, format!("'{p}' cannot interact with itself")));
                }
                let unitary = match unitary_def(cur)? {
                    Some(def) => UnitaryRef::Inline(def),
                    None => {
                        let (name, col) = cur.ident("a unitary")?;
                        if !self.unitary_lines.contains_key(&name) {
                            return Err((col, format!("unknown unitary '{name}'")));
                        }
                        UnitaryRef::Named(name)
                    }
                };
                cur.end()?;
                self.sc.events.push(EventStmt::Interact { p, q, unitary });
            }
            "measure" => {
                let (particle, col) = cur.ident("a particle name")?;
                self.particle(&particle, col)?;
                cur.end()?;
                self.measures.push((self.sc.events.len(), particle.clone()));
                self.sc.events.push(EventStmt::Measure { particle });
            }
            "distribution" => {
                let subset = self.subset(cur)?;
                let at_col = cur.col();
                let at = Self::point(cur, "at")?;
                let mut given = Vec::new();
                let mut given_cols = Vec::new();
                if cur.eat_ident("given") {
                    loop {
                        let (name, col) = cur.ident("a measured particle")?;
                        self.particle(&name, col)?;
                        if given.iter().any(|(n, _)| n == &name) {
                            return Err((col, format!("'{name}' conditioned twice")));
                        }
                        cur.expect_punct("=")?;
                        let v = cur.int()?;
                        given.push((name.clone(), v));
                        given_cols.push((name, col));
                        if !cur.eat_punct(",") {
                            break;
                        }
                    }
                }
                cur.end()?;
                self.pending.push(PendingQuery {
                    line,
                    col: at_col,
                    point: at,
                    given: given_cols,
                });
                self.sc.queries.push(Query::Distribution {
                    subset,
                    at: at.map_or(Point::End, Point::After),
                    given,
                });
            }
            "check" => {
                let subset = self.subset(cur)?;
                let col = cur.col();
                let from = Self::point(cur, "from")?;
                cur.end()?;
                self.pending.push(PendingQuery {
                    line,
                    col,
                    point: from,
                    given: Vec::new(),
                });
                self.sc.queries.push(Query::Check { subset, from });
            }
            "transform" => {
                let (name, name_col) = cur.ident("a transform name")?;
                let catalog = builtin_transforms();
                let Some(entry) = catalog.get(name.as_str()) else {
                    let known: Vec<&str> = catalog.keys().copied().collect();
                    return Err((name_col, format!("unknown transform '{name}' (known: {})", known.join(", "))));
                };
                let ord_col = cur.col();
                let ordering = self.subset(cur)?;
                if ordering.len() != entry.transform.dimension() {
                    return Err((
                        ord_col,
                        format!(
                            "transform '{name}' takes {} particles ({}), got {}",
                            entry.transform.dimension(),
                            entry.roles.join(","),
                            ordering.len()
                        ),
                    ));
                }
                let col = cur.col();
                let at = Self::point(cur, "at")?;
                cur.end()?;
                self.pending.push(PendingQuery {
                    line,
                    col,
                    point: at,
                    given: Vec::new(),
                });
                self.sc.queries.push(Query::Transform {
                    name,
                    ordering,
                    at: at.map_or(Point::End, Point::After),
                });
            }
            other => return Err((kw_col, format!("unknown statement '{other}'"))),
        }
        Ok(())
    }

    fn finish(mut self) -> Result<Scenario, ParseErrors> {
        let n = self.sc.events.len();
        for q in std::mem::take(&mut self.pending) {
            let point = q.point.unwrap_or(n);
            if point > n {
                self.errors.push(ParseError {
                    line: q.line,
                    column: q.col,
                    message: format!("point {point} is past the last event (the scenario has {n} events)"),
                });
                continue;
            }
            for (name, col) in q.given {
                if !self.measures.iter().any(|(i, m)| *i < point && *m == name) {
                    self.errors.push(ParseError {
                        line: q.line,
                        column: col,
                        message: format!("'{name}' is not measured before point {point}"),
                    });
                }
            }
        }
        if self.errors.is_empty() {
            Ok(self.sc)
        } else {
            self.errors.sort_by_key(|e| (e.line, e.column));
            Err(ParseErrors(self.errors))
        }
    }
}

/// Parses scenario source, reporting every error with its position.
pub fn parse(text: &str) -> Result<Scenario, ParseErrors> {
    let mut p = Parser::default();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("");
        let toks = match tokenize(content) {
            Ok(t) => t,
            Err((column, message)) => {
                p.errors.push(ParseError { line, column, message });
                continue;
            }
        };
        if toks.is_empty() {
            continue;
        }
        let mut cur = Cursor {
            toks: &toks,
            pos: 0,
            eol: content.chars().count() + 1,
        };
        if let Err((column, message)) = p.statement(line, &mut cur) {
            p.errors.push(ParseError { line, column, message });
        }
    }
    p.finish()
}
