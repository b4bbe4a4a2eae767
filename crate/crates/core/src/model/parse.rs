//! Line-oriented parser for the model format.

use crate::expr::{parse_decimal, CmpOp, Expr, Interval, Rational, Relation};

use super::{
    Atom, BoundaryDecl, DiagCode, Diagnostic, Edge, EventDecl, EventLiteral, Flow, HybridAutomaton, Location, Network,
    Span, Update, VarDecl,
};

const KEYWORDS: &[&str] = &[
    "network", "automaton", "var", "init", "input", "output", "location", "initial", "invariant", "flow", "boundary",
    "in", "edge", "on", "guard", "do", "emit",
];

const SYMBOLS: &[&str] = &[
    ":=", "==", "<=", ">=", "&&", "||", "->", "'", "=", "<", ">", "!", "(", ")", "[", "]", ",", "+", "-", "*", "/", "^",
];

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Kw(&'static str),
    Num(String),
    Sym(&'static str),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    col: usize,
}

type PResult<T> = Result<T, Diagnostic>;

fn syntax(line: usize, col: usize, msg: impl Into<String>) -> Diagnostic {
    Diagnostic::error(DiagCode::Syntax, Span::new(line, col), msg)
}

pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() => {}
        _ => return false,
    }
    !s.ends_with('_') && !s.contains("__") && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn tokenize(text: &str, line: usize) -> PResult<Vec<Token>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c == '#' {
            break;
        }
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            let tok = match KEYWORDS.iter().find(|k| **k == word) {
                Some(k) => Tok::Kw(k),
                None if is_identifier(&word) => Tok::Ident(word),
                None => return Err(syntax(line, col, format!("invalid identifier `{word}`"))),
            };
            out.push(Token { tok, col });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i < chars.len() && chars[i] == '.' {
                i += 1;
                let frac = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                if i == frac {
                    return Err(syntax(line, col, "digits expected after decimal point"));
                }
            }
            if i < chars.len() && (chars[i].is_ascii_alphabetic() || chars[i] == '_' || chars[i] == '.') {
                return Err(syntax(line, i + 1, "malformed number"));
            }
            out.push(Token { tok: Tok::Num(chars[start..i].iter().collect()), col });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
            Some(s) => {
                out.push(Token { tok: Tok::Sym(s), col });
                i += s.chars().count();
            }
            None => return Err(syntax(line, col, format!("unexpected character `{c}`"))),
        }
    }
    Ok(out)
}

struct LineParser {
    toks: Vec<Token>,
    pos: usize,
    line: usize,
    end_col: usize,
}

impl LineParser {
    fn span(&self) -> Span {
        Span::new(self.line, self.col())
    }

    fn col(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end_col, |t| t.col)
    }

    fn err(&self, msg: impl Into<String>) -> Diagnostic {
        syntax(self.line, self.col(), msg)
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.tok.clone());
        self.pos += 1;
        t
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Sym(x)) if *x == s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, k: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Kw(x)) if *x == k) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> PResult<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            Err(self.err(format!("expected `{s}`")))
        }
    }

    fn expect_kw(&mut self, k: &str) -> PResult<()> {
        if self.eat_kw(k) {
            Ok(())
        } else {
            Err(self.err(format!("expected `{k}`")))
        }
    }

    fn ident(&mut self, what: &str) -> PResult<(String, Span)> {
        let span = self.span();
        match self.peek() {
            Some(Tok::Ident(name)) => {
                let name = name.clone();
                self.pos += 1;
                Ok((name, span))
            }
            Some(Tok::Kw(k)) => Err(self.err(format!("`{k}` is a reserved word, expected {what}"))),
            _ => Err(self.err(format!("expected {what}"))),
        }
    }

    fn finish(&self) -> PResult<()> {
        match self.peek() {
            None => Ok(()),
            Some(Tok::Sym("||")) => Err(self.err("disjunction `||` is not supported")),
            Some(_) => Err(self.err("unexpected trailing input")),
        }
    }

    fn number(&mut self) -> PResult<Rational> {
        match self.bump() {
            Some(Tok::Num(text)) => parse_decimal(&text).ok_or_else(|| self.err("malformed number")),
            _ => {
                self.pos -= 1;
                Err(self.err("expected a number"))
            }
        }
    }

    fn signed_number(&mut self) -> PResult<Rational> {
        let neg = self.eat_sym("-");
        let n = self.number()?;
        Ok(if neg { -n } else { n })
    }

    fn expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat_sym("+") {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat_sym("-") {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat_sym("*") {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat_sym("/") {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        if self.eat_sym("-") {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        let base = self.atom()?;
        if self.eat_sym("^") {
            let col = self.col();
            return match self.bump() {
                Some(Tok::Num(text)) => {
                    let n: u32 = text.parse().map_err(|_| syntax(self.line, col, "exponent must be a small natural number"))?;
                    Ok(Expr::Pow(Box::new(base), n))
                }
                _ => Err(syntax(self.line, col, "exponent must be a natural number")),
            };
        }
        Ok(base)
    }

    fn atom(&mut self) -> PResult<Expr> {
        match self.peek().cloned() {
            Some(Tok::Num(_)) => Ok(Expr::Num(self.number()?)),
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                Ok(Expr::Var(name))
            }
            Some(Tok::Sym("(")) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Some(Tok::Sym("!")) => Err(self.err("negation is only allowed on events")),
            Some(Tok::Sym("||")) => Err(self.err("disjunction `||` is not supported")),
            _ => Err(self.err("expected an expression")),
        }
    }

    fn cmp_op(&mut self) -> Option<CmpOp> {
        let op = match self.peek()? {
            Tok::Sym("<") => CmpOp::Lt,
            Tok::Sym("<=") => CmpOp::Le,
            Tok::Sym(">") => CmpOp::Gt,
            Tok::Sym(">=") => CmpOp::Ge,
            Tok::Sym("==") => CmpOp::Eq,
            _ => return None,
        };
        self.pos += 1;
        Some(op)
    }

    /// `e1 op e2 [op e3 ...]`, expanded into pairwise relations.
    fn relation_chain(&mut self, out: &mut Vec<Atom>) -> PResult<()> {
        let span = self.span();
        let mut lhs = self.expr()?;
        let mut count = 0;
        while let Some(op) = self.cmp_op() {
            let rhs = self.expr()?;
            out.push(Atom { rel: Relation { lhs, op, rhs: rhs.clone() }, span });
            lhs = rhs;
            count += 1;
        }
        if count == 0 {
            if matches!(self.peek(), Some(Tok::Sym("="))) {
                return Err(self.err("use `==` for equality"));
            }
            return Err(self.err("expected a comparison"));
        }
        Ok(())
    }

    fn conjunction(&mut self) -> PResult<Vec<Atom>> {
        let mut atoms = Vec::new();
        self.relation_chain(&mut atoms)?;
        while self.eat_sym("&&") {
            self.relation_chain(&mut atoms)?;
        }
        if matches!(self.peek(), Some(Tok::Sym("||"))) {
            return Err(self.err("disjunction `||` is not supported"));
        }
        Ok(atoms)
    }

    fn event_literal(&mut self) -> PResult<EventLiteral> {
        let mut lit = EventLiteral::default();
        loop {
            let negated = self.eat_sym("!");
            let (name, _) = self.ident("an event name")?;
            if negated {
                lit.absent.push(name);
            } else {
                lit.present.push(name);
            }
            if !self.eat_sym("&&") {
                break;
            }
        }
        if matches!(self.peek(), Some(Tok::Sym("||"))) {
            return Err(self.err("disjunction `||` is not supported"));
        }
        Ok(lit)
    }

    fn updates(&mut self) -> PResult<Vec<Update>> {
        let mut ups = Vec::new();
        loop {
            let (var, span) = self.ident("a variable")?;
            self.expect_sym("'")?;
            self.expect_sym(":=")?;
            let rhs = self.expr()?;
            ups.push(Update { var, rhs, span });
            if !self.eat_sym(",") {
                return Ok(ups);
            }
        }
    }
}

/// Parses the document structure without cross-reference checks.
pub fn parse_syntax(text: &str) -> Result<Network, Diagnostic> {
    let mut network: Option<Network> = None;
    let mut last_line = 1;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let toks = tokenize(raw, line)?;
        if toks.is_empty() {
            continue;
        }
        let mut p = LineParser { toks, pos: 0, line, end_col: raw.chars().count() + 1 };
        let head_span = p.span();
        let Some(Tok::Kw(head)) = p.bump() else {
            p.pos = 0;
            return Err(p.err("expected a declaration keyword"));
        };
        if head == "network" {
            if network.is_some() {
                return Err(syntax(line, head_span.column, "only one network per document"));
            }
            let (name, _) = p.ident("a network name")?;
            p.finish()?;
            network = Some(Network { name, automata: Vec::new(), span: head_span });
            continue;
        }
        let Some(net) = network.as_mut() else {
            return Err(syntax(line, head_span.column, "expected `network` declaration first"));
        };
        if head == "automaton" {
            let (name, _) = p.ident("an automaton name")?;
            p.finish()?;
            net.automata.push(HybridAutomaton {
                name,
                variables: Vec::new(),
                inputs: Vec::new(),
                outputs: Vec::new(),
                locations: Vec::new(),
                edges: Vec::new(),
                span: head_span,
            });
            continue;
        }
        let Some(aut) = net.automata.last_mut() else {
            return Err(syntax(line, head_span.column, format!("`{head}` outside of an automaton")));
        };
        match head {
            "var" => {
                let (name, _) = p.ident("a variable name")?;
                let init = if p.eat_kw("init") { Some(p.signed_number()?) } else { None };
                p.finish()?;
                aut.variables.push(VarDecl { name, init, span: head_span });
            }
            "input" | "output" => {
                let mut names = Vec::new();
                while !p.at_end() {
                    let (name, span) = p.ident("an event name")?;
                    p.eat_sym(",");
                    names.push(EventDecl { name, span });
                }
                if names.is_empty() {
                    return Err(p.err("expected at least one event name"));
                }
                if head == "input" {
                    aut.inputs.extend(names);
                } else {
                    aut.outputs.extend(names);
                }
            }
            "location" | "initial" => {
                let initial = head == "initial";
                if initial {
                    p.expect_kw("location")?;
                }
                let (name, _) = p.ident("a location name")?;
                p.finish()?;
                aut.locations.push(Location {
                    name,
                    initial,
                    invariant: Vec::new(),
                    flows: Vec::new(),
                    boundary: Vec::new(),
                    span: head_span,
                });
            }
            "invariant" | "flow" | "boundary" => {
                let Some(loc) = aut.locations.last_mut() else {
                    return Err(syntax(line, head_span.column, format!("`{head}` outside of a location")));
                };
                match head {
                    "invariant" => {
                        let atoms = p.conjunction()?;
                        p.finish()?;
                        loc.invariant.extend(atoms);
                    }
                    "flow" => {
                        let (var, span) = p.ident("a variable name")?;
                        p.expect_sym("'")?;
                        p.expect_sym("=")?;
                        let rhs = p.expr()?;
                        p.finish()?;
                        loc.flows.push(Flow { var, rhs, span });
                    }
                    _ => {
                        let (var, span) = p.ident("a variable name")?;
                        p.expect_kw("in")?;
                        p.expect_sym("[")?;
                        let lo = p.signed_number()?;
                        p.expect_sym(",")?;
                        let hi = p.signed_number()?;
                        p.expect_sym("]")?;
                        p.finish()?;
                        if lo > hi {
                            return Err(syntax(line, span.column, "boundary interval is empty"));
                        }
                        loc.boundary.push(BoundaryDecl { var, interval: Interval::closed(lo, hi), span });
                    }
                }
            }
            "edge" => {
                let (src, _) = p.ident("a source location")?;
                p.expect_sym("->")?;
                let (dst, _) = p.ident("a target location")?;
                let mut edge = Edge {
                    src,
                    dst,
                    event: EventLiteral::default(),
                    guard: Vec::new(),
                    updates: Vec::new(),
                    emits: Vec::new(),
                    span: head_span,
                };
                let mut seen: Vec<&str> = Vec::new();
                while let Some(tok) = p.peek().cloned() {
                    let clause = match tok {
                        Tok::Kw(k @ ("on" | "guard" | "do" | "emit")) => k,
                        Tok::Sym("||") => return Err(p.err("disjunction `||` is not supported")),
                        _ => return Err(p.err("expected `on`, `guard`, `do` or `emit`")),
                    };
                    if seen.contains(&clause) {
                        return Err(p.err(format!("duplicate `{clause}` clause")));
                    }
                    seen.push(clause);
                    p.pos += 1;
                    match clause {
                        "on" => edge.event = p.event_literal()?,
                        "guard" => edge.guard = p.conjunction()?,
                        "do" => edge.updates = p.updates()?,
                        _ => {
                            while let Some(Tok::Ident(_)) = p.peek() {
                                let (name, _) = p.ident("an event name")?;
                                edge.emits.push(name);
                                p.eat_sym(",");
                            }
                            if edge.emits.is_empty() {
                                return Err(p.err("expected an event name"));
                            }
                        }
                    }
                }
                aut.edges.push(edge);
            }
            other => return Err(syntax(line, head_span.column, format!("unexpected `{other}`"))),
        }
    }
    let Some(net) = network else {
        return Err(syntax(1, 1, "expected `network` declaration"));
    };
    if net.automata.is_empty() {
        return Err(syntax(last_line, 1, "network declares no automata"));
    }
    Ok(net)
}
