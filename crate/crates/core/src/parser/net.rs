//! Hugin NET subset.
//!
//! Supported: an optional `net { ... }` header, `[discrete] node NAME { ... }`
//! blocks (only `states` is interpreted), and `potential (CHILD | PARENTS) {
//! data = ...; }` blocks. `data` may be nested with parentheses; it is read
//! flat, parents slowest and the child fastest. Comments run from `%` to end of
//! line. Continuous, decision and utility nodes, classes, and `model_nodes`
//! tables are rejected as unsupported.

use std::collections::BTreeMap;

use super::{NetworkDocument, SourceFormat};
use crate::error::{Error, Result};
use crate::model::{make_cpt, BayesianNetwork, Variable};

/// Rows within this distance of 1 are rescaled; NET files usually store
/// probabilities with six or so digits.
const ROW_RENORMALIZE_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Str(String),
    Num(f64),
    Punct(char),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn tokenize(text: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let advance = |i: &mut usize, line: &mut usize, col: &mut usize, c: char| {
        *i += 1;
        if c == '\n' {
            *line += 1;
            *col = 1;
        } else {
            *col += 1;
        }
    };
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut col, c);
        } else if c == '%' {
            while i < chars.len() && chars[i] != '\n' {
                let ch = chars[i];
                advance(&mut i, &mut line, &mut col, ch);
            }
        } else if "{}()=;|".contains(c) {
            out.push(Token { tok: Tok::Punct(c), line: tl, col: tc });
            advance(&mut i, &mut line, &mut col, c);
        } else if c == '"' {
            advance(&mut i, &mut line, &mut col, c);
            let mut s = String::new();
            loop {
                match chars.get(i) {
                    None => return Err(syntax(tl, tc, "unterminated string")),
                    Some('"') => {
                        advance(&mut i, &mut line, &mut col, '"');
                        break;
                    }
                    Some(&ch) => {
                        s.push(ch);
                        advance(&mut i, &mut line, &mut col, ch);
                    }
                }
            }
            out.push(Token { tok: Tok::Str(s), line: tl, col: tc });
        } else if c.is_ascii_digit() || c == '-' || c == '+' || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || "+-.".contains(chars[i])) {
                let ch = chars[i];
                advance(&mut i, &mut line, &mut col, ch);
            }
            let text: String = chars[start..i].iter().collect();
            let value = text.parse::<f64>().map_err(|_| syntax(tl, tc, &format!("bad number `{text}`")))?;
            out.push(Token { tok: Tok::Num(value), line: tl, col: tc });
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '.') {
                let ch = chars[i];
                advance(&mut i, &mut line, &mut col, ch);
            }
            out.push(Token { tok: Tok::Ident(chars[start..i].iter().collect()), line: tl, col: tc });
        } else {
            return Err(syntax(tl, tc, &format!("unexpected character `{c}`")));
        }
    }
    Ok(out)
}

fn syntax(line: usize, col: usize, message: &str) -> Error {
    Error::SyntaxError { line, col, message: message.to_string() }
}

#[derive(Debug)]
enum Value {
    Str(String),
    Num(f64),
    Ident,
    List(Vec<Value>),
}

impl Value {
    fn flatten_numbers(&self, out: &mut Vec<f64>) -> bool {
        match self {
            Value::Num(x) => {
                out.push(*x);
                true
            }
            Value::List(items) => items.iter().all(|v| v.flatten_numbers(out)),
            _ => false,
        }
    }
}

struct Attr {
    name: String,
    value: Value,
    line: usize,
    col: usize,
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    eof: (usize, usize),
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn here(&self) -> (usize, usize) {
        self.peek().map(|t| (t.line, t.col)).unwrap_or(self.eof)
    }

    fn next(&mut self) -> Result<Token> {
        let (l, c) = self.here();
        let t = self.toks.get(self.pos).cloned().ok_or_else(|| syntax(l, c, "unexpected end of input"))?;
        self.pos += 1;
        Ok(t)
    }

    fn expect(&mut self, p: char) -> Result<()> {
        let t = self.next()?;
        match t.tok {
            Tok::Punct(q) if q == p => Ok(()),
            other => Err(syntax(t.line, t.col, &format!("expected `{p}`, found {}", describe(&other)))),
        }
    }

    fn ident(&mut self) -> Result<Token> {
        let t = self.next()?;
        match &t.tok {
            Tok::Ident(_) => Ok(t),
            other => Err(syntax(t.line, t.col, &format!("expected a name, found {}", describe(other)))),
        }
    }

    fn at_punct(&self, p: char) -> bool {
        matches!(self.peek(), Some(Token { tok: Tok::Punct(q), .. }) if *q == p)
    }

    fn value(&mut self, depth: usize) -> Result<Value> {
        let t = self.next()?;
        if depth > 256 {
            return Err(syntax(t.line, t.col, "nesting too deep"));
        }
        match t.tok {
            Tok::Str(s) => Ok(Value::Str(s)),
            Tok::Num(x) => Ok(Value::Num(x)),
            Tok::Ident(_) => Ok(Value::Ident),
            Tok::Punct('(') => {
                let mut items = Vec::new();
                while !self.at_punct(')') {
                    items.push(self.value(depth + 1)?);
                }
                self.expect(')')?;
                Ok(Value::List(items))
            }
            other => Err(syntax(t.line, t.col, &format!("expected a value, found {}", describe(&other)))),
        }
    }

    /// `{ (name = value ;)* }`
    fn attrs(&mut self) -> Result<Vec<Attr>> {
        self.expect('{')?;
        let mut out = Vec::new();
        while !self.at_punct('}') {
            let name = self.ident()?;
            self.expect('=')?;
            let value = self.value(0)?;
            self.expect(';')?;
            let Tok::Ident(n) = name.tok else { unreachable!() };
            out.push(Attr { name: n, value, line: name.line, col: name.col });
        }
        self.expect('}')?;
        Ok(out)
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Str(s) => format!("\"{s}\""),
        Tok::Num(x) => format!("{x}"),
        Tok::Punct(c) => format!("`{c}`"),
    }
}

struct PotentialBlock {
    child: Token,
    parents: Vec<Token>,
    data: Option<(Vec<f64>, usize, usize)>,
}

pub fn parse_net(text: &str) -> Result<BayesianNetwork> {
    parse_net_document(text).map(|d| d.network)
}

pub fn parse_net_document(text: &str) -> Result<NetworkDocument> {
    let toks = tokenize(text)?;
    let eof = toks.last().map(|t| (t.line, t.col + 1)).unwrap_or((1, 1));
    let mut p = Parser { toks, pos: 0, eof };

    let mut variables: Vec<Variable> = Vec::new();
    let mut labels: Vec<Vec<String>> = Vec::new();
    let mut locations = BTreeMap::new();
    let mut potentials: Vec<PotentialBlock> = Vec::new();

    while let Some(tok) = p.peek().cloned() {
        let Tok::Ident(word) = &tok.tok else {
            return Err(syntax(tok.line, tok.col, &format!("expected a block keyword, found {}", describe(&tok.tok))));
        };
        match word.as_str() {
            "net" => {
                p.next()?;
                p.attrs()?;
            }
            "node" | "discrete" => {
                p.next()?;
                if word == "discrete" {
                    let kw = p.ident()?;
                    if kw.tok != Tok::Ident("node".into()) {
                        return Err(syntax(kw.line, kw.col, "expected `node` after `discrete`"));
                    }
                }
                let name_tok = p.ident()?;
                let Tok::Ident(name) = name_tok.tok.clone() else { unreachable!() };
                let attrs = p.attrs()?;
                let states = attrs
                    .iter()
                    .find(|a| a.name == "states")
                    .ok_or_else(|| syntax(name_tok.line, name_tok.col, &format!("node `{name}` has no states")))?;
                let Value::List(items) = &states.value else {
                    return Err(syntax(states.line, states.col, "states must be a parenthesised list"));
                };
                let names = items
                    .iter()
                    .map(|v| match v {
                        Value::Str(s) => Ok(s.clone()),
                        _ => Err(syntax(states.line, states.col, "state labels must be strings")),
                    })
                    .collect::<Result<Vec<_>>>()?;
                if locations.contains_key(&name) {
                    return Err(Error::DuplicateVariable(name));
                }
                locations.insert(name.clone(), (name_tok.line, name_tok.col));
                variables.push(Variable { id: variables.len(), name, cardinality: names.len() });
                labels.push(names);
            }
            "continuous" | "decision" | "utility" | "class" | "instance" | "temporal" => {
                return Err(Error::UnsupportedFeature(format!("{word} (line {})", tok.line)));
            }
            "potential" => {
                p.next()?;
                p.expect('(')?;
                let mut heads = Vec::new();
                while !p.at_punct('|') && !p.at_punct(')') {
                    heads.push(p.ident()?);
                }
                let mut parents = Vec::new();
                if p.at_punct('|') {
                    p.next()?;
                    while !p.at_punct(')') {
                        parents.push(p.ident()?);
                    }
                }
                p.expect(')')?;
                if heads.len() != 1 {
                    return Err(Error::UnsupportedFeature(format!(
                        "potential with {} head variables (line {})",
                        heads.len(),
                        tok.line
                    )));
                }
                let attrs = p.attrs()?;
                let mut data = None;
                for a in attrs {
                    match a.name.as_str() {
                        "model_nodes" | "model_data" => return Err(Error::UnsupportedFeature(a.name)),
                        "data" => {
                            let mut values = Vec::new();
                            if !a.value.flatten_numbers(&mut values) {
                                return Err(syntax(a.line, a.col, "data must contain only numbers"));
                            }
                            data = Some((values, a.line, a.col));
                        }
                        _ => {}
                    }
                }
                potentials.push(PotentialBlock { child: heads.pop().unwrap(), parents, data });
            }
            _ => return Err(syntax(tok.line, tok.col, &format!("unknown block `{word}`"))),
        }
    }

    let lookup = |t: &Token| -> Result<usize> {
        let Tok::Ident(name) = &t.tok else { unreachable!() };
        variables.iter().position(|v| &v.name == name).ok_or_else(|| Error::UnknownVariable(name.clone()))
    };
    let mut cpts = Vec::with_capacity(potentials.len());
    for block in potentials {
        let child = lookup(&block.child)?;
        let parents = block.parents.iter().map(lookup).collect::<Result<Vec<_>>>()?;
        let expected: usize = parents.iter().chain([&child]).map(|&v| variables[v].cardinality).product();
        let child_name = variables[child].name.clone();
        let (mut values, line, col) = match block.data {
            Some(d) => d,
            None => {
                return Err(syntax(block.child.line, block.child.col, &format!("potential `{child_name}` has no data")))
            }
        };
        if values.len() != expected {
            return Err(Error::ArityMismatch { block: child_name, expected, got: values.len() });
        }
        let card = variables[child].cardinality.max(1);
        for row in values.chunks_mut(card) {
            let sum: f64 = row.iter().sum();
            if sum > 0.0 && (sum - 1.0).abs() <= ROW_RENORMALIZE_TOLERANCE {
                row.iter_mut().for_each(|x| *x /= sum);
            }
        }
        let cpt = make_cpt(&variables, child, parents, values).map_err(|e| match e {
            Error::TableSizeMismatch { .. } => syntax(line, col, "data length mismatch"),
            other => other,
        })?;
        cpts.push(cpt);
    }

    let network = BayesianNetwork::new(variables, cpts)?;
    Ok(NetworkDocument { format: SourceFormat::Net, network, locations, state_labels: labels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn minimal_document() {
        let net = parse_net(r#"node A { states = ("0" "1"); } potential (A) { data = (0.3 0.7); }"#).unwrap();
        assert_eq!(net.len(), 1);
        assert_eq!(net.cpt(0).table.values(), &[0.3, 0.7]);
    }

    #[test]
    fn wrong_data_length() {
        let err = parse_net(r#"node A { states = ("0" "1"); } potential (A) { data = (0.3 0.3 0.4); }"#).unwrap_err();
        assert_eq!(err, Error::ArityMismatch { block: "A".into(), expected: 2, got: 3 });
    }

    #[test]
    fn conditional_layout_is_parent_major() {
        let text = r#"
            % two binary nodes
            net { node_size = (80 40); }
            node A { label = "a"; states = ("f" "t"); }
            node B { states = ("f" "t"); position = (10 20); }
            potential (A) { data = (0.4 0.6); }
            potential (B | A) { data = ((0.1 0.9) (0.8 0.2)); }
        "#;
        let doc = parse_net_document(text).unwrap();
        let cpt = doc.network.cpt(1);
        assert_eq!(cpt.parents, vec![0]);
        assert_eq!(cpt.table.scope().vars(), &[0, 1]);
        // codec: index = 2*A + B
        let s = cpt.table.scope();
        assert_eq!(cpt.table.values()[s.assignment_to_index(&[1, 0]).unwrap()], 0.8);
        assert_eq!(cpt.table.values()[s.assignment_to_index(&[0, 1]).unwrap()], 0.9);
        assert_eq!(doc.locations["B"], (5, 18));
        assert_eq!(doc.state_labels[0], vec!["f", "t"]);
    }

    #[test]
    fn rejects_unsupported_and_unknown() {
        let e = parse_net(r#"continuous node X { }"#).unwrap_err();
        assert!(matches!(e, Error::UnsupportedFeature(_)));
        let e = parse_net(r#"node A { states = ("0" "1"); } potential (A) { model_nodes = (); data = (0.5 0.5); }"#)
            .unwrap_err();
        assert_eq!(e, Error::UnsupportedFeature("model_nodes".into()));
        let e = parse_net(r#"node A { states = ("0" "1"); } potential (A | Z) { data = (0.5 0.5); }"#).unwrap_err();
        assert_eq!(e, Error::UnknownVariable("Z".into()));
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let e = parse_net("node A {\n  states = (\"0\" \"1\")\n}").unwrap_err();
        assert!(matches!(e, Error::SyntaxError { line: 3, col: 1, .. }), "{e:?}");
        let e = parse_net("node A { states = (\"0\" \"1\"); } @").unwrap_err();
        assert!(matches!(e, Error::SyntaxError { line: 1, .. }));
    }

    #[test]
    fn slightly_off_rows_are_rescaled() {
        let net =
            parse_net(r#"node A { states = ("0" "1" "2"); } potential (A) { data = (0.333333 0.333333 0.333333); }"#)
                .unwrap();
        let s: f64 = net.cpt(0).table.values().iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn never_panics_on_arbitrary_bytes(bytes in prop::collection::vec(any::<u8>(), 0..256)) {
            let _ = parse_net(&String::from_utf8_lossy(&bytes));
        }

        #[test]
        fn never_panics_on_net_like_text(s in r#"(node|potential|net|\{|\}|\(|\)|=|;|\||"a"|A|B|0\.5|1| |\n|%x)*"#) {
            let _ = parse_net(&s);
        }
    }
}
