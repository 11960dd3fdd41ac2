//! Causal model description: a DAG of named variables with optional fixed
//! coefficients on its arrows, plus the line-oriented text format used to
//! read and write it.
//!
//! ```text
//! # comment
//! var X1 "Motivation"
//! path X1 -> X2 : 0.531
//! eq Y <- X2 X3 X4
//! ```

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Variable {
    pub name: String,
    pub label: Option<String>,
}

impl Variable {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            label: None,
        }
    }

    pub fn labeled(name: impl Into<String>, label: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            label: Some(label.into()),
        }
    }

    /// Label when present, otherwise the name.
    pub fn display(&self) -> &str {
        self.label.as_deref().unwrap_or(&self.name)
    }
}

/// Directed edge between two variables, by index into the model's variables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Arrow {
    pub from: usize,
    pub to: usize,
    pub coefficient: Option<f64>,
}

/// Validated recursive path model.
///
/// Arrows are kept sorted by (target, source) declaration index, so two
/// models with the same variables and arrow set compare equal regardless of
/// how they were written.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathModel {
    variables: Vec<Variable>,
    arrows: Vec<Arrow>,
}

impl PathModel {
    /// Builds a model from named arrows `(source, target, coefficient)`.
    pub fn new(
        variables: Vec<Variable>,
        arrows: Vec<(String, String, Option<f64>)>,
    ) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for v in &variables {
            if !is_identifier(&v.name) {
                return Err(Error::InvalidArgument(format!(
                    "'{}' is not a valid variable name",
                    v.name
                )));
            }
            if !seen.insert(v.name.as_str()) {
                return Err(Error::DuplicateVariable(v.name.clone()));
            }
        }
        let position = |name: &str| {
            variables
                .iter()
                .position(|v| v.name == name)
                .ok_or_else(|| Error::UnknownVariable(name.to_owned()))
        };
        let arrows = arrows
            .iter()
            .map(|(s, t, c)| {
                Ok(Arrow {
                    from: position(s)?,
                    to: position(t)?,
                    coefficient: *c,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_parts(variables, arrows)
    }

    pub(crate) fn from_parts(variables: Vec<Variable>, mut arrows: Vec<Arrow>) -> Result<Self> {
        let k = variables.len();
        if k == 0 {
            return Err(Error::InvalidArgument("model declares no variables".into()));
        }
        let mut pairs = BTreeSet::new();
        for a in &arrows {
            if a.from >= k || a.to >= k {
                return Err(Error::UnknownVariable(format!(
                    "index {}",
                    a.from.max(a.to)
                )));
            }
            if a.from == a.to {
                return Err(Error::SelfLoop(variables[a.from].name.clone()));
            }
            if !pairs.insert((a.from, a.to)) {
                return Err(Error::DuplicateArrow(
                    variables[a.from].name.clone(),
                    variables[a.to].name.clone(),
                ));
            }
            if let Some(c) = a.coefficient {
                if !c.is_finite() {
                    return Err(Error::InvalidArgument("coefficients must be finite".into()));
                }
            }
        }
        arrows.sort_by_key(|a| (a.to, a.from));
        let model = Self { variables, arrows };
        if let Some(cycle) = model.find_cycle() {
            return Err(Error::CycleDetected(
                cycle
                    .iter()
                    .map(|&i| model.variables[i].name.clone())
                    .collect(),
            ));
        }
        Ok(model)
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn k(&self) -> usize {
        self.variables.len()
    }

    pub fn names(&self) -> Vec<String> {
        self.variables.iter().map(|v| v.name.clone()).collect()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.variables[i].name
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn arrows(&self) -> &[Arrow] {
        &self.arrows
    }

    pub fn arrow(&self, from: usize, to: usize) -> Option<&Arrow> {
        self.arrows.iter().find(|a| a.from == from && a.to == to)
    }

    pub fn has_arrow(&self, from: usize, to: usize) -> bool {
        self.arrow(from, to).is_some()
    }

    /// Parents of `i` in declaration order.
    pub fn parents(&self, i: usize) -> Vec<usize> {
        self.arrows
            .iter()
            .filter(|a| a.to == i)
            .map(|a| a.from)
            .collect()
    }

    pub fn children(&self, i: usize) -> Vec<usize> {
        let mut c: Vec<usize> = self
            .arrows
            .iter()
            .filter(|a| a.from == i)
            .map(|a| a.to)
            .collect();
        c.sort_unstable();
        c
    }

    pub fn is_endogenous(&self, i: usize) -> bool {
        self.arrows.iter().any(|a| a.to == i)
    }

    pub fn endogenous(&self) -> Vec<usize> {
        (0..self.k()).filter(|&i| self.is_endogenous(i)).collect()
    }

    pub fn exogenous(&self) -> Vec<usize> {
        (0..self.k()).filter(|&i| !self.is_endogenous(i)).collect()
    }

    pub fn is_fully_annotated(&self) -> bool {
        self.arrows.iter().all(|a| a.coefficient.is_some())
    }

    /// Coefficient of `from -> to`; `Ok(0)` when there is no such arrow.
    pub fn coefficient(&self, from: usize, to: usize) -> Result<f64> {
        match self.arrow(from, to) {
            None => Ok(0.0),
            Some(a) => a.coefficient.ok_or_else(|| self.missing(a)),
        }
    }

    pub(crate) fn missing(&self, a: &Arrow) -> Error {
        Error::MissingCoefficient {
            from: self.variables[a.from].name.clone(),
            to: self.variables[a.to].name.clone(),
        }
    }

    /// Fails with `MissingCoefficient` on the first unannotated arrow.
    pub fn require_coefficients(&self) -> Result<()> {
        match self.arrows.iter().find(|a| a.coefficient.is_none()) {
            Some(a) => Err(self.missing(a)),
            None => Ok(()),
        }
    }

    /// Arrow endpoints only, as a set of index pairs.
    pub fn topology(&self) -> BTreeSet<(usize, usize)> {
        self.arrows.iter().map(|a| (a.from, a.to)).collect()
    }

    /// Same variable names and the same arrow endpoints, ignoring labels
    /// and coefficients.
    pub fn same_structure(&self, other: &PathModel) -> bool {
        let names = |m: &PathModel| {
            m.variables
                .iter()
                .map(|v| v.name.clone())
                .collect::<Vec<_>>()
        };
        let edges = |m: &PathModel| {
            m.arrows
                .iter()
                .map(|a| (m.name(a.from).to_owned(), m.name(a.to).to_owned()))
                .collect::<BTreeSet<_>>()
        };
        names(self) == names(other) && edges(self) == edges(other)
    }

    pub fn without_coefficients(&self) -> Self {
        let mut m = self.clone();
        for a in &mut m.arrows {
            a.coefficient = None;
        }
        m
    }

    /// Replaces every coefficient with `f(from, to)`.
    pub fn with_coefficients(&self, mut f: impl FnMut(usize, usize) -> Option<f64>) -> Self {
        let mut m = self.clone();
        for a in &mut m.arrows {
            a.coefficient = f(a.from, a.to);
        }
        m
    }

    pub fn with_arrow(&self, from: usize, to: usize, coefficient: Option<f64>) -> Result<Self> {
        let mut arrows = self.arrows.clone();
        arrows.push(Arrow {
            from,
            to,
            coefficient,
        });
        Self::from_parts(self.variables.clone(), arrows)
    }

    pub fn without_arrows(&self, remove: &BTreeSet<(usize, usize)>) -> Self {
        let mut m = self.clone();
        m.arrows.retain(|a| !remove.contains(&(a.from, a.to)));
        m
    }

    fn find_cycle(&self) -> Option<Vec<usize>> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            New,
            Active,
            Done,
        }
        fn visit(
            m: &PathModel,
            v: usize,
            marks: &mut [Mark],
            stack: &mut Vec<usize>,
        ) -> Option<Vec<usize>> {
            marks[v] = Mark::Active;
            stack.push(v);
            for c in m.children(v) {
                match marks[c] {
                    Mark::Active => {
                        let start = stack.iter().position(|&s| s == c).unwrap_or(0);
                        let mut cycle = stack[start..].to_vec();
                        cycle.push(c);
                        return Some(cycle);
                    }
                    Mark::New => {
                        if let Some(cycle) = visit(m, c, marks, stack) {
                            return Some(cycle);
                        }
                    }
                    Mark::Done => {}
                }
            }
            stack.pop();
            marks[v] = Mark::Done;
            None
        }
        let mut marks = vec![Mark::New; self.k()];
        let mut stack = Vec::new();
        (0..self.k()).find_map(|v| {
            if marks[v] == Mark::New {
                visit(self, v, &mut marks, &mut stack)
            } else {
                None
            }
        })
    }
}

/// Total order over variables consistent with every arrow.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CausalOrder(Vec<usize>);

impl CausalOrder {
    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    /// Rank of each variable: `ranks()[v]` is v's position in the order.
    pub fn ranks(&self) -> Vec<usize> {
        let mut r = vec![0; self.0.len()];
        for (pos, &v) in self.0.iter().enumerate() {
            r[v] = pos;
        }
        r
    }

    pub fn names<'a>(&self, m: &'a PathModel) -> Vec<&'a str> {
        self.0.iter().map(|&i| m.name(i)).collect()
    }
}

/// Kahn's algorithm, always releasing the earliest-declared ready variable.
pub fn topological_order(m: &PathModel) -> CausalOrder {
    let k = m.k();
    let mut indegree = vec![0usize; k];
    for a in m.arrows() {
        indegree[a.to] += 1;
    }
    let mut ready: BTreeSet<usize> = (0..k).filter(|&i| indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(k);
    while let Some(v) = ready.pop_first() {
        order.push(v);
        for c in m.children(v) {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.insert(c);
            }
        }
    }
    debug_assert_eq!(order.len(), k, "model is acyclic by construction");
    CausalOrder(order)
}

/// Parse output: the model plus non-fatal notices (implicit declarations).
#[derive(Debug, Clone)]
pub struct ParsedModel {
    pub model: PathModel,
    pub warnings: Vec<String>,
}

pub fn parse_model(text: &str) -> Result<ParsedModel> {
    let mut variables: Vec<Variable> = Vec::new();
    let mut explicit: BTreeSet<String> = BTreeSet::new();
    let mut arrows: Vec<(usize, usize, Option<f64>, usize)> = Vec::new();
    let mut warnings = Vec::new();

    let declare = |name: &str,
                   line: usize,
                   variables: &mut Vec<Variable>,
                   warnings: &mut Vec<String>|
     -> usize {
        if let Some(i) = variables.iter().position(|v| v.name == name) {
            return i;
        }
        warnings.push(format!(
            "line {line}: '{name}' used without a var declaration"
        ));
        variables.push(Variable::new(name));
        variables.len() - 1
    };

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let tokens = tokenize(raw, line)?;
        let Some((head, rest)) = tokens.split_first() else {
            continue;
        };
        let keyword = match &head.kind {
            Tok::Ident(s) => s.as_str(),
            _ => return Err(syntax(line, head.col, "expected 'var', 'path' or 'eq'")),
        };
        match keyword {
            "var" => {
                let (name, col) = expect_ident(rest.first(), line, raw)?;
                let label = match rest.get(1) {
                    None => None,
                    Some(Token {
                        kind: Tok::Str(s), ..
                    }) => Some(s.clone()),
                    Some(t) => return Err(syntax(line, t.col, "expected a quoted label")),
                };
                if let Some(t) = rest.get(2) {
                    return Err(syntax(line, t.col, "unexpected token after label"));
                }
                if !explicit.insert(name.clone()) {
                    return Err(syntax(
                        line,
                        col,
                        &format!("variable '{name}' declared twice"),
                    ));
                }
                match variables.iter_mut().find(|v| v.name == name) {
                    Some(v) => v.label = label,
                    None => variables.push(Variable { name, label }),
                }
            }
            "path" => {
                let (src, _) = expect_ident(rest.first(), line, raw)?;
                match rest.get(1) {
                    Some(Token {
                        kind: Tok::RightArrow,
                        ..
                    }) => {}
                    other => return Err(syntax(line, col_of(other, raw), "expected '->'")),
                }
                let (dst, _) = expect_ident(rest.get(2), line, raw)?;
                let coefficient = match rest.get(3) {
                    None => None,
                    Some(Token {
                        kind: Tok::Colon, ..
                    }) => match rest.get(4) {
                        Some(Token {
                            kind: Tok::Number(v),
                            ..
                        }) => Some(*v),
                        other => {
                            return Err(syntax(line, col_of(other, raw), "expected a coefficient"))
                        }
                    },
                    Some(t) => return Err(syntax(line, t.col, "expected ':' or end of line")),
                };
                if let Some(t) = rest.get(5) {
                    return Err(syntax(line, t.col, "unexpected token after coefficient"));
                }
                let s = declare(&src, line, &mut variables, &mut warnings);
                let d = declare(&dst, line, &mut variables, &mut warnings);
                arrows.push((s, d, coefficient, line));
            }
            "eq" => {
                let (dst, _) = expect_ident(rest.first(), line, raw)?;
                match rest.get(1) {
                    Some(Token {
                        kind: Tok::LeftArrow,
                        ..
                    }) => {}
                    other => return Err(syntax(line, col_of(other, raw), "expected '<-'")),
                }
                if rest.len() < 3 {
                    return Err(syntax(
                        line,
                        raw.chars().count() + 1,
                        "expected at least one predictor",
                    ));
                }
                let d = declare(&dst, line, &mut variables, &mut warnings);
                for t in &rest[2..] {
                    let (src, _) = expect_ident(Some(t), line, raw)?;
                    let s = declare(&src, line, &mut variables, &mut warnings);
                    arrows.push((s, d, None, line));
                }
            }
            other => {
                return Err(syntax(
                    line,
                    head.col,
                    &format!("unknown statement '{other}'"),
                ));
            }
        }
    }

    let mut seen = BTreeSet::new();
    for &(s, d, _, _) in &arrows {
        if !seen.insert((s, d)) {
            return Err(Error::DuplicateArrow(
                variables[s].name.clone(),
                variables[d].name.clone(),
            ));
        }
    }
    let arrows = arrows
        .into_iter()
        .map(|(from, to, coefficient, _)| Arrow {
            from,
            to,
            coefficient,
        })
        .collect();
    Ok(ParsedModel {
        model: PathModel::from_parts(variables, arrows)?,
        warnings,
    })
}

/// Canonical text form; parsing it yields an equal model.
pub fn render_model(m: &PathModel) -> String {
    let mut out = String::new();
    for v in m.variables() {
        match &v.label {
            Some(label) => writeln!(out, "var {} \"{}\"", v.name, label),
            None => writeln!(out, "var {}", v.name),
        }
        .expect("writing to a String cannot fail");
    }
    for a in m.arrows() {
        match a.coefficient {
            Some(c) => writeln!(out, "path {} -> {} : {}", m.name(a.from), m.name(a.to), c),
            None => writeln!(out, "path {} -> {}", m.name(a.from), m.name(a.to)),
        }
        .expect("writing to a String cannot fail");
    }
    out
}

pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(f64),
    Str(String),
    RightArrow,
    LeftArrow,
    Colon,
}

#[derive(Debug, Clone)]
struct Token {
    kind: Tok,
    col: usize,
}

fn syntax(line: usize, column: usize, message: &str) -> Error {
    Error::Syntax {
        line,
        column,
        message: message.to_owned(),
    }
}

fn col_of(t: Option<&Token>, raw: &str) -> usize {
    t.map_or(raw.chars().count() + 1, |t| t.col)
}

fn expect_ident(t: Option<&Token>, line: usize, raw: &str) -> Result<(String, usize)> {
    match t {
        Some(Token {
            kind: Tok::Ident(s),
            col,
        }) => Ok((s.clone(), *col)),
        other => Err(syntax(line, col_of(other, raw), "expected a variable name")),
    }
}

fn tokenize(raw: &str, line: usize) -> Result<Vec<Token>> {
    let chars: Vec<char> = raw.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
        } else if c == '#' {
            break;
        } else if c == '-' && chars.get(i + 1) == Some(&'>') {
            tokens.push(Token {
                kind: Tok::RightArrow,
                col,
            });
            i += 2;
        } else if c == '<' && chars.get(i + 1) == Some(&'-') {
            tokens.push(Token {
                kind: Tok::LeftArrow,
                col,
            });
            i += 2;
        } else if c == ':' {
            tokens.push(Token {
                kind: Tok::Colon,
                col,
            });
            i += 1;
        } else if c == '"' {
            let start = i + 1;
            let end = chars[start..]
                .iter()
                .position(|&ch| ch == '"')
                .map(|p| start + p)
                .ok_or_else(|| syntax(line, col, "unterminated label"))?;
            tokens.push(Token {
                kind: Tok::Str(chars[start..end].iter().collect()),
                col,
            });
            i = end + 1;
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            tokens.push(Token {
                kind: Tok::Ident(chars[start..i].iter().collect()),
                col,
            });
        } else if c.is_ascii_digit() || c == '-' || c == '+' || c == '.' {
            let start = i;
            i += 1;
            while i < chars.len()
                && (chars[i].is_ascii_alphanumeric() || matches!(chars[i], '.' | '-' | '+'))
            {
                // stop before a '->' that follows a number without spaces
                if chars[i] == '-' && chars.get(i + 1) == Some(&'>') {
                    break;
                }
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            let value = text
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| syntax(line, col, &format!("invalid number '{text}'")))?;
            tokens.push(Token {
                kind: Tok::Number(value),
                col,
            });
        } else {
            return Err(syntax(line, col, &format!("unexpected character '{c}'")));
        }
    }
    Ok(tokens)
}
