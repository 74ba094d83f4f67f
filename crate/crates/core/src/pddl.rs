//! Grounded STRIPS PDDL: zero-arity predicates, conjunctive positive
//! preconditions, add and `not` delete effects, positive conjunctive goals.
//!
//! Keywords are case-insensitive; predicate and action names are kept
//! verbatim. Predicates are indexed in declaration order, and that order is
//! the bit order of every state built by [`link`].

use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::strips::{Action, BitSet, Plan, PlanningTask, PropositionSpace, StripsError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: {message}\n  | {snippet}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
    pub snippet: String,
}

#[derive(Debug, Error)]
pub enum LinkError {
    #[error("problem is for domain `{problem}` but domain is `{domain}`")]
    DomainMismatch { domain: String, problem: String },
    #[error("problem refers to undeclared predicate `{0}`")]
    UndeclaredPredicate(String),
    #[error(transparent)]
    Strips(#[from] StripsError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedAction {
    pub name: String,
    pub pre: Vec<String>,
    pub add: Vec<String>,
    pub del: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedDomain {
    pub name: String,
    pub predicates: Vec<String>,
    pub actions: Vec<ParsedAction>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedProblem {
    pub name: String,
    pub domain_name: String,
    pub init: Vec<String>,
    pub goal: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Pos {
    offset: usize,
    line: usize,
    column: usize,
}

#[derive(Debug, Clone)]
enum Sexp {
    Atom(String, Pos),
    List(Vec<Sexp>, Pos),
}

impl Sexp {
    fn pos(&self) -> Pos {
        match self {
            Sexp::Atom(_, p) | Sexp::List(_, p) => *p,
        }
    }
}

struct Source<'a> {
    text: &'a str,
}

impl<'a> Source<'a> {
    fn error(&self, pos: Pos, message: impl Into<String>) -> ParseError {
        let line_text = self.text.lines().nth(pos.line - 1).unwrap_or("");
        let snippet: String = line_text.chars().take(80).collect();
        ParseError {
            line: pos.line,
            column: pos.column,
            message: message.into(),
            snippet,
        }
    }

    fn end_pos(&self) -> Pos {
        let mut pos = Pos {
            offset: 0,
            line: 1,
            column: 1,
        };
        for c in self.text.chars() {
            advance(&mut pos, c);
        }
        pos
    }

    fn parse_one(&self) -> Result<Sexp, ParseError> {
        let tokens = self.tokenize()?;
        let mut iter = tokens.into_iter().peekable();
        let expr = match iter.next() {
            None => return Err(self.error(self.end_pos(), "empty input")),
            Some(tok) => self.parse_expr(tok, &mut iter)?,
        };
        if let Some(extra) = iter.next() {
            return Err(self.error(extra.pos, "unexpected trailing input"));
        }
        Ok(expr)
    }

    fn tokenize(&self) -> Result<Vec<Token>, ParseError> {
        let mut tokens = Vec::new();
        let mut pos = Pos {
            offset: 0,
            line: 1,
            column: 1,
        };
        let mut chars = self.text.chars().peekable();
        while let Some(&c) = chars.peek() {
            match c {
                ';' => {
                    while let Some(&c) = chars.peek() {
                        if c == '\n' {
                            break;
                        }
                        advance(&mut pos, c);
                        chars.next();
                    }
                }
                '(' | ')' => {
                    tokens.push(Token {
                        kind: if c == '(' { Tok::Open } else { Tok::Close },
                        pos,
                    });
                    advance(&mut pos, c);
                    chars.next();
                }
                c if c.is_whitespace() => {
                    advance(&mut pos, c);
                    chars.next();
                }
                _ => {
                    let start = pos;
                    let mut word = String::new();
                    while let Some(&c) = chars.peek() {
                        if c.is_whitespace() || c == '(' || c == ')' || c == ';' {
                            break;
                        }
                        if c.is_control() {
                            return Err(self.error(pos, "control character in identifier"));
                        }
                        word.push(c);
                        advance(&mut pos, c);
                        chars.next();
                    }
                    tokens.push(Token {
                        kind: Tok::Word(word),
                        pos: start,
                    });
                }
            }
        }
        Ok(tokens)
    }

    fn parse_expr(
        &self,
        first: Token,
        rest: &mut std::iter::Peekable<std::vec::IntoIter<Token>>,
    ) -> Result<Sexp, ParseError> {
        // Iterative to stay total on deeply nested input.
        let mut stack: Vec<(Vec<Sexp>, Pos)> = Vec::new();
        let mut tok = first;
        loop {
            let finished = match tok.kind {
                Tok::Word(w) => Some(Sexp::Atom(w, tok.pos)),
                Tok::Open => {
                    stack.push((Vec::new(), tok.pos));
                    None
                }
                Tok::Close => match stack.pop() {
                    Some((items, pos)) => Some(Sexp::List(items, pos)),
                    None => return Err(self.error(tok.pos, "unbalanced `)`")),
                },
            };
            if let Some(expr) = finished {
                match stack.last_mut() {
                    Some((items, _)) => items.push(expr),
                    None => return Ok(expr),
                }
            }
            tok = match rest.next() {
                Some(t) => t,
                None => {
                    let open = stack.last().map(|(_, p)| *p).unwrap_or(self.end_pos());
                    return Err(self.error(open, "unclosed `(`"));
                }
            };
        }
    }
}

fn advance(pos: &mut Pos, c: char) {
    pos.offset += c.len_utf8();
    if c == '\n' {
        pos.line += 1;
        pos.column = 1;
    } else {
        pos.column += 1;
    }
}

#[derive(Debug)]
enum Tok {
    Open,
    Close,
    Word(String),
}

#[derive(Debug)]
struct Token {
    kind: Tok,
    pos: Pos,
}

fn is_kw(word: &str, kw: &str) -> bool {
    word.eq_ignore_ascii_case(kw)
}

fn valid_name(word: &str) -> bool {
    !word.is_empty() && !word.starts_with(':') && !word.starts_with('?')
}

struct Reader<'s, 'a> {
    src: &'s Source<'a>,
}

impl Reader<'_, '_> {
    fn list<'e>(&self, e: &'e Sexp, what: &str) -> Result<(&'e [Sexp], Pos), ParseError> {
        match e {
            Sexp::List(items, pos) => Ok((items, *pos)),
            Sexp::Atom(_, pos) => Err(self.src.error(*pos, format!("expected {what}, found a word"))),
        }
    }

    fn atom<'e>(&self, e: &'e Sexp, what: &str) -> Result<&'e str, ParseError> {
        match e {
            Sexp::Atom(w, _) => Ok(w),
            Sexp::List(_, pos) => Err(self.src.error(*pos, format!("expected {what}, found a list"))),
        }
    }

    fn name(&self, e: &Sexp, what: &str) -> Result<String, ParseError> {
        let w = self.atom(e, what)?;
        if !valid_name(w) {
            return Err(self.src.error(e.pos(), format!("invalid {what} `{w}`")));
        }
        Ok(w.to_string())
    }

    fn keyword(&self, e: &Sexp, kw: &str) -> Result<(), ParseError> {
        let w = self.atom(e, kw)?;
        if !is_kw(w, kw) {
            return Err(self.src.error(e.pos(), format!("expected `{kw}`, found `{w}`")));
        }
        Ok(())
    }

    /// `(define (<kind> NAME) sections...)`
    fn header<'e>(&self, root: &'e Sexp, kind: &str) -> Result<(String, &'e [Sexp]), ParseError> {
        let (items, pos) = self.list(root, "`(define ...)`")?;
        let Some(first) = items.first() else {
            return Err(self.src.error(pos, "expected `define`"));
        };
        self.keyword(first, "define")?;
        let Some(head) = items.get(1) else {
            return Err(self.src.error(pos, format!("missing `({kind} NAME)`")));
        };
        let (head_items, head_pos) = self.list(head, &format!("`({kind} NAME)`"))?;
        if head_items.len() != 2 {
            return Err(self.src.error(head_pos, format!("expected `({kind} NAME)`")));
        }
        self.keyword(&head_items[0], kind)?;
        let name = self.name(&head_items[1], &format!("{kind} name"))?;
        Ok((name, &items[2..]))
    }

    fn section<'e>(&self, e: &'e Sexp) -> Result<(String, &'e [Sexp], Pos), ParseError> {
        let (items, pos) = self.list(e, "a section")?;
        let Some(head) = items.first() else {
            return Err(self.src.error(pos, "empty section"));
        };
        let w = self.atom(head, "a section keyword")?;
        if !w.starts_with(':') {
            return Err(self.src.error(head.pos(), format!("expected a section keyword, found `{w}`")));
        }
        Ok((w.to_ascii_lowercase(), &items[1..], pos))
    }

    /// A zero-arity atom `(p)`.
    fn ground_atom(&self, e: &Sexp) -> Result<String, ParseError> {
        let (items, pos) = self.list(e, "an atom `(p)`")?;
        match items {
            [] => Err(self.src.error(pos, "empty atom")),
            [name] => {
                let w = self.atom(name, "predicate name")?;
                if is_kw(w, "not") || is_kw(w, "and") {
                    return Err(self.src.error(pos, format!("unexpected `{w}`")));
                }
                self.name(name, "predicate name")
            }
            [_, arg, ..] => Err(self.src.error(
                arg.pos(),
                "only zero-arity predicates are supported",
            )),
        }
    }

    /// `(and lit*)` or a single literal; returns (positive, negative).
    fn literals(&self, e: &Sexp) -> Result<(Vec<(String, Pos)>, Vec<(String, Pos)>), ParseError> {
        let (items, pos) = self.list(e, "a formula")?;
        let lits: &[Sexp] = match items.first() {
            Some(Sexp::Atom(w, _)) if is_kw(w, "and") => &items[1..],
            None => return Err(self.src.error(pos, "empty formula")),
            _ => std::slice::from_ref(e),
        };
        let mut pos_lits = Vec::new();
        let mut neg_lits = Vec::new();
        for lit in lits {
            let (inner, lpos) = self.list(lit, "a literal")?;
            match inner.first() {
                Some(Sexp::Atom(w, _)) if is_kw(w, "not") => {
                    if inner.len() != 2 {
                        return Err(self.src.error(lpos, "`not` takes exactly one atom"));
                    }
                    neg_lits.push((self.ground_atom(&inner[1])?, inner[1].pos()));
                }
                Some(Sexp::Atom(w, p)) if is_kw(w, "and") => {
                    return Err(self.src.error(*p, "nested `and` is not supported"));
                }
                _ => pos_lits.push((self.ground_atom(lit)?, lpos)),
            }
        }
        Ok((pos_lits, neg_lits))
    }
}

fn dedup_keep_order(names: Vec<String>) -> Vec<String> {
    let mut seen = std::collections::HashSet::new();
    names.into_iter().filter(|n| seen.insert(n.clone())).collect()
}

pub fn parse_domain(text: &str) -> Result<ParsedDomain, ParseError> {
    let src = Source { text };
    let root = src.parse_one()?;
    let r = Reader { src: &src };
    let (name, sections) = r.header(&root, "domain")?;

    let mut predicates: Vec<String> = Vec::new();
    let mut declared = std::collections::HashSet::new();
    let mut seen_predicates = false;
    let mut actions: Vec<ParsedAction> = Vec::new();

    for section in sections {
        let (kw, body, pos) = r.section(section)?;
        match kw.as_str() {
            ":requirements" => {
                for req in body {
                    let w = r.atom(req, "a requirement")?;
                    if !is_kw(w, ":strips") {
                        return Err(src.error(req.pos(), format!("unsupported requirement `{w}`")));
                    }
                }
            }
            ":predicates" => {
                if seen_predicates {
                    return Err(src.error(pos, "duplicate `:predicates` section"));
                }
                if !actions.is_empty() {
                    return Err(src.error(pos, "`:predicates` must precede actions"));
                }
                seen_predicates = true;
                for p in body {
                    let name = r.ground_atom(p)?;
                    if !declared.insert(name.clone()) {
                        return Err(src.error(p.pos(), format!("predicate `{name}` declared twice")));
                    }
                    predicates.push(name);
                }
            }
            ":action" => {
                let action = parse_action(&r, body, pos, &declared)?;
                if actions.iter().any(|a| a.name == action.name) {
                    return Err(src.error(pos, format!("action `{}` defined twice", action.name)));
                }
                actions.push(action);
            }
            other => {
                return Err(src.error(pos, format!("unsupported domain section `{other}`")));
            }
        }
    }
    Ok(ParsedDomain {
        name,
        predicates,
        actions,
    })
}

fn parse_action(
    r: &Reader<'_, '_>,
    body: &[Sexp],
    pos: Pos,
    declared: &std::collections::HashSet<String>,
) -> Result<ParsedAction, ParseError> {
    let src = r.src;
    let Some(name_expr) = body.first() else {
        return Err(src.error(pos, "action is missing a name"));
    };
    let name = r.name(name_expr, "action name")?;
    let mut pre = None;
    let mut eff = None;
    let mut rest = body[1..].iter();
    while let Some(key) = rest.next() {
        let kw = r.atom(key, "an action keyword")?.to_ascii_lowercase();
        let Some(value) = rest.next() else {
            return Err(src.error(key.pos(), format!("`{kw}` has no value")));
        };
        match kw.as_str() {
            ":parameters" => {
                let (params, ppos) = r.list(value, "a parameter list")?;
                if !params.is_empty() {
                    return Err(src.error(ppos, "parameters are not supported (grounded actions only)"));
                }
            }
            ":precondition" => {
                if pre.is_some() {
                    return Err(src.error(key.pos(), "duplicate `:precondition`"));
                }
                let (p, n) = r.literals(value)?;
                if let Some((_, npos)) = n.first() {
                    return Err(src.error(*npos, "negative preconditions are not supported"));
                }
                pre = Some(p);
            }
            ":effect" => {
                if eff.is_some() {
                    return Err(src.error(key.pos(), "duplicate `:effect`"));
                }
                eff = Some(r.literals(value)?);
            }
            other => return Err(src.error(key.pos(), format!("unsupported action keyword `{other}`"))),
        }
    }
    let Some((add, del)) = eff else {
        return Err(src.error(pos, format!("action `{name}` has no `:effect`")));
    };
    let pre = pre.unwrap_or_default();
    for (lit, lpos) in pre.iter().chain(add.iter()).chain(del.iter()) {
        if !declared.contains(lit) {
            return Err(src.error(*lpos, format!("undeclared predicate `{lit}`")));
        }
    }
    let strip = |v: Vec<(String, Pos)>| dedup_keep_order(v.into_iter().map(|(s, _)| s).collect());
    let add = strip(add);
    let del = strip(del);
    if let Some(both) = add.iter().find(|a| del.contains(a)) {
        return Err(src.error(pos, format!("action `{name}` both adds and deletes `{both}`")));
    }
    Ok(ParsedAction {
        name,
        pre: strip(pre),
        add,
        del,
    })
}

pub fn parse_problem(text: &str) -> Result<ParsedProblem, ParseError> {
    let src = Source { text };
    let root = src.parse_one()?;
    let r = Reader { src: &src };
    let (name, sections) = r.header(&root, "problem")?;

    let mut domain_name = None;
    let mut init = None;
    let mut goal = None;
    for section in sections {
        let (kw, body, pos) = r.section(section)?;
        match kw.as_str() {
            ":domain" => {
                let [d] = body else {
                    return Err(src.error(pos, "expected `(:domain NAME)`"));
                };
                domain_name = Some(r.name(d, "domain name")?);
            }
            ":objects" => {
                if !body.is_empty() {
                    return Err(src.error(pos, "objects are not supported (grounded problems only)"));
                }
            }
            ":init" => {
                if init.is_some() {
                    return Err(src.error(pos, "duplicate `:init`"));
                }
                let atoms = body
                    .iter()
                    .map(|a| r.ground_atom(a))
                    .collect::<Result<Vec<_>, _>>()?;
                init = Some(dedup_keep_order(atoms));
            }
            ":goal" => {
                if goal.is_some() {
                    return Err(src.error(pos, "duplicate `:goal`"));
                }
                let [formula] = body else {
                    return Err(src.error(pos, "expected exactly one goal formula"));
                };
                let (p, n) = r.literals(formula)?;
                if let Some((_, npos)) = n.first() {
                    return Err(src.error(*npos, "negative goals are not supported"));
                }
                goal = Some(dedup_keep_order(p.into_iter().map(|(s, _)| s).collect()));
            }
            other => return Err(src.error(pos, format!("unsupported problem section `{other}`"))),
        }
    }
    let root_pos = root.pos();
    Ok(ParsedProblem {
        name,
        domain_name: domain_name.ok_or_else(|| src.error(root_pos, "missing `(:domain NAME)`"))?,
        init: init.unwrap_or_default(),
        goal: goal.ok_or_else(|| src.error(root_pos, "missing `(:goal ...)`"))?,
    })
}

/// Binds a problem to its domain, numbering predicates in declaration order.
pub fn link(domain: &ParsedDomain, problem: &ParsedProblem) -> Result<PlanningTask, LinkError> {
    if domain.name != problem.domain_name {
        return Err(LinkError::DomainMismatch {
            domain: domain.name.clone(),
            problem: problem.domain_name.clone(),
        });
    }
    let index: std::collections::HashMap<&str, usize> = domain
        .predicates
        .iter()
        .enumerate()
        .map(|(i, p)| (p.as_str(), i))
        .collect();
    let n = domain.predicates.len();
    let to_set = |names: &[String]| -> Result<BitSet, LinkError> {
        let mut set = BitSet::new(n);
        for name in names {
            let &i = index
                .get(name.as_str())
                .ok_or_else(|| LinkError::UndeclaredPredicate(name.clone()))?;
            set.insert(i);
        }
        Ok(set)
    };
    let space = PropositionSpace::new(domain.predicates.clone())?;
    let actions = domain
        .actions
        .iter()
        .map(|a| {
            Ok(Action::new(
                a.name.clone(),
                to_set(&a.pre)?,
                to_set(&a.add)?,
                to_set(&a.del)?,
            )?)
        })
        .collect::<Result<Vec<_>, LinkError>>()?;
    let init = to_set(&problem.init)?;
    let goal = to_set(&problem.goal)?;
    Ok(PlanningTask::new(space, actions, init, goal)?)
}

fn write_atoms(out: &mut String, names: &[String]) {
    for n in names {
        let _ = write!(out, " ({n})");
    }
}

impl fmt::Display for ParsedDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        let _ = writeln!(out, "(define (domain {})", self.name);
        out.push_str("  (:requirements :strips)\n");
        out.push_str("  (:predicates");
        write_atoms(&mut out, &self.predicates);
        out.push_str(")\n");
        for a in &self.actions {
            let _ = writeln!(out, "  (:action {}", a.name);
            out.push_str("    :parameters ()\n");
            out.push_str("    :precondition (and");
            write_atoms(&mut out, &a.pre);
            out.push_str(")\n    :effect (and");
            write_atoms(&mut out, &a.add);
            for d in &a.del {
                let _ = write!(out, " (not ({d}))");
            }
            out.push_str("))\n");
        }
        out.push_str(")\n");
        f.write_str(&out)
    }
}

impl fmt::Display for ParsedProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        let _ = writeln!(out, "(define (problem {})", self.name);
        let _ = writeln!(out, "  (:domain {})", self.domain_name);
        out.push_str("  (:init");
        write_atoms(&mut out, &self.init);
        out.push_str(")\n  (:goal (and");
        write_atoms(&mut out, &self.goal);
        out.push_str("))\n)\n");
        f.write_str(&out)
    }
}

/// One `(name)` line per step, then a unit-cost comment.
pub fn write_plan(task: &PlanningTask, plan: &Plan) -> String {
    let mut out = String::new();
    for &i in &plan.steps {
        let _ = writeln!(out, "({})", task.actions[i].name);
    }
    let _ = writeln!(out, "; cost = {} (unit cost)", plan.len());
    out
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PlanReadError {
    #[error("line {line}: expected `(action-name)`")]
    Syntax { line: usize },
    #[error("line {line}: unknown action `{name}`")]
    UnknownAction { line: usize, name: String },
}

/// Reads a plan in the [`write_plan`] layout; `;` starts a comment.
pub fn read_plan(task: &PlanningTask, text: &str) -> Result<Plan, PlanReadError> {
    let by_name: std::collections::HashMap<&str, usize> = task
        .actions
        .iter()
        .enumerate()
        .rev()
        .map(|(i, a)| (a.name.as_str(), i))
        .collect();
    let mut steps = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let body = raw.split(';').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let name = body
            .strip_prefix('(')
            .and_then(|b| b.strip_suffix(')'))
            .map(str::trim)
            .filter(|b| !b.is_empty() && !b.contains(char::is_whitespace))
            .ok_or(PlanReadError::Syntax { line })?;
        let &i = by_name.get(name).ok_or_else(|| PlanReadError::UnknownAction {
            line,
            name: name.to_string(),
        })?;
        steps.push(i);
    }
    Ok(Plan::new(steps))
}

#[cfg(test)]
mod tests {
    use super::*;

    const DOMAIN: &str = "(define (domain d) (:predicates (z0) (z1)) (:action a0 :precondition (and (z0)) :effect (and (z1) (not (z0)))))";
    const PROBLEM: &str = "(define (problem p) (:domain d) (:init (z0)) (:goal (and (z1))))";

    #[test]
    fn parses_single_action_domain() {
        let d = parse_domain(DOMAIN).unwrap();
        assert_eq!(d.name, "d");
        assert_eq!(d.predicates, vec!["z0", "z1"]);
        assert_eq!(
            d.actions,
            vec![ParsedAction {
                name: "a0".into(),
                pre: vec!["z0".into()],
                add: vec!["z1".into()],
                del: vec!["z0".into()],
            }]
        );
    }

    #[test]
    fn empty_domain() {
        let d = parse_domain("(define (domain d) (:predicates) )").unwrap();
        assert!(d.predicates.is_empty());
        assert!(d.actions.is_empty());
    }

    #[test]
    fn undeclared_predicate_in_action() {
        let err = parse_domain("(define (domain d) (:action a :effect (and (q))))").unwrap_err();
        assert!(err.message.contains("undeclared predicate `q`"), "{err}");
        assert_eq!((err.line, err.column), (1, 44));
    }

    #[test]
    fn keywords_case_insensitive_names_case_sensitive() {
        let d = parse_domain(
            "(DEFINE (Domain D) (:Predicates (Z0) (z0)) (:ACTION A :Effect (AND (Z0))))",
        )
        .unwrap();
        assert_eq!(d.name, "D");
        assert_eq!(d.predicates, vec!["Z0", "z0"]);
        assert_eq!(d.actions[0].pre, Vec::<String>::new());
        assert_eq!(d.actions[0].add, vec!["Z0"]);
    }

    #[test]
    fn rejects_unsupported_constructs() {
        for bad in [
            "(define (domain d) (:requirements :typing) (:predicates (a)))",
            "(define (domain d) (:predicates (a ?x)))",
            "(define (domain d) (:predicates (a)) (:action x :precondition (not (a)) :effect (and (a))))",
            "(define (domain d) (:predicates (a)) (:action x :effect (and (a) (not (a)))))",
            "(define (domain d) (:predicates (a)) (:action x :precondition (and (a))))",
            "(define (domain d) (:predicates (a)) (:predicates (b)))",
            "(define (domain d) (:predicates (a) (a)))",
            "(define (domain d) (:predicates (a)))  extra",
            "(define (domain d) (:predicates (a))",
            "(define (domain d)) )",
            "",
        ] {
            assert!(parse_domain(bad).is_err(), "accepted: {bad}");
        }
    }

    #[test]
    fn comments_and_positions() {
        let text = "; generated\n(define (domain d)\n  (:predicates (a))\n  (:bogus))";
        let err = parse_domain(text).unwrap_err();
        assert_eq!(err.line, 4);
        assert_eq!(err.column, 3);
        assert_eq!(err.snippet, "  (:bogus))");
    }

    #[test]
    fn problems() {
        let p = parse_problem(PROBLEM).unwrap();
        assert_eq!(p.init, vec!["z0"]);
        assert_eq!(p.goal, vec!["z1"]);
        assert_eq!(p.domain_name, "d");

        let p = parse_problem("(define (problem p) (:domain d) (:init) (:goal (and (z0))))").unwrap();
        assert!(p.init.is_empty());

        let single = parse_problem("(define (problem p) (:domain d) (:init (z0)) (:goal (z0)))").unwrap();
        assert_eq!(single.goal, vec!["z0"]);

        let err = parse_problem("(define (problem p) (:domain d) (:init) (:goal (not (z0))))").unwrap_err();
        assert!(err.message.contains("negative goals"));
    }

    #[test]
    fn linking() {
        let d = parse_domain(DOMAIN).unwrap();
        let p = parse_problem(PROBLEM).unwrap();
        let task = link(&d, &p).unwrap();
        assert_eq!(task.n_props(), 2);
        assert_eq!(task.init.to_bit_string(), "10");
        assert_eq!(task.goal.to_bit_string(), "01");
        let check = task.check_plan(&Plan::new(vec![0])).unwrap();
        assert!(check.feasible);

        let undeclared = parse_problem("(define (problem p) (:domain d) (:init (z9)) (:goal (and)))").unwrap();
        assert!(matches!(link(&d, &undeclared), Err(LinkError::UndeclaredPredicate(_))));

        let other = parse_problem("(define (problem p) (:domain e) (:init) (:goal (and)))").unwrap();
        assert!(matches!(link(&d, &other), Err(LinkError::DomainMismatch { .. })));
    }

    #[test]
    fn zero_action_domain_with_satisfied_goal() {
        let d = parse_domain("(define (domain d) (:predicates (z0)))").unwrap();
        let p = parse_problem("(define (problem p) (:domain d) (:init (z0)) (:goal (and (z0))))").unwrap();
        let task = link(&d, &p).unwrap();
        assert!(task.actions.is_empty());
        assert!(task.check_plan(&Plan::default()).unwrap().feasible);
    }

    #[test]
    fn plan_writing_and_reading() {
        let task = link(&parse_domain(DOMAIN).unwrap(), &parse_problem(PROBLEM).unwrap()).unwrap();
        assert_eq!(write_plan(&task, &Plan::default()), "; cost = 0 (unit cost)\n");
        assert_eq!(write_plan(&task, &Plan::new(vec![0])), "(a0)\n; cost = 1 (unit cost)\n");
        let two = write_plan(&task, &Plan::new(vec![0, 0]));
        assert_eq!(two, "(a0)\n(a0)\n; cost = 2 (unit cost)\n");
        assert_eq!(read_plan(&task, &two).unwrap(), Plan::new(vec![0, 0]));
        assert_eq!(
            read_plan(&task, "(a1)\n"),
            Err(PlanReadError::UnknownAction {
                line: 1,
                name: "a1".into()
            })
        );
        assert_eq!(read_plan(&task, "a0\n"), Err(PlanReadError::Syntax { line: 1 }));
    }

    #[test]
    fn display_round_trips() {
        let d = parse_domain(DOMAIN).unwrap();
        assert_eq!(parse_domain(&d.to_string()).unwrap(), d);
        let p = parse_problem(PROBLEM).unwrap();
        assert_eq!(parse_problem(&p.to_string()).unwrap(), p);
    }
}
