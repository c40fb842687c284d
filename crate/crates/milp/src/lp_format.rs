//! CPLEX-style LP file text: writer and a reader for the subset the writer
//! emits (plus the usual shorthand other tools produce).
//!
//! Coefficients are printed with Rust's shortest round-trip float formatting,
//! so `parse_lp(&write_lp(m)) == m` holds structurally. Every variable is
//! listed in `Bounds` in declaration order; the reader uses that section to
//! restore the original column order.

use std::collections::HashMap;
use std::fmt::Write;

use crate::error::LpParseError;
use crate::model::{MilpModel, RowSense, VarId, VarKind};

const WRAP: usize = 100;

pub fn write_lp(model: &MilpModel<f64>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "\\ Problem name: {}", model.name);
    out.push_str("Minimize\n");
    let mut line = String::from(" obj:");
    push_terms(&mut out, &mut line, model, &model.objective.terms);
    if model.objective.constant != 0.0 || model.objective.terms.is_empty() {
        push_token(&mut out, &mut line, &signed(model.objective.constant));
    }
    out.push_str(&line);
    out.push('\n');

    out.push_str("Subject To\n");
    for c in &model.constraints {
        let mut line = format!(" {}:", c.name);
        push_terms(&mut out, &mut line, model, &c.terms);
        if c.terms.is_empty() {
            push_token(&mut out, &mut line, "0");
        }
        push_token(&mut out, &mut line, &format!("{} {}", c.sense, fmt_num(c.rhs)));
        out.push_str(&line);
        out.push('\n');
    }

    out.push_str("Bounds\n");
    for v in &model.variables {
        let line = match (v.lower, v.upper) {
            (None, None) => format!(" {} free", v.name),
            (None, Some(u)) => format!(" -inf <= {} <= {}", v.name, fmt_num(u)),
            (Some(l), None) => format!(" {} >= {}", v.name, fmt_num(l)),
            (Some(l), Some(u)) => format!(" {} <= {} <= {}", fmt_num(l), v.name, fmt_num(u)),
        };
        out.push_str(&line);
        out.push('\n');
    }

    let bins: Vec<_> = model.variables.iter().filter(|v| v.kind == VarKind::Binary).collect();
    if !bins.is_empty() {
        out.push_str("Binaries\n");
        let mut line = String::new();
        for v in bins {
            push_token(&mut out, &mut line, &v.name);
        }
        out.push_str(&line);
        out.push('\n');
    }
    out.push_str("End\n");
    out
}

fn push_terms(out: &mut String, line: &mut String, model: &MilpModel<f64>, terms: &[(VarId, f64)]) {
    for (v, c) in terms {
        push_token(out, line, &format!("{} {}", signed(*c), model.variables[v.0].name));
    }
}

fn push_token(out: &mut String, line: &mut String, tok: &str) {
    if line.len() + tok.len() + 1 > WRAP && !line.trim().is_empty() {
        out.push_str(line);
        out.push('\n');
        line.clear();
        line.push_str("   ");
    }
    line.push(' ');
    line.push_str(tok);
}

fn signed(c: f64) -> String {
    if c < 0.0 || (c == 0.0 && c.is_sign_negative()) {
        format!("- {}", fmt_num(-c))
    } else {
        format!("+ {}", fmt_num(c))
    }
}

fn fmt_num(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:?}")
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Colon,
    Sense(RowSense),
}

fn tokenize(text: &str, line: usize) -> Result<Vec<Tok>, LpParseError> {
    let err = |msg: String| LpParseError::Syntax { line, msg };
    let b = text.as_bytes();
    let mut i = 0;
    let mut toks = Vec::new();
    while i < b.len() {
        let c = b[i] as char;
        match c {
            ' ' | '\t' | '\r' => i += 1,
            '+' => {
                toks.push(Tok::Plus);
                i += 1;
            }
            '-' => {
                toks.push(Tok::Minus);
                i += 1;
            }
            ':' => {
                toks.push(Tok::Colon);
                i += 1;
            }
            '<' | '>' | '=' => {
                let mut j = i + 1;
                while j < b.len() && matches!(b[j], b'<' | b'>' | b'=') {
                    j += 1;
                }
                let s = &text[i..j];
                let sense = match s {
                    "<" | "<=" | "=<" => RowSense::Le,
                    ">" | ">=" | "=>" => RowSense::Ge,
                    "=" => RowSense::Eq,
                    _ => return Err(err(format!("bad operator `{s}`"))),
                };
                toks.push(Tok::Sense(sense));
                i = j;
            }
            _ if c.is_ascii_digit() || c == '.' => {
                let mut j = i;
                while j < b.len() {
                    let d = b[j] as char;
                    let exp_sign = (d == '+' || d == '-') && j > i && matches!(b[j - 1], b'e' | b'E');
                    if d.is_ascii_digit() || d == '.' || d == 'e' || d == 'E' || exp_sign {
                        j += 1;
                    } else {
                        break;
                    }
                }
                let s = &text[i..j];
                let v: f64 = s.parse().map_err(|_| err(format!("bad number `{s}`")))?;
                toks.push(Tok::Num(v));
                i = j;
            }
            _ if c.is_ascii_alphabetic() || c == '_' => {
                let mut j = i;
                while j < b.len() {
                    let d = b[j] as char;
                    if d.is_ascii_alphanumeric() || "_.!\"#$%&()/,;?@`'{}|~[]".contains(d) {
                        j += 1;
                    } else {
                        break;
                    }
                }
                let s = &text[i..j];
                match s.to_ascii_lowercase().as_str() {
                    "inf" | "infinity" => toks.push(Tok::Num(f64::INFINITY)),
                    _ => toks.push(Tok::Ident(s.to_string())),
                }
                i = j;
            }
            _ => return Err(err(format!("unexpected character `{c}`"))),
        }
    }
    Ok(toks)
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Objective,
    Constraints,
    Bounds,
    Binaries,
    Generals,
    End,
}

fn section_header(line: &str) -> Option<Section> {
    let l = line.trim().to_ascii_lowercase();
    Some(match l.as_str() {
        "minimize" | "minimum" | "min" => Section::Objective,
        "subject to" | "such that" | "st" | "s.t." | "st." => Section::Constraints,
        "bounds" | "bound" => Section::Bounds,
        "binaries" | "binary" | "bin" => Section::Binaries,
        "generals" | "general" | "gen" => Section::Generals,
        "end" => Section::End,
        _ => return None,
    })
}

struct ParsedRow {
    name: String,
    terms: Vec<(String, f64)>,
    constant: f64,
    sense: Option<RowSense>,
    rhs: f64,
}

/// Parses a linear expression; returns terms and constant.
fn parse_expr(toks: &[Tok], line: usize) -> Result<(Vec<(String, f64)>, f64), LpParseError> {
    let mut terms = Vec::new();
    let mut constant = 0.0;
    let mut i = 0;
    while i < toks.len() {
        let mut sign = 1.0;
        while let Some(t) = toks.get(i) {
            match t {
                Tok::Plus => i += 1,
                Tok::Minus => {
                    sign = -sign;
                    i += 1;
                }
                _ => break,
            }
        }
        match (toks.get(i), toks.get(i + 1)) {
            (Some(Tok::Num(c)), Some(Tok::Ident(name))) => {
                terms.push((name.clone(), sign * c));
                i += 2;
            }
            (Some(Tok::Num(c)), _) => {
                constant += sign * c;
                i += 1;
            }
            (Some(Tok::Ident(name)), _) => {
                terms.push((name.clone(), sign));
                i += 1;
            }
            (t, _) => {
                return Err(LpParseError::Syntax { line, msg: format!("unexpected token {t:?}") })
            }
        }
    }
    Ok((terms, constant))
}

fn split_statements(toks: Vec<Tok>, line: usize, anon: &mut usize) -> Result<Vec<ParsedRow>, LpParseError> {
    // A statement is `[name :] expr [sense rhs]`; a new one starts at `ident :`.
    let mut rows = Vec::new();
    let mut i = 0;
    while i < toks.len() {
        let name = if let (Some(Tok::Ident(n)), Some(Tok::Colon)) = (toks.get(i), toks.get(i + 1)) {
            i += 2;
            n.clone()
        } else {
            *anon += 1;
            format!("R{}", *anon)
        };
        let start = i;
        while i < toks.len() {
            if matches!(toks[i], Tok::Sense(_)) {
                break;
            }
            if let (Tok::Ident(_), Some(Tok::Colon)) = (&toks[i], toks.get(i + 1)) {
                break;
            }
            i += 1;
        }
        let (terms, constant) = parse_expr(&toks[start..i], line)?;
        let mut row = ParsedRow { name, terms, constant, sense: None, rhs: 0.0 };
        if let Some(Tok::Sense(s)) = toks.get(i) {
            row.sense = Some(*s);
            i += 1;
            let mut sign = 1.0;
            if let Some(Tok::Minus) = toks.get(i) {
                sign = -1.0;
                i += 1;
            } else if let Some(Tok::Plus) = toks.get(i) {
                i += 1;
            }
            match toks.get(i) {
                Some(Tok::Num(v)) => {
                    row.rhs = sign * v;
                    i += 1;
                }
                t => {
                    return Err(LpParseError::Syntax {
                        line,
                        msg: format!("expected right-hand side, found {t:?}"),
                    })
                }
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Per-side update: `None` leaves the side as declared, `Some(None)` makes it
/// unbounded.
type Bound = (Option<Option<f64>>, Option<Option<f64>>);

fn parse_bound(toks: &[Tok], line: usize, bounds: &mut Vec<(String, Bound)>) -> Result<(), LpParseError> {
    let err = |msg: &str| LpParseError::Syntax { line, msg: msg.to_string() };
    // Fold a leading sign into the following number.
    let mut t: Vec<Tok> = Vec::new();
    let mut k = 0;
    while k < toks.len() {
        match (&toks[k], toks.get(k + 1)) {
            (Tok::Minus, Some(Tok::Num(v))) => {
                t.push(Tok::Num(-v));
                k += 2;
            }
            (Tok::Plus, Some(Tok::Num(v))) => {
                t.push(Tok::Num(*v));
                k += 2;
            }
            (tok, _) => {
                t.push(tok.clone());
                k += 1;
            }
        }
    }
    let fin = |v: f64| Some(v.is_finite().then_some(v));
    let b: Bound = match t.as_slice() {
        [Tok::Ident(n), Tok::Ident(f)] if f.eq_ignore_ascii_case("free") => {
            bounds.push((n.clone(), (Some(None), Some(None))));
            return Ok(());
        }
        [Tok::Num(l), Tok::Sense(RowSense::Le), Tok::Ident(n), Tok::Sense(RowSense::Le), Tok::Num(u)] => {
            bounds.push((n.clone(), (fin(*l), fin(*u))));
            return Ok(());
        }
        [Tok::Ident(_), Tok::Sense(s), Tok::Num(v)] => match s {
            RowSense::Ge => (fin(*v), None),
            RowSense::Le => (None, fin(*v)),
            RowSense::Eq => (fin(*v), fin(*v)),
        },
        [Tok::Num(v), Tok::Sense(s), Tok::Ident(_)] => match s {
            RowSense::Le => (fin(*v), None),
            RowSense::Ge => (None, fin(*v)),
            RowSense::Eq => (fin(*v), fin(*v)),
        },
        _ => return Err(err("unrecognized bound")),
    };
    let name = t.iter().find_map(|x| if let Tok::Ident(n) = x { Some(n.clone()) } else { None });
    bounds.push((name.expect("matched above"), b));
    Ok(())
}

pub fn parse_lp(text: &str) -> Result<MilpModel<f64>, LpParseError> {
    let mut name = String::from("model");
    let mut section = Section::None;
    let mut buffers: HashMap<u8, Vec<(usize, String)>> = HashMap::new();
    let mut bound_decls: Vec<(String, Bound)> = Vec::new();
    let mut binaries: Vec<String> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        if let Some(rest) = raw.trim_start().strip_prefix('\\') {
            if let Some(n) = rest.trim().strip_prefix("Problem name:") {
                name = n.trim().to_string();
            }
            continue;
        }
        let content = raw.split('\\').next().unwrap_or("");
        if content.trim().is_empty() {
            continue;
        }
        if let Some(s) = section_header(content) {
            section = s;
            continue;
        }
        match section {
            Section::Objective => buffers.entry(0).or_default().push((lineno, content.to_string())),
            Section::Constraints => buffers.entry(1).or_default().push((lineno, content.to_string())),
            Section::Bounds => parse_bound(&tokenize(content, lineno)?, lineno, &mut bound_decls)?,
            Section::Binaries | Section::Generals => {
                binaries.extend(content.split_whitespace().map(str::to_string))
            }
            Section::None => {
                return Err(LpParseError::Syntax { line: lineno, msg: "content before Minimize".into() })
            }
            Section::End => {}
        }
    }

    let mut anon = 0;
    let mut statements = |key: u8| -> Result<Vec<ParsedRow>, LpParseError> {
        let lines = buffers.remove(&key).unwrap_or_default();
        let first = lines.first().map(|(l, _)| *l).unwrap_or(0);
        let mut toks = Vec::new();
        for (l, s) in &lines {
            toks.extend(tokenize(s, *l)?);
        }
        split_statements(toks, first, &mut anon)
    };
    let obj_rows = statements(0)?;
    let con_rows = statements(1)?;

    // Column order: bounds section first, then first appearance elsewhere.
    let mut order: Vec<String> = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut note = |n: &str, order: &mut Vec<String>| {
        if !seen.contains_key(n) {
            seen.insert(n.to_string(), order.len());
            order.push(n.to_string());
        }
    };
    for (n, _) in &bound_decls {
        note(n, &mut order);
    }
    for r in obj_rows.iter().chain(&con_rows) {
        for (n, _) in &r.terms {
            note(n, &mut order);
        }
    }
    for n in &binaries {
        note(n, &mut order);
    }

    let is_bin: std::collections::HashSet<&String> = binaries.iter().collect();
    let mut explicit: HashMap<&String, (Option<f64>, Option<f64>)> = HashMap::new();
    for (n, (l, u)) in &bound_decls {
        let default_upper = if is_bin.contains(n) { Some(1.0) } else { None };
        let e = explicit.entry(n).or_insert((Some(0.0), default_upper));
        if let Some(l) = l {
            e.0 = *l;
        }
        if let Some(u) = u {
            e.1 = *u;
        }
    }

    let mut model = MilpModel::new(name);
    for n in &order {
        let kind = if is_bin.contains(n) { VarKind::Binary } else { VarKind::Continuous };
        let (lower, upper) = match explicit.get(n) {
            Some(b) => *b,
            None if kind == VarKind::Binary => (Some(0.0), Some(1.0)),
            None => (Some(0.0), None),
        };
        model.add_var(n.clone(), lower, upper, kind)?;
    }
    let ids = |terms: &[(String, f64)], model: &MilpModel<f64>| -> Vec<(VarId, f64)> {
        terms.iter().map(|(n, c)| (model.var(n).expect("declared above"), *c)).collect()
    };
    if let Some(obj) = obj_rows.first() {
        let t = ids(&obj.terms, &model);
        model.set_objective(t, obj.constant)?;
    }
    for r in &con_rows {
        let sense = r.sense.ok_or_else(|| LpParseError::Syntax {
            line: 0,
            msg: format!("row `{}` has no sense", r.name),
        })?;
        let t = ids(&r.terms, &model);
        model.add_constraint(r.name.clone(), t, sense, r.rhs - r.constant)?;
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> MilpModel<f64> {
        let mut m = MilpModel::new("sample");
        let x = m.add_continuous("x", Some(0.0), Some(10.5)).unwrap();
        let y = m.add_binary("y").unwrap();
        let z = m.add_continuous("z", None, None).unwrap();
        let w = m.add_continuous("w", None, Some(-2.0)).unwrap();
        let v = m.add_continuous("v", Some(-3.25), None).unwrap();
        m.add_constraint("c1", [(x, 1.0), (y, -0.1), (z, 1e-7)], RowSense::Le, 4.0).unwrap();
        m.add_constraint("c2", [(z, 1.0), (w, 2.0)], RowSense::Ge, -5.5).unwrap();
        m.add_constraint("c3", [(v, 3.0), (x, 1.0 / 3.0)], RowSense::Eq, 0.0).unwrap();
        m.set_objective([(x, 2.0), (y, -17.333333333333332), (z, 1.0)], 12.5).unwrap();
        m
    }

    #[test]
    fn round_trip_is_structural_identity() {
        let m = sample();
        let text = write_lp(&m);
        let back = parse_lp(&text).unwrap();
        assert_eq!(back, m, "{text}");
    }

    #[test]
    fn long_rows_wrap_and_still_parse() {
        let mut m = MilpModel::new("wide");
        let vars: Vec<_> = (0..60).map(|i| m.add_binary(format!("y_{i}_rej")).unwrap()).collect();
        m.add_constraint("wide", vars.iter().map(|v| (*v, 1.5)), RowSense::Le, 7.0).unwrap();
        let text = write_lp(&m);
        assert!(text.lines().all(|l| l.len() <= WRAP + 40));
        assert_eq!(parse_lp(&text).unwrap(), m);
    }

    #[test]
    fn reads_hand_written_shorthand() {
        let text = "\\ comment\nMinimize\n obj: x + 2 y\nSubject To\n c1: x + y >= 1\n -x + y <= 3\nBounds\n y <= 4\nGenerals\nEnd\n";
        let m = parse_lp(text).unwrap();
        assert_eq!(m.num_vars(), 2);
        assert_eq!(m.constraints[1].name, "R1");
        let y = m.variable(m.var("y").unwrap());
        assert_eq!((y.lower, y.upper), (Some(0.0), Some(4.0)));
    }

    #[test]
    fn reports_line_of_bad_number() {
        let text = "Minimize\n obj: x\nSubject To\n c: x >= 1..2\nEnd\n";
        match parse_lp(text) {
            Err(LpParseError::Syntax { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
    }
}
