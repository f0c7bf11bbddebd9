//! CPLEX-style LP text for binary models.
//!
//! ```text
//! \ comment
//! Minimize
//!  obj: P_n_a + 2 P_n_b
//! Subject To
//!  c1: P_n_a + P_n_b >= 1
//! Binary
//!  P_n_a P_n_b
//! End
//! ```
//!
//! Every variable must be declared in the `Binary` section, whose order
//! defines the variable order. Writing is deterministic, so a parsed model
//! writes back byte for byte.

use std::fmt::Write;

use thiserror::Error;

use super::{MilpModel, Sense};

const WRAP: usize = 78;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct LpParseError {
    pub line: usize,
    pub message: String,
}

fn push_expr(out: &mut String, line: &mut String, terms: &[(f64, usize)], m: &MilpModel) {
    for (i, &(c, v)) in terms.iter().enumerate() {
        let name = m.var_name(v);
        let tok = match (i, c) {
            (0, 1.0) => name.to_string(),
            (0, -1.0) => format!("- {name}"),
            (0, c) if c < 0.0 => format!("- {} {name}", -c),
            (0, c) => format!("{c} {name}"),
            (_, 1.0) => format!("+ {name}"),
            (_, -1.0) => format!("- {name}"),
            (_, c) if c < 0.0 => format!("- {} {name}", -c),
            (_, c) => format!("+ {c} {name}"),
        };
        push_token(out, line, &tok);
    }
}

fn push_token(out: &mut String, line: &mut String, tok: &str) {
    if line.len() + 1 + tok.len() > WRAP && !line.trim().is_empty() && !line.trim_end().ends_with(':') {
        out.push_str(line);
        out.push('\n');
        line.clear();
        line.push_str("   ");
    } else {
        line.push(' ');
    }
    line.push_str(tok);
}

/// Writes the model as LP text.
pub fn export_lp(m: &MilpModel) -> String {
    let mut out = String::new();
    for c in &m.comments {
        let _ = writeln!(out, "\\ {c}");
    }
    out.push_str("Minimize\n");
    let mut line = String::new();
    line.push_str(&format!(" {}:", m.objective_name));
    push_expr(&mut out, &mut line, &m.objective, m);
    out.push_str(&line);
    out.push('\n');

    out.push_str("Subject To\n");
    for c in &m.constraints {
        let mut line = format!(" {}:", c.name);
        push_expr(&mut out, &mut line, &c.terms, m);
        push_token(&mut out, &mut line, &format!("{} {}", c.sense.symbol(), c.rhs));
        out.push_str(&line);
        out.push('\n');
    }

    out.push_str("Binary\n");
    let mut line = String::new();
    for v in m.variables() {
        if !line.is_empty() && line.len() + 1 + v.len() > WRAP {
            out.push_str(&line);
            out.push('\n');
            line.clear();
        }
        line.push(' ');
        line.push_str(v);
    }
    if !line.is_empty() {
        out.push_str(&line);
        out.push('\n');
    }
    out.push_str("End\n");
    out
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    Plus,
    Minus,
    Colon,
    Cmp(Sense),
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || "_!\"#$%&()/,;?@'{}|~".contains(c)
}

fn is_ident_char(c: char) -> bool {
    is_ident_start(c) || c.is_ascii_digit() || c == '.' || c == '[' || c == ']'
}

fn lex(text: &str, line: usize, toks: &mut Vec<(usize, Tok)>) -> Result<(), LpParseError> {
    let err = |message: String| LpParseError { line, message };
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '\\' {
            break;
        } else if c == '+' {
            toks.push((line, Tok::Plus));
            i += 1;
        } else if c == '-' {
            toks.push((line, Tok::Minus));
            i += 1;
        } else if c == ':' {
            toks.push((line, Tok::Colon));
            i += 1;
        } else if c == '<' || c == '>' || c == '=' {
            let mut op = String::from(c);
            if i + 1 < chars.len() && "<>=".contains(chars[i + 1]) {
                op.push(chars[i + 1]);
                i += 1;
            }
            i += 1;
            let sense = match op.as_str() {
                "<" | "<=" | "=<" => Sense::Le,
                ">" | ">=" | "=>" => Sense::Ge,
                "=" => Sense::Eq,
                _ => return Err(err(format!("bad operator `{op}`"))),
            };
            toks.push((line, Tok::Cmp(sense)));
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len()
                && (chars[i].is_ascii_alphanumeric()
                    || chars[i] == '.'
                    || ((chars[i] == '+' || chars[i] == '-') && matches!(chars[i - 1], 'e' | 'E')))
            {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            let v: f64 = s.parse().map_err(|_| err(format!("bad number `{s}`")))?;
            toks.push((line, Tok::Num(v)));
        } else if is_ident_start(c) {
            let start = i;
            while i < chars.len() && is_ident_char(chars[i]) {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            if s.eq_ignore_ascii_case("inf") || s.eq_ignore_ascii_case("infinity") {
                toks.push((line, Tok::Num(f64::INFINITY)));
            } else {
                toks.push((line, Tok::Ident(s)));
            }
        } else {
            return Err(err(format!("unexpected character `{c}`")));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Head,
    Objective,
    Constraints,
    Bounds,
    Binary,
    End,
}

fn section_of(line: &str) -> Option<Result<Section, String>> {
    let l = line.trim().to_ascii_lowercase();
    let words: Vec<&str> = l.split_whitespace().collect();
    Some(Ok(match words.as_slice() {
        ["minimize" | "minimise" | "minimum" | "min"] => Section::Objective,
        ["maximize" | "maximise" | "maximum" | "max"] => return Some(Err("only minimization is supported".into())),
        ["subject", "to"] | ["such", "that"] | ["st"] | ["s.t."] => Section::Constraints,
        ["bounds" | "bound"] => Section::Bounds,
        ["binary" | "binaries" | "bin"] => Section::Binary,
        ["general" | "generals" | "gen" | "integer" | "integers" | "semi-continuous" | "sec"] => {
            return Some(Err(format!("section `{}` is not supported in binary models", words[0])))
        }
        ["end"] => Section::End,
        _ => return None,
    }))
}

/// Parses LP text into a model.
pub fn parse_lp(text: &str) -> Result<MilpModel, LpParseError> {
    let mut m = MilpModel::new();
    let mut section = Section::Head;
    let mut obj: Vec<(usize, Tok)> = Vec::new();
    let mut rows: Vec<(usize, Tok)> = Vec::new();
    let mut binaries: Vec<(usize, String)> = Vec::new();
    let mut seen_objective = false;

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if let Some(rest) = trimmed.strip_prefix('\\') {
            if section == Section::Head {
                let c = rest.strip_prefix(' ').unwrap_or(rest);
                m.comments.push(c.to_string());
            }
            continue;
        }
        if trimmed.is_empty() {
            continue;
        }
        if let Some(s) = section_of(trimmed) {
            let s = s.map_err(|message| LpParseError { line, message })?;
            if section == Section::End {
                return Err(LpParseError {
                    line,
                    message: "content after `End`".into(),
                });
            }
            if s == Section::Objective {
                if seen_objective {
                    return Err(LpParseError {
                        line,
                        message: "second objective section".into(),
                    });
                }
                seen_objective = true;
            } else if !seen_objective {
                return Err(LpParseError {
                    line,
                    message: "expected `Minimize` first".into(),
                });
            }
            section = s;
            continue;
        }
        match section {
            Section::Head => {
                return Err(LpParseError {
                    line,
                    message: "expected `Minimize`".into(),
                })
            }
            Section::Objective => lex(raw, line, &mut obj)?,
            Section::Constraints => lex(raw, line, &mut rows)?,
            Section::Bounds => {
                return Err(LpParseError {
                    line,
                    message: "bounds are implied by `Binary`".into(),
                })
            }
            Section::Binary => {
                for name in raw.split_whitespace() {
                    if name.starts_with('\\') {
                        break;
                    }
                    binaries.push((line, name.to_string()));
                }
            }
            Section::End => {
                return Err(LpParseError {
                    line,
                    message: "content after `End`".into(),
                })
            }
        }
    }
    if section != Section::End {
        return Err(LpParseError {
            line: text.lines().count().max(1),
            message: "missing `End`".into(),
        });
    }

    for (line, b) in binaries {
        if m.var(&b).is_some() {
            return Err(LpParseError {
                line,
                message: format!("`{b}` declared twice"),
            });
        }
        let reserved = ["inf", "infinity"].iter().any(|r| b.eq_ignore_ascii_case(r)) || section_of(&b).is_some();
        let valid = !reserved && b.chars().next().is_some_and(is_ident_start) && b.chars().all(is_ident_char);
        if !valid {
            return Err(LpParseError {
                line,
                message: format!("bad variable name `{b}`"),
            });
        }
        m.add_var(b);
    }

    let mut p = Parser {
        toks: &obj,
        pos: 0,
        model: &m,
    };
    let label = p.label();
    let terms = p.expr()?;
    if let Some((line, t)) = p.peek() {
        return Err(LpParseError {
            line,
            message: format!("unexpected {t:?} in objective"),
        });
    }
    if let Some(name) = label {
        m.objective_name = name;
    }
    m.objective = terms;

    let mut p = Parser {
        toks: &rows,
        pos: 0,
        model: &m,
    };
    let mut constraints = Vec::new();
    while p.peek().is_some() {
        let name = p.label().unwrap_or_else(|| format!("R{}", constraints.len() + 1));
        let terms = p.expr()?;
        let (line, sense) = match p.next() {
            Some((l, Tok::Cmp(s))) => (l, s),
            Some((l, t)) => {
                return Err(LpParseError {
                    line: l,
                    message: format!("expected comparison, found {t:?}"),
                })
            }
            None => {
                return Err(LpParseError {
                    line: p.last_line(),
                    message: "unterminated row".into(),
                })
            }
        };
        let neg = match p.peek() {
            Some((_, Tok::Minus)) => {
                p.pos += 1;
                true
            }
            Some((_, Tok::Plus)) => {
                p.pos += 1;
                false
            }
            _ => false,
        };
        let rhs = match p.next() {
            Some((_, Tok::Num(v))) => {
                if neg {
                    -v
                } else {
                    v
                }
            }
            _ => {
                return Err(LpParseError {
                    line,
                    message: "expected right-hand side".into(),
                })
            }
        };
        constraints.push((name, terms, sense, rhs));
    }
    for (name, terms, sense, rhs) in constraints {
        m.add_constraint(name, terms, sense, rhs);
    }
    Ok(m)
}

struct Parser<'a> {
    toks: &'a [(usize, Tok)],
    pos: usize,
    model: &'a MilpModel,
}

impl Parser<'_> {
    fn peek(&self) -> Option<(usize, Tok)> {
        self.toks.get(self.pos).cloned()
    }

    fn next(&mut self) -> Option<(usize, Tok)> {
        let t = self.peek();
        self.pos += 1;
        t
    }

    fn last_line(&self) -> usize {
        self.toks.last().map_or(1, |t| t.0)
    }

    fn label(&mut self) -> Option<String> {
        if let (Some((_, Tok::Ident(n))), Some((_, Tok::Colon))) =
            (self.toks.get(self.pos), self.toks.get(self.pos + 1))
        {
            self.pos += 2;
            return Some(n.clone());
        }
        None
    }

    /// `[sign] [coef] var { sign [coef] var }`, possibly empty.
    fn expr(&mut self) -> Result<Vec<(f64, usize)>, LpParseError> {
        let mut terms = Vec::new();
        loop {
            // stop at a comparison or at the next row's label
            match self.peek() {
                None | Some((_, Tok::Cmp(_))) => break,
                Some((_, Tok::Ident(_))) if matches!(self.toks.get(self.pos + 1), Some((_, Tok::Colon))) => break,
                _ => {}
            }
            let mut sign = 1.0;
            let mut explicit_sign = false;
            while let Some((_, t @ (Tok::Plus | Tok::Minus))) = self.peek() {
                if t == Tok::Minus {
                    sign = -sign;
                }
                explicit_sign = true;
                self.pos += 1;
            }
            if !terms.is_empty() && !explicit_sign {
                let (line, t) = self.peek().expect("checked above");
                return Err(LpParseError {
                    line,
                    message: format!("expected `+` or `-` before {t:?}"),
                });
            }
            let mut coef = 1.0;
            if let Some((_, Tok::Num(v))) = self.peek() {
                coef = v;
                self.pos += 1;
            }
            match self.next() {
                Some((line, Tok::Ident(n))) => {
                    let v = self.model.var(&n).ok_or_else(|| LpParseError {
                        line,
                        message: format!("undeclared variable `{n}`"),
                    })?;
                    terms.push((sign * coef, v));
                }
                Some((line, t)) => {
                    return Err(LpParseError {
                        line,
                        message: format!("expected variable, found {t:?}"),
                    })
                }
                None => {
                    return Err(LpParseError {
                        line: self.last_line(),
                        message: "expected variable".into(),
                    })
                }
            }
        }
        Ok(terms)
    }
}
