//! CPLEX LP text format, written and read back.

use super::simplex::{LinearProgram, Row};
use super::system::LPSystem;
use crate::error::{Error, Result};
use std::collections::HashMap;
use std::fmt::Write;

const TERMS_PER_LINE: usize = 6;

fn write_expr(out: &mut String, coeffs: &[f64], names: &[String]) {
    let mut n = 0;
    for (c, name) in coeffs.iter().zip(names) {
        if *c == 0.0 {
            continue;
        }
        if n > 0 && n % TERMS_PER_LINE == 0 {
            out.push_str("\n   ");
        }
        let sign = if c.is_sign_negative() { '-' } else { '+' };
        let _ = write!(out, " {sign} {:?} {name}", c.abs());
        n += 1;
    }
    if n == 0 {
        let _ = write!(out, " 0 {}", names[0]);
    }
}

impl LinearProgram {
    pub fn to_lp_text(&self, comment: &str) -> String {
        let mut s = String::new();
        for line in comment.lines() {
            let _ = writeln!(s, "\\ {line}");
        }
        s.push_str("Minimize\n obj:");
        write_expr(&mut s, &self.objective, &self.names);
        s.push_str("\nSubject To\n");
        for r in &self.rows {
            let _ = write!(s, " {}:", r.name);
            write_expr(&mut s, &r.coeffs, &self.names);
            let _ = writeln!(s, " <= {:?}", r.rhs);
        }
        s.push_str("Bounds\n");
        for (j, name) in self.names.iter().enumerate() {
            if self.free[j] {
                let _ = writeln!(s, " {name} free");
            }
        }
        let ints: Vec<&str> = self.names.iter().zip(&self.integer).filter(|(_, &i)| i).map(|(n, _)| n.as_str()).collect();
        if !ints.is_empty() {
            s.push_str("General\n");
            for chunk in ints.chunks(10) {
                let _ = writeln!(s, " {}", chunk.join(" "));
            }
        }
        s.push_str("End\n");
        s
    }
}

pub fn export_lp(sys: &LPSystem) -> String {
    let comment = format!(
        "binned explicit-formula system: T = {}, V = {}, K = {}, q = {}\nminimize logd",
        sys.t,
        sys.v,
        sys.k(),
        sys.q
    );
    sys.to_program().to_lp_text(&comment)
}

#[derive(PartialEq)]
enum Section {
    None,
    Objective,
    Constraints,
    Bounds,
    Integer,
}

fn parse_num(s: &str) -> Result<f64> {
    match s.to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" | "+infinity" => Ok(f64::INFINITY),
        "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
        _ => s.parse().map_err(|_| Error::Parse(format!("bad number '{s}'"))),
    }
}

fn is_num(s: &str) -> bool {
    parse_num(s).is_ok()
}

struct Builder {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl Builder {
    fn var(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), self.names.len() - 1);
        self.names.len() - 1
    }

    // "+ 2 x - y + 0.5 z" into (var, coeff) pairs
    fn expr(&mut self, toks: &[&str]) -> Result<Vec<(usize, f64)>> {
        let mut out = Vec::new();
        let mut sign = 1.0;
        let mut coef: Option<f64> = None;
        for &t in toks {
            match t {
                "+" => sign = 1.0,
                "-" => sign = -sign,
                _ if is_num(t) => coef = Some(parse_num(t)?),
                _ if t.starts_with(|c: char| c.is_ascii_digit() || c == '.') => {
                    let k = t.find(|c: char| !(c.is_ascii_digit() || c == '.')).unwrap_or(t.len());
                    let v = self.var(&t[k..]);
                    out.push((v, sign * parse_num(&t[..k])?));
                    sign = 1.0;
                    coef = None;
                }
                _ => {
                    let v = self.var(t);
                    out.push((v, sign * coef.unwrap_or(1.0)));
                    sign = 1.0;
                    coef = None;
                }
            }
        }
        if coef.is_some() {
            return Err(Error::Parse("dangling coefficient".into()));
        }
        Ok(out)
    }
}

fn tokens(line: &str) -> Vec<String> {
    // split operators glued to operands
    let mut s = String::new();
    let mut prev = ' ';
    for ch in line.chars() {
        if matches!(ch, '+' | '-') && !matches!(prev, 'e' | 'E') || matches!(ch, ':') {
            s.push(' ');
            s.push(ch);
            s.push(' ');
        } else if matches!(ch, '<' | '>' | '=') {
            if !matches!(prev, '<' | '>' | '=') {
                s.push(' ');
            }
            s.push(ch);
        } else {
            if matches!(prev, '<' | '>' | '=') {
                s.push(' ');
            }
            s.push(ch);
        }
        prev = ch;
    }
    // rejoin signs with numbers directly following
    let raw: Vec<&str> = s.split_whitespace().collect();
    let mut out: Vec<String> = Vec::new();
    let mut i = 0;
    while i < raw.len() {
        if (raw[i] == "-" || raw[i] == "+")
            && i + 1 < raw.len()
            && raw[i + 1].to_ascii_lowercase().starts_with("inf")
        {
            out.push(format!("{}{}", raw[i], raw[i + 1]));
            i += 2;
            continue;
        }
        out.push(raw[i].to_string());
        i += 1;
    }
    out
}

pub fn parse_lp(text: &str) -> Result<LinearProgram> {
    let mut b = Builder { names: Vec::new(), index: HashMap::new() };
    let mut section = Section::None;
    let mut maximize = false;
    let mut obj: Vec<(usize, f64)> = Vec::new();
    // statements may continue over several lines
    let mut pending: Vec<String> = Vec::new();
    let mut rows: Vec<(String, Vec<(usize, f64)>, f64)> = Vec::new();
    let mut lower: HashMap<usize, f64> = HashMap::new();
    let mut upper: HashMap<usize, f64> = HashMap::new();
    let mut ints: Vec<usize> = Vec::new();

    let flush_constraint = |pending: &mut Vec<String>, b: &mut Builder, rows: &mut Vec<(String, Vec<(usize, f64)>, f64)>| -> Result<()> {
        if pending.is_empty() {
            return Ok(());
        }
        let toks: Vec<&str> = pending.iter().map(|s| s.as_str()).collect();
        let (name, body) = if toks.len() > 1 && toks[1] == ":" {
            (toks[0].to_string(), &toks[2..])
        } else {
            (format!("r{}", rows.len()), &toks[..])
        };
        let op = body
            .iter()
            .position(|t| matches!(*t, "<=" | "=<" | ">=" | "=>" | "=" | "<" | ">"))
            .ok_or_else(|| Error::Parse(format!("constraint {name} has no relation")))?;
        let lhs = b.expr(&body[..op])?;
        let rhs_toks = &body[op + 1..];
        let rhs = match rhs_toks {
            [v] => parse_num(v)?,
            ["-", v] => -parse_num(v)?,
            ["+", v] => parse_num(v)?,
            _ => return Err(Error::Parse(format!("constraint {name}: bad right-hand side"))),
        };
        match body[op] {
            "<=" | "=<" | "<" => rows.push((name, lhs, rhs)),
            ">=" | "=>" | ">" => rows.push((name, lhs.iter().map(|&(j, c)| (j, -c)).collect(), -rhs)),
            _ => {
                rows.push((format!("{name}_le"), lhs.clone(), rhs));
                rows.push((format!("{name}_ge"), lhs.iter().map(|&(j, c)| (j, -c)).collect(), -rhs));
            }
        }
        pending.clear();
        Ok(())
    };

    for raw in text.lines() {
        let line = raw.split('\\').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let lower_line = line.to_ascii_lowercase();
        let next = match lower_line.as_str() {
            "minimize" | "minimum" | "min" => Some((Section::Objective, false)),
            "maximize" | "maximum" | "max" => Some((Section::Objective, true)),
            "subject to" | "such that" | "st" | "s.t." => Some((Section::Constraints, maximize)),
            "bounds" | "bound" => Some((Section::Bounds, maximize)),
            "general" | "generals" | "gen" | "integer" | "integers" => Some((Section::Integer, maximize)),
            "end" => Some((Section::None, maximize)),
            _ => None,
        };
        if let Some((s, mx)) = next {
            if section == Section::Constraints {
                flush_constraint(&mut pending, &mut b, &mut rows)?;
            }
            if s == Section::Objective {
                maximize = mx;
            }
            section = s;
            continue;
        }
        let toks = tokens(line);
        match section {
            Section::None => return Err(Error::Parse(format!("text outside any section: {line}"))),
            Section::Objective => {
                let t: Vec<&str> = toks.iter().map(|s| s.as_str()).collect();
                let body = if t.len() > 1 && t[1] == ":" { &t[2..] } else { &t[..] };
                obj.extend(b.expr(body)?);
            }
            Section::Constraints => {
                // a new statement starts with "name :" or after a completed relation
                let starts_named = toks.len() > 1 && toks[1] == ":";
                let has_rel = pending.iter().any(|t| matches!(t.as_str(), "<=" | "=<" | ">=" | "=>" | "=" | "<" | ">"));
                if starts_named || (has_rel && !pending.is_empty() && pending.last().map(|s| is_num(s)).unwrap_or(false)) {
                    flush_constraint(&mut pending, &mut b, &mut rows)?;
                }
                pending.extend(toks);
            }
            Section::Bounds => {
                let t: Vec<&str> = toks.iter().map(|s| s.as_str()).collect();
                match t.as_slice() {
                    [v, f] if f.eq_ignore_ascii_case("free") => {
                        let j = b.var(v);
                        lower.insert(j, f64::NEG_INFINITY);
                    }
                    [lo, "<=", v, "<=", hi] => {
                        let j = b.var(v);
                        lower.insert(j, parse_num(lo)?);
                        upper.insert(j, parse_num(hi)?);
                    }
                    [v, ">=", lo] | [lo, "<=", v] if !is_num(v) => {
                        let j = b.var(v);
                        lower.insert(j, parse_num(lo)?);
                    }
                    [v, "<=", hi] | [hi, ">=", v] if !is_num(v) => {
                        let j = b.var(v);
                        upper.insert(j, parse_num(hi)?);
                    }
                    [v, "=", x] => {
                        let j = b.var(v);
                        lower.insert(j, parse_num(x)?);
                        upper.insert(j, parse_num(x)?);
                    }
                    _ => return Err(Error::Parse(format!("bad bound line: {line}"))),
                }
            }
            Section::Integer => {
                for t in toks {
                    ints.push(b.var(&t));
                }
            }
        }
    }
    if section == Section::Constraints {
        flush_constraint(&mut pending, &mut b, &mut rows)?;
    }

    let n = b.names.len();
    let mut objective = vec![0.0; n];
    for (j, c) in obj {
        objective[j] += if maximize { -c } else { c };
    }
    let dense = |terms: &[(usize, f64)]| {
        let mut v = vec![0.0; n];
        for &(j, c) in terms {
            v[j] += c;
        }
        v
    };
    let mut out_rows: Vec<Row> = rows.iter().map(|(name, t, rhs)| Row { name: name.clone(), coeffs: dense(t), rhs: *rhs }).collect();
    let mut free = vec![false; n];
    for j in 0..n {
        let lo = lower.get(&j).copied().unwrap_or(0.0);
        if lo == f64::NEG_INFINITY {
            free[j] = true;
        } else if lo != 0.0 {
            free[j] = true;
            let mut c = vec![0.0; n];
            c[j] = -1.0;
            out_rows.push(Row { name: format!("{}_lb", b.names[j]), coeffs: c, rhs: -lo });
        }
        if let Some(&hi) = upper.get(&j) {
            if hi.is_finite() {
                let mut c = vec![0.0; n];
                c[j] = 1.0;
                out_rows.push(Row { name: format!("{}_ub", b.names[j]), coeffs: c, rhs: hi });
            }
        }
    }
    let mut integer = vec![false; n];
    for j in ints {
        integer[j] = true;
    }
    Ok(LinearProgram { names: b.names, objective, rows: out_rows, free, integer })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_common_forms() {
        let p = parse_lp(
            "\\ comment\nMaximize\n obj: 3x + 5 y\nSubject To\n c1: x <= 4\n c2: 2 y <= 12\n c3: 3 x + 2 y\n   <= 18\nBounds\n y >= 0\nEnd\n",
        )
        .unwrap();
        assert_eq!(p.names, vec!["x", "y"]);
        assert_eq!(p.objective, vec![-3.0, -5.0]);
        assert_eq!(p.rows.len(), 3);
        assert_eq!(p.rows[2].coeffs, vec![3.0, 2.0]);
        let r = p.solve(10);
        assert_eq!(r.bound.unwrap(), super::super::simplex::q_of(-36.0));
    }

    #[test]
    fn exponents_and_signs() {
        let p = parse_lp("Minimize\n obj: - 1e-3 x\nSubject To\n c: x - 2.5e+1 y >= -inf\nEnd\n");
        assert!(p.is_ok());
        let p = p.unwrap();
        assert_eq!(p.objective[0], -1e-3);
        assert_eq!(p.rows[0].coeffs, vec![-1.0, 25.0]);
    }
}
