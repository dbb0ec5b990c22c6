//! Line-oriented `.hamspec` format for spin Hamiltonians.
//!
//! ```text
//! # comment
//! spins: 1/2, 1
//! term: 1*t : sz@0
//! term: 0.2 : sz@1^2
//! term: 0.5 - 0.25*t^2 : sx@0 sz@1
//! ```
//!
//! Operators are spin operators `S` (not Pauli matrices); for a spin-1/2,
//! `σ = 2S`. Site indices are zero-based. Factors on different sites commute,
//! so the parser orders them by site (keeping the written order within a
//! site) and merges repeats into exponents.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::hamiltonian::{check_parity_symmetry, Hamiltonian, HamiltonianTerm, SpinFactor, TimePolynomial};
use crate::spin::{Axis, Spin, SpinSystem};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    MissingHeader,
    DuplicateHeader,
    InvalidSpin(String),
    UnknownDirective(String),
    UnknownAxis(String),
    BadSite(String),
    SiteOutOfRange { site: usize, sites: usize },
    BadExponent(String),
    MalformedNumber(String),
    MalformedPolynomial(String),
    EmptyTerm,
    NoFactors,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::MissingHeader => write!(f, "missing `spins:` header before first term"),
            ParseErrorKind::DuplicateHeader => write!(f, "duplicate `spins:` header"),
            ParseErrorKind::InvalidSpin(s) => write!(f, "invalid spin `{s}` (expected 1/2, 1, 3/2, …)"),
            ParseErrorKind::UnknownDirective(s) => write!(f, "unknown directive `{s}` (expected `spins:` or `term:`)"),
            ParseErrorKind::UnknownAxis(s) => write!(f, "unknown spin operator `{s}` (expected sx, sy or sz)"),
            ParseErrorKind::BadSite(s) => write!(f, "bad site index `{s}`"),
            ParseErrorKind::SiteOutOfRange { site, sites } => {
                write!(f, "site {site} out of range for {sites} spins")
            }
            ParseErrorKind::BadExponent(s) => write!(f, "bad exponent `{s}` (expected a positive integer)"),
            ParseErrorKind::MalformedNumber(s) => write!(f, "malformed number `{s}`"),
            ParseErrorKind::MalformedPolynomial(s) => write!(f, "malformed polynomial: {s}"),
            ParseErrorKind::EmptyTerm => write!(f, "empty term"),
            ParseErrorKind::NoFactors => write!(f, "term has no spin factors"),
        }
    }
}

/// Parse failure with 1-based line and column.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)
    }
}

#[derive(Debug, Clone)]
pub struct HamSpecDocument {
    pub source: String,
    pub system: SpinSystem,
    pub terms: Vec<HamiltonianTerm>,
    /// Source line of each entry in `terms`.
    pub term_lines: Vec<usize>,
    pub warnings: Vec<Diagnostic>,
}

/// Structural equality: same spins and same canonical terms.
impl PartialEq for HamSpecDocument {
    fn eq(&self, other: &Self) -> bool {
        self.system == other.system && self.terms == other.terms
    }
}

impl HamSpecDocument {
    pub fn new(system: SpinSystem, terms: Vec<HamiltonianTerm>) -> Self {
        let terms: Vec<HamiltonianTerm> = terms
            .into_iter()
            .filter(|t| !t.coeff.is_zero())
            .map(|t| HamiltonianTerm::new(t.coeff, canonical_factors(t.factors)))
            .collect();
        let term_lines = vec![0; terms.len()];
        HamSpecDocument { source: String::new(), system, terms, term_lines, warnings: Vec::new() }
    }

    pub fn hamiltonian(&self) -> crate::Result<Hamiltonian> {
        Hamiltonian::new(self.system.clone(), self.terms.clone())
    }

    /// Named diagnostics for terms that break the parity rule (odd operator
    /// order needs an odd coefficient, even order an even one).
    pub fn symmetry_diagnostics(&self) -> Vec<Diagnostic> {
        let Ok(h) = self.hamiltonian() else { return Vec::new() };
        check_parity_symmetry(&h)
            .failures()
            .map(|f| Diagnostic {
                line: self.term_lines[f.index],
                column: 1,
                message: format!(
                    "time-reversal parity violated: operator order {} with {} coefficient",
                    f.order, f.parity
                ),
            })
            .collect()
    }
}

fn canonical_factors(mut factors: Vec<SpinFactor>) -> Vec<SpinFactor> {
    factors.sort_by_key(|f| f.site);
    let mut merged: Vec<SpinFactor> = Vec::with_capacity(factors.len());
    for f in factors {
        match merged.last_mut() {
            Some(last) if last.site == f.site && last.axis == f.axis => last.exponent += f.exponent,
            _ => merged.push(f),
        }
    }
    merged
}

fn err(line: usize, column: usize, kind: ParseErrorKind) -> ParseError {
    ParseError { line, column, kind }
}

pub fn parse(text: &str) -> Result<HamSpecDocument, ParseError> {
    parse_named("<input>", text)
}

pub fn parse_named(source: &str, text: &str) -> Result<HamSpecDocument, ParseError> {
    let mut system: Option<SpinSystem> = None;
    let mut terms = Vec::new();
    let mut term_lines = Vec::new();
    let mut warnings = Vec::new();

    for (k, raw) in text.split('\n').enumerate() {
        let line_no = k + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        let content = match line.find('#') {
            Some(i) => &line[..i],
            None => line,
        };
        if content.trim().is_empty() {
            continue;
        }
        let indent = content.len() - content.trim_start().len();
        let body = content.trim_start();
        let Some(colon) = body.find(':') else {
            return Err(err(line_no, indent + 1, ParseErrorKind::UnknownDirective(body.trim_end().to_string())));
        };
        let directive = body[..colon].trim();
        let rest_offset = indent + colon + 1;
        let rest = &body[colon + 1..];
        match directive {
            "spins" => {
                if system.is_some() {
                    return Err(err(line_no, indent + 1, ParseErrorKind::DuplicateHeader));
                }
                system = Some(parse_spins(rest, line_no, rest_offset)?);
            }
            "term" => {
                let Some(sys) = system.as_ref() else {
                    return Err(err(line_no, indent + 1, ParseErrorKind::MissingHeader));
                };
                let term = parse_term(rest, sys, line_no, rest_offset)?;
                if term.coeff.is_zero() {
                    warnings.push(Diagnostic {
                        line: line_no,
                        column: indent + 1,
                        message: "term with zero coefficient dropped".into(),
                    });
                    continue;
                }
                terms.push(term);
                term_lines.push(line_no);
            }
            other => {
                return Err(err(line_no, indent + 1, ParseErrorKind::UnknownDirective(other.to_string())));
            }
        }
    }

    let system = system.ok_or_else(|| err(1, 1, ParseErrorKind::MissingHeader))?;
    Ok(HamSpecDocument { source: source.to_string(), system, terms, term_lines, warnings })
}

/// Splits `text` on `sep`, yielding each piece with its 0-based byte offset.
fn pieces(text: &str, sep: char) -> impl Iterator<Item = (usize, &str)> {
    let mut offset = 0;
    text.split(sep).map(move |p| {
        let start = offset;
        offset += p.len() + sep.len_utf8();
        (start, p)
    })
}

fn trimmed(offset: usize, piece: &str) -> (usize, &str) {
    let lead = piece.len() - piece.trim_start().len();
    (offset + lead, piece.trim())
}

fn parse_spins(text: &str, line: usize, base: usize) -> Result<SpinSystem, ParseError> {
    let mut spins = Vec::new();
    for (off, piece) in pieces(text, ',') {
        let (off, item) = trimmed(off, piece);
        let col = base + off + 1;
        let bad = || err(line, col, ParseErrorKind::InvalidSpin(item.to_string()));
        let spin = match item.split_once('/') {
            Some((num, "2")) => {
                let twice: u32 = num.trim().parse().map_err(|_| bad())?;
                if twice.is_multiple_of(2) {
                    return Err(bad());
                }
                Spin::from_twice(twice)
            }
            Some(_) => return Err(bad()),
            None => {
                let whole: u32 = item.parse().map_err(|_| bad())?;
                Spin::from_twice(2 * whole)
            }
        };
        spins.push(spin);
    }
    Ok(SpinSystem::new(spins))
}

fn parse_term(text: &str, sys: &SpinSystem, line: usize, base: usize) -> Result<HamiltonianTerm, ParseError> {
    let Some(sep) = text.find(':') else {
        let (off, rest) = trimmed(0, text);
        let kind = if rest.is_empty() { ParseErrorKind::EmptyTerm } else { ParseErrorKind::NoFactors };
        return Err(err(line, base + off + 1, kind));
    };
    let (poly_off, poly_text) = trimmed(0, &text[..sep]);
    if poly_text.is_empty() {
        return Err(err(line, base + poly_off + 1, ParseErrorKind::EmptyTerm));
    }
    let coeff = parse_polynomial(poly_text, line, base + poly_off)?;

    let factor_text = &text[sep + 1..];
    let mut factors = Vec::new();
    let mut offset = 0;
    for word in factor_text.split_whitespace() {
        let pos = factor_text[offset..].find(word).expect("word comes from the same string") + offset;
        offset = pos + word.len();
        factors.push(parse_factor(word, sys, line, base + sep + 1 + pos)?);
    }
    if factors.is_empty() {
        return Err(err(line, base + sep + 2, ParseErrorKind::NoFactors));
    }
    Ok(HamiltonianTerm::new(coeff, canonical_factors(factors)))
}

fn parse_factor(word: &str, sys: &SpinSystem, line: usize, base: usize) -> Result<SpinFactor, ParseError> {
    let col = base + 1;
    let (op, rest) = word.split_once('@').ok_or_else(|| err(line, col, ParseErrorKind::UnknownAxis(word.into())))?;
    let axis = match op {
        "sx" => Axis::X,
        "sy" => Axis::Y,
        "sz" => Axis::Z,
        _ => return Err(err(line, col, ParseErrorKind::UnknownAxis(op.into()))),
    };
    let site_col = col + op.len() + 1;
    let (site_text, exponent) = match rest.split_once('^') {
        Some((s, e)) => {
            let exp_col = site_col + s.len() + 1;
            let exponent: u32 = e.parse().map_err(|_| err(line, exp_col, ParseErrorKind::BadExponent(e.into())))?;
            if exponent == 0 {
                return Err(err(line, exp_col, ParseErrorKind::BadExponent(e.into())));
            }
            (s, exponent)
        }
        None => (rest, 1),
    };
    let site: usize =
        site_text.parse().map_err(|_| err(line, site_col, ParseErrorKind::BadSite(site_text.into())))?;
    if site >= sys.sites() {
        return Err(err(line, site_col, ParseErrorKind::SiteOutOfRange { site, sites: sys.sites() }));
    }
    Ok(SpinFactor::pow(site, axis, exponent))
}

/// `c0 + c1*t - c2*t^2 …`, with an optional unary sign per monomial.
fn parse_polynomial(text: &str, line: usize, base: usize) -> Result<TimePolynomial, ParseError> {
    let bytes = text.as_bytes();
    let mut monomials = Vec::new();
    let mut i = 0;
    let mut first = true;
    let skip_ws = |i: &mut usize| {
        while *i < bytes.len() && bytes[*i].is_ascii_whitespace() {
            *i += 1;
        }
    };
    let malformed = |at: usize, what: &str| err(line, base + at + 1, ParseErrorKind::MalformedPolynomial(what.into()));

    loop {
        skip_ws(&mut i);
        let mut sign = 1.0;
        if !first {
            match bytes.get(i) {
                Some(b'+') => i += 1,
                Some(b'-') => {
                    sign = -1.0;
                    i += 1
                }
                Some(_) => return Err(malformed(i, "expected `+` or `-` between monomials")),
                None => break,
            }
            skip_ws(&mut i);
        }
        if let Some(&b) = bytes.get(i) {
            if b == b'+' || b == b'-' {
                if b == b'-' {
                    sign = -sign;
                }
                i += 1;
                skip_ws(&mut i);
            }
        }
        let start = i;
        if i >= bytes.len() {
            return Err(malformed(i, "missing monomial"));
        }

        let (coeff, power);
        if bytes[i] == b't' {
            coeff = 1.0;
            i += 1;
            power = parse_power(bytes, &mut i, line, base)?;
        } else {
            // Number: digits, '.', and an exponent part whose sign is not an operator.
            let num_start = i;
            while i < bytes.len() {
                let b = bytes[i];
                let exp_sign = (b == b'+' || b == b'-') && i > num_start && matches!(bytes[i - 1], b'e' | b'E');
                if b.is_ascii_digit() || b == b'.' || b == b'e' || b == b'E' || exp_sign {
                    i += 1;
                } else {
                    break;
                }
            }
            let num = &text[num_start..i];
            if num.is_empty() {
                let end = text[i..].find(|ch: char| ch.is_whitespace() || ch == '+' || ch == '*').map_or(text.len(), |k| i + k);
                let word = if end > i { &text[i..end] } else { &text[i..] };
                return Err(err(line, base + i + 1, ParseErrorKind::MalformedNumber(word.into())));
            }
            coeff = num
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| err(line, base + num_start + 1, ParseErrorKind::MalformedNumber(num.into())))?;
            skip_ws(&mut i);
            if bytes.get(i) == Some(&b'*') {
                i += 1;
                skip_ws(&mut i);
                if bytes.get(i) != Some(&b't') {
                    return Err(malformed(i, "expected `t` after `*`"));
                }
                i += 1;
                power = parse_power(bytes, &mut i, line, base)?;
            } else {
                power = 0;
            }
        }
        // A monomial must end at whitespace, an operator, or the end.
        if let Some(&b) = bytes.get(i) {
            if !(b.is_ascii_whitespace() || b == b'+' || b == b'-') {
                let end = text[i..].find(char::is_whitespace).map_or(text.len(), |k| i + k);
                return Err(err(line, base + start + 1, ParseErrorKind::MalformedNumber(text[start..end].into())));
            }
        }
        monomials.push((power, sign * coeff));
        first = false;
    }
    Ok(TimePolynomial::new(monomials))
}

fn parse_power(bytes: &[u8], i: &mut usize, line: usize, base: usize) -> Result<u32, ParseError> {
    if bytes.get(*i) != Some(&b'^') {
        return Ok(1);
    }
    *i += 1;
    let start = *i;
    while *i < bytes.len() && bytes[*i].is_ascii_digit() {
        *i += 1;
    }
    let digits = std::str::from_utf8(&bytes[start..*i]).expect("ascii digits");
    digits.parse().map_err(|_| err(line, base + start + 1, ParseErrorKind::BadExponent(digits.into())))
}

fn format_polynomial(p: &TimePolynomial) -> String {
    let mut out = String::new();
    for (k, &(power, coeff)) in p.monomials().iter().enumerate() {
        let magnitude = if k == 0 { coeff } else { coeff.abs() };
        if k > 0 {
            out.push_str(if coeff < 0.0 { " - " } else { " + " });
        }
        out.push_str(&format!("{magnitude:?}"));
        match power {
            0 => {}
            1 => out.push_str("*t"),
            p => out.push_str(&format!("*t^{p}")),
        }
    }
    out
}

/// Canonical text: header, then one `term:` line per term with monomials in
/// ascending power and exponents of 1 omitted.
pub fn serialize(doc: &HamSpecDocument) -> String {
    let spins: Vec<String> = doc.system.spins().iter().map(|s| s.to_string()).collect();
    let mut out = format!("spins: {}\n", spins.join(", "));
    for term in &doc.terms {
        if term.coeff.is_zero() {
            continue;
        }
        let factors: Vec<String> = canonical_factors(term.factors.clone())
            .iter()
            .map(|f| {
                let base = format!("s{}@{}", f.axis.name(), f.site);
                if f.exponent == 1 {
                    base
                } else {
                    format!("{base}^{}", f.exponent)
                }
            })
            .collect();
        out.push_str(&format!("term: {} : {}\n", format_polynomial(&term.coeff), factors.join(" ")));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::Parity;

    fn kind(text: &str) -> (usize, usize, ParseErrorKind) {
        let e = parse(text).unwrap_err();
        (e.line, e.column, e.kind)
    }

    #[test]
    fn two_state_document() {
        let doc = parse("spins: 1/2\nterm: 1*t : sz@0\nterm: 1 : sx@0\n").unwrap();
        assert_eq!(doc.system.dim(), 2);
        assert_eq!(doc.terms.len(), 2);
        assert_eq!(doc.terms[0].coeff.monomials(), &[(1, 1.0)]);
        assert_eq!(doc.terms[1].factors, vec![SpinFactor::new(0, Axis::X)]);
        // A constant transverse field is odd under time reversal.
        let diags = doc.symmetry_diagnostics();
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].line, 3);
    }

    #[test]
    fn mixed_parity_yields_named_diagnostic() {
        let doc = parse("spins: 1/2\n\nterm: 1 + 1*t : sz@0\n").unwrap();
        assert_eq!(doc.terms[0].coeff.parity(), Parity::Mixed);
        let diags = doc.symmetry_diagnostics();
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].line, 3);
        assert!(diags[0].message.contains("mixed"));
    }

    #[test]
    fn quadrupole_term_with_exponent() {
        let doc = parse("spins: 1/2, 1\nterm: 0.2 : sz@1^2").unwrap();
        assert_eq!(doc.terms[0].factors, vec![SpinFactor::pow(1, Axis::Z, 2)]);
        assert_eq!(doc.terms[0].order(), 2);
    }

    #[test]
    fn polynomial_forms() {
        let doc = parse("spins: 1\nterm: -t + 2.5e-1*t^3 - -1 + 1e+2 + t : sz@0 # trailing\r\n").unwrap();
        assert_eq!(doc.terms[0].coeff.monomials(), &[(0, 101.0), (3, 0.25)]);
    }

    #[test]
    fn zero_terms_are_dropped_with_warning() {
        let doc = parse("spins: 1/2\nterm: 1*t - 1*t : sz@0\n").unwrap();
        assert!(doc.terms.is_empty());
        assert_eq!(doc.warnings.len(), 1);
        assert_eq!(doc.warnings[0].line, 2);
    }

    #[test]
    fn factors_on_distinct_sites_are_ordered_by_site() {
        let doc = parse("spins: 1/2, 1\nterm: 1 : sz@1 sx@0 sz@1\nterm: 1 : sx@1 sz@1\n").unwrap();
        assert_eq!(doc.terms[0].factors, vec![SpinFactor::new(0, Axis::X), SpinFactor::pow(1, Axis::Z, 2)]);
        // Same-site order is significant and kept.
        assert_eq!(doc.terms[1].factors, vec![SpinFactor::new(1, Axis::X), SpinFactor::new(1, Axis::Z)]);
    }

    #[test]
    fn error_positions() {
        assert_eq!(kind("spins: 1/2\nterm: 1 : sw@0"), (2, 11, ParseErrorKind::UnknownAxis("sw".into())));
        assert_eq!(kind("spins: 1/2\nterm: 1 : sz@3"), (2, 14, ParseErrorKind::SiteOutOfRange { site: 3, sites: 1 }));
        assert_eq!(kind("spins: 1/2\nterm: 1 : sz@x"), (2, 14, ParseErrorKind::BadSite("x".into())));
        assert_eq!(kind("spins: 1/2\nterm: 1.2.3 : sz@0"), (2, 7, ParseErrorKind::MalformedNumber("1.2.3".into())));
        assert_eq!(kind("spins: 1/2\nterm: abc : sz@0").2, ParseErrorKind::MalformedNumber("abc".into()));
        assert_eq!(kind("spins: 1/2\nterm:   : sz@0"), (2, 9, ParseErrorKind::EmptyTerm));
        assert_eq!(kind("spins: 1/2\nterm:"), (2, 6, ParseErrorKind::EmptyTerm));
        assert_eq!(kind("spins: 1/2\nterm: 1 :  ").2, ParseErrorKind::NoFactors);
        assert_eq!(kind("term: 1 : sz@0"), (1, 1, ParseErrorKind::MissingHeader));
        assert_eq!(kind("spins: 1/2\nspins: 1"), (2, 1, ParseErrorKind::DuplicateHeader));
        assert_eq!(kind("spins: 2/3").2, ParseErrorKind::InvalidSpin("2/3".into()));
        assert_eq!(kind("spins: 1/2, -1").1, 13);
        assert_eq!(kind("spins: 1/2\nterm: 1 : sz@0^0").2, ParseErrorKind::BadExponent("0".into()));
        assert_eq!(kind("spins: 1/2\nfoo: 1").2, ParseErrorKind::UnknownDirective("foo".into()));
        assert_eq!(kind("").2, ParseErrorKind::MissingHeader);
    }

    #[test]
    fn error_display_carries_position() {
        let e = parse("spins: 1/2\nterm: 1 : sq@0").unwrap_err();
        assert_eq!(e.to_string(), "2:11: unknown spin operator `sq` (expected sx, sy or sz)");
    }

    #[test]
    fn serialization_rules() {
        let doc = parse("spins: 1/2, 3/2\n").unwrap();
        assert_eq!(serialize(&doc), "spins: 1/2, 3/2\n");
        let doc = parse("spins: 1/2\nterm: 2*t^2 - 0.5 : sz@0^1 sz@0\n").unwrap();
        assert_eq!(serialize(&doc), "spins: 1/2\nterm: -0.5 + 2.0*t^2 : sz@0^2\n");
        assert_eq!(parse(&serialize(&doc)).unwrap(), doc);
    }
}
