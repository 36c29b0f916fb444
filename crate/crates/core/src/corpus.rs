//! The line-oriented formula corpus.
//!
//! ```text
//! # comment
//! item 15
//! member 15.1 :: fact(3*n)/fact(n)^3*sum(k=0..n, binom(n,k)^3)
//! ghost 26.9 zero-expected :: binom(2*n,n)*sum(k=0..n, (n-2*k)*binom(n,k)^6)
//! ct 16.ct :: (x + y + z + t + 1/x + 1/y + 1/z + 1/t) ^ 2n
//! closed cc flags:skip_singular :: lhs == rhs when n % 2 == 0 else 0
//! rec r15 :: T^2 - z*(...) ; seq = harmonic(1,5) ; twist = auto
//! ```
//!
//! Header options sit between the label and `::`: `flags:typo-suspect|skip_singular`,
//! `nmin=N`, `nmax=N`, `family:k=1,2,3`, and for ghosts the kind
//! (`zero-expected`, `divergent` or `reported`). A `family` record is expanded
//! into one record per value with the variable substituted.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use thiserror::Error;

use crate::dsl::{self, Expr, Name};
use crate::laurent::{parse_laurent, CtSpec};
use crate::theta::{parse_theta, ThetaOperator, Twist, TwistMode};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Flags {
    pub typo_suspect: bool,
    pub skip_singular: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GhostKind {
    /// Expected to vanish identically.
    ZeroExpected,
    /// Not a finite sum; never evaluated.
    Divergent,
    /// Finite, with no claimed value; evaluated and reported only.
    Reported,
}

impl fmt::Display for GhostKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GhostKind::ZeroExpected => "zero-expected",
            GhostKind::Divergent => "divergent",
            GhostKind::Reported => "reported",
        })
    }
}

/// `when n % modulus == residue else otherwise`.
#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub modulus: i64,
    pub residue: i64,
    pub otherwise: Expr,
}

impl Condition {
    pub fn holds(&self, n: i64) -> bool {
        n.rem_euclid(self.modulus) == self.residue
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RecordKind {
    Member(Expr),
    Ghost {
        kind: GhostKind,
        expr: Option<Expr>,
    },
    Ct(CtSpec),
    Closed {
        lhs: Expr,
        rhs: Expr,
        condition: Option<Condition>,
    },
    Rec {
        operator: ThetaOperator,
        b: i64,
        c: i64,
        twist: TwistMode,
    },
}

impl RecordKind {
    /// Short name used for filtering and reports.
    pub fn tag(&self) -> &'static str {
        match self {
            RecordKind::Member(_) => "member",
            RecordKind::Ghost { .. } => "ghost",
            RecordKind::Ct(_) => "ct",
            RecordKind::Closed {
                condition: Some(_), ..
            } => "conditional",
            RecordKind::Closed { .. } => "closed",
            RecordKind::Rec { .. } => "rec",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FormulaRecord {
    pub label: String,
    /// 1-based line in the corpus file.
    pub line: usize,
    pub kind: RecordKind,
    pub flags: Flags,
    pub n_min: Option<i64>,
    pub n_max: Option<i64>,
    /// Family parameter substituted into this instance.
    pub instance: Option<(Name, i64)>,
    /// Label of an earlier record in the same group with identical text.
    pub duplicate_of: Option<String>,
    /// Text after `::`.
    pub source: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityGroup {
    pub item_id: String,
    pub line: usize,
    pub records: Vec<FormulaRecord>,
}

impl IdentityGroup {
    /// Members taking part in the equality claim.
    pub fn members(&self) -> impl Iterator<Item = (&FormulaRecord, &Expr)> {
        self.records.iter().filter_map(|r| match &r.kind {
            RecordKind::Member(e) => Some((r, e)),
            _ => None,
        })
    }

    pub fn ct_specs(&self) -> impl Iterator<Item = (&FormulaRecord, &CtSpec)> {
        self.records.iter().filter_map(|r| match &r.kind {
            RecordKind::Ct(s) => Some((r, s)),
            _ => None,
        })
    }
}

/// Record counts by kind tag.
pub fn inventory(groups: &[IdentityGroup]) -> Vec<(&'static str, usize)> {
    let tags = ["member", "ghost", "ct", "closed", "conditional", "rec"];
    tags.iter()
        .map(|t| {
            let c = groups
                .iter()
                .flat_map(|g| &g.records)
                .filter(|r| r.kind.tag() == *t)
                .count();
            (*t, c)
        })
        .collect()
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<IdentityGroup>, CorpusError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_corpus(&text)
}

pub fn parse_corpus(text: &str) -> Result<Vec<IdentityGroup>, CorpusError> {
    let mut groups: Vec<IdentityGroup> = Vec::new();
    let mut seen: HashMap<(usize, String), String> = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let err = |message: String| CorpusError::Malformed { line, message };
        let (keyword, rest) = match trimmed.split_once(char::is_whitespace) {
            Some((k, r)) => (k, r.trim()),
            None => (trimmed, ""),
        };
        if keyword == "item" {
            if rest.is_empty() || rest.contains(char::is_whitespace) {
                return Err(err("item needs a single id".into()));
            }
            groups.push(IdentityGroup {
                item_id: rest.to_string(),
                line,
                records: Vec::new(),
            });
            continue;
        }
        if !matches!(keyword, "member" | "ghost" | "ct" | "closed" | "rec") {
            return Err(err(format!("unknown record kind {keyword:?}")));
        }
        let gi = groups
            .len()
            .checked_sub(1)
            .ok_or_else(|| err("record before any item line".into()))?;
        let (head, body) = rest
            .split_once("::")
            .ok_or_else(|| err("missing '::'".into()))?;
        let body = body.trim();
        let header = parse_header(head).map_err(err)?;
        let kind = parse_kind(keyword, &header, body).map_err(err)?;
        let key = (gi, body.to_string());
        let duplicate_of = seen.get(&key).cloned();
        seen.entry(key).or_insert_with(|| header.label.clone());
        let base = FormulaRecord {
            label: header.label.clone(),
            line,
            kind,
            flags: header.flags,
            n_min: header.n_min,
            n_max: header.n_max,
            instance: None,
            duplicate_of,
            source: body.to_string(),
        };
        let records = &mut groups[gi].records;
        match &header.family {
            None => records.push(base),
            Some((name, values)) => {
                for &v in values {
                    let mut r = base.clone();
                    r.label = format!("{}[{}={}]", base.label, name, v);
                    r.instance = Some((*name, v));
                    r.kind = substitute_kind(&base.kind, *name, v);
                    records.push(r);
                }
            }
        }
    }
    Ok(groups)
}

struct Header {
    label: String,
    flags: Flags,
    n_min: Option<i64>,
    n_max: Option<i64>,
    family: Option<(Name, Vec<i64>)>,
    ghost: Option<GhostKind>,
}

fn parse_header(head: &str) -> Result<Header, String> {
    // `flags: a | b` is accepted with or without spaces.
    let normalized = head
        .replace(": ", ":")
        .replace(" :", ":")
        .replace(" | ", "|")
        .replace("| ", "|")
        .replace(" |", "|");
    let mut words = normalized.split_whitespace();
    let label = words.next().ok_or("missing label")?.to_string();
    let mut h = Header {
        label,
        flags: Flags::default(),
        n_min: None,
        n_max: None,
        family: None,
        ghost: None,
    };
    for w in words {
        if let Some(list) = w.strip_prefix("flags:") {
            for f in list.split('|').filter(|f| !f.is_empty()) {
                match f {
                    "typo-suspect" => h.flags.typo_suspect = true,
                    "skip_singular" => h.flags.skip_singular = true,
                    other => return Err(format!("unknown flag {other:?}")),
                }
            }
        } else if let Some(v) = w.strip_prefix("nmax=") {
            h.n_max = Some(v.parse().map_err(|_| format!("bad nmax {v:?}"))?);
        } else if let Some(v) = w.strip_prefix("nmin=") {
            h.n_min = Some(v.parse().map_err(|_| format!("bad nmin {v:?}"))?);
        } else if let Some(spec) = w.strip_prefix("family:") {
            let (var, values) = spec.split_once('=').ok_or("family needs var=values")?;
            let mut chars = var.chars();
            let name = match (chars.next(), chars.next()) {
                (Some(c), None) => Name::new(c),
                _ => None,
            }
            .ok_or_else(|| format!("bad family variable {var:?}"))?;
            let values = values
                .split(',')
                .map(|v| {
                    v.parse::<i64>()
                        .map_err(|_| format!("bad family value {v:?}"))
                })
                .collect::<Result<Vec<_>, _>>()?;
            h.family = Some((name, values));
        } else {
            h.ghost = Some(match w {
                "zero-expected" => GhostKind::ZeroExpected,
                "divergent" => GhostKind::Divergent,
                "reported" => GhostKind::Reported,
                other => return Err(format!("unknown header option {other:?}")),
            });
        }
    }
    Ok(h)
}

fn parse_expr(text: &str) -> Result<Expr, String> {
    dsl::parse(text).map_err(|e| format!("{e} in {text:?}"))
}

fn parse_kind(keyword: &str, header: &Header, body: &str) -> Result<RecordKind, String> {
    if header.ghost.is_some() && keyword != "ghost" {
        return Err("ghost kind on a non-ghost record".into());
    }
    match keyword {
        "member" => Ok(RecordKind::Member(parse_expr(body)?)),
        "ghost" => {
            let kind = header
                .ghost
                .ok_or("ghost needs zero-expected, divergent or reported")?;
            let expr = match (kind, parse_expr(body)) {
                (_, Ok(e)) => Some(e),
                (GhostKind::Divergent, Err(_)) => None,
                (_, Err(e)) => return Err(e),
            };
            Ok(RecordKind::Ghost { kind, expr })
        }
        "ct" => {
            let (poly, power) = body.rsplit_once('^').ok_or("ct needs '^ <M>n'")?;
            let power = power.trim();
            let m = power
                .strip_suffix('n')
                .map(str::trim)
                .ok_or_else(|| format!("ct power {power:?} is not of the form <M>n"))?;
            let m: u32 = if m.is_empty() {
                1
            } else {
                m.parse().map_err(|_| format!("bad ct multiplier {m:?}"))?
            };
            let poly = parse_laurent(poly).map_err(|e| e.to_string())?;
            Ok(RecordKind::Ct(CtSpec::new(poly, m)))
        }
        "closed" => {
            let (main, condition) = match body.split_once(" when ") {
                Some((m, c)) => (m, Some(parse_condition(c)?)),
                None => (body, None),
            };
            let (lhs, rhs) = main.split_once("==").ok_or("closed form needs '=='")?;
            Ok(RecordKind::Closed {
                lhs: parse_expr(lhs.trim())?,
                rhs: parse_expr(rhs.trim())?,
                condition,
            })
        }
        "rec" => parse_rec(body),
        _ => unreachable!(),
    }
}

fn parse_condition(text: &str) -> Result<Condition, String> {
    // n % q == r else expr
    let (test, otherwise) = text.split_once(" else ").ok_or("condition needs 'else'")?;
    let test: String = test.chars().filter(|c| !c.is_whitespace()).collect();
    let rest = test
        .strip_prefix("n%")
        .ok_or("condition must start with 'n %'")?;
    let (q, r) = rest.split_once("==").ok_or("condition needs '=='")?;
    let modulus: i64 = q.parse().map_err(|_| format!("bad modulus {q:?}"))?;
    let residue: i64 = r.parse().map_err(|_| format!("bad residue {r:?}"))?;
    if modulus <= 0 || !(0..modulus).contains(&residue) {
        return Err(format!("bad condition n % {modulus} == {residue}"));
    }
    Ok(Condition {
        modulus,
        residue,
        otherwise: parse_expr(otherwise.trim())?,
    })
}

fn parse_rec(body: &str) -> Result<RecordKind, String> {
    let mut parts = body.split(';').map(str::trim);
    let op_text = parts.next().ok_or("empty rec")?;
    let operator = parse_theta(op_text).map_err(|e| e.to_string())?;
    let mut bc = None;
    let mut twist = TwistMode::Auto;
    for p in parts {
        let (key, value) = p
            .split_once('=')
            .ok_or_else(|| format!("bad rec field {p:?}"))?;
        let value = value.trim();
        match key.trim() {
            "seq" => {
                let args = value
                    .strip_prefix("harmonic(")
                    .and_then(|v| v.strip_suffix(')'))
                    .ok_or_else(|| format!("unsupported sequence {value:?}"))?;
                let (b, c) = args.split_once(',').ok_or("harmonic needs (b,c)")?;
                let b = b.trim().parse().map_err(|_| format!("bad b {b:?}"))?;
                let c = c.trim().parse().map_err(|_| format!("bad c {c:?}"))?;
                bc = Some((b, c));
            }
            "twist" => twist = parse_twist(value)?,
            other => return Err(format!("unknown rec field {other:?}")),
        }
    }
    let (b, c) = bc.ok_or("rec needs seq = harmonic(b,c)")?;
    Ok(RecordKind::Rec {
        operator,
        b,
        c,
        twist,
    })
}

/// `auto`, `none` or `alternating`.
pub fn parse_twist(text: &str) -> Result<TwistMode, String> {
    match text {
        "auto" => Ok(TwistMode::Auto),
        "none" | "plain" => Ok(TwistMode::Fixed(Twist::Plain)),
        "alternating" | "alt" => Ok(TwistMode::Fixed(Twist::Alternating)),
        other => Err(format!("unknown twist {other:?}")),
    }
}

fn substitute_kind(kind: &RecordKind, name: Name, v: i64) -> RecordKind {
    let val = Expr::int(v);
    let s = |e: &Expr| e.substitute(name, &val);
    match kind {
        RecordKind::Member(e) => RecordKind::Member(s(e)),
        RecordKind::Ghost { kind, expr } => RecordKind::Ghost {
            kind: *kind,
            expr: expr.as_ref().map(s),
        },
        RecordKind::Closed {
            lhs,
            rhs,
            condition,
        } => RecordKind::Closed {
            lhs: s(lhs),
            rhs: s(rhs),
            condition: condition.as_ref().map(|c| Condition {
                otherwise: s(&c.otherwise),
                ..c.clone()
            }),
        },
        other => other.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_no_groups() {
        assert!(parse_corpus("").unwrap().is_empty());
        assert!(parse_corpus("# only a comment\n\n").unwrap().is_empty());
    }

    #[test]
    fn unknown_kind_is_an_error_with_line() {
        let err = parse_corpus("item 1\nmember a :: n\nlemma b :: n\n").unwrap_err();
        match err {
            CorpusError::Malformed { line, message } => {
                assert_eq!(line, 3);
                assert!(message.contains("lemma"));
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn record_before_item_is_rejected() {
        assert!(parse_corpus("member a :: n\n").is_err());
    }

    #[test]
    fn all_kinds_parse() {
        let text = "\
item 7
member 7.1 :: binom(2*n, n)
member 7.2 flags:typo-suspect nmax=5 :: sum(k=0..n, binom(n,k)^2)
ghost 7.3 zero-expected flags:skip_singular :: sum(k=0..n, (n-2*k)*binom(n,k))
ghost 7.4 divergent :: sum over all k of something
ct 7.ct :: x + 1/x ^ 2n
closed 7.c :: sum(k=0..n, binom(n,k)) == 2^(n)
closed 7.d :: idiv(n,2) == idiv(n,2) when n % 2 == 0 else idiv(n,2)
rec 7.r :: T^2 - 4*z*(2*T+1)^2 ; seq = harmonic(1,5) ; twist = alternating
";
        let groups = parse_corpus(text).unwrap();
        assert_eq!(groups.len(), 1);
        let g = &groups[0];
        assert_eq!(g.item_id, "7");
        let tags: Vec<_> = g.records.iter().map(|r| r.kind.tag()).collect();
        assert_eq!(
            tags,
            [
                "member",
                "member",
                "ghost",
                "ghost",
                "ct",
                "closed",
                "conditional",
                "rec"
            ]
        );
        assert!(g.records[1].flags.typo_suspect);
        assert_eq!(g.records[1].n_max, Some(5));
        assert!(g.records[2].flags.skip_singular);
        assert!(matches!(
            g.records[3].kind,
            RecordKind::Ghost {
                kind: GhostKind::Divergent,
                expr: None
            }
        ));
        match &g.records[4].kind {
            RecordKind::Ct(spec) => {
                assert_eq!(spec.multiplier, 2);
                assert_eq!(spec.poly.len(), 2);
            }
            other => panic!("{other:?}"),
        }
        match &g.records[6].kind {
            RecordKind::Closed {
                condition: Some(c), ..
            } => {
                assert!(c.holds(4) && !c.holds(3));
            }
            other => panic!("{other:?}"),
        }
        match &g.records[7].kind {
            RecordKind::Rec { b, c, twist, .. } => {
                assert_eq!((*b, *c), (1, 5));
                assert_eq!(*twist, TwistMode::Fixed(Twist::Alternating));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn families_expand_per_value() {
        let text = "item f\nclosed f.1 family:k=0,1,2 :: binom(n,n)^(k) == 1\n";
        let g = &parse_corpus(text).unwrap()[0];
        let labels: Vec<_> = g.records.iter().map(|r| r.label.as_str()).collect();
        assert_eq!(labels, ["f.1[k=0]", "f.1[k=1]", "f.1[k=2]"]);
        match &g.records[2].kind {
            RecordKind::Closed { lhs, .. } => assert_eq!(lhs.to_string(), "binom(n, n)^2"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicates_are_kept_and_marked() {
        let text = "item d\nmember d.1 :: binom(2*n,n)\nmember d.2 :: binom(2*n,n)\n";
        let g = &parse_corpus(text).unwrap()[0];
        assert_eq!(g.records.len(), 2);
        assert_eq!(g.records[0].duplicate_of, None);
        assert_eq!(g.records[1].duplicate_of.as_deref(), Some("d.1"));
    }

    #[test]
    fn malformed_records_report_their_line() {
        for bad in [
            "item a\nmember x binom(n,n)\n",
            "item a\nmember x :: binom(n\n",
            "item a\nclosed x :: n\n",
            "item a\nghost x :: n\n",
            "item a\nct x :: x + 1/x ^ 2\n",
            "item a\nmember x flags:bogus :: n\n",
            "item a\nclosed x :: n == n when n % 2 == 5 else 0\n",
        ] {
            match parse_corpus(bad) {
                Err(CorpusError::Malformed { line: 2, .. }) => {}
                other => panic!("{bad:?}: {other:?}"),
            }
        }
    }
}
