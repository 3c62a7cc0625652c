//! Rule file format.
//!
//! One rule per line: the readable rule text, then tab-separated measures.
//!
//!   ?a p ?c & ?c q ?b => ?a s ?b  supp  bg  sc  hc  ec  q  new
//!
//! Variables are `?a`..`?f`; any other token is an entity or relation
//! name. `ec` is `NA` when the rule predicted nothing unobserved. Floats
//! use the shortest round-tripping representation, so a file reloads to
//! bit-identical metrics. Lines starting with `#` are comments.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{Atom, MinedRule, Rule, RuleMetrics, Term, var_name, MAX_VARS};
use crate::error::{Error, Result};
use crate::kg::{Dictionary, EntityId, RelationId};

pub fn write_rules(
    path: impl AsRef<Path>,
    rules: &[MinedRule],
    entities: &Dictionary,
    relations: &Dictionary,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(out, "# rule\tsupport\tbody_groundings\tsc\thc\tec\tquality\tnew_predictions")
        .map_err(io)?;
    for m in rules {
        let text = rule_text(&m.rule, entities, relations)?;
        let ec = match m.metrics.embedding_confidence {
            Some(e) => e.to_string(),
            None => "NA".to_string(),
        };
        writeln!(
            out,
            "{text}\t{}\t{}\t{}\t{}\t{ec}\t{}\t{}",
            m.metrics.support,
            m.metrics.body_groundings,
            m.metrics.standard_confidence,
            m.metrics.head_coverage,
            m.metrics.quality,
            m.metrics.num_new_predictions,
        )
        .map_err(io)?;
    }
    out.flush().map_err(io)
}

fn term_text(t: Term, entities: &Dictionary) -> Result<String> {
    Ok(match t {
        Term::Var(v) => format!("?{}", var_name(v)),
        Term::Const(e) => entities
            .name(e.0)
            .ok_or_else(|| Error::Config(format!("entity id {e} has no name")))?
            .to_string(),
    })
}

fn rule_text(rule: &Rule, entities: &Dictionary, relations: &Dictionary) -> Result<String> {
    let atom = |a: &Atom| -> Result<String> {
        let rel = relations
            .name(a.relation.0)
            .ok_or_else(|| Error::Config(format!("relation id {} has no name", a.relation)))?;
        let sub = term_text(a.subject, entities)?;
        let obj = term_text(a.object, entities)?;
        for name in [rel, sub.as_str(), obj.as_str()] {
            if name.chars().any(char::is_whitespace) {
                return Err(Error::Config(format!(
                    "name `{name}` contains whitespace and cannot appear in a rule file"
                )));
            }
        }
        Ok(format!("{sub} {rel} {obj}"))
    };
    let body: Result<Vec<String>> = rule.body().iter().map(atom).collect();
    Ok(format!("{} => {}", body?.join(" & "), atom(&rule.head())?))
}

pub fn read_rules(
    path: impl AsRef<Path>,
    entities: &Dictionary,
    relations: &Dictionary,
) -> Result<Vec<MinedRule>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        out.push(parse_line(line, entities, relations).map_err(|msg| {
            Error::parse(path, i + 1, msg)
        })?);
    }
    Ok(out)
}

fn parse_line(
    line: &str,
    entities: &Dictionary,
    relations: &Dictionary,
) -> std::result::Result<MinedRule, String> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 8 {
        return Err(format!("expected 8 tab-separated fields, found {}", fields.len()));
    }
    let (rule_text, cols) = (fields[0], &fields[1..]);

    let (body_text, head_text) = rule_text
        .split_once("=>")
        .ok_or_else(|| "rule text lacks `=>`".to_string())?;
    let mut vars: Vec<String> = Vec::new();
    let mut parse_atom = |text: &str| -> std::result::Result<Atom, String> {
        let tokens: Vec<&str> = text.split_whitespace().collect();
        let [s, r, o] = tokens.as_slice() else {
            return Err(format!("atom `{}` is not `subject relation object`", text.trim()));
        };
        let rel = relations
            .get(r)
            .ok_or_else(|| format!("unknown relation `{r}`"))?;
        let mut term = |tok: &str| -> std::result::Result<Term, String> {
            if let Some(name) = tok.strip_prefix('?') {
                let pos = vars.iter().position(|v| v == name).unwrap_or_else(|| {
                    vars.push(name.to_string());
                    vars.len() - 1
                });
                if pos >= MAX_VARS {
                    return Err(format!("more than {MAX_VARS} distinct variables"));
                }
                Ok(Term::Var(pos as u8))
            } else {
                let id = entities
                    .get(tok)
                    .ok_or_else(|| format!("unknown entity `{tok}`"))?;
                Ok(Term::Const(EntityId(id)))
            }
        };
        Ok(Atom::new(RelationId(rel), term(s)?, term(o)?))
    };

    let head = parse_atom(head_text)?;
    let mut body = Vec::new();
    for part in body_text.split('&') {
        if part.trim().is_empty() {
            return Err("empty body atom".to_string());
        }
        body.push(parse_atom(part)?);
    }
    if body.len() > 2 {
        return Err(format!("{} body atoms; at most 2 are supported", body.len()));
    }

    let supp: usize = cols[0].parse().map_err(|_| format!("bad support `{}`", cols[0]))?;
    let bg: usize = cols[1].parse().map_err(|_| format!("bad body_groundings `{}`", cols[1]))?;
    let sc: f64 = cols[2].parse().map_err(|_| format!("bad sc `{}`", cols[2]))?;
    let hc: f64 = cols[3].parse().map_err(|_| format!("bad hc `{}`", cols[3]))?;
    let ec: Option<f64> = match cols[4] {
        "NA" => None,
        v => Some(v.parse().map_err(|_| format!("bad ec `{v}`"))?),
    };
    let q: f64 = cols[5].parse().map_err(|_| format!("bad quality `{}`", cols[5]))?;
    let new: usize = cols[6].parse().map_err(|_| format!("bad new_predictions `{}`", cols[6]))?;

    Ok(MinedRule {
        rule: Rule::new(head, body),
        metrics: RuleMetrics {
            support: supp,
            body_groundings: bg,
            standard_confidence: sc,
            head_coverage: hc,
            embedding_confidence: ec,
            quality: q,
            num_new_predictions: new,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dicts() -> (Dictionary, Dictionary) {
        let mut ents = Dictionary::new();
        let mut rels = Dictionary::new();
        for e in ["alice", "bob", "carol"] {
            ents.intern(e);
        }
        for r in ["knows", "worksWith", "mentors"] {
            rels.intern(r);
        }
        (ents, rels)
    }

    fn sample() -> Vec<MinedRule> {
        let v = Term::Var;
        let chain = Rule::new(
            Atom::new(RelationId(2), v(0), v(1)),
            vec![
                Atom::new(RelationId(0), v(0), v(2)),
                Atom::new(RelationId(1), v(2), v(1)),
            ],
        );
        let inst = Rule::new(
            Atom::new(RelationId(0), v(0), v(1)),
            vec![
                Atom::new(RelationId(1), v(0), Term::Const(EntityId(2))),
                Atom::new(RelationId(0), v(1), v(0)),
            ],
        );
        vec![
            MinedRule {
                rule: chain,
                metrics: RuleMetrics {
                    support: 7,
                    body_groundings: 10,
                    standard_confidence: 0.7,
                    head_coverage: 0.35,
                    embedding_confidence: Some(0.612_345_678_9),
                    quality: 0.656_172_839_45,
                    num_new_predictions: 3,
                },
            },
            MinedRule {
                rule: inst,
                metrics: RuleMetrics {
                    support: 4,
                    body_groundings: 4,
                    standard_confidence: 1.0,
                    head_coverage: 0.2,
                    embedding_confidence: None,
                    quality: 1.0,
                    num_new_predictions: 0,
                },
            },
        ]
    }

    #[test]
    fn round_trip_preserves_rules_and_metrics() {
        let (ents, rels) = dicts();
        let rules = sample();
        let f = tempfile::NamedTempFile::new().unwrap();
        write_rules(f.path(), &rules, &ents, &rels).unwrap();
        let back = read_rules(f.path(), &ents, &rels).unwrap();
        assert_eq!(back.len(), rules.len());
        for (a, b) in rules.iter().zip(&back) {
            assert_eq!(a.rule, b.rule);
            assert_eq!(a.metrics, b.metrics);
        }
    }

    #[test]
    fn unknown_names_are_line_errors() {
        let (ents, rels) = dicts();
        let f = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(
            f.path(),
            "# header\n?a knows ?b => ?b ghosts ?a\t1\t1\t1\t1\tNA\t1\t0\n",
        )
        .unwrap();
        let err = read_rules(f.path(), &ents, &rels).unwrap_err();
        match err {
            Error::Parse { line, msg, .. } => {
                assert_eq!(line, 2);
                assert!(msg.contains("ghosts"));
            }
            other => panic!("unexpected error {other}"),
        }
    }
}
