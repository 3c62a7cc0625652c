//! Horn rules over knowledge-graph relations.
//!
//! A rule is one head atom implied by a conjunction of at most two body
//! atoms. Rules are kept in a canonical form: variables numbered by first
//! appearance in (head, body...) order, body atoms in the permutation with
//! the smallest flat encoding. Two alpha-equivalent rules therefore
//! compare equal, and the encoding doubles as a deterministic sort key.

mod grounding;
mod io;
mod mine;
mod refine;

pub use grounding::{
    body_groundings, embedding_confidence, head_groundings, infer_heads, support,
    HeadGroundings,
};
pub use io::{read_rules, write_rules};
pub use mine::{mine, MinedRule, MinerConfig};
pub use refine::{refine, RefineContext};

use std::fmt;

use crate::kg::{EntityId, RelationId};

/// Variables are dense small indices; constants are interned entities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(u8),
    Const(EntityId),
}

impl Term {
    #[inline]
    pub fn var(self) -> Option<u8> {
        match self {
            Term::Var(v) => Some(v),
            Term::Const(_) => None,
        }
    }

    fn encode(self) -> u64 {
        match self {
            Term::Var(v) => u64::from(v),
            Term::Const(e) => (1u64 << 32) + u64::from(e.0),
        }
    }
}

pub const MAX_VARS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Atom {
    pub relation: RelationId,
    pub subject: Term,
    pub object: Term,
}

impl Atom {
    pub fn new(relation: RelationId, subject: Term, object: Term) -> Self {
        Atom { relation, subject, object }
    }

    pub fn terms(&self) -> [Term; 2] {
        [self.subject, self.object]
    }

    fn map_vars(&self, f: impl Fn(u8) -> u8) -> Atom {
        let m = |t: Term| match t {
            Term::Var(v) => Term::Var(f(v)),
            c => c,
        };
        Atom { relation: self.relation, subject: m(self.subject), object: m(self.object) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Rule {
    head: Atom,
    body: Vec<Atom>,
}

impl Rule {
    /// Builds the canonical representative of the alpha-equivalence class.
    pub fn new(head: Atom, body: Vec<Atom>) -> Rule {
        let perms: &[&[usize]] = match body.len() {
            0 => &[&[]],
            1 => &[&[0]],
            2 => &[&[0, 1], &[1, 0]],
            n => panic!("rule bodies are limited to 2 atoms, got {n}"),
        };
        let mut best: Option<(Vec<u64>, Rule)> = None;
        for perm in perms {
            let ordered: Vec<Atom> = perm.iter().map(|&i| body[i]).collect();
            let candidate = renumber(head, ordered);
            let enc = candidate.encoding();
            if best.as_ref().map_or(true, |(b, _)| enc < *b) {
                best = Some((enc, candidate));
            }
        }
        best.unwrap().1
    }

    pub fn head(&self) -> Atom {
        self.head
    }

    pub fn body(&self) -> &[Atom] {
        &self.body
    }

    /// Total atom count, head included.
    pub fn len(&self) -> usize {
        1 + self.body.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn atoms(&self) -> impl Iterator<Item = &Atom> {
        std::iter::once(&self.head).chain(self.body.iter())
    }

    pub fn n_vars(&self) -> usize {
        self.atoms()
            .flat_map(|a| a.terms())
            .filter_map(Term::var)
            .map(|v| v as usize + 1)
            .max()
            .unwrap_or(0)
    }

    /// Flat sort key; alpha-equivalent rules share it.
    pub fn encoding(&self) -> Vec<u64> {
        let mut out = Vec::with_capacity(3 * self.len());
        for a in self.atoms() {
            out.push(u64::from(a.relation.0));
            out.push(a.subject.encode());
            out.push(a.object.encode());
        }
        out
    }

    /// Every variable occurs at least twice across head and body.
    pub fn is_closed(&self) -> bool {
        let mut counts = [0usize; MAX_VARS];
        for a in self.atoms() {
            for t in a.terms() {
                if let Term::Var(v) = t {
                    counts[v as usize] += 1;
                }
            }
        }
        counts[..self.n_vars()].iter().all(|&c| c >= 2)
    }

    /// Atoms form one component under the shares-a-term relation.
    pub fn is_connected(&self) -> bool {
        let atoms: Vec<&Atom> = self.atoms().collect();
        let mut seen = vec![false; atoms.len()];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..atoms.len() {
                if !seen[j]
                    && atoms[i].terms().iter().any(|t| atoms[j].terms().contains(t))
                {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Variables of the head that never occur in the body.
    pub fn free_head_vars(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for t in self.head.terms() {
            if let Term::Var(v) = t {
                let in_body = self
                    .body
                    .iter()
                    .flat_map(|a| a.terms())
                    .any(|bt| bt == Term::Var(v));
                if !in_body && !out.contains(&v) {
                    out.push(v);
                }
            }
        }
        out
    }
}

/// Renumbers variables by first appearance scanning head then body.
fn renumber(head: Atom, body: Vec<Atom>) -> Rule {
    let mut map: [Option<u8>; MAX_VARS] = [None; MAX_VARS];
    let mut next = 0u8;
    {
        let mut note = |t: Term| {
            if let Term::Var(v) = t {
                let slot = &mut map[v as usize];
                if slot.is_none() {
                    *slot = Some(next);
                    next += 1;
                }
            }
        };
        for t in head.terms() {
            note(t);
        }
        for a in &body {
            for t in a.terms() {
                note(t);
            }
        }
    }
    let f = |v: u8| map[v as usize].expect("variable seen during renumbering");
    Rule {
        head: head.map_vars(f),
        body: body.into_iter().map(|a| a.map_vars(f)).collect(),
    }
}

pub(crate) fn var_name(v: u8) -> char {
    (b'a' + v) as char
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = |t: Term| match t {
            Term::Var(v) => format!("?{}", var_name(v)),
            Term::Const(e) => format!("{e}"),
        };
        write!(f, "{} {} {}", t(self.subject), self.relation, t(self.object))
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.body.is_empty() {
            return write!(f, "true => {}", self.head);
        }
        let body: Vec<String> = self.body.iter().map(|a| a.to_string()).collect();
        write!(f, "{} => {}", body.join(" & "), self.head)
    }
}

/// Measures attached to an emitted rule. `embedding_confidence` is absent
/// when the rule predicts nothing outside the graph; quality then falls
/// back to standard confidence alone.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleMetrics {
    pub support: usize,
    pub body_groundings: usize,
    pub standard_confidence: f64,
    pub head_coverage: f64,
    pub embedding_confidence: Option<f64>,
    pub quality: f64,
    pub num_new_predictions: usize,
}

/// Weighted blend of observed and embedding confidence.
pub fn quality(sc: f64, ec: Option<f64>, omega: f64) -> f64 {
    match ec {
        Some(e) => (1.0 - omega) * sc + omega * e,
        None => sc,
    }
}
