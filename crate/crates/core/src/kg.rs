//! Interned triple store.
//!
//! Entities and relations are interned to dense u32 ids in first-seen file
//! order, so a given set of input files always produces the same ids. The
//! graph is immutable after construction; all secondary indexes are plain
//! projections of `triples` and every adjacency list is sorted, which keeps
//! iteration order independent of hash state.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EntityId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RelationId(pub u32);

impl EntityId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl RelationId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

impl fmt::Display for RelationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

/// Ord is (head, relation, tail); inferred-triple pools are sorted with it
/// before sampling so set iteration order never leaks into results.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
}

impl Triple {
    pub fn new(head: EntityId, relation: RelationId, tail: EntityId) -> Self {
        Triple { head, relation, tail }
    }
}

/// Training example: `positive` is the binary truth label y.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabeledTriple {
    pub triple: Triple,
    pub positive: bool,
}

impl LabeledTriple {
    pub fn positive(triple: Triple) -> Self {
        LabeledTriple { triple, positive: true }
    }

    pub fn negative(triple: Triple) -> Self {
        LabeledTriple { triple, positive: false }
    }

    #[inline]
    pub fn label(&self) -> f64 {
        if self.positive {
            1.0
        } else {
            0.0
        }
    }
}

/// Bidirectional string <-> dense id interner.
#[derive(Debug, Default, Clone)]
pub struct Dictionary {
    forward: HashMap<String, u32>,
    reverse: Vec<String>,
}

impl Dictionary {
    pub fn new() -> Self {
        Dictionary::default()
    }

    pub fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.forward.get(name) {
            return id;
        }
        let id = self.reverse.len() as u32;
        self.forward.insert(name.to_owned(), id);
        self.reverse.push(name.to_owned());
        id
    }

    pub fn get(&self, name: &str) -> Option<u32> {
        self.forward.get(name).copied()
    }

    pub fn name(&self, id: u32) -> Option<&str> {
        self.reverse.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.reverse.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reverse.is_empty()
    }

    /// Dumps `id\tname` lines, ascending by id.
    pub fn write_tsv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        for (id, name) in self.reverse.iter().enumerate() {
            writeln!(out, "{id}\t{name}").map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone)]
pub struct KnowledgeGraph {
    triples: Vec<Triple>,
    exists: HashSet<Triple>,
    by_relation: Vec<Vec<(EntityId, EntityId)>>,
    heads_of: HashMap<(RelationId, EntityId), Vec<EntityId>>,
    tails_of: HashMap<(RelationId, EntityId), Vec<EntityId>>,
    entity_freq: Vec<u32>,
    n_entities: usize,
    n_relations: usize,
}

/// A split read from disk plus its duplicate-line count (benchmark files
/// are allowed to contain repeats; we drop them but report how many).
#[derive(Debug)]
pub struct LoadedSplit {
    pub kg: KnowledgeGraph,
    pub duplicates: usize,
}

impl KnowledgeGraph {
    /// Builds the graph and all indexes. Duplicate triples are dropped;
    /// the count of dropped repeats is returned alongside.
    pub fn from_triples(
        triples: impl IntoIterator<Item = Triple>,
        n_entities: usize,
        n_relations: usize,
    ) -> (Self, usize) {
        let mut exists = HashSet::new();
        let mut kept = Vec::new();
        let mut duplicates = 0usize;
        for t in triples {
            debug_assert!(t.head.index() < n_entities && t.tail.index() < n_entities);
            debug_assert!(t.relation.index() < n_relations);
            if exists.insert(t) {
                kept.push(t);
            } else {
                duplicates += 1;
            }
        }

        let mut by_relation = vec![Vec::new(); n_relations];
        let mut heads_of: HashMap<(RelationId, EntityId), Vec<EntityId>> = HashMap::new();
        let mut tails_of: HashMap<(RelationId, EntityId), Vec<EntityId>> = HashMap::new();
        let mut entity_freq = vec![0u32; n_entities];
        for &t in &kept {
            by_relation[t.relation.index()].push((t.head, t.tail));
            heads_of.entry((t.relation, t.tail)).or_default().push(t.head);
            tails_of.entry((t.relation, t.head)).or_default().push(t.tail);
            entity_freq[t.head.index()] += 1;
            // A reflexive triple counts as one participation.
            if t.head != t.tail {
                entity_freq[t.tail.index()] += 1;
            }
        }
        for pairs in &mut by_relation {
            pairs.sort_unstable();
        }
        for heads in heads_of.values_mut() {
            heads.sort_unstable();
        }
        for tails in tails_of.values_mut() {
            tails.sort_unstable();
        }

        let kg = KnowledgeGraph {
            triples: kept,
            exists,
            by_relation,
            heads_of,
            tails_of,
            entity_freq,
            n_entities,
            n_relations,
        };
        (kg, duplicates)
    }

    /// Reads one `head\trelation\ttail` triple per line, interning names
    /// in file order. Empty lines are skipped; a line with any other field
    /// count is an error. CRLF input is tolerated.
    pub fn load_tsv(
        path: impl AsRef<Path>,
        entities: &mut Dictionary,
        relations: &mut Dictionary,
    ) -> Result<LoadedSplit> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let reader = BufReader::new(file);

        let mut triples = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let line = line.strip_suffix('\r').unwrap_or(&line);
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            let (h, r, t) = match (fields.next(), fields.next(), fields.next(), fields.next()) {
                (Some(h), Some(r), Some(t), None) => (h, r, t),
                _ => {
                    let n = line.split('\t').count();
                    return Err(Error::parse(
                        path,
                        i + 1,
                        format!("expected 3 tab-separated fields, found {n}"),
                    ));
                }
            };
            triples.push(Triple::new(
                EntityId(entities.intern(h)),
                RelationId(relations.intern(r)),
                EntityId(entities.intern(t)),
            ));
        }

        let (kg, duplicates) = Self::from_triples(triples, entities.len(), relations.len());
        Ok(LoadedSplit { kg, duplicates })
    }

    /// Writes the triple store back out in load order.
    pub fn write_tsv(
        &self,
        path: impl AsRef<Path>,
        entities: &Dictionary,
        relations: &Dictionary,
    ) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        for t in &self.triples {
            let h = entities.name(t.head.0).unwrap_or("?");
            let r = relations.name(t.relation.0).unwrap_or("?");
            let tl = entities.name(t.tail.0).unwrap_or("?");
            writeln!(out, "{h}\t{r}\t{tl}").map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }

    #[inline]
    pub fn contains(&self, t: Triple) -> bool {
        self.exists.contains(&t)
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn n_entities(&self) -> usize {
        self.n_entities
    }

    pub fn n_relations(&self) -> usize {
        self.n_relations
    }

    /// Number of facts using relation `r`.
    pub fn relation_size(&self, r: RelationId) -> usize {
        self.by_relation.get(r.index()).map_or(0, Vec::len)
    }

    /// All (head, tail) pairs of relation `r`, ascending.
    pub fn pairs(&self, r: RelationId) -> &[(EntityId, EntityId)] {
        self.by_relation.get(r.index()).map_or(&[], Vec::as_slice)
    }

    /// Heads x with r(x, tail), ascending.
    pub fn heads(&self, r: RelationId, tail: EntityId) -> &[EntityId] {
        self.heads_of.get(&(r, tail)).map_or(&[], Vec::as_slice)
    }

    /// Tails y with r(head, y), ascending.
    pub fn tails(&self, r: RelationId, head: EntityId) -> &[EntityId] {
        self.tails_of.get(&(r, head)).map_or(&[], Vec::as_slice)
    }

    /// Triple participation count of `e`; 0 for ids outside this graph.
    pub fn entity_freq(&self, e: EntityId) -> u32 {
        self.entity_freq.get(e.index()).copied().unwrap_or(0)
    }

    fn freq_bounds(&self) -> Result<(u32, u32)> {
        let lo = self.entity_freq.iter().copied().min().unwrap_or(0);
        let hi = self.entity_freq.iter().copied().max().unwrap_or(0);
        if lo == hi {
            return Err(Error::Config(format!(
                "sparsity undefined: every entity has frequency {lo}"
            )));
        }
        Ok((lo, hi))
    }

    /// Degree-based sparsity in [0, 1]: the rarest entity scores 1, the
    /// most connected scores 0. Ids never seen in this graph count as
    /// frequency 0 and clamp to 1.
    pub fn sparsity(&self, e: EntityId) -> Result<f64> {
        let (lo, hi) = self.freq_bounds()?;
        let f = f64::from(self.entity_freq(e));
        let s = 1.0 - (f - f64::from(lo)) / f64::from(hi - lo);
        Ok(s.clamp(0.0, 1.0))
    }
}
