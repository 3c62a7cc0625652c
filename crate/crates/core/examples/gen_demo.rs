//! Regenerates the bundled demo dataset.
//!
//! Run from the workspace root:
//!
//!   cargo run -p hornbeam --example gen_demo
//!
//! The splits come from the planted-rule synthesizer, so the held-out
//! triples are consequences of regularities a miner can recover.

use std::fs;
use std::path::Path;

use hornbeam::synth::{planted, PLANTED_ENTITIES, PLANTED_RELATIONS};
use hornbeam::{KnowledgeGraph, Result, Triple};

fn main() -> Result<()> {
    let p = planted(7, (0.1, 0.1))?;
    let dir = Path::new("data/demo");
    fs::create_dir_all(dir).map_err(|e| hornbeam::Error::io(dir, e))?;

    let write = |name: &str, triples: &[Triple]| -> Result<()> {
        let kg = KnowledgeGraph::from_triples(
            triples.iter().copied(),
            PLANTED_ENTITIES,
            PLANTED_RELATIONS,
        )
        .0;
        let path = dir.join(name);
        kg.write_tsv(&path, &p.entities, &p.relations)?;
        println!("wrote {} ({} triples)", path.display(), kg.len());
        Ok(())
    };
    write("train.tsv", &p.train)?;
    write("valid.tsv", &p.valid)?;
    write("test.tsv", &p.test)?;
    Ok(())
}
