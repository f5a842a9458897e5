use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use serde::Serialize;

use super::sources::{
    parse_aida, parse_alignment, parse_conceptnet, parse_crosswikis, parse_fever, parse_kb_tuples,
    parse_kore, parse_ner, parse_preco, parse_rare, parse_type_vocab, parse_typing, parse_wikisrs,
};
use super::{
    check_disjoint, gen_cap, gen_cerp, gen_conll, gen_efp, gen_ert, gen_esr, gen_et, gen_rare,
    published, CapConfig, DescriptionStore, ErtConfig, Generated,
};
use crate::embed_io::{load_word_vectors, WordVectorTable};
use crate::error::{Error, Result};
use crate::tasks::{read_jsonl, write_jsonl, Task};
use crate::types::EntityDescription;

/// File names inside a sources directory. Only the files needed by the
/// requested tasks have to exist.
pub mod files {
    pub const PRECO: &str = "preco.jsonl";
    pub const CONCEPTNET: &str = "conceptnet.tsv";
    pub const CERP_NER: &str = "cerp_ner.jsonl";
    pub const FEVER: &str = "fever.jsonl";
    pub const TYPING_TRAIN: &str = "typing_train.json";
    pub const TYPING_DEV: &str = "typing_dev.json";
    pub const TYPING_TEST: &str = "typing_test.json";
    pub const TYPE_VOCAB: &str = "types.txt";
    pub const KB_TUPLES: &str = "kb_tuples.tsv";
    pub const KORE: &str = "kore.txt";
    pub const WIKISRS_REL: &str = "wikisrs_rel.csv";
    pub const WIKISRS_SIM: &str = "wikisrs_sim.csv";
    pub const AIDA: &str = "aida.tsv";
    pub const CROSSWIKIS: &str = "crosswikis.tsv";
    pub const RARE: &str = "rare.jsonl";
    /// Entity description store (`{"entity_id","title","description"}`).
    pub const DESCRIPTIONS: &str = "descriptions.jsonl";
    /// Optional `name<TAB>entity_id` overrides.
    pub const ALIGNMENT: &str = "alignment.tsv";
    /// Word vectors, unless given explicitly.
    pub const WORD_VECTORS: &str = "vectors.txt";
    /// Written next to the task directories.
    pub const STATS: &str = "datagen_stats.tsv";
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatagenOptions {
    /// Data tasks to build (`ned` is not one; it reads conll and rare).
    pub tasks: Vec<Task>,
    pub seed: u64,
    /// Overrides `{sources}/vectors.txt`.
    pub word_vectors: Option<PathBuf>,
}

impl Default for DatagenOptions {
    fn default() -> Self {
        DatagenOptions {
            tasks: Task::data_tasks().to_vec(),
            seed: 42,
            word_vectors: None,
        }
    }
}

/// Split sizes and generator counters per task.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatagenSummary {
    pub sizes: BTreeMap<Task, (usize, usize, usize)>,
    pub stats: BTreeMap<Task, BTreeMap<String, usize>>,
    pub descriptions_written: usize,
}

impl DatagenSummary {
    /// `task<TAB>name<TAB>value` rows, sizes first.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("task\tname\tvalue\n");
        for (task, (tr, va, te)) in &self.sizes {
            for (name, v) in [("train", tr), ("valid", va), ("test", te)] {
                out.push_str(&format!("{task}\t{name}\t{v}\n"));
            }
            for (name, v) in &self.stats[task] {
                out.push_str(&format!("{task}\t{name}\t{v}\n"));
            }
        }
        out.push_str(&format!(
            "all\tdescriptions\t{}\n",
            self.descriptions_written
        ));
        out
    }
}

struct Sources<'a> {
    dir: &'a Path,
    word_vectors: Option<&'a Path>,
    vectors: Option<WordVectorTable>,
    store: Option<DescriptionStore>,
}

impl Sources<'_> {
    fn text(&self, name: &str) -> Result<(String, String)> {
        let path = self.dir.join(name);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok((text, path.display().to_string()))
    }

    fn vectors(&mut self) -> Result<&WordVectorTable> {
        if self.vectors.is_none() {
            let path = self
                .word_vectors
                .map_or_else(|| self.dir.join(files::WORD_VECTORS), Path::to_path_buf);
            let loaded = load_word_vectors(&path)?;
            self.vectors = Some(loaded.table);
        }
        Ok(self.vectors.as_ref().expect("just loaded"))
    }

    fn store(&mut self) -> Result<&DescriptionStore> {
        if self.store.is_none() {
            let descriptions: Vec<EntityDescription> =
                read_jsonl(&self.dir.join(files::DESCRIPTIONS))?;
            let mut store = DescriptionStore::new(descriptions);
            let alignment = self.dir.join(files::ALIGNMENT);
            if alignment.exists() {
                let (text, source) = self.text(files::ALIGNMENT)?;
                store = store.with_alignment(parse_alignment(&text, &source)?);
            }
            self.store = Some(store);
        }
        Ok(self.store.as_ref().expect("just loaded"))
    }

    fn parsed<T>(&self, name: &str, parse: impl Fn(&str, &str) -> Result<T>) -> Result<T> {
        let (text, source) = self.text(name)?;
        parse(&text, &source)
    }
}

fn emit<T: Serialize>(
    task: Task,
    generated: Generated<T>,
    id: impl Fn(&T) -> &str,
    out: &Path,
    summary: &mut DatagenSummary,
) -> Result<Generated<T>> {
    check_disjoint(&generated.splits, id)?;
    let dir = out.join(task.name());
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    generated.write(&dir)?;
    summary.sizes.insert(task, generated.splits.sizes());
    summary.stats.insert(task, generated.stats.clone());
    info!("datagen: {task} {:?}", generated.splits.sizes());
    Ok(generated)
}

/// Builds the requested task datasets from the source directory into
/// `{out}/{task}/{split}.jsonl`, writes the descriptions the tasks refer to
/// into `{out}/descriptions.jsonl` and the counters into
/// `{out}/datagen_stats.tsv`.
pub fn generate(sources: &Path, out: &Path, opts: &DatagenOptions) -> Result<DatagenSummary> {
    let mut src = Sources {
        dir: sources,
        word_vectors: opts.word_vectors.as_deref(),
        vectors: None,
        store: None,
    };
    let mut summary = DatagenSummary::default();
    let mut used: BTreeSet<String> = BTreeSet::new();
    let tasks: BTreeSet<Task> = opts.tasks.iter().copied().collect();
    if tasks.contains(&Task::Ned) {
        return Err(Error::InvalidArgument(
            "ned is built from conll and rare; request those".into(),
        ));
    }
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let seed = opts.seed;
    for task in tasks {
        match task {
            Task::Cap => {
                let docs = src.parsed(files::PRECO, parse_preco)?;
                let cfg = CapConfig {
                    seed,
                    ..CapConfig::default()
                };
                let g = gen_cap(&docs, src.vectors()?, &cfg)?;
                emit(task, g, |r| &r.id, out, &mut summary)?;
            }
            Task::Cerp => {
                let assertions = src.parsed(files::CONCEPTNET, parse_conceptnet)?;
                let ner = src.parsed(files::CERP_NER, parse_ner)?;
                let g = gen_cerp(&assertions, &ner, src.vectors()?, published::CERP, seed)?;
                emit(task, g, |r| &r.id, out, &mut summary)?;
            }
            Task::Efp => {
                let claims = src.parsed(files::FEVER, parse_fever)?;
                emit(
                    task,
                    gen_efp(&claims, published::EFP, seed)?,
                    |r| &r.id,
                    out,
                    &mut summary,
                )?;
            }
            Task::Et => {
                let train = src.parsed(files::TYPING_TRAIN, |t, s| parse_typing(t, s, "train"))?;
                let dev = src.parsed(files::TYPING_DEV, |t, s| parse_typing(t, s, "dev"))?;
                let test = src.parsed(files::TYPING_TEST, |t, s| parse_typing(t, s, "test"))?;
                let vocab = src.parsed(files::TYPE_VOCAB, parse_type_vocab)?;
                emit(
                    task,
                    gen_et(&train, &dev, &test, &vocab)?,
                    |r| &r.id,
                    out,
                    &mut summary,
                )?;
            }
            Task::Esr => {
                let kore = src.parsed(files::KORE, parse_kore)?;
                let rel = src.parsed(files::WIKISRS_REL, parse_wikisrs)?;
                let sim = src.parsed(files::WIKISRS_SIM, parse_wikisrs)?;
                let g = gen_esr(&kore, &rel, &sim, src.store()?)?;
                let g = emit(task, g, |r| &r.id, out, &mut summary)?;
                used.extend(
                    g.splits
                        .all()
                        .flat_map(|r| [r.entity1.clone(), r.entity2.clone()]),
                );
            }
            Task::Ert => {
                let tuples = src.parsed(files::KB_TUPLES, parse_kb_tuples)?;
                let cfg = ErtConfig {
                    seed,
                    ..ErtConfig::default()
                };
                src.vectors()?;
                src.store()?;
                let (store, vectors) = (
                    src.store.as_ref().expect("loaded"),
                    src.vectors.as_ref().expect("loaded"),
                );
                let g = emit(
                    task,
                    gen_ert(&tuples, store, vectors, &cfg)?,
                    |r| &r.id,
                    out,
                    &mut summary,
                )?;
                used.extend(
                    g.splits
                        .all()
                        .flat_map(|r| [r.entity1.clone(), r.entity2.clone()]),
                );
            }
            Task::Conll | Task::Rare => {
                let g = if task == Task::Conll {
                    let docs = src.parsed(files::AIDA, parse_aida)?;
                    let cw = src.parsed(files::CROSSWIKIS, parse_crosswikis)?;
                    gen_conll(&docs, &cw, src.store()?)?
                } else {
                    let docs = src.parsed(files::RARE, parse_rare)?;
                    gen_rare(&docs, src.store()?, published::RARE, seed)?
                };
                let g = emit(task, g, |r| &r.id, out, &mut summary)?;
                used.extend(
                    g.splits
                        .all()
                        .flat_map(|r| r.candidates.iter().map(|c| c.entity_id.clone())),
                );
            }
            Task::Ned => unreachable!("rejected above"),
        }
    }
    let descriptions = match &src.store {
        Some(store) => store.subset(used.iter().map(String::as_str)),
        None => Vec::new(),
    };
    summary.descriptions_written = descriptions.len();
    write_jsonl(&out.join(files::DESCRIPTIONS), &descriptions)?;
    let stats = out.join(files::STATS);
    fs::write(&stats, summary.to_tsv()).map_err(|e| Error::io(&stats, e))?;
    Ok(summary)
}
