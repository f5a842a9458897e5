//! Task runners: datasets plus frozen embeddings plus probes, producing
//! [`TaskReport`]s.
//!
//! Embedding sets are keyed by instance id with a role prefix:
//!
//! | key              | encodes                                   |
//! |------------------|-------------------------------------------|
//! | `m:{id}`         | the mention of a typing / linking record  |
//! | `l:{id}`, `r:{id}` | left and right mentions of a pair record |
//! | `s:{id}`         | an EFP claim, encoded descriptively       |
//! | `d:{entity_id}`  | an entity description                     |

mod data;
mod encode;
pub(crate) mod linking;
mod records;
mod report;
mod runners;

pub use data::{load_descriptions, DataRoot, Splits};
pub use encode::{encode_avgvec, encoding_items, EncodeItem, EncodeKind};
pub use linking::{
    argmax, predict_with_prior, smooth_priors, Candidate, CandidateSet, ABSENT_GOLD_PRIOR,
    MAX_CANDIDATES,
};
pub use records::{
    parse_jsonl, read_jsonl, to_jsonl, write_jsonl, CandidateRecord, LinkingRecord, PairRecord,
    RelationRecord, SimilarityRecord, StatementRecord, TypingRecord,
};
pub use report::{headline_average, render_tsv, TaskReport, FOOTNOTES, TSV_HEADER};
pub use runners::{
    ned_report, predict_linking, run_candidate_selection, run_linking_conll,
    run_pair_classification, run_pair_typing, run_per_layer, run_similarity,
    run_statement_classification, run_task, run_typing, LayerSelection, PairTask, RunSettings,
};

use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// The seven headline tasks, plus the two NED sub-tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Task {
    Cap,
    Cerp,
    Efp,
    Et,
    Esr,
    Ert,
    Ned,
    Conll,
    Rare,
}

impl Task {
    /// Headline columns, in report order.
    pub const HEADLINES: [Task; 7] = [
        Task::Et,
        Task::Cap,
        Task::Efp,
        Task::Cerp,
        Task::Esr,
        Task::Ert,
        Task::Ned,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Task::Cap => "cap",
            Task::Cerp => "cerp",
            Task::Efp => "efp",
            Task::Et => "et",
            Task::Esr => "esr",
            Task::Ert => "ert",
            Task::Ned => "ned",
            Task::Conll => "conll",
            Task::Rare => "rare",
        }
    }

    /// Tasks whose data and embeddings live on disk (NED is derived).
    pub fn data_tasks() -> [Task; 8] {
        [
            Task::Cap,
            Task::Cerp,
            Task::Efp,
            Task::Et,
            Task::Esr,
            Task::Ert,
            Task::Conll,
            Task::Rare,
        ]
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "cap" => Task::Cap,
            "cerp" => Task::Cerp,
            "efp" => Task::Efp,
            "et" => Task::Et,
            "esr" => Task::Esr,
            "ert" => Task::Ert,
            "ned" => Task::Ned,
            "conll" => Task::Conll,
            "rare" => Task::Rare,
            other => return Err(Error::InvalidArgument(format!("unknown task {other:?}"))),
        })
    }
}
