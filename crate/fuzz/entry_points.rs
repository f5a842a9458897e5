//! Parser entry points under fuzzing. Shared by the libFuzzer targets and
//! the seed-replay test in the core crate; errors are fine, panics are not.

use enteval::datagen::sources;
use enteval::embed_io::{decode_container, parse_word_vectors};
use enteval::tasks::{
    parse_jsonl, LinkingRecord, PairRecord, RelationRecord, SimilarityRecord, StatementRecord,
    TypingRecord,
};
use enteval::wikient::{parse_dump, parse_wikitext, WikiEntRecord};

#[allow(dead_code)] // read by the seed-replay test only
pub const TARGETS: &[&str] = &[
    "eev1",
    "word_vectors",
    "task_jsonl",
    "wiki_dump",
    "wikitext",
    "sources",
];

pub fn run(target: &str, data: &[u8]) {
    match target {
        "eev1" => {
            let _ = decode_container(data);
        }
        "wiki_dump" => {
            let _ = parse_dump(data);
        }
        _ => {
            let Ok(text) = std::str::from_utf8(data) else {
                return;
            };
            match target {
                "word_vectors" => {
                    let _ = parse_word_vectors(text, "fuzz");
                }
                "wikitext" => {
                    let _ = parse_wikitext(text);
                }
                "task_jsonl" => task_jsonl(text),
                "sources" => source_file(text),
                other => panic!("unknown fuzz target {other}"),
            }
        }
    }
}

fn task_jsonl(text: &str) {
    // accessors index into the context, so run them on whatever parsed
    if let Ok(v) = parse_jsonl::<PairRecord>(text, "fuzz") {
        v.iter().for_each(|r| drop((r.left(), r.right())));
    }
    if let Ok(v) = parse_jsonl::<StatementRecord>(text, "fuzz") {
        v.iter().for_each(|r| drop(r.mention()));
    }
    if let Ok(v) = parse_jsonl::<TypingRecord>(text, "fuzz") {
        v.iter().for_each(|r| drop(r.mention()));
    }
    if let Ok(v) = parse_jsonl::<LinkingRecord>(text, "fuzz") {
        v.iter().for_each(|r| drop(r.mention()));
    }
    let _ = parse_jsonl::<SimilarityRecord>(text, "fuzz");
    let _ = parse_jsonl::<RelationRecord>(text, "fuzz");
    let _ = parse_jsonl::<WikiEntRecord>(text, "fuzz");
    let _ = parse_jsonl::<enteval::EntityDescription>(text, "fuzz");
}

/// The first line names the source format; the rest is its content.
fn source_file(text: &str) {
    let (kind, body) = text.split_once('\n').unwrap_or((text, ""));
    let f = "fuzz";
    let _ = match kind.trim() {
        "preco" => sources::parse_preco(body, f).map(|_| ()),
        "conceptnet" => sources::parse_conceptnet(body, f).map(|_| ()),
        "ner" => sources::parse_ner(body, f).map(|_| ()),
        "fever" => sources::parse_fever(body, f).map(|_| ()),
        "typing" => sources::parse_typing(body, f, "t").map(|_| ()),
        "types" => sources::parse_type_vocab(body, f).map(|_| ()),
        "kb_tuples" => sources::parse_kb_tuples(body, f).map(|_| ()),
        "kore" => sources::parse_kore(body, f).map(|_| ()),
        "wikisrs" => sources::parse_wikisrs(body, f).map(|_| ()),
        "aida" => sources::parse_aida(body, f).map(|_| ()),
        "crosswikis" => sources::parse_crosswikis(body, f).map(|_| ()),
        "rare" => sources::parse_rare(body, f).map(|_| ()),
        "alignment" => sources::parse_alignment(body, f).map(|_| ()),
        _ => {
            let _ = sources::parse_surface_text(text);
            Ok(())
        }
    };
}
