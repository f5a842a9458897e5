//! The contract with out-of-process encoders: they read `EncodeItem`
//! manifests, write `EEV1` files keyed by item key, and every task runner
//! must accept the result. The encoder here is simulated in-process.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use enteval::embed_io::{read_embeddings, EmbeddingSet};
use enteval::tasks::{
    encoding_items, load_descriptions, parse_jsonl, run_task, to_jsonl, DataRoot, EncodeItem,
    EncodeKind, RunSettings, Task,
};

fn golden() -> DataRoot {
    DataRoot::new(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/golden/datagen"))
}

/// Writes the header and payload field by field, the way a Python
/// `struct.pack("<4sIQIIQ", ...)` writer would.
fn external_eev1(ids: &[String], layers: u32, dim: u32, values: &[f32]) -> Vec<u8> {
    let joined = ids.join("\n");
    let mut b = Vec::new();
    b.extend_from_slice(b"EEV1");
    b.extend_from_slice(&1u32.to_le_bytes());
    b.extend_from_slice(&(ids.len() as u64).to_le_bytes());
    b.extend_from_slice(&layers.to_le_bytes());
    b.extend_from_slice(&dim.to_le_bytes());
    b.extend_from_slice(&(joined.len() as u64).to_le_bytes());
    b.extend_from_slice(joined.as_bytes());
    for v in values {
        b.extend_from_slice(&v.to_le_bytes());
    }
    b
}

/// Deterministic three-layer "encoder": layer l of a token is a hash-seeded
/// vector, and an item is the mean over the tokens its kind selects.
fn fake_encode(item: &EncodeItem, layers: usize, dim: usize) -> Vec<f32> {
    let tokens: &[String] = match item.kind {
        EncodeKind::Contextual { span } => &item.tokens[span.0..=span.1],
        EncodeKind::Document { .. } | EncodeKind::Descriptive => &item.tokens,
    };
    let mut out = vec![0.0f32; layers * dim];
    for t in tokens {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in t.bytes() {
            h = (h ^ u64::from(b)).wrapping_mul(0x100_0000_01b3);
        }
        for (k, v) in out.iter_mut().enumerate() {
            h = h
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            *v += ((h >> 40) as f32 / (1u64 << 24) as f32 - 0.5) * (1.0 + k as f32 / dim as f32);
        }
    }
    let n = tokens.len().max(1) as f32;
    out.iter().map(|v| v / n).collect()
}

fn external_store(dir: &Path) -> BTreeMap<Task, EmbeddingSet> {
    let root = golden();
    let descriptions = load_descriptions(&root.descriptions()).unwrap();
    let (layers, dim) = (3usize, 6usize);
    let mut store = BTreeMap::new();
    for task in Task::data_tasks() {
        // manifest crosses the process boundary as JSONL
        let manifest = to_jsonl(&encoding_items(&root, task, &descriptions).unwrap());
        let items: Vec<EncodeItem> = parse_jsonl(&manifest, "manifest").unwrap();
        let ids: Vec<String> = items.iter().map(|i| i.key.clone()).collect();
        let values: Vec<f32> = items
            .iter()
            .flat_map(|i| fake_encode(i, layers, dim))
            .collect();
        let path: PathBuf = dir.join(format!("{task}.eev"));
        std::fs::write(
            &path,
            external_eev1(&ids, layers as u32, dim as u32, &values),
        )
        .unwrap();
        let set = read_embeddings(&path).unwrap();
        assert_eq!(
            set.instance_ids(),
            &ids[..],
            "{task}: ids keep manifest order"
        );
        assert_eq!(set.values(), &values[..]);
        store.insert(task, set);
    }
    store
}

#[test]
fn manifest_keys_follow_the_prefix_convention() {
    let root = golden();
    let descriptions = load_descriptions(&root.descriptions()).unwrap();
    let prefixes = |task| -> Vec<String> {
        let mut p: Vec<String> = encoding_items(&root, task, &descriptions)
            .unwrap()
            .iter()
            .map(|i| i.key[..2].to_owned())
            .collect();
        p.sort();
        p.dedup();
        p
    };
    assert_eq!(prefixes(Task::Cap), ["l:", "r:"]);
    assert_eq!(prefixes(Task::Efp), ["s:"]);
    assert_eq!(prefixes(Task::Et), ["m:"]);
    assert_eq!(prefixes(Task::Esr), ["d:"]);
    assert_eq!(prefixes(Task::Conll), ["d:", "m:"]);
    let line = to_jsonl(&encoding_items(&root, Task::Rare, &descriptions).unwrap()[..1]);
    assert!(line.contains(r#""kind":"document""#), "{line}");
    assert!(encoding_items(&root, Task::Ned, &descriptions).is_err());
}

#[test]
fn external_multilayer_embeddings_run_every_task() {
    let tmp = tempfile::tempdir().unwrap();
    let store = external_store(tmp.path());
    let settings = RunSettings::default();
    for task in Task::HEADLINES {
        let report = run_task(task, &golden(), &store, &settings).unwrap();
        assert!(
            report.value.is_finite() && (0.0..=100.0).contains(&report.value.abs()),
            "{task}: {report:?}"
        );
        if task != Task::Esr {
            assert!(
                report.mix.as_ref().is_some_and(|m| m.n_layers() == 3),
                "{task}"
            );
        }
    }
}

#[test]
fn missing_key_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let mut store = external_store(tmp.path());
    let efp = &store[&Task::Efp];
    let keep = efp.n_instances() - 1;
    let trimmed = EmbeddingSet::new(
        efp.instance_ids()[..keep].to_vec(),
        efp.n_layers(),
        efp.dim(),
        efp.values()[..keep * efp.n_layers() * efp.dim()].to_vec(),
    )
    .unwrap();
    store.insert(Task::Efp, trimmed);
    let err = run_task(Task::Efp, &golden(), &store, &RunSettings::default()).unwrap_err();
    assert!(matches!(err, enteval::Error::Data(_)), "{err}");
}
