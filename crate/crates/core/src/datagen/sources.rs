//! Readers for the native source-corpus formats.
//!
//! Every reader takes the whole file as text plus a source name used in
//! error messages. All tokens come out lowercased.

use std::collections::{BTreeMap, HashMap};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::text::{lowercase_all, tokenize};

use super::normalize_title;

fn json_lines<'a, T: Deserialize<'a>>(text: &'a str, source: &str) -> Result<Vec<(usize, T)>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(k, l)| {
            serde_json::from_str(l)
                .map(|v| (k + 1, v))
                .map_err(|e| Error::parse(source, k + 1, e.to_string()))
        })
        .collect()
}

fn id_string(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// A coreference mention: inclusive token span inside one sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorefMention {
    pub sentence: usize,
    pub start: usize,
    pub end: usize,
    pub cluster: usize,
    pub pronoun: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorefDocument {
    pub id: String,
    pub sentences: Vec<Vec<String>>,
    /// Sorted by (sentence, start, end); a span listed in two clusters keeps
    /// the first.
    pub mentions: Vec<CorefMention>,
}

impl CorefDocument {
    pub fn mention_tokens(&self, m: &CorefMention) -> &[String] {
        &self.sentences[m.sentence][m.start..=m.end]
    }
}

#[derive(Deserialize)]
struct RawPreco {
    id: serde_json::Value,
    sentences: Vec<Vec<String>>,
    mention_clusters: Vec<Vec<(usize, usize, usize)>>,
}

/// PreCo JSONL: `{"id", "sentences": [[token]], "mention_clusters":
/// [[[sentence, begin, end_exclusive]]]}`. Singleton mentions are
/// one-element clusters.
pub fn parse_preco(text: &str, source: &str) -> Result<Vec<CorefDocument>> {
    let mut docs = Vec::new();
    for (line, raw) in json_lines::<RawPreco>(text, source)? {
        let sentences: Vec<Vec<String>> = raw.sentences.iter().map(|s| lowercase_all(s)).collect();
        let mut mentions = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for (cluster, members) in raw.mention_clusters.iter().enumerate() {
            for &(s, b, e) in members {
                let len = sentences.get(s).map(Vec::len);
                if !matches!(len, Some(len) if b < e && e <= len) {
                    return Err(Error::parse(
                        source,
                        line,
                        format!("mention [{s},{b},{e}] out of range"),
                    ));
                }
                if seen.insert((s, b, e)) {
                    let pronoun = crate::text::is_pronoun_mention(&sentences[s][b..e]);
                    mentions.push(CorefMention {
                        sentence: s,
                        start: b,
                        end: e - 1,
                        cluster,
                        pronoun,
                    });
                }
            }
        }
        mentions.sort_by_key(|m| (m.sentence, m.start, m.end));
        docs.push(CorefDocument {
            id: id_string(&raw.id),
            sentences,
            mentions,
        });
    }
    Ok(docs)
}

/// A ConceptNet edge with its surface sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct ConceptAssertion {
    pub id: String,
    /// Relation name without the `/r/` prefix, e.g. `IsA`.
    pub relation: String,
    /// `en` when both ends are English, else `start/end` language codes.
    pub language: String,
    /// Tokenized surface text; empty when the edge has no usable surface.
    pub tokens: Vec<String>,
    /// Inclusive spans of the `[[...]]` concepts, in order.
    pub spans: Vec<(usize, usize)>,
}

fn concept_language(uri: &str) -> &str {
    uri.strip_prefix("/c/")
        .and_then(|r| r.split('/').next())
        .unwrap_or("")
}

/// Splits `[[a dog]] is a type of [[animal]]` into tokens and concept spans.
/// Returns `None` for unbalanced markers or empty concepts.
pub fn parse_surface_text(surface: &str) -> Option<(Vec<String>, Vec<(usize, usize)>)> {
    let mut tokens = Vec::new();
    let mut spans = Vec::new();
    let mut rest = surface;
    while let Some(open) = rest.find("[[") {
        let (before, after) = rest.split_at(open);
        if before.contains("]]") {
            return None;
        }
        tokens.extend(tokenize(before));
        let after = &after[2..];
        let close = after.find("]]")?;
        let inner = tokenize(&after[..close]);
        if inner.is_empty() || after[..close].contains("[[") {
            return None;
        }
        spans.push((tokens.len(), tokens.len() + inner.len() - 1));
        tokens.extend(inner);
        rest = &after[close + 2..];
    }
    if rest.contains("]]") {
        return None;
    }
    tokens.extend(tokenize(rest));
    Some((tokens, spans))
}

/// ConceptNet 5 assertion dump: tab-separated `edge uri, relation uri,
/// start uri, end uri, JSON info`; the surface sentence is the JSON
/// `surfaceText` field.
pub fn parse_conceptnet(text: &str, source: &str) -> Result<Vec<ConceptAssertion>> {
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(Error::parse(
                source,
                k + 1,
                format!("{} fields, expected 5", fields.len()),
            ));
        }
        let info: serde_json::Value = serde_json::from_str(fields[4])
            .map_err(|e| Error::parse(source, k + 1, e.to_string()))?;
        let (ls, le) = (concept_language(fields[2]), concept_language(fields[3]));
        let language = if ls == le {
            ls.to_owned()
        } else {
            format!("{ls}/{le}")
        };
        let (tokens, spans) = info
            .get("surfaceText")
            .and_then(|v| v.as_str())
            .and_then(parse_surface_text)
            .unwrap_or_default();
        out.push(ConceptAssertion {
            id: fields[0].to_owned(),
            relation: fields[1].trim_start_matches("/r/").to_owned(),
            language,
            tokens,
            spans,
        });
    }
    Ok(out)
}

/// Offline NER output for one instance: inclusive token spans and types.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct NerAnnotation {
    pub instance_id: String,
    pub spans: Vec<(usize, usize)>,
    pub types: Vec<String>,
}

/// NER JSONL `{"instance_id", "spans": [[i, j]], "types": [..]}`, keyed by
/// instance id.
pub fn parse_ner(text: &str, source: &str) -> Result<HashMap<String, NerAnnotation>> {
    let mut out = HashMap::new();
    for (line, a) in json_lines::<NerAnnotation>(text, source)? {
        if a.spans.len() != a.types.len() {
            return Err(Error::parse(
                source,
                line,
                "spans and types differ in length",
            ));
        }
        out.insert(a.instance_id.clone(), a);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeverClaim {
    pub id: String,
    pub label: String,
    pub tokens: Vec<String>,
    pub mentions: Vec<(usize, usize)>,
}

#[derive(Deserialize)]
struct RawFever {
    id: serde_json::Value,
    label: String,
    claim: String,
    #[serde(default)]
    mentions: Vec<(usize, usize)>,
}

/// FEVER JSONL `{"id", "label", "claim", "mentions": [[i, j]]}`; mention
/// spans are inclusive indices into the tokenized claim.
pub fn parse_fever(text: &str, source: &str) -> Result<Vec<FeverClaim>> {
    json_lines::<RawFever>(text, source)?
        .into_iter()
        .map(|(line, raw)| {
            let tokens = tokenize(&raw.claim);
            if let Some(&(i, j)) = raw
                .mentions
                .iter()
                .find(|&&(i, j)| i > j || j >= tokens.len())
            {
                return Err(Error::parse(
                    source,
                    line,
                    format!("mention [{i},{j}] out of range"),
                ));
            }
            Ok(FeverClaim {
                id: id_string(&raw.id),
                label: raw.label,
                tokens,
                mentions: raw.mentions,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypingExample {
    pub id: String,
    pub tokens: Vec<String>,
    pub span: (usize, usize),
    pub types: Vec<String>,
}

#[derive(Deserialize)]
struct RawTyping {
    #[serde(default)]
    annot_id: Option<String>,
    left_context_token: Vec<String>,
    mention_span: String,
    right_context_token: Vec<String>,
    y_str: Vec<String>,
}

/// Ultra-fine typing JSONL (`left_context_token`, `mention_span`,
/// `right_context_token`, `y_str`, optional `annot_id`). The mention string
/// is split on whitespace. Missing ids become `{prefix}-{line}`.
pub fn parse_typing(text: &str, source: &str, prefix: &str) -> Result<Vec<TypingExample>> {
    json_lines::<RawTyping>(text, source)?
        .into_iter()
        .map(|(line, raw)| {
            let mention: Vec<String> = raw
                .mention_span
                .split_whitespace()
                .map(str::to_lowercase)
                .collect();
            if mention.is_empty() {
                return Err(Error::parse(source, line, "empty mention"));
            }
            let start = raw.left_context_token.len();
            let mut tokens = lowercase_all(&raw.left_context_token);
            tokens.extend(mention.iter().cloned());
            tokens.extend(lowercase_all(&raw.right_context_token));
            Ok(TypingExample {
                id: raw.annot_id.unwrap_or_else(|| format!("{prefix}-{line}")),
                tokens,
                span: (start, start + mention.len() - 1),
                types: raw.y_str,
            })
        })
        .collect()
}

/// Type inventory, one type per line; the line index is the type id.
pub fn parse_type_vocab(text: &str, source: &str) -> Result<HashMap<String, u32>> {
    let mut out = HashMap::new();
    for (k, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() {
            return Err(Error::parse(source, k + 1, "empty type name"));
        }
        if out.insert(t.to_owned(), k as u32).is_some() {
            return Err(Error::parse(source, k + 1, format!("duplicate type {t:?}")));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KbTuple {
    pub entity1: String,
    pub relation: String,
    pub entity2: String,
}

/// Tab-separated `entity1, relation, entity2`; `#` lines are comments.
pub fn parse_kb_tuples(text: &str, source: &str) -> Result<Vec<KbTuple>> {
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split('\t').map(str::trim).collect();
        if f.len() != 3 || f.iter().any(|s| s.is_empty()) {
            return Err(Error::parse(
                source,
                k + 1,
                "expected entity1<TAB>relation<TAB>entity2",
            ));
        }
        out.push(KbTuple {
            entity1: f[0].to_owned(),
            relation: f[1].to_owned(),
            entity2: f[2].to_owned(),
        });
    }
    Ok(out)
}

/// A KORE seed entity and its candidates, most related first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KoreList {
    pub seed: String,
    pub candidates: Vec<String>,
}

/// KORE ranked lists: an unindented seed line followed by indented
/// candidate lines in rank order.
pub fn parse_kore(text: &str, source: &str) -> Result<Vec<KoreList>> {
    let mut out: Vec<KoreList> = Vec::new();
    for (k, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        if line.starts_with([' ', '\t']) {
            match out.last_mut() {
                Some(list) => list.candidates.push(line.trim().to_owned()),
                None => return Err(Error::parse(source, k + 1, "candidate before any seed")),
            }
        } else {
            out.push(KoreList {
                seed: line.trim().to_owned(),
                candidates: Vec::new(),
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredPair {
    pub entity1: String,
    pub entity2: String,
    pub score: f64,
}

/// WikiSRS CSV with `Term1`, `Term2` and `Mean` columns; tab-delimited
/// when the header line contains a tab.
pub fn parse_wikisrs(text: &str, source: &str) -> Result<Vec<ScoredPair>> {
    let delimiter = if text.lines().next().is_some_and(|h| h.contains('\t')) {
        b'\t'
    } else {
        b','
    };
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .flexible(true)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::parse(source, 1, e.to_string()))?
        .clone();
    let column = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim().eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::parse(source, 1, format!("missing column {name}")))
    };
    let (c1, c2, cm) = (column("Term1")?, column("Term2")?, column("Mean")?);
    let mut out = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let line = k + 2;
        let record = record.map_err(|e| Error::parse(source, line, e.to_string()))?;
        let get = |c: usize| {
            record
                .get(c)
                .map(str::trim)
                .ok_or_else(|| Error::parse(source, line, "short row"))
        };
        let score: f64 = get(cm)?
            .parse()
            .map_err(|_| Error::parse(source, line, "bad score"))?;
        if !score.is_finite() {
            return Err(Error::parse(source, line, "non-finite score"));
        }
        out.push(ScoredPair {
            entity1: get(c1)?.to_owned(),
            entity2: get(c2)?.to_owned(),
            score,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum AidaSplit {
    Train,
    Testa,
    Testb,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AidaMention {
    pub sentence: usize,
    pub start: usize,
    pub end: usize,
    pub surface: String,
    /// Normalized Wikipedia title; `None` for out-of-KB (`--NME--`) mentions.
    pub entity: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AidaDocument {
    pub id: String,
    pub split: AidaSplit,
    pub sentences: Vec<Vec<String>>,
    pub mentions: Vec<AidaMention>,
}

/// Undoes the `\uXXXX` escapes used in YAGO entity names.
fn unescape_yago(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(pos) = rest.find("\\u") {
        out.push_str(&rest[..pos]);
        let hex = rest.get(pos + 2..pos + 6);
        match hex
            .and_then(|h| u32::from_str_radix(h, 16).ok())
            .and_then(char::from_u32)
        {
            Some(c) => {
                out.push(c);
                rest = &rest[pos + 6..];
            }
            None => {
                out.push_str("\\u");
                rest = &rest[pos + 2..];
            }
        }
    }
    out.push_str(rest);
    out
}

/// AIDA CoNLL-YAGO TSV: `-DOCSTART- (id)` opens a document (ids containing
/// `testa` / `testb` select the split), blank lines end sentences, token
/// lines are `token [B|I  mention  entity ...]`.
pub fn parse_aida(text: &str, source: &str) -> Result<Vec<AidaDocument>> {
    let mut docs: Vec<AidaDocument> = Vec::new();
    let mut sentence: Vec<String> = Vec::new();
    fn flush(docs: &mut [AidaDocument], sentence: &mut Vec<String>) {
        if let Some(doc) = docs.last_mut() {
            if !sentence.is_empty() {
                doc.sentences.push(std::mem::take(sentence));
            }
        }
    }
    for (k, line) in text.lines().enumerate() {
        let line_no = k + 1;
        if let Some(rest) = line.strip_prefix("-DOCSTART-") {
            flush(&mut docs, &mut sentence);
            let id = rest
                .trim()
                .trim_start_matches('(')
                .trim_end_matches(')')
                .to_owned();
            let split = if id.contains("testa") {
                AidaSplit::Testa
            } else if id.contains("testb") {
                AidaSplit::Testb
            } else {
                AidaSplit::Train
            };
            docs.push(AidaDocument {
                id,
                split,
                sentences: Vec::new(),
                mentions: Vec::new(),
            });
            continue;
        }
        if line.trim().is_empty() {
            flush(&mut docs, &mut sentence);
            continue;
        }
        let Some(doc) = docs.last_mut() else {
            return Err(Error::parse(source, line_no, "token before -DOCSTART-"));
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields[0].is_empty() {
            return Err(Error::parse(source, line_no, "empty token"));
        }
        let position = sentence.len();
        let sentence_index = doc.sentences.len();
        sentence.push(fields[0].to_lowercase());
        match fields.get(1).copied() {
            None => {}
            Some("B") => {
                let entity = fields
                    .get(3)
                    .filter(|e| **e != "--NME--")
                    .map(|e| normalize_title(&unescape_yago(e)));
                doc.mentions.push(AidaMention {
                    sentence: sentence_index,
                    start: position,
                    end: position,
                    surface: fields.get(2).copied().unwrap_or(fields[0]).to_owned(),
                    entity,
                });
            }
            Some("I") => match doc.mentions.last_mut() {
                Some(m) if m.sentence == sentence_index && m.end + 1 == position => {
                    m.end = position
                }
                _ => {
                    return Err(Error::parse(
                        source,
                        line_no,
                        "I tag without an open mention",
                    ))
                }
            },
            Some(other) => {
                return Err(Error::parse(
                    source,
                    line_no,
                    format!("unknown tag {other:?}"),
                ))
            }
        }
    }
    flush(&mut docs, &mut sentence);
    Ok(docs)
}

/// CrossWikis dictionary: mention string to `(entity, prior)` candidates,
/// highest prior first (ties keep file order).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CrossWikis {
    entries: HashMap<String, Vec<(String, f64)>>,
}

impl CrossWikis {
    /// Exact match first, then the lowercased mention.
    pub fn lookup(&self, mention: &str) -> &[(String, f64)] {
        self.entries
            .get(mention)
            .or_else(|| self.entries.get(&mention.to_lowercase()))
            .map_or(&[], Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Lines `mention<TAB>prior entity [extra fields]`.
pub fn parse_crosswikis(text: &str, source: &str) -> Result<CrossWikis> {
    let mut entries: HashMap<String, Vec<(String, f64)>> = HashMap::new();
    for (k, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (mention, rest) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(source, k + 1, "missing tab"))?;
        let mut parts = rest.split_whitespace();
        let prior: f64 = parts
            .next()
            .and_then(|p| p.parse().ok())
            .filter(|p: &f64| (0.0..=1.0).contains(p))
            .ok_or_else(|| Error::parse(source, k + 1, "prior must be a number in [0, 1]"))?;
        let entity = parts
            .next()
            .ok_or_else(|| Error::parse(source, k + 1, "missing entity"))?;
        entries
            .entry(mention.to_owned())
            .or_default()
            .push((normalize_title(entity), prior));
    }
    for list in entries.values_mut() {
        list.sort_by(|a, b| b.1.total_cmp(&a.1));
        let mut seen = std::collections::HashSet::new();
        list.retain(|(e, _)| seen.insert(e.clone()));
    }
    Ok(CrossWikis { entries })
}

/// Token standing in for the missing entity in Rare documents.
pub const RARE_BLANK: &str = "__blank__";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RareDocument {
    pub id: String,
    pub tokens: Vec<String>,
    pub blank: usize,
    pub candidates: Vec<String>,
    pub gold: String,
}

#[derive(Deserialize)]
struct RawRare {
    id: serde_json::Value,
    document: String,
    candidates: Vec<String>,
    answer: String,
}

/// Rare-entity JSONL `{"id", "document", "candidates", "answer"}`; the
/// document holds exactly one `__blank__` token.
pub fn parse_rare(text: &str, source: &str) -> Result<Vec<RareDocument>> {
    json_lines::<RawRare>(text, source)?
        .into_iter()
        .map(|(line, raw)| {
            let tokens = tokenize(&raw.document);
            let blanks: Vec<usize> = (0..tokens.len())
                .filter(|&k| tokens[k] == RARE_BLANK)
                .collect();
            if blanks.len() != 1 {
                return Err(Error::parse(
                    source,
                    line,
                    format!("{} blanks, expected 1", blanks.len()),
                ));
            }
            Ok(RareDocument {
                id: id_string(&raw.id),
                tokens,
                blank: blanks[0],
                candidates: raw.candidates.iter().map(|c| normalize_title(c)).collect(),
                gold: normalize_title(&raw.answer),
            })
        })
        .collect()
}

/// Manual alignment file: `name<TAB>entity_id` per line.
pub fn parse_alignment(text: &str, source: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (k, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (name, id) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(source, k + 1, "expected name<TAB>entity_id"))?;
        out.insert(name.trim().to_owned(), id.trim().to_owned());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preco_spans_become_inclusive() {
        let line = r#"{"id":"d1","sentences":[["He","saw","Mary","."]],"mention_clusters":[[[0,0,1]],[[0,2,3]]]}"#;
        let docs = parse_preco(line, "p").unwrap();
        assert_eq!(
            docs[0].mentions[0],
            CorefMention {
                sentence: 0,
                start: 0,
                end: 0,
                cluster: 0,
                pronoun: true
            }
        );
        assert_eq!(docs[0].mention_tokens(&docs[0].mentions[1]), ["mary"]);
        assert!(parse_preco(
            r#"{"id":1,"sentences":[["a"]],"mention_clusters":[[[0,0,2]]]}"#,
            "p"
        )
        .is_err());
    }

    #[test]
    fn surface_text_markers() {
        let (tokens, spans) = parse_surface_text("[[A dog]] is a type of [[animal]]").unwrap();
        assert_eq!(tokens, ["a", "dog", "is", "a", "type", "of", "animal"]);
        assert_eq!(spans, [(0, 1), (6, 6)]);
        assert!(parse_surface_text("[[a]] is [[b").is_none());
        assert!(parse_surface_text("a]] is [[b]]").is_none());
        assert!(parse_surface_text("[[ ]] is [[b]]").is_none());
    }

    #[test]
    fn conceptnet_line() {
        let line = "/a/[/r/IsA/,/c/en/dog/,/c/en/animal/]\t/r/IsA\t/c/en/dog\t/c/en/animal\t{\"surfaceText\": \"[[Dogs]] are [[animals]]\"}";
        let a = &parse_conceptnet(line, "c").unwrap()[0];
        assert_eq!((a.relation.as_str(), a.language.as_str()), ("IsA", "en"));
        assert_eq!(a.spans, [(0, 0), (2, 2)]);
        let err = parse_conceptnet("a\tb", "c").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn aida_documents() {
        let text = "-DOCSTART- (1 EU)\nEU\tB\tEU\tEuropean_Union\thttp://x\t1\t/m/1\nrejects\n\nJohn\tB\tJohn Smith\t--NME--\nSmith\tI\tJohn Smith\t--NME--\n-DOCSTART- (947testa CRICKET)\nx\n";
        let docs = parse_aida(text, "a").unwrap();
        assert_eq!(docs.len(), 2);
        assert_eq!(
            docs[0].sentences,
            vec![vec!["eu", "rejects"], vec!["john", "smith"]]
        );
        assert_eq!(
            docs[0].mentions[0].entity.as_deref(),
            Some("European Union")
        );
        assert_eq!((docs[0].mentions[1].start, docs[0].mentions[1].end), (0, 1));
        assert_eq!(docs[0].mentions[1].entity, None);
        assert_eq!(docs[1].split, AidaSplit::Testa);
        assert!(parse_aida("x\n", "a").is_err());
        assert!(parse_aida("-DOCSTART- (1)\nx\tI\n", "a").is_err());
    }

    #[test]
    fn yago_escapes() {
        assert_eq!(unescape_yago("Caf\\u00e9_X"), "Café_X");
        assert_eq!(unescape_yago("bad\\uZZ"), "bad\\uZZ");
    }

    #[test]
    fn crosswikis_sorted_by_prior() {
        let cw = parse_crosswikis(
            "China\t0.2 China_national_football_team\nChina\t0.7 China\nchina\t0.1 China_(band)\n",
            "x",
        )
        .unwrap();
        assert_eq!(
            cw.lookup("China"),
            [
                ("China".to_owned(), 0.7),
                ("China national football team".to_owned(), 0.2)
            ]
        );
        assert_eq!(cw.lookup("CHINA").len(), 1);
        assert!(parse_crosswikis("a\t1.5 B\n", "x").is_err());
    }

    #[test]
    fn kore_and_wikisrs() {
        let k = parse_kore("Apple Inc.\n\tSteve Jobs\n\tMicrosoft\nIBM\n\tx\n", "k").unwrap();
        assert_eq!(k[0].candidates, ["Steve Jobs", "Microsoft"]);
        assert!(parse_kore("\tx\n", "k").is_err());
        let w = parse_wikisrs("Term1,Term2,Mean,Std\nA,B,3.5,1\n\"C, Inc.\",D,1,0\n", "w").unwrap();
        assert_eq!(w[1].entity1, "C, Inc.");
        assert_eq!(w[0].score, 3.5);
        let t = parse_wikisrs("Term1\tTerm2\tMean\nA\tB\t2\n", "w").unwrap();
        assert_eq!(t[0].entity2, "B");
    }

    #[test]
    fn typing_and_rare() {
        let t = r#"{"left_context_token":["The"],"mention_span":"Big Apple","right_context_token":["shines"],"y_str":["location"]}"#;
        let ex = &parse_typing(t, "t", "train").unwrap()[0];
        assert_eq!(ex.id, "train-1");
        assert_eq!(ex.span, (1, 2));
        let r = r#"{"id":7,"document":"He founded __blank__ in 1990.","candidates":["a","b","c","d"],"answer":"b"}"#;
        let doc = &parse_rare(r, "r").unwrap()[0];
        assert_eq!(
            (doc.id.as_str(), doc.blank, doc.gold.as_str()),
            ("7", 2, "B")
        );
        assert!(parse_rare(
            r#"{"id":1,"document":"none","candidates":[],"answer":"x"}"#,
            "r"
        )
        .is_err());
    }
}
