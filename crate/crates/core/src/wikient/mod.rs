//! Hyperlink-anchored training pairs from a Wikipedia XML export.
//!
//! Every internal link in article prose yields one pair: the tokenized
//! sentence holding the link, the anchor span, and the first 100 tokens of
//! the target article (starting at its first prose paragraph). A sentence
//! with k links yields k pairs over identical tokens. Links whose target
//! cannot be found, even after one redirect hop, are dropped and counted.

mod dump;
mod markup;

pub use dump::{parse_dump, read_dump, Page};
pub use markup::{parse_wikitext, redirect_target, Paragraph, Segment};

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::normalize_title;
use crate::error::{Error, Result};
use crate::tasks::write_jsonl;
use crate::text::{sentence_bounds, tokenize};
use crate::types::{EntityDescription, MentionContext, MAX_DESCRIPTION_TOKENS};

/// A mention in context, its target entity and that entity's description.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperlinkPair {
    pub context: MentionContext,
    pub entity_id: String,
    pub description: EntityDescription,
}

/// On-disk form of a pair; the description lives in the description store.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WikiEntRecord {
    #[serde(flatten)]
    pub mention: MentionContext,
    pub entity_id: String,
}

/// Re-attaches descriptions to on-disk records. A record whose entity is
/// not in `descriptions` is a data error.
pub fn join_descriptions(
    records: &[WikiEntRecord],
    descriptions: &BTreeMap<String, EntityDescription>,
) -> Result<Vec<HyperlinkPair>> {
    records
        .iter()
        .map(|r| {
            let description = descriptions.get(&r.entity_id).ok_or_else(|| {
                Error::Data(format!(
                    "pair {}: no description for {}",
                    r.mention.instance_id(),
                    r.entity_id
                ))
            })?;
            Ok(HyperlinkPair {
                context: r.mention.clone(),
                entity_id: r.entity_id.clone(),
                description: description.clone(),
            })
        })
        .collect()
}

/// The first `MAX_DESCRIPTION_TOKENS` tokens of a page body.
pub fn truncate_description(
    entity_id: &str,
    title: &str,
    tokens: &[String],
) -> Result<EntityDescription> {
    if tokens.is_empty() {
        return Err(Error::Data(format!("page {title:?} has an empty body")));
    }
    EntityDescription::new(
        entity_id,
        title,
        &tokens[..tokens.len().min(MAX_DESCRIPTION_TOKENS)],
    )
}

/// One sentence with the anchor spans (inclusive) and raw targets inside it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkedSentence {
    pub tokens: Vec<String>,
    pub links: Vec<((usize, usize), String)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
struct ParsedPage {
    body: Vec<String>,
    sentences: Vec<LinkedSentence>,
    links_crossing_sentences: usize,
}

/// Tokenizes paragraphs and cuts them into sentences. Links straddling a
/// sentence boundary are dropped and counted.
fn analyze(paragraphs: &[Paragraph]) -> ParsedPage {
    let mut page = ParsedPage::default();
    for par in paragraphs {
        let mut tokens: Vec<String> = Vec::new();
        let mut links: Vec<((usize, usize), String)> = Vec::new();
        for seg in par {
            match seg {
                Segment::Text(t) => tokens.extend(tokenize(t)),
                Segment::Link { target, anchor } => {
                    let anchor = tokenize(anchor);
                    if !anchor.is_empty() {
                        links.push((
                            (tokens.len(), tokens.len() + anchor.len() - 1),
                            target.clone(),
                        ));
                    }
                    tokens.extend(anchor);
                }
            }
        }
        if page.body.len() < MAX_DESCRIPTION_TOKENS {
            let room = MAX_DESCRIPTION_TOKENS - page.body.len();
            page.body.extend(tokens.iter().take(room).cloned());
        }
        let bounds = sentence_bounds(&tokens);
        let mut placed = vec![false; links.len()];
        for range in bounds {
            let mut inside = Vec::new();
            for (k, ((s, e), target)) in links.iter().enumerate() {
                if range.contains(s) && range.contains(e) {
                    placed[k] = true;
                    inside.push(((s - range.start, e - range.start), target.clone()));
                }
            }
            if !inside.is_empty() {
                page.sentences.push(LinkedSentence {
                    tokens: tokens[range].to_vec(),
                    links: inside,
                });
            }
        }
        page.links_crossing_sentences += placed.iter().filter(|p| !**p).count();
    }
    page
}

/// Extraction counters. `pairs_kept + dropped_missing_page +
/// dropped_empty_description == links` always holds.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct WikiStats {
    pub pages: usize,
    pub redirects: usize,
    pub other_namespace: usize,
    pub malformed_pages: usize,
    pub sentences_with_links: usize,
    pub multi_link_sentences: usize,
    pub links: usize,
    pub links_crossing_sentences: usize,
    pub pairs_kept: usize,
    pub dropped_missing_page: usize,
    pub dropped_empty_description: usize,
}

impl WikiStats {
    pub fn to_map(&self) -> BTreeMap<String, usize> {
        match serde_json::to_value(self).expect("plain struct") {
            serde_json::Value::Object(m) => m
                .into_iter()
                .map(|(k, v)| (k, v.as_u64().unwrap_or(0) as usize))
                .collect(),
            _ => BTreeMap::new(),
        }
    }
}

enum Target {
    Article(Option<EntityDescription>),
    Redirect(String),
}

/// Normalized title to article description or redirect target.
pub struct PageIndex {
    pages: HashMap<String, Target>,
}

/// Outcome of resolving a link target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Resolution<'a> {
    Found(&'a EntityDescription),
    /// The article exists but its body is empty.
    Empty,
    Missing,
}

impl PageIndex {
    /// Follows at most one redirect.
    pub fn resolve(&self, target: &str) -> Resolution<'_> {
        fn article(t: &Target) -> Resolution<'_> {
            match t {
                Target::Article(Some(d)) => Resolution::Found(d),
                Target::Article(None) => Resolution::Empty,
                Target::Redirect(_) => Resolution::Missing,
            }
        }
        match self.pages.get(&normalize_title(target)) {
            None => Resolution::Missing,
            Some(Target::Redirect(to)) => self.pages.get(to).map_or(Resolution::Missing, article),
            Some(t) => article(t),
        }
    }

    pub fn len(&self) -> usize {
        self.pages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pages.is_empty()
    }
}

/// All pairs in page order plus the descriptions they use (sorted by id).
#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub pairs: Vec<HyperlinkPair>,
    pub descriptions: Vec<EntityDescription>,
    pub stats: WikiStats,
}

impl Extraction {
    pub fn records(&self) -> Vec<WikiEntRecord> {
        self.pairs
            .iter()
            .map(|p| WikiEntRecord {
                mention: p.context.clone(),
                entity_id: p.entity_id.clone(),
            })
            .collect()
    }

    /// Writes `pairs.jsonl` and `descriptions.jsonl` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_jsonl(&dir.join("pairs.jsonl"), &self.records())?;
        write_jsonl(&dir.join("descriptions.jsonl"), &self.descriptions)
    }
}

/// Builds the index and extracts pairs. Pages whose markup cannot be
/// parsed are logged and skipped; only namespace-0 pages are used.
pub fn extract_pairs(pages: &[Page]) -> Extraction {
    let mut stats = WikiStats {
        pages: pages.len(),
        ..WikiStats::default()
    };
    let parsed: Vec<Option<Result<ParsedPage>>> = pages
        .par_iter()
        .map(|p| {
            if p.namespace != 0 || p.redirect.is_some() || redirect_target(&p.text).is_some() {
                return None;
            }
            Some(parse_wikitext(&p.text).map(|pars| analyze(&pars)))
        })
        .collect();

    let mut index = PageIndex {
        pages: HashMap::new(),
    };
    for (page, parsed) in pages.iter().zip(&parsed) {
        let title = normalize_title(&page.title);
        if page.namespace != 0 {
            stats.other_namespace += 1;
            continue;
        }
        let target = match (
            parsed,
            page.redirect
                .clone()
                .or_else(|| redirect_target(&page.text)),
        ) {
            (_, Some(to)) => {
                stats.redirects += 1;
                Target::Redirect(normalize_title(&to))
            }
            (Some(Ok(p)), None) => {
                Target::Article(truncate_description(&title, &page.title, &p.body).ok())
            }
            (Some(Err(e)), None) => {
                warn!("wikient: skipping page {:?}: {e}", page.title);
                stats.malformed_pages += 1;
                continue;
            }
            (None, None) => unreachable!("articles are always parsed"),
        };
        index.pages.entry(title).or_insert(target);
    }

    let per_page: Vec<(Vec<HyperlinkPair>, WikiStats)> = pages
        .par_iter()
        .zip(&parsed)
        .map(|(page, parsed)| {
            let mut local = WikiStats::default();
            let mut pairs = Vec::new();
            let Some(Ok(p)) = parsed else {
                return (pairs, local);
            };
            local.links_crossing_sentences = p.links_crossing_sentences;
            for (s, sentence) in p.sentences.iter().enumerate() {
                local.sentences_with_links += 1;
                local.multi_link_sentences += usize::from(sentence.links.len() > 1);
                for (l, (span, target)) in sentence.links.iter().enumerate() {
                    local.links += 1;
                    match index.resolve(target) {
                        Resolution::Found(d) => {
                            let context = MentionContext::new(
                                format!("{}-{s}-{l}", page.id),
                                &sentence.tokens,
                                *span,
                            )
                            .expect("span inside sentence");
                            pairs.push(HyperlinkPair {
                                context,
                                entity_id: d.entity_id().to_owned(),
                                description: d.clone(),
                            });
                            local.pairs_kept += 1;
                        }
                        Resolution::Empty => local.dropped_empty_description += 1,
                        Resolution::Missing => local.dropped_missing_page += 1,
                    }
                }
            }
            (pairs, local)
        })
        .collect();

    let mut pairs = Vec::new();
    let mut used: BTreeMap<String, EntityDescription> = BTreeMap::new();
    for (page_pairs, local) in per_page {
        stats.sentences_with_links += local.sentences_with_links;
        stats.multi_link_sentences += local.multi_link_sentences;
        stats.links += local.links;
        stats.links_crossing_sentences += local.links_crossing_sentences;
        stats.pairs_kept += local.pairs_kept;
        stats.dropped_missing_page += local.dropped_missing_page;
        stats.dropped_empty_description += local.dropped_empty_description;
        for p in &page_pairs {
            used.entry(p.entity_id.clone())
                .or_insert_with(|| p.description.clone());
        }
        pairs.extend(page_pairs);
    }
    Extraction {
        pairs,
        descriptions: used.into_values().collect(),
        stats,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn page(id: u64, title: &str, text: &str) -> Page {
        Page {
            id,
            title: title.into(),
            namespace: 0,
            redirect: None,
            text: text.into(),
        }
    }

    #[test]
    fn truncation_boundaries() {
        let tokens = |n: usize| (0..n).map(|k| format!("t{k}")).collect::<Vec<_>>();
        assert_eq!(
            truncate_description("x", "X", &tokens(150))
                .unwrap()
                .tokens()
                .len(),
            100
        );
        assert_eq!(
            truncate_description("x", "X", &tokens(100))
                .unwrap()
                .tokens(),
            &tokens(100)[..]
        );
        assert_eq!(
            truncate_description("x", "X", &tokens(50))
                .unwrap()
                .tokens()
                .len(),
            50
        );
        assert!(truncate_description("x", "X", &[]).is_err());
    }

    #[test]
    fn two_links_two_pairs_and_drops() {
        let pages = vec![
            page(
                1,
                "Paris",
                "[[France|French]] capital near [[Lutetia]]. No links here. See [[Atlantis]].",
            ),
            page(2, "France", "France is a country."),
            Page {
                redirect: Some("Paris".into()),
                ..page(3, "Lutetia", "#REDIRECT [[Paris]]")
            },
            page(4, "Empty", "{{stub}}"),
            page(5, "Broken", "[[oops"),
            page(6, "Z", "Link to [[empty]]."),
        ];
        let out = extract_pairs(&pages);
        let s = &out.stats;
        assert_eq!(out.pairs.len(), 2);
        let (a, b) = (&out.pairs[0], &out.pairs[1]);
        assert_eq!(a.context.tokens(), b.context.tokens());
        assert_eq!((a.context.span(), b.context.span()), ((0, 0), (3, 3)));
        assert_eq!(
            (a.entity_id.as_str(), b.entity_id.as_str()),
            ("France", "Paris")
        );
        assert_eq!(
            a.description.tokens(),
            ["france", "is", "a", "country", "."]
        );
        assert_eq!(s.links, 4);
        assert_eq!(
            (s.dropped_missing_page, s.dropped_empty_description),
            (1, 1)
        );
        assert_eq!((s.multi_link_sentences, s.sentences_with_links), (1, 3));
        assert_eq!((s.redirects, s.malformed_pages), (1, 1));
        assert_eq!(
            s.pairs_kept + s.dropped_missing_page + s.dropped_empty_description,
            s.links
        );
        let ids: Vec<&str> = out.descriptions.iter().map(|d| d.entity_id()).collect();
        assert_eq!(ids, ["France", "Paris"]);
    }

    #[test]
    fn redirect_chains_stop_after_one_hop() {
        let pages = vec![
            page(1, "A", "Go to [[B]]."),
            Page {
                redirect: Some("C".into()),
                ..page(2, "B", "")
            },
            Page {
                redirect: Some("D".into()),
                ..page(3, "C", "")
            },
            page(4, "D", "D text."),
        ];
        let out = extract_pairs(&pages);
        assert_eq!(out.stats.dropped_missing_page, 1);
        assert!(out.pairs.is_empty());
    }

    #[test]
    fn record_json_shape() {
        let r = WikiEntRecord {
            mention: MentionContext::new("1-0-0", ["a", "b"], (1, 1)).unwrap(),
            entity_id: "B".into(),
        };
        let json = serde_json::to_string(&r).unwrap();
        assert_eq!(
            json,
            r#"{"id":"1-0-0","context":["a","b"],"span":[1,1],"entity_id":"B"}"#
        );
        assert_eq!(serde_json::from_str::<WikiEntRecord>(&json).unwrap(), r);
    }
}
