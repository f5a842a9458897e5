//! A reduced MediaWiki markup reader: enough to recover prose and internal
//! links. Templates, tables, references, comments, headings, files and
//! categories are removed rather than expanded.

use crate::error::{Error, Result};

/// A piece of paragraph text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Segment {
    Text(String),
    /// Internal link; `anchor` already includes any link trail.
    Link {
        target: String,
        anchor: String,
    },
}

pub type Paragraph = Vec<Segment>;

/// Tags removed together with their content.
const DROPPED_TAGS: &[&str] = &[
    "ref",
    "math",
    "gallery",
    "timeline",
    "score",
    "syntaxhighlight",
    "source",
    "imagemap",
    "chem",
    "hiero",
];

/// Link namespaces that do not produce text.
const DROPPED_NAMESPACES: &[&str] = &[
    "file",
    "image",
    "media",
    "category",
    "wikt",
    "wiktionary",
    "wp",
    "wikipedia",
    "template",
    "help",
    "portal",
    "special",
    "user",
    "talk",
];

fn malformed(what: &str, at: usize) -> Error {
    Error::format(at as u64, format!("unterminated {what}"))
}

fn find_ci(hay: &str, needle: &str, from: usize) -> Option<usize> {
    let lower = needle.to_ascii_lowercase();
    hay.get(from..)?
        .char_indices()
        .map(|(i, _)| i + from)
        .find(|&i| {
            hay.get(i..i + lower.len())
                .is_some_and(|s| s.eq_ignore_ascii_case(&lower))
        })
}

/// Removes comments and HTML-like tags; `DROPPED_TAGS` lose their content.
fn strip_tags(text: &str) -> Result<String> {
    let mut out = String::with_capacity(text.len());
    let mut k = 0;
    while let Some(rel) = text[k..].find('<') {
        let at = k + rel;
        out.push_str(&text[k..at]);
        let rest = &text[at..];
        if rest.starts_with("<!--") {
            let end = rest.find("-->").ok_or_else(|| malformed("comment", at))?;
            k = at + end + 3;
            continue;
        }
        let name: String = rest[1..]
            .trim_start_matches('/')
            .chars()
            .take_while(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        let Some(close) = rest.find('>') else {
            // a bare "<" in prose
            out.push('<');
            k = at + 1;
            continue;
        };
        if name.is_empty() || rest[..close].contains('\n') {
            out.push('<');
            k = at + 1;
            continue;
        }
        let self_closing = rest[..close].ends_with('/');
        k = at + close + 1;
        if DROPPED_TAGS.contains(&name.as_str()) && !rest.starts_with("</") && !self_closing {
            let closing = format!("</{name}");
            let end =
                find_ci(text, &closing, k).ok_or_else(|| malformed(&format!("<{name}>"), at))?;
            let gt = text[end..]
                .find('>')
                .ok_or_else(|| malformed(&format!("</{name}>"), end))?;
            k = end + gt + 1;
        }
    }
    out.push_str(&text[k..]);
    Ok(out)
}

/// Removes `{{templates}}` and `{| tables |}`, both nestable.
fn strip_blocks(text: &str) -> Result<String> {
    #[derive(PartialEq)]
    enum Block {
        Template,
        Table,
    }
    let mut out = String::with_capacity(text.len());
    let mut stack: Vec<(Block, usize)> = Vec::new();
    let bytes = text.as_bytes();
    let mut k = 0;
    let mut kept_from = 0;
    while k < bytes.len() {
        let two = &bytes[k..(k + 2).min(bytes.len())];
        let opener = match two {
            b"{{" => Some(Block::Template),
            b"{|" => Some(Block::Table),
            _ => None,
        };
        if let Some(block) = opener {
            if stack.is_empty() {
                out.push_str(&text[kept_from..k]);
            }
            stack.push((block, k));
            k += 2;
            continue;
        }
        let closes = matches!(
            (two, stack.last()),
            (b"}}", Some((Block::Template, _))) | (b"|}", Some((Block::Table, _)))
        );
        if closes {
            stack.pop();
            k += 2;
            if stack.is_empty() {
                kept_from = k;
            }
            continue;
        }
        k += 1;
    }
    if let Some((block, at)) = stack.first() {
        return Err(malformed(
            if *block == Block::Template {
                "template"
            } else {
                "table"
            },
            *at,
        ));
    }
    out.push_str(&text[kept_from..]);
    Ok(out)
}

fn decode_entities(s: &str) -> String {
    if !s.contains('&') {
        return s.to_owned();
    }
    s.replace("&nbsp;", " ")
        .replace("&ndash;", "\u{2013}")
        .replace("&mdash;", "\u{2014}")
        .replace("&quot;", "\"")
        .replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&amp;", "&")
}

fn clean_text(s: &str) -> String {
    decode_entities(&s.replace("'''", "").replace("''", ""))
}

fn strip_magic_words(line: &str) -> String {
    let mut out = line.to_owned();
    while let Some(start) = out.find("__") {
        let Some(len) = out[start + 2..].find("__") else {
            break;
        };
        let word = &out[start + 2..start + 2 + len];
        if word.is_empty() || !word.chars().all(|c| c.is_ascii_uppercase()) {
            break;
        }
        out.replace_range(start..start + len + 4, "");
    }
    out
}

/// Groups lines into paragraph strings. Blank lines, headings and list
/// items break paragraphs; list markers are removed.
fn paragraphs(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    let flush = |current: &mut String, out: &mut Vec<String>| {
        if !current.trim().is_empty() {
            out.push(current.trim().to_owned());
        }
        current.clear();
    };
    for raw in text.lines() {
        let line = strip_magic_words(raw.trim());
        let line = line.trim();
        // blank lines and headings both end a paragraph
        if line.is_empty() || (line.len() >= 2 && line.starts_with('=') && line.ends_with('=')) {
            flush(&mut current, &mut out);
        } else if line.starts_with(['*', '#', ':', ';']) {
            flush(&mut current, &mut out);
            current.push_str(line.trim_start_matches(['*', '#', ':', ';']));
            flush(&mut current, &mut out);
        } else {
            if !current.is_empty() {
                current.push(' ');
            }
            current.push_str(line);
        }
    }
    flush(&mut current, &mut out);
    out
}

/// Text of a link target without a `#section` part, or `None` for links
/// into a dropped namespace.
fn link_target(inner: &str) -> Option<(String, bool)> {
    let explicit_colon = inner.starts_with(':');
    let target = inner.trim_start_matches(':');
    if let Some((ns, _)) = target.split_once(':') {
        let ns = ns.trim().to_ascii_lowercase();
        let interlanguage = ns.len() <= 3 && ns.chars().all(|c| c.is_ascii_lowercase() || c == '-');
        if !explicit_colon && (DROPPED_NAMESPACES.contains(&ns.as_str()) || interlanguage) {
            return None;
        }
        if DROPPED_NAMESPACES.contains(&ns.as_str()) {
            // [[:Category:X]] renders as text but is not an entity
            return Some((target.to_owned(), false));
        }
    }
    let page = target.split('#').next().unwrap_or("").trim();
    Some((page.to_owned(), !page.is_empty()))
}

fn pipe_trick(target: &str) -> String {
    match target.rfind(" (") {
        Some(p) if target.ends_with(')') => target[..p].to_owned(),
        _ => target.to_owned(),
    }
}

/// Splits one paragraph into text and link segments.
fn segments(par: &str, base: usize) -> Result<Paragraph> {
    let mut out: Paragraph = Vec::new();
    let mut text = String::new();
    let b = par.as_bytes();
    let mut k = 0;
    while k < b.len() {
        if b[k..].starts_with(b"[[") {
            // find the matching ]] allowing nested [[ ]] in captions
            let mut depth = 0;
            let mut j = k;
            let mut end = None;
            while j + 1 < b.len() {
                if b[j..].starts_with(b"[[") {
                    depth += 1;
                    j += 2;
                } else if b[j..].starts_with(b"]]") {
                    depth -= 1;
                    j += 2;
                    if depth == 0 {
                        end = Some(j);
                        break;
                    }
                } else {
                    j += 1;
                }
            }
            let end = end.ok_or_else(|| malformed("link", base + k))?;
            let inner = &par[k + 2..end - 2];
            let (target_part, anchor_part) = match inner.split_once('|') {
                Some((t, a)) => (t, Some(a)),
                None => (inner, None),
            };
            let trail_len: usize = par[end..]
                .chars()
                .take_while(|c| c.is_alphabetic())
                .map(char::len_utf8)
                .sum();
            let trail = &par[end..end + trail_len];
            k = end + trail_len;
            let Some((target, is_entity)) = link_target(target_part) else {
                continue;
            };
            let anchor = match anchor_part {
                Some("") => pipe_trick(&target),
                Some(a) => a.to_owned(),
                None => target_part.trim_start_matches(':').to_owned(),
            };
            let anchor = clean_text(&format!("{anchor}{trail}"));
            if is_entity && !anchor.trim().is_empty() {
                if !text.is_empty() {
                    out.push(Segment::Text(clean_text(&std::mem::take(&mut text))));
                }
                out.push(Segment::Link { target, anchor });
            } else {
                text.push_str(&anchor);
            }
            continue;
        }
        if b[k] == b'[' {
            let rest = &par[k + 1..];
            if rest.starts_with("http://") || rest.starts_with("https://") || rest.starts_with("//")
            {
                if let Some(close) = rest.find(']') {
                    if let Some((_, label)) = rest[..close].split_once(' ') {
                        text.push_str(label);
                    }
                    k += close + 2;
                    continue;
                }
            }
        }
        let ch = par[k..].chars().next().expect("k is a char boundary");
        text.push(ch);
        k += ch.len_utf8();
    }
    if !text.is_empty() {
        out.push(Segment::Text(clean_text(&text)));
    }
    Ok(out)
}

/// Parses page wikitext into paragraphs of text and link segments.
///
/// Unterminated comments, templates, tables, links or content-dropping
/// tags are errors; the byte offset refers to the partly cleaned text.
pub fn parse_wikitext(text: &str) -> Result<Vec<Paragraph>> {
    let without_tags = strip_tags(text)?;
    let without_blocks = strip_blocks(&without_tags)?;
    let mut out = Vec::new();
    let mut base = 0;
    for par in paragraphs(&without_blocks) {
        let mut segs = segments(&par, base)?;
        base += par.len();
        if let Some(Segment::Text(t)) = segs.first_mut() {
            *t = t.trim_start().to_owned();
        }
        if let Some(Segment::Text(t)) = segs.last_mut() {
            *t = t.trim_end().to_owned();
        }
        segs.retain(|s| !matches!(s, Segment::Text(t) if t.is_empty()));
        if segs.iter().any(|s| match s {
            Segment::Text(t) => !t.trim().is_empty(),
            Segment::Link { .. } => true,
        }) {
            out.push(segs);
        }
    }
    Ok(out)
}

/// Target of a `#REDIRECT [[X]]` page body.
pub fn redirect_target(text: &str) -> Option<String> {
    let t = text.trim_start();
    if !t.get(..9)?.eq_ignore_ascii_case("#redirect") {
        return None;
    }
    let open = t.find("[[")?;
    let close = t[open..].find("]]")? + open;
    let inner = &t[open + 2..close];
    let target = inner.split('|').next()?.split('#').next()?.trim();
    (!target.is_empty()).then(|| target.to_owned())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn link(t: &str, a: &str) -> Segment {
        Segment::Link {
            target: t.into(),
            anchor: a.into(),
        }
    }

    #[test]
    fn links_and_trails() {
        let p = parse_wikitext("The [[cat]]s chased [[Mouse (animal)|]] and [[Dog|a '''dog''']].")
            .unwrap();
        assert_eq!(
            p,
            vec![vec![
                Segment::Text("The ".into()),
                link("cat", "cats"),
                Segment::Text(" chased ".into()),
                link("Mouse (animal)", "Mouse"),
                Segment::Text(" and ".into()),
                link("Dog", "a dog"),
                Segment::Text(".".into()),
            ]]
        );
    }

    #[test]
    fn removes_non_prose() {
        let text = "{{Infobox|name={{nested}}}}\n'''Paris'''<ref name=a>cite [[X]]</ref> is a [[city]].<ref name=a/>\n\n\
                    == History ==\n{| class=wikitable\n|-\n| [[Y]]\n|}\n[[File:P.jpg|thumb|A [[Z]] caption]]\n\
                    <!-- hidden [[W]] -->See [https://e.org site] and [[Category:Cities]][[fr:Paris]].";
        let p = parse_wikitext(text).unwrap();
        assert_eq!(
            p[0],
            vec![
                Segment::Text("Paris is a ".into()),
                link("city", "city"),
                Segment::Text(".".into())
            ]
        );
        assert_eq!(p[1], vec![Segment::Text("See site and .".into())]);
        assert_eq!(p.len(), 2);
    }

    #[test]
    fn section_links_and_colon_links() {
        let p = parse_wikitext("[[Paris#History|history of Paris]] [[:Category:Cities]]").unwrap();
        assert_eq!(p[0][0], link("Paris", "history of Paris"));
        assert_eq!(p[0][1], Segment::Text(" Category:Cities".into()));
    }

    #[test]
    fn unterminated_markup_is_an_error() {
        for bad in [
            "{{Infobox",
            "a [[b",
            "<!-- x",
            "<ref>never closed",
            "{| table",
        ] {
            assert!(
                matches!(parse_wikitext(bad), Err(Error::Format { .. })),
                "{bad}"
            );
        }
        assert!(parse_wikitext("1 < 2 and }} stray").is_ok());
    }

    #[test]
    fn redirects() {
        assert_eq!(
            redirect_target("#REDIRECT [[Paris#x|y]]"),
            Some("Paris".into())
        );
        assert_eq!(
            redirect_target("#redirect[[ France ]]"),
            Some("France".into())
        );
        assert_eq!(redirect_target("Paris is"), None);
    }
}
