use std::io::BufRead;

use quick_xml::events::Event;
use quick_xml::Reader;

use crate::error::{Error, Result};

/// One `<page>` of a MediaWiki XML export.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Page {
    pub id: u64,
    pub title: String,
    /// `<ns>`; 0 for articles. Missing means 0.
    pub namespace: i64,
    /// From `<redirect title=...>`.
    pub redirect: Option<String>,
    pub text: String,
}

#[derive(Default)]
struct Partial {
    id: Option<u64>,
    title: String,
    namespace: i64,
    redirect: Option<String>,
    text: String,
}

/// Reads every page of an XML export, in document order.
///
/// Only `title`, `ns`, the page-level `id`, `redirect` and the revision
/// `text` are kept. Malformed XML is an error naming the byte offset.
pub fn read_dump<R: BufRead>(input: R) -> Result<Vec<Page>> {
    let mut reader = Reader::from_reader(input);
    let mut buf = Vec::new();
    let mut path: Vec<Vec<u8>> = Vec::new();
    let mut page: Option<Partial> = None;
    let mut pages = Vec::new();
    let xml_error = |reader: &Reader<R>, e: &dyn std::fmt::Display| {
        Error::format(reader.error_position(), e.to_string())
    };
    loop {
        let event = reader
            .read_event_into(&mut buf)
            .map_err(|e| xml_error(&reader, &e))?;
        match event {
            Event::Start(e) => {
                let name = e.local_name().as_ref().to_vec();
                if name == b"page" {
                    page = Some(Partial::default());
                }
                path.push(name);
            }
            Event::Empty(e) => {
                if e.local_name().as_ref() == b"redirect" {
                    if let Some(p) = page.as_mut() {
                        if let Some(attr) = e
                            .try_get_attribute("title")
                            .map_err(|e| xml_error(&reader, &e))?
                        {
                            let value =
                                attr.unescape_value().map_err(|e| xml_error(&reader, &e))?;
                            p.redirect = Some(value.into_owned());
                        }
                    }
                }
            }
            Event::End(e) => {
                let name = e.local_name().as_ref().to_vec();
                if path.last() != Some(&name) {
                    return Err(Error::format(
                        reader.buffer_position(),
                        "mismatched end tag",
                    ));
                }
                path.pop();
                if name == b"page" {
                    let p = page.take().expect("page open");
                    let id = p.id.ok_or_else(|| {
                        Error::format(
                            reader.buffer_position(),
                            format!("page {:?} has no id", p.title),
                        )
                    })?;
                    pages.push(Page {
                        id,
                        title: p.title,
                        namespace: p.namespace,
                        redirect: p.redirect,
                        text: p.text,
                    });
                }
            }
            Event::Text(t) => {
                let value = t.unescape().map_err(|e| xml_error(&reader, &e))?;
                append(&mut page, &path, &value, reader.buffer_position())?;
            }
            Event::CData(t) => {
                let value = String::from_utf8_lossy(&t).into_owned();
                append(&mut page, &path, &value, reader.buffer_position())?;
            }
            Event::Eof => break,
            _ => {}
        }
        buf.clear();
    }
    if !path.is_empty() {
        return Err(Error::format(
            reader.buffer_position(),
            "unexpected end of input",
        ));
    }
    Ok(pages)
}

fn append(page: &mut Option<Partial>, path: &[Vec<u8>], value: &str, offset: u64) -> Result<()> {
    let Some(p) = page.as_mut() else {
        return Ok(());
    };
    let n = path.len();
    let (Some(leaf), parent) = (path.last(), n.checked_sub(2).map(|k| path[k].as_slice())) else {
        return Ok(());
    };
    match (leaf.as_slice(), parent) {
        (b"title", Some(b"page")) => p.title.push_str(value),
        (b"ns", Some(b"page")) => {
            p.namespace = value
                .trim()
                .parse()
                .map_err(|_| Error::format(offset, format!("bad namespace {value:?}")))?
        }
        (b"id", Some(b"page")) => {
            p.id = Some(
                value
                    .trim()
                    .parse()
                    .map_err(|_| Error::format(offset, format!("bad page id {value:?}")))?,
            )
        }
        (b"text", Some(b"revision")) => p.text.push_str(value),
        _ => {}
    }
    Ok(())
}

/// [`read_dump`] over an in-memory export.
pub fn parse_dump(bytes: &[u8]) -> Result<Vec<Page>> {
    read_dump(bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_pages() {
        let xml = br#"<mediawiki xmlns="http://www.mediawiki.org/xml/export-0.10/">
<siteinfo><sitename>W</sitename></siteinfo>
<page><title>Paris</title><ns>0</ns><id>7</id><revision><id>99</id><text xml:space="preserve">'''Paris''' &amp; [[France]]</text></revision></page>
<page><title>Lutetia</title><ns>0</ns><id>8</id><redirect title="Paris" /><revision><id>100</id><text>#REDIRECT [[Paris]]</text></revision></page>
</mediawiki>"#;
        let pages = parse_dump(xml).unwrap();
        assert_eq!(pages.len(), 2);
        assert_eq!((pages[0].id, pages[0].title.as_str()), (7, "Paris"));
        assert_eq!(pages[0].text, "'''Paris''' & [[France]]");
        assert_eq!(pages[1].redirect.as_deref(), Some("Paris"));
    }

    #[test]
    fn malformed_xml_reports_offset() {
        let err = parse_dump(b"<mediawiki><page><title>x</titl></page>").unwrap_err();
        assert!(matches!(err, Error::Format { .. }), "{err}");
        assert!(parse_dump(b"<mediawiki><page><title>x</title></page></mediawiki>").is_err());
    }
}
