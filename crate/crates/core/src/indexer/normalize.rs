//! Raw content to plain-text [`Document`]s.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{ContentKind, Document};
use crate::text::collapse_whitespace;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NormalizeError {
    #[error("content is not valid UTF-8: {0}")]
    Decode(String),
    #[error("document {0} is empty after normalization")]
    Empty(String),
    #[error("pdf extraction failed: {0}")]
    Extraction(String),
}

/// Everything about a document except its body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub id: String,
    pub url: String,
    pub domain: String,
    pub title: String,
    pub author: Option<String>,
    pub published_at: DateTime<Utc>,
    pub modified_at: Option<DateTime<Utc>>,
}

/// Turns PDF bytes into text. Swap in a real extractor for production PDFs.
pub trait PdfTextExtractor: Send + Sync {
    fn extract(&self, bytes: &[u8]) -> Result<String, NormalizeError>;
}

/// Reads literal strings shown by `Tj`/`TJ` operators in uncompressed
/// content streams. Compressed streams yield nothing.
#[derive(Debug, Default, Clone, Copy)]
pub struct LiteralStringPdfExtractor;

impl PdfTextExtractor for LiteralStringPdfExtractor {
    fn extract(&self, bytes: &[u8]) -> Result<String, NormalizeError> {
        if !bytes.starts_with(b"%PDF") {
            return Err(NormalizeError::Extraction("missing %PDF header".into()));
        }
        let mut out = String::new();
        let mut i = 0;
        let mut in_text = false;
        while i < bytes.len() {
            if bytes[i..].starts_with(b"BT") {
                in_text = true;
                i += 2;
                continue;
            }
            if bytes[i..].starts_with(b"ET") {
                in_text = false;
                out.push(' ');
                i += 2;
                continue;
            }
            if in_text && bytes[i] == b'(' {
                let mut depth = 1;
                i += 1;
                while i < bytes.len() && depth > 0 {
                    match bytes[i] {
                        b'\\' if i + 1 < bytes.len() => {
                            let c = bytes[i + 1];
                            out.push(match c {
                                b'n' => '\n',
                                b't' => '\t',
                                other => other as char,
                            });
                            i += 2;
                            continue;
                        }
                        b'(' => depth += 1,
                        b')' => depth -= 1,
                        _ => {}
                    }
                    if depth > 0 {
                        out.push(bytes[i] as char);
                    }
                    i += 1;
                }
                continue;
            }
            i += 1;
        }
        Ok(out)
    }
}

const SKIPPED_ELEMENTS: [&str; 4] = ["script", "style", "noscript", "template"];
const INLINE_ELEMENTS: [&str; 16] = [
    "a", "abbr", "b", "bdi", "cite", "code", "em", "i", "kbd", "mark", "q", "s", "small", "span",
    "strong", "u",
];

fn tag_name(tag: &str) -> String {
    tag.trim_start_matches('/')
        .split(|c: char| c.is_whitespace() || c == '/' || c == '>')
        .next()
        .unwrap_or("")
        .to_ascii_lowercase()
}

fn decode_entity(entity: &str) -> Option<char> {
    match entity {
        "amp" => Some('&'),
        "lt" => Some('<'),
        "gt" => Some('>'),
        "quot" => Some('"'),
        "apos" => Some('\''),
        "nbsp" => Some(' '),
        _ => {
            let num = entity.strip_prefix('#')?;
            let code = match num.strip_prefix(['x', 'X']) {
                Some(hex) => u32::from_str_radix(hex, 16).ok()?,
                None => num.parse().ok()?,
            };
            char::from_u32(code)
        }
    }
}

/// Strips markup, drops script/style content and decodes common entities.
/// Block-level tags become spaces; inline tags vanish.
pub fn html_to_text(html: &str) -> String {
    let mut out = String::with_capacity(html.len());
    let mut rest = html;
    while let Some(pos) = rest.find(['<', '&']) {
        out.push_str(&rest[..pos]);
        rest = &rest[pos..];
        if rest.starts_with('&') {
            let end = rest[1..].find(';').filter(|&e| e <= 10);
            match end.and_then(|e| decode_entity(&rest[1..=e]).map(|c| (e, c))) {
                Some((e, c)) => {
                    out.push(c);
                    rest = &rest[e + 2..];
                }
                None => {
                    out.push('&');
                    rest = &rest[1..];
                }
            }
            continue;
        }
        if rest.starts_with("<!--") {
            rest = rest.find("-->").map_or("", |e| &rest[e + 3..]);
            out.push(' ');
            continue;
        }
        let Some(close) = rest.find('>') else {
            // unterminated tag: drop the remainder
            rest = "";
            break;
        };
        let inner = &rest[1..close];
        let name = tag_name(inner);
        rest = &rest[close + 1..];
        if !inner.starts_with('/') && SKIPPED_ELEMENTS.contains(&name.as_str()) {
            let closing = format!("</{name}");
            let lower = rest.to_ascii_lowercase();
            rest = match lower.find(&closing) {
                Some(p) => rest[p..].find('>').map_or("", |e| &rest[p + e + 1..]),
                None => "",
            };
            out.push(' ');
            continue;
        }
        if !INLINE_ELEMENTS.contains(&name.as_str()) {
            out.push(' ');
        }
    }
    out.push_str(rest);
    out
}

/// Builds a plain-text document from raw content.
pub fn normalize_document(
    raw: &[u8],
    kind: ContentKind,
    provenance: Provenance,
    pdf: &dyn PdfTextExtractor,
) -> Result<Document, NormalizeError> {
    let text = match kind {
        ContentKind::Pdf => pdf.extract(raw)?,
        ContentKind::Html | ContentKind::Plain => {
            let s = std::str::from_utf8(raw).map_err(|e| NormalizeError::Decode(e.to_string()))?;
            if kind == ContentKind::Html {
                html_to_text(s)
            } else {
                s.to_string()
            }
        }
    };
    let body = collapse_whitespace(&text);
    if body.is_empty() {
        return Err(NormalizeError::Empty(provenance.id));
    }
    Ok(Document {
        id: provenance.id,
        url: provenance.url,
        domain: provenance.domain.trim().to_lowercase(),
        title: collapse_whitespace(&provenance.title),
        author: provenance.author,
        published_at: provenance.published_at,
        modified_at: provenance.modified_at,
        body,
        content_kind: kind,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn prov() -> Provenance {
        Provenance {
            id: "d".into(),
            url: "https://Example.org/x".into(),
            domain: "Example.ORG".into(),
            title: "t".into(),
            author: None,
            published_at: Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap(),
            modified_at: None,
        }
    }

    fn norm(raw: &str, kind: ContentKind) -> Result<Document, NormalizeError> {
        normalize_document(raw.as_bytes(), kind, prov(), &LiteralStringPdfExtractor)
    }

    #[test]
    fn strips_tags() {
        assert_eq!(norm("<p>Hello <b>world</b></p>", ContentKind::Html).unwrap().body, "Hello world");
    }

    #[test]
    fn collapses_whitespace() {
        assert_eq!(norm("a\n\n  b", ContentKind::Plain).unwrap().body, "a b");
    }

    #[test]
    fn drops_script_content() {
        assert_eq!(norm("<script>x</script>ok", ContentKind::Html).unwrap().body, "ok");
        assert_eq!(
            norm("<STYLE type=\"text/css\">p{}</STYLE><div>a</div><div>b</div>", ContentKind::Html)
                .unwrap()
                .body,
            "a b"
        );
    }

    #[test]
    fn inline_tags_do_not_split_words() {
        assert_eq!(html_to_text("wor<b>ld</b>").trim(), "world");
        assert_eq!(collapse_whitespace(&html_to_text("a<br>b")), "a b");
    }

    #[test]
    fn decodes_entities_and_comments() {
        assert_eq!(
            collapse_whitespace(&html_to_text("Tom &amp; Jerry<!-- hidden --> &#65;&#x42; &bogus; 3 &lt; 4")),
            "Tom & Jerry AB &bogus; 3 < 4"
        );
    }

    #[test]
    fn lowercases_domain() {
        assert_eq!(norm("x", ContentKind::Plain).unwrap().domain, "example.org");
    }

    #[test]
    fn empty_after_normalization() {
        assert_eq!(norm("<script>only</script>  ", ContentKind::Html), Err(NormalizeError::Empty("d".into())));
    }

    #[test]
    fn invalid_utf8_is_decode_error() {
        let err = normalize_document(&[0xff, 0xfe], ContentKind::Plain, prov(), &LiteralStringPdfExtractor);
        assert!(matches!(err, Err(NormalizeError::Decode(_))));
    }

    #[test]
    fn pdf_literal_strings() {
        let pdf = b"%PDF-1.4\n1 0 obj << >> stream\nBT /F1 12 Tf (Hello) Tj ( world \\(ok\\)) Tj ET\nendstream";
        let d = normalize_document(pdf, ContentKind::Pdf, prov(), &LiteralStringPdfExtractor).unwrap();
        assert_eq!(d.body, "Hello world (ok)");
        assert!(normalize_document(b"not a pdf", ContentKind::Pdf, prov(), &LiteralStringPdfExtractor).is_err());
    }
}
