//! Parsing of raw completions into queries, personas and post bodies.

use crate::error::{Error, Result};
use crate::model::{truncate_chars, DESCRIPTION_MAX_CHARS, NAME_MAX_CHARS};
use crate::retrieval::SearchQuery;

/// Queries generated per event.
pub const MAX_QUERIES: usize = 10;

const BULLETS: [char; 4] = ['-', '・', '*', '•'];

/// One query per line, bullets stripped, at most [`MAX_QUERIES`].
pub fn parse_queries(raw: &str) -> Vec<SearchQuery> {
    raw.lines()
        .filter_map(|line| {
            let line = line.trim();
            let line = line.strip_prefix(BULLETS).unwrap_or(line);
            SearchQuery::parse(line.trim())
        })
        .take(MAX_QUERIES)
        .collect()
}

/// Extracts `(name, description)` from a persona completion.
///
/// The prompt ends inside an open `<pre class="name">` tag, so the name is
/// everything up to the first `</pre>` (or the first non-empty line when the
/// tag is never closed). The description is the content of the
/// `user-description` block.
pub fn parse_persona(raw: &str) -> Result<(String, String)> {
    let unparseable = |why: &str| Error::UnparseablePersona(why.to_string());
    let text = raw.trim_start();
    let name = match text.find("</pre>") {
        Some(end) => text[..end].trim(),
        None => text.lines().next().unwrap_or("").trim(),
    };
    if name.is_empty() || name.contains('<') {
        return Err(unparseable("missing user name"));
    }

    let marker = text
        .find("user-description")
        .ok_or_else(|| unparseable("missing user-description block"))?;
    let after_marker = &text[marker..];
    let open_end = after_marker
        .find('>')
        .ok_or_else(|| unparseable("unterminated user-description tag"))?;
    let content = &after_marker[open_end + 1..];
    let content = match content.find("</pre>") {
        Some(end) => &content[..end],
        None => content.trim_start().lines().next().unwrap_or(""),
    };
    let description = content.trim();
    if description.is_empty() {
        return Err(unparseable("empty user description"));
    }

    Ok((
        truncate_chars(name, NAME_MAX_CHARS).trim().to_string(),
        truncate_chars(description, DESCRIPTION_MAX_CHARS).trim().to_string(),
    ))
}

/// Length of a leading `[name]:` or `[name][ReplyTo: target]:` scaffold.
fn scaffold_len(line: &str) -> Option<usize> {
    fn bracket(s: &str) -> Option<usize> {
        let rest = s.strip_prefix('[')?;
        let close = rest.find(']')?;
        (close > 0).then_some(close + 2)
    }
    let mut end = bracket(line)?;
    if line[end..].starts_with("[ReplyTo:") {
        end += bracket(&line[end..])?;
    }
    line[end..].starts_with(':').then_some(end + 1)
}

/// Strips echoed response scaffolding from a post or reply completion.
///
/// A leading `[name]:` or `[name][ReplyTo: x]: [` is removed, generation is
/// cut where the model starts writing another user's post, remaining lines are
/// joined with single spaces, and a trailing unmatched `]` (closing the
/// reply scaffold's bracket) is dropped.
pub fn parse_post_body(raw: &str) -> Result<String> {
    let mut lines = raw.trim().lines();
    let mut parts = Vec::new();
    if let Some(first) = lines.next() {
        let first = first.trim();
        let first = match scaffold_len(first) {
            Some(end) => {
                let rest = first[end..].trim_start();
                rest.strip_prefix('[').unwrap_or(rest)
            }
            None => first,
        };
        parts.push(first.trim());
    }
    for line in lines {
        let line = line.trim();
        if scaffold_len(line).is_some() {
            break;
        }
        parts.push(line);
    }
    let mut body = parts
        .into_iter()
        .filter(|p| !p.is_empty())
        .collect::<Vec<_>>()
        .join(" ");
    if body.ends_with(']') && body.matches(']').count() > body.matches('[').count() {
        body.pop();
    }
    let body = body.trim().to_string();
    if body.is_empty() {
        return Err(Error::EmptyBody);
    }
    Ok(body)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn queries_from_bullets() {
        let qs = parse_queries("- 日銀 金融政策\n- 金利 上昇");
        let raws: Vec<_> = qs.iter().map(|q| q.raw.as_str()).collect();
        assert_eq!(raws, vec!["日銀 金融政策", "金利 上昇"]);
        assert_eq!(qs[0].terms, vec!["日銀", "金融政策"]);
    }

    #[test]
    fn queries_capped_at_ten() {
        let raw: String = (0..12).map(|i| format!("- term{i}\n")).collect();
        let qs = parse_queries(&raw);
        assert_eq!(qs.len(), 10);
        assert_eq!(qs[9].raw, "term9");
    }

    #[test]
    fn queries_edge_cases() {
        assert!(parse_queries("").is_empty());
        assert!(parse_queries("-\n  \n - ").is_empty());
        // Continuation of the ` -` scaffold has no bullet on its first line.
        let qs = parse_queries(" yen rates\n - boj");
        assert_eq!(qs.len(), 2);
    }

    #[test]
    fn persona_well_formed() {
        let raw = "\nkeizai_taro</pre> : \n<pre class=\"user-description\" max-length=\"30\">\nA retired bank economist</pre>\n</div>";
        assert_eq!(
            parse_persona(raw).unwrap(),
            ("keizai_taro".to_string(), "A retired bank economist".to_string())
        );
    }

    #[test]
    fn persona_name_truncated() {
        let name = "abcdefghijklmnopqrstuvwxy";
        let raw = format!("{name}</pre> : <pre class=\"user-description\">desc</pre>");
        let (parsed, _) = parse_persona(&raw).unwrap();
        assert_eq!(parsed, "abcdefghijklmnopqrst");
        assert_eq!(parsed.chars().count(), 20);
    }

    #[test]
    fn persona_description_truncated() {
        let raw = format!("n</pre><pre class=\"user-description\">{}</pre>", "x".repeat(40));
        assert_eq!(parse_persona(&raw).unwrap().1.chars().count(), 30);
    }

    #[test]
    fn persona_without_description_fails() {
        assert!(parse_persona("just_a_name</pre>").is_err());
        assert!(parse_persona("").is_err());
    }

    #[test]
    fn post_body_scaffold_stripped() {
        assert_eq!(parse_post_body("[userA]: こんにちは").unwrap(), "こんにちは");
        assert_eq!(parse_post_body("本文のみ").unwrap(), "本文のみ");
        assert_eq!(
            parse_post_body("[B][ReplyTo: A]: [そうですね]").unwrap(),
            "そうですね"
        );
        assert_eq!(parse_post_body("同感です。]").unwrap(), "同感です。");
        assert_eq!(parse_post_body("[注] 本文").unwrap(), "[注] 本文");
    }

    #[test]
    fn post_body_empty_is_error() {
        assert!(matches!(parse_post_body("   "), Err(Error::EmptyBody)));
        assert!(matches!(parse_post_body("[userA]: "), Err(Error::EmptyBody)));
    }

    #[test]
    fn post_body_stops_at_next_speaker() {
        assert_eq!(
            parse_post_body("first line\nsecond line\n[userB][ReplyTo: A]: hijacked").unwrap(),
            "first line second line"
        );
    }
}
