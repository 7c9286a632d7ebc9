//! Named fenced blocks (```TAG ... ```) and `KEY: value` fields inside
//! free-form agent output.

use alloc::string::String;

/// Body of the first fenced block tagged `tag` (case-insensitive).
pub fn find_block<'a>(text: &'a str, tag: &str) -> Option<&'a str> {
    let mut rest = text;
    while let Some(open) = rest.find("```") {
        let after = &rest[open + 3..];
        let line_end = after.find('\n')?;
        let label = after[..line_end].trim();
        let body_start = &after[line_end + 1..];
        let close = body_start.find("```")?;
        if label.eq_ignore_ascii_case(tag) {
            return Some(&body_start[..close]);
        }
        rest = &body_start[close + 3..];
    }
    None
}

/// Value of the last `KEY: value` line whose key matches `key` (case-insensitive).
pub fn find_field<'a>(text: &'a str, key: &str) -> Option<&'a str> {
    let mut found = None;
    for line in text.lines() {
        let line = line.trim().trim_start_matches(['*', '-', '#', ' ']);
        if let Some((k, v)) = line.split_once(':') {
            if k.trim().trim_matches('*').eq_ignore_ascii_case(key) {
                found = Some(v.trim().trim_matches('*').trim());
            }
        }
    }
    found
}

/// Wraps `body` in a fenced block tagged `tag`.
pub fn fence(tag: &str, body: &str) -> String {
    let mut s = String::with_capacity(body.len() + tag.len() + 10);
    s.push_str("```");
    s.push_str(tag);
    s.push('\n');
    s.push_str(body);
    if !body.ends_with('\n') {
        s.push('\n');
    }
    s.push_str("```\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_tagged_block() {
        let t = "intro\n```python\nx\n```\n```REWARD\nterm a weight 1 = speed\n```\ntrailer";
        assert_eq!(find_block(t, "reward"), Some("term a weight 1 = speed\n"));
        assert_eq!(find_block(t, "curriculum"), None);
        assert_eq!(find_block("```REWARD\nunterminated", "REWARD"), None);
    }

    #[test]
    fn finds_fields() {
        assert_eq!(find_field("blah\nBEST_BRANCH: 2\n", "best_branch"), Some("2"));
        assert_eq!(find_field("**SCORE:** 7", "SCORE"), Some("7"));
        assert_eq!(find_field("no fields", "SCORE"), None);
    }

    #[test]
    fn fence_roundtrip() {
        let f = fence("PLAN", "hello");
        assert_eq!(find_block(&f, "PLAN"), Some("hello\n"));
    }
}
