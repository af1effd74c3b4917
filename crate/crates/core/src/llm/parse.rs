//! Response parsers. Every function here is total: it returns a value or a
//! [`Malformed`] error, never panics.

use super::templates::OUTPUT_DELIMITER;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Malformed(pub String);

const FENCE: &str = "```";

/// Parses a list response into at most `n` items.
///
/// Leading numbering (`1.`, `1)`) and bullets (`-`, `*`, `•`) are stripped and
/// blank lines dropped. Fewer than half of `n` items is malformed.
pub fn use_cases(response: &str, n: usize) -> Result<Vec<String>, Malformed> {
    let mut items: Vec<String> = response
        .lines()
        .map(strip_list_marker)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect();
    if items.len() * 2 < n || items.is_empty() {
        return Err(Malformed(format!("expected {n} use cases, parsed {}", items.len())));
    }
    items.truncate(n);
    Ok(items)
}

fn strip_list_marker(line: &str) -> &str {
    let t = line.trim();
    let digits = t.bytes().take_while(u8::is_ascii_digit).count();
    let t = if digits > 0 && matches!(t.as_bytes().get(digits), Some(b'.') | Some(b')')) {
        &t[digits + 1..]
    } else if let Some(rest) = t.strip_prefix(['-', '*', '•']) {
        rest
    } else {
        t
    };
    t.trim()
}

/// Removes one outermost fence pair (and its language tag line) when the
/// trimmed text both starts and ends with a fence; otherwise returns the text
/// unchanged. Surrounding whitespace inside the fence is trimmed.
pub fn strip_fence(response: &str) -> &str {
    let t = response.trim();
    if t.len() < 2 * FENCE.len() || !t.starts_with(FENCE) || !t.ends_with(FENCE) {
        return response;
    }
    let inner = &t[FENCE.len()..t.len() - FENCE.len()];
    let body = match inner.find('\n') {
        // The opening line holds only an optional language tag.
        Some(nl) if !inner[..nl].trim().contains(char::is_whitespace) => &inner[nl + 1..],
        Some(_) => inner,
        None => inner,
    };
    body.trim_matches(|c| c == '\n' || c == '\r')
}

/// Code text from a program-generation or annotation response.
pub fn code_body(response: &str) -> Result<String, Malformed> {
    let body = strip_fence(response);
    if body.trim().is_empty() {
        return Err(Malformed("empty code response".into()));
    }
    Ok(body.to_string())
}

/// Contents of every fenced block, in order. Unterminated blocks are ignored;
/// fragments are trimmed of surrounding whitespace.
pub fn fenced_blocks(response: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut rest = response;
    while let Some(open) = rest.find(FENCE) {
        let after = &rest[open + FENCE.len()..];
        let Some(close) = after.find(FENCE) else { break };
        let inner = &after[..close];
        let body = match inner.find('\n') {
            Some(nl) if !inner[..nl].trim().contains(char::is_whitespace) && !inner[nl + 1..].trim().is_empty() => {
                &inner[nl + 1..]
            }
            _ => inner,
        };
        out.push(body.trim().to_string());
        rest = &after[close + FENCE.len()..];
    }
    out
}

/// The trimmed remainder of the first line starting with `Name:`.
pub fn cluster_name(response: &str) -> Result<String, Malformed> {
    response
        .lines()
        .map(|l| l.trim_start().trim_start_matches(['*', '#', ' ']))
        .find_map(|l| l.strip_prefix("Name:"))
        .map(|rest| rest.trim().trim_matches('*').trim().trim_matches('"').trim().to_string())
        .filter(|n| !n.is_empty())
        .ok_or_else(|| Malformed("no `Name:` line in response".into()))
}

/// Everything after the last `OUTPUT:` marker, minus the line break that
/// follows it and any trailing newlines.
pub fn predicted_output(response: &str) -> Result<String, Malformed> {
    let at = response
        .rfind(OUTPUT_DELIMITER)
        .ok_or_else(|| Malformed(format!("no `{OUTPUT_DELIMITER}` section in response")))?;
    let rest = &response[at + OUTPUT_DELIMITER.len()..];
    let rest = rest.strip_prefix(' ').unwrap_or(rest);
    let rest = rest.strip_prefix("\r\n").or_else(|| rest.strip_prefix('\n')).unwrap_or(rest);
    Ok(rest.trim_end_matches(['\n', '\r']).to_string())
}
