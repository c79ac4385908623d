//! URI pattern matching for MANDATE action and resource scopes.
//!
//! Glob semantics: `*` matches within one path segment, `**` matches across
//! segments. Scheme and host are compared case-insensitively and may not
//! contain wildcards; path comparison is case-sensitive.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PatternError {
    #[error("malformed pattern: {0}")]
    MalformedPattern(String),
}

#[derive(Debug)]
struct ParsedUri<'a> {
    scheme: String,
    host: String,
    segments: Vec<&'a str>,
}

fn parse_uri(input: &str) -> Option<ParsedUri<'_>> {
    let (scheme, rest) = input.split_once("://")?;
    if scheme.is_empty() {
        return None;
    }
    let (host, path) = match rest.split_once('/') {
        Some((h, p)) => (h, p),
        None => (rest, ""),
    };
    if host.is_empty() {
        return None;
    }
    let segments = if path.is_empty() {
        Vec::new()
    } else {
        path.split('/').collect()
    };
    Some(ParsedUri {
        scheme: scheme.to_ascii_lowercase(),
        host: host.to_ascii_lowercase(),
        segments,
    })
}

fn parse_pattern(pattern: &str) -> Result<ParsedUri<'_>, PatternError> {
    if pattern.is_empty() {
        return Err(PatternError::MalformedPattern("empty pattern".into()));
    }
    let parsed =
        parse_uri(pattern).ok_or_else(|| PatternError::MalformedPattern(pattern.to_string()))?;
    if parsed.scheme.contains('*') || parsed.host.contains('*') {
        return Err(PatternError::MalformedPattern(format!(
            "wildcards are only permitted in the path: {pattern}"
        )));
    }
    Ok(parsed)
}

/// Does `pattern` match the action URI?
///
/// An action that is not a parseable URI matches nothing.
pub fn match_uri_pattern(pattern: &str, action: &str) -> Result<bool, PatternError> {
    let pat = parse_pattern(pattern)?;
    let Some(act) = parse_uri(action) else {
        return Ok(false);
    };
    if pat.scheme != act.scheme || pat.host != act.host {
        return Ok(false);
    }
    Ok(match_segments(&pat.segments, &act.segments))
}

fn match_segments(pattern: &[&str], action: &[&str]) -> bool {
    match pattern.split_first() {
        None => action.is_empty(),
        Some((&"**", rest)) => (0..=action.len()).any(|i| match_segments(rest, &action[i..])),
        Some((seg, rest)) => match action.split_first() {
            Some((first, action_rest)) => {
                glob_segment(seg, first) && match_segments(rest, action_rest)
            }
            None => false,
        },
    }
}

/// Single-segment glob: `*` matches any run of characters within the segment.
fn glob_segment(pattern: &str, text: &str) -> bool {
    let pat: Vec<char> = pattern.chars().collect();
    let txt: Vec<char> = text.chars().collect();
    glob_chars(&pat, &txt)
}

fn glob_chars(pattern: &[char], text: &[char]) -> bool {
    match pattern.split_first() {
        None => text.is_empty(),
        Some(('*', rest)) => (0..=text.len()).any(|i| glob_chars(rest, &text[i..])),
        Some((c, rest)) => match text.split_first() {
            Some((t, text_rest)) => c == t && glob_chars(rest, text_rest),
            None => false,
        },
    }
}

/// Conservative syntactic check that every action matched by `child` is also
/// matched by `parent`.
///
/// Exact subset checking for glob languages is not decidable from pattern
/// text alone, so ambiguous combinations are rejected:
///
/// - a parent `**` segment covers any child suffix,
/// - a parent `*` segment covers exactly one child segment of any content
///   except `**`,
/// - a parent segment with embedded wildcards covers an identical child
///   segment or a literal child segment it glob-matches,
/// - a literal parent segment covers only the identical child segment.
///
/// `false` therefore means "not provably a subset", not "provably broader".
pub fn pattern_covers(parent: &str, child: &str) -> Result<bool, PatternError> {
    let par = parse_pattern(parent)?;
    let chi = parse_pattern(child)?;
    if par.scheme != chi.scheme || par.host != chi.host {
        return Ok(false);
    }
    Ok(covers_segments(&par.segments, &chi.segments))
}

fn covers_segments(parent: &[&str], child: &[&str]) -> bool {
    match parent.split_first() {
        None => child.is_empty(),
        Some((&"**", rest)) => (0..=child.len()).any(|i| covers_segments(rest, &child[i..])),
        Some((pseg, prest)) => {
            let Some((cseg, crest)) = child.split_first() else {
                return false;
            };
            let seg_ok = if *cseg == "**" {
                false // multi-segment child scope needs a parent `**`
            } else if cseg.contains('*') {
                *pseg == "*" || pseg == cseg
            } else {
                glob_segment(pseg, cseg)
            };
            seg_ok && covers_segments(prest, crest)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn double_star_crosses_segments() {
        assert!(match_uri_pattern("https://api.shop/**", "https://api.shop/orders/42").unwrap());
        assert!(match_uri_pattern("https://api.shop/**", "https://api.shop").unwrap());
        assert!(!match_uri_pattern("https://api.shop/**", "https://other.shop/x").unwrap());
    }

    #[test]
    fn single_star_stays_in_segment() {
        assert!(
            match_uri_pattern("https://api.shop/orders/*", "https://api.shop/orders/42").unwrap()
        );
        assert!(!match_uri_pattern(
            "https://api.shop/orders/*",
            "https://api.shop/orders/42/cancel"
        )
        .unwrap());
    }

    #[test]
    fn exact_pattern_matches_itself() {
        let uri = "https://api.shop/orders/42";
        assert!(match_uri_pattern(uri, uri).unwrap());
    }

    #[test]
    fn embedded_star_within_segment() {
        assert!(match_uri_pattern("https://cdn.x/img-*.png", "https://cdn.x/img-17.png").unwrap());
        assert!(!match_uri_pattern("https://cdn.x/img-*.png", "https://cdn.x/img-17.jpg").unwrap());
    }

    #[test]
    fn scheme_and_host_case_insensitive_path_sensitive() {
        assert!(match_uri_pattern("HTTPS://API.Shop/a", "https://api.shop/a").unwrap());
        assert!(!match_uri_pattern("https://api.shop/A", "https://api.shop/a").unwrap());
    }

    #[test]
    fn malformed_patterns_rejected() {
        assert!(match_uri_pattern("", "https://x/y").is_err());
        assert!(match_uri_pattern("no-scheme/path", "https://x/y").is_err());
        assert!(match_uri_pattern("https://ho*st/path", "https://host/path").is_err());
        // Unparseable actions simply do not match.
        assert!(!match_uri_pattern("https://x/y", "not a uri").unwrap());
    }

    #[test]
    fn coverage_basics() {
        assert!(pattern_covers("https://api.shop/**", "https://api.shop/orders/*").unwrap());
        assert!(pattern_covers("https://api.shop/orders/*", "https://api.shop/orders/42").unwrap());
        assert!(pattern_covers("https://api.shop/a/b", "https://api.shop/a/b").unwrap());
        // Child `**` is broader than parent `*`.
        assert!(
            !pattern_covers("https://api.shop/orders/*", "https://api.shop/orders/**").unwrap()
        );
        // Sibling scope is not covered.
        assert!(!pattern_covers("https://api.shop/orders/**", "https://api.shop/users/1").unwrap());
        // Different host never covers.
        assert!(!pattern_covers("https://api.shop/**", "https://api.other/**").unwrap());
    }

    #[test]
    fn coverage_is_conservative_on_embedded_globs() {
        // "or*" would in fact cover "ord*", but that requires reasoning about
        // glob language inclusion; the syntactic check rejects it.
        assert!(!pattern_covers("https://x/or*", "https://x/ord*").unwrap());
        // Identical embedded globs are fine.
        assert!(pattern_covers("https://x/or*", "https://x/or*").unwrap());
        // Parent single segment star covers any single child segment.
        assert!(pattern_covers("https://x/*", "https://x/or*").unwrap());
    }

    // Soundness: whenever covers(parent, child) holds, every action matched
    // by the child is matched by the parent, checked over a small enumerated
    // action universe.
    #[test]
    fn coverage_sound_over_enumerated_universe() {
        let patterns = [
            "https://api.shop/**",
            "https://api.shop/orders/*",
            "https://api.shop/orders/**",
            "https://api.shop/orders/42",
            "https://api.shop/*/42",
            "https://api.shop/or*",
            "https://api.shop/users/1",
            "https://api.shop/*",
        ];
        let universe = [
            "https://api.shop",
            "https://api.shop/orders",
            "https://api.shop/orders/42",
            "https://api.shop/orders/7",
            "https://api.shop/orders/42/cancel",
            "https://api.shop/users/1",
            "https://api.shop/users/42",
            "https://api.shop/ordinary",
        ];
        for parent in &patterns {
            for child in &patterns {
                if pattern_covers(parent, child).unwrap() {
                    for action in &universe {
                        if match_uri_pattern(child, action).unwrap() {
                            assert!(
                                match_uri_pattern(parent, action).unwrap(),
                                "covers({parent}, {child}) but {action} escapes the parent"
                            );
                        }
                    }
                }
            }
        }
    }
}
