//! Command-line descriptors and history literals.

use grl_core::{Action, ActionSpace, History, PerceptId, PerceptSpace};
use serde::de::DeserializeOwned;

/// Parses `name`, `name:key=value,key=value` or an inline TOML table `{ kind = "name", ... }`.
/// Values use TOML syntax, so `probs=[0.2,0.8]` works.
pub fn parse_descriptor<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    let s = s.trim();
    let doc = if s.starts_with('{') {
        format!("d = {s}")
    } else {
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut fields = vec![format!("kind = \"{}\"", kind.trim())];
        for part in split_top_level(rest) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| format!("expected key=value in `{part}`"))?;
            fields.push(format!("{} = {}", k.trim(), v.trim()));
        }
        format!("d = {{ {} }}", fields.join(", "))
    };
    #[derive(serde::Deserialize)]
    struct Wrap<T> {
        d: T,
    }
    toml::from_str::<Wrap<T>>(&doc)
        .map(|w| w.d)
        .map_err(|e| format!("bad descriptor `{s}`: {}", e.message()))
}

fn split_top_level(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let (mut depth, mut start) = (0i32, 0);
    for (i, c) in s.char_indices() {
        match c {
            '[' | '{' => depth += 1,
            ']' | '}' => depth -= 1,
            ',' if depth == 0 => {
                out.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&s[start..]);
    out.into_iter().filter(|p| !p.trim().is_empty()).collect()
}

/// A parse error at a character offset.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("history literal, position {pos}: {msg}")]
pub struct LiteralError {
    pub pos: usize,
    pub msg: String,
}

/// Parses `action:percept` cycles separated by whitespace or commas, e.g. `beta:1 beta:1/2`.
/// The empty string and `ε` denote the empty history.
pub fn parse_history(s: &str, actions: &ActionSpace, percepts: &PerceptSpace) -> Result<History, LiteralError> {
    let mut h = History::new();
    if s.trim() == "ε" {
        return Ok(h);
    }
    for (i, token) in tokens(s) {
        let (a, e) = token.split_once(':').ok_or_else(|| LiteralError {
            pos: i,
            msg: format!("expected action:percept, found `{token}`"),
        })?;
        let a: Action = actions.parse(a).ok_or_else(|| LiteralError {
            pos: i,
            msg: format!("unknown action `{a}`"),
        })?;
        let e: PerceptId = percepts.parse(e).ok_or_else(|| LiteralError {
            pos: i + token.find(':').map_or(0, |k| token[..=k].chars().count()),
            msg: format!("unknown percept `{e}`"),
        })?;
        h.push(a, e);
    }
    Ok(h)
}

/// Tokens with their character (not byte) offsets.
fn tokens(s: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start: Option<(usize, usize)> = None;
    for (ci, (bi, c)) in s.char_indices().enumerate() {
        let sep = c.is_whitespace() || c == ',';
        match (sep, start) {
            (true, Some((cs, bs))) => {
                out.push((cs, &s[bs..bi]));
                start = None;
            }
            (false, None) => start = Some((ci, bi)),
            _ => {}
        }
    }
    if let Some((cs, bs)) = start {
        out.push((cs, &s[bs..]));
    }
    out
}

/// Inverse of [`parse_history`].
pub fn format_history(h: &History, actions: &ActionSpace, percepts: &PerceptSpace) -> String {
    h.cycles()
        .iter()
        .map(|&(a, e)| format!("{}:{}", actions.name(a), percepts.get(e).label))
        .collect::<Vec<_>>()
        .join(" ")
}
