use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Key(String),
    Index(usize),
}

/// A small JSONPath subset: `$`, `.name`, `['name']` and `[index]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JsonPath {
    raw: String,
    segments: Vec<Segment>,
}

impl JsonPath {
    pub fn root() -> Self {
        Self {
            raw: "$".into(),
            segments: Vec::new(),
        }
    }

    pub fn resolve<'a>(&self, doc: &'a Value) -> Option<&'a Value> {
        self.segments.iter().try_fold(doc, |cur, seg| match seg {
            Segment::Key(k) => cur.as_object()?.get(k),
            Segment::Index(i) => cur.as_array()?.get(*i),
        })
    }

    pub fn as_str(&self) -> &str {
        &self.raw
    }
}

impl fmt::Display for JsonPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.raw)
    }
}

impl FromStr for JsonPath {
    type Err = String;

    fn from_str(raw: &str) -> Result<Self, Self::Err> {
        let err = |why: &str| format!("invalid path {raw:?}: {why}");
        let rest = raw.strip_prefix('$').ok_or_else(|| err("must start with '$'"))?;
        let chars: Vec<char> = rest.chars().collect();
        let mut segments = Vec::new();
        let mut i = 0;
        while i < chars.len() {
            match chars[i] {
                '.' => {
                    let start = i + 1;
                    let mut end = start;
                    while end < chars.len() && chars[end] != '.' && chars[end] != '[' {
                        end += 1;
                    }
                    if end == start {
                        return Err(err("empty name after '.'"));
                    }
                    segments.push(Segment::Key(chars[start..end].iter().collect()));
                    i = end;
                }
                '[' => {
                    let close = chars[i..]
                        .iter()
                        .position(|c| *c == ']')
                        .map(|p| p + i)
                        .ok_or_else(|| err("unclosed '['"))?;
                    let inner: String = chars[i + 1..close].iter().collect();
                    let quoted = inner
                        .strip_prefix('\'')
                        .and_then(|s| s.strip_suffix('\''))
                        .or_else(|| inner.strip_prefix('"').and_then(|s| s.strip_suffix('"')));
                    match quoted {
                        Some(name) => segments.push(Segment::Key(name.to_string())),
                        None => segments.push(Segment::Index(inner.trim().parse().map_err(|_| err("bad index"))?)),
                    }
                    i = close + 1;
                }
                c => return Err(err(&format!("unexpected character {c:?}"))),
            }
        }
        Ok(Self {
            raw: raw.to_string(),
            segments,
        })
    }
}

impl Serialize for JsonPath {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.raw)
    }
}

impl<'de> Deserialize<'de> for JsonPath {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn resolves_nested_paths() {
        let doc = json!({"a": {"b c": [10, {"d": true}]}});
        let p: JsonPath = "$.a['b c'][1].d".parse().unwrap();
        assert_eq!(p.resolve(&doc), Some(&json!(true)));
        let root: JsonPath = "$".parse().unwrap();
        assert_eq!(root.resolve(&doc), Some(&doc));
        let missing: JsonPath = "$.a.zz".parse().unwrap();
        assert_eq!(missing.resolve(&doc), None);
    }

    #[test]
    fn rejects_malformed() {
        for bad in ["a.b", "$.", "$[", "$[x]", "$..a"] {
            assert!(bad.parse::<JsonPath>().is_err(), "{bad}");
        }
    }
}
