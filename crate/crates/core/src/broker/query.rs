//! Attribute filters and time windows for entity queries.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use crate::model::{AttrKind, ContextEntity};
use crate::time::{parse_timestamp, Timestamp};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparator {
    Eq,
    Lt,
    Gt,
    Le,
    Ge,
}

impl FromStr for Comparator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "eq" | "==" => Comparator::Eq,
            "lt" | "<" => Comparator::Lt,
            "gt" | ">" => Comparator::Gt,
            "le" | "<=" => Comparator::Le,
            "ge" | ">=" => Comparator::Ge,
            other => return Err(format!("unknown comparator {other:?}")),
        })
    }
}

impl Comparator {
    fn accepts(self, ord: Ordering) -> bool {
        match self {
            Comparator::Eq => ord == Ordering::Equal,
            Comparator::Lt => ord == Ordering::Less,
            Comparator::Gt => ord == Ordering::Greater,
            Comparator::Le => ord != Ordering::Greater,
            Comparator::Ge => ord != Ordering::Less,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Comparator::Eq => "==",
            Comparator::Lt => "<",
            Comparator::Gt => ">",
            Comparator::Le => "<=",
            Comparator::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttrFilter {
    pub attribute: String,
    pub comparator: Comparator,
    pub value: String,
}

impl AttrFilter {
    pub fn new(attribute: &str, comparator: Comparator, value: &str) -> Self {
        Self {
            attribute: attribute.to_string(),
            comparator,
            value: value.to_string(),
        }
    }

    /// Date-times compare chronologically, numbers numerically and anything
    /// else as text. Entities lacking the attribute never match.
    pub fn matches(&self, entity: &ContextEntity) -> bool {
        let Some(attr) = entity.get(&self.attribute) else {
            return false;
        };
        let ord = if let Some(ts) = attr.as_datetime() {
            match parse_timestamp(&self.value) {
                Ok(want) => ts.cmp(&want),
                Err(_) => return false,
            }
        } else if attr.kind == AttrKind::Property && attr.value.is_number() {
            match (attr.as_f64(), self.value.parse::<f64>()) {
                (Some(a), Ok(b)) => match a.partial_cmp(&b) {
                    Some(o) => o,
                    None => return false,
                },
                _ => return false,
            }
        } else if let Some(s) = attr.as_str() {
            s.cmp(self.value.as_str())
        } else if attr.value.is_boolean() {
            attr.value.to_string().as_str().cmp(self.value.as_str())
        } else {
            return false;
        };
        self.comparator.accepts(ord)
    }
}

impl fmt::Display for AttrFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}\"{}\"", self.attribute, self.comparator.symbol(), self.value)
    }
}

/// Parses `name==value;name<value;...`. Values may be double-quoted.
pub fn parse_q(q: &str) -> Result<Vec<AttrFilter>, String> {
    let mut out = Vec::new();
    for term in q.split(';').map(str::trim).filter(|t| !t.is_empty()) {
        let pos = term
            .find(['=', '<', '>', '!', '~'])
            .ok_or_else(|| format!("no comparator in {term:?}"))?;
        let name = term[..pos].trim();
        let rest = &term[pos..];
        let op_len = rest
            .find(|c: char| !matches!(c, '=' | '<' | '>' | '!' | '~'))
            .unwrap_or(rest.len());
        let comparator: Comparator = rest[..op_len].parse()?;
        let value = rest[op_len..].trim();
        let value = value
            .strip_prefix('"')
            .and_then(|v| v.strip_suffix('"'))
            .unwrap_or(value);
        if name.is_empty() {
            return Err(format!("no attribute name in {term:?}"));
        }
        out.push(AttrFilter::new(name, comparator, value));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeRel {
    Before,
    After,
    Between,
}

/// Restricts results by a date-time attribute. `Between` is inclusive at
/// both ends; `Before` and `After` are strict.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeWindow {
    pub property: String,
    pub rel: TimeRel,
    pub at: Timestamp,
    pub end: Option<Timestamp>,
}

impl TimeWindow {
    pub fn between(property: &str, from: Timestamp, to: Timestamp) -> Self {
        Self {
            property: property.to_string(),
            rel: TimeRel::Between,
            at: from,
            end: Some(to),
        }
    }

    pub fn parse(
        timerel: &str,
        property: Option<&str>,
        time_at: Option<&str>,
        end_time_at: Option<&str>,
    ) -> Result<Self, String> {
        let rel = match timerel {
            "before" => TimeRel::Before,
            "after" => TimeRel::After,
            "between" => TimeRel::Between,
            other => return Err(format!("unknown timerel {other:?}")),
        };
        let ts = |name: &str, v: Option<&str>| -> Result<Timestamp, String> {
            let v = v.ok_or_else(|| format!("{name} is required"))?;
            parse_timestamp(v).map_err(|e| e.to_string())
        };
        let at = ts("timeAt", time_at)?;
        let end = match rel {
            TimeRel::Between => Some(ts("endTimeAt", end_time_at)?),
            _ => None,
        };
        if end.is_some_and(|e| e < at) {
            return Err("endTimeAt precedes timeAt".into());
        }
        Ok(Self {
            property: property.unwrap_or("dateScheduled").to_string(),
            rel,
            at,
            end,
        })
    }

    pub fn matches(&self, entity: &ContextEntity) -> bool {
        let Some(ts) = entity.get(&self.property).and_then(|a| a.as_datetime()) else {
            return false;
        };
        match self.rel {
            TimeRel::Before => ts < self.at,
            TimeRel::After => ts > self.at,
            TimeRel::Between => ts >= self.at && self.end.is_some_and(|e| ts <= e),
        }
    }
}
