use std::collections::BTreeSet;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::model::ContextEntity;
use crate::time::{format_wire, Timestamp};

/// Which entities a subscription covers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntitySelector {
    #[serde(rename = "type")]
    pub entity_type: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(rename = "idPattern", default, skip_serializing_if = "Option::is_none")]
    pub id_pattern: Option<String>,
}

impl EntitySelector {
    pub fn of_type(entity_type: &str) -> Self {
        Self {
            entity_type: entity_type.to_string(),
            id: None,
            id_pattern: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Endpoint {
    pub uri: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NotificationParams {
    pub endpoint: Endpoint,
}

/// The body of `POST /subscriptions`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubscriptionRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(rename = "type", default = "subscription_type")]
    pub kind: String,
    pub entities: Vec<EntitySelector>,
    /// Empty means every attribute.
    #[serde(rename = "watchedAttributes", default)]
    pub watched_attributes: Vec<String>,
    pub notification: NotificationParams,
}

fn subscription_type() -> String {
    "Subscription".into()
}

impl SubscriptionRequest {
    pub fn new(types: &[&str], watched: &[&str], endpoint: &str) -> Self {
        Self {
            id: None,
            kind: subscription_type(),
            entities: types.iter().map(|t| EntitySelector::of_type(t)).collect(),
            watched_attributes: watched.iter().map(|s| s.to_string()).collect(),
            notification: NotificationParams {
                endpoint: Endpoint {
                    uri: endpoint.to_string(),
                },
            },
        }
    }

    pub fn validate(&self) -> Result<Vec<Option<Regex>>, String> {
        if self.entities.is_empty() {
            return Err("entities must name at least one entity type".into());
        }
        let mut patterns = Vec::new();
        for sel in &self.entities {
            if sel.entity_type.is_empty() {
                return Err("entity type filter must not be empty".into());
            }
            patterns.push(match &sel.id_pattern {
                Some(p) => Some(Regex::new(p).map_err(|e| format!("idPattern: {e}"))?),
                None => None,
            });
        }
        let uri = &self.notification.endpoint.uri;
        let parsed = reqwest::Url::parse(uri).map_err(|e| format!("endpoint {uri:?}: {e}"))?;
        if !matches!(parsed.scheme(), "http" | "https") || parsed.host().is_none() {
            return Err(format!("endpoint {uri:?} is not an absolute HTTP URL"));
        }
        Ok(patterns)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Subscription {
    pub id: String,
    pub request: SubscriptionRequest,
    pub patterns: Vec<Option<Regex>>,
    pub watched: BTreeSet<String>,
    pub created_at: Timestamp,
}

impl Subscription {
    pub fn matches(&self, entity: &ContextEntity, changed: &[String]) -> bool {
        let selected = self.request.entities.iter().zip(&self.patterns).any(|(sel, pattern)| {
            sel.entity_type == entity.entity_type
                && sel.id.as_deref().is_none_or(|id| id == entity.id.as_str())
                && pattern.as_ref().is_none_or(|p| p.is_match(entity.id.as_str()))
        });
        selected && (self.watched.is_empty() || changed.iter().any(|c| self.watched.contains(c)))
    }

    pub fn describe(&self, delivered: u64) -> Value {
        let mut doc = serde_json::to_value(&self.request).expect("serializable");
        doc["id"] = json!(self.id);
        doc["createdAt"] = json!(format_wire(&self.created_at));
        doc["deliveredCount"] = json!(delivered);
        doc
    }
}

/// The body POSTed to a subscriber.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NotificationPayload {
    pub id: String,
    #[serde(rename = "type")]
    pub kind: String,
    #[serde(rename = "subscriptionId")]
    pub subscription_id: String,
    #[serde(rename = "notifiedAt")]
    pub notified_at: String,
    pub data: Vec<Value>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_must_be_absolute_http() {
        for bad in ["localhost:9000/notify", "ftp://host/x", "/notify", "http://"] {
            let r = SubscriptionRequest::new(&["Flight"], &[], bad);
            assert!(r.validate().is_err(), "{bad}");
        }
        assert!(SubscriptionRequest::new(&["Flight"], &[], "http://127.0.0.1:9000/n")
            .validate()
            .is_ok());
        assert!(SubscriptionRequest::new(&[""], &[], "http://h/n").validate().is_err());
        assert!(SubscriptionRequest::new(&[], &[], "http://h/n").validate().is_err());
    }

    #[test]
    fn ngsi_body_shape() {
        let body = serde_json::json!({
            "type": "Subscription",
            "entities": [{"type": "Flight", "idPattern": "flight-1.*"}],
            "watchedAttributes": ["dateAIBT"],
            "notification": {"endpoint": {"uri": "http://127.0.0.1:1/x"}}
        });
        let r: SubscriptionRequest = serde_json::from_value(body).unwrap();
        assert_eq!(r.watched_attributes, ["dateAIBT"]);
        assert!(r.validate().unwrap()[0].is_some());
    }
}
