//! HTTP client for the broker API.

use reqwest::StatusCode;
use serde_json::Value;

use super::query::{AttrFilter, TimeRel, TimeWindow};
use super::store::{BrokerMetrics, UpsertOutcome};
use super::subscription::SubscriptionRequest;
use crate::model::{parse_entity, ContextEntity, EntityId};
use crate::time::format_wire;

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("cannot reach {url}: {reason}")]
    Unreachable { url: String, reason: String },
    #[error("{status}: {body}")]
    Rejected { status: u16, body: String },
    #[error("not found: {0}")]
    NotFound(String),
    #[error("unexpected response: {0}")]
    Decode(String),
}

#[derive(Debug, Clone)]
pub struct BrokerClient {
    base: String,
    http: reqwest::Client,
}

impl BrokerClient {
    pub fn new(base: &str) -> Self {
        Self::with_client(base, reqwest::Client::new())
    }

    pub fn with_client(base: &str, http: reqwest::Client) -> Self {
        Self {
            base: base.trim_end_matches('/').to_string(),
            http,
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    async fn send(&self, req: reqwest::RequestBuilder) -> Result<reqwest::Response, ClientError> {
        let resp = req.send().await.map_err(|e| ClientError::Unreachable {
            url: self.base.clone(),
            reason: e.to_string(),
        })?;
        let status = resp.status();
        if status.is_success() {
            return Ok(resp);
        }
        let body = resp.text().await.unwrap_or_default();
        if status == StatusCode::NOT_FOUND {
            return Err(ClientError::NotFound(body));
        }
        Err(ClientError::Rejected {
            status: status.as_u16(),
            body,
        })
    }

    async fn json(resp: reqwest::Response) -> Result<Value, ClientError> {
        resp.json().await.map_err(|e| ClientError::Decode(e.to_string()))
    }

    pub async fn upsert_document(&self, doc: &Value) -> Result<UpsertOutcome, ClientError> {
        let resp = self
            .send(self.http.post(format!("{}/entities", self.base)).json(doc))
            .await?;
        Ok(if resp.status() == StatusCode::CREATED {
            UpsertOutcome::Created
        } else {
            UpsertOutcome::Updated
        })
    }

    pub async fn upsert(&self, entity: &ContextEntity) -> Result<UpsertOutcome, ClientError> {
        self.upsert_document(&entity.to_json()).await
    }

    pub async fn get(&self, id: &EntityId) -> Result<ContextEntity, ClientError> {
        let resp = self.send(self.http.get(format!("{}/entities/{id}", self.base))).await?;
        let doc = Self::json(resp).await?;
        parse_entity(&doc).map_err(|e| ClientError::Decode(e.to_string()))
    }

    pub async fn delete(&self, id: &EntityId) -> Result<(), ClientError> {
        self.send(self.http.delete(format!("{}/entities/{id}", self.base)))
            .await
            .map(|_| ())
    }

    pub async fn query(
        &self,
        entity_type: &str,
        filters: &[AttrFilter],
        window: Option<&TimeWindow>,
    ) -> Result<Vec<ContextEntity>, ClientError> {
        let mut params = vec![("type".to_string(), entity_type.to_string())];
        if !filters.is_empty() {
            let q: Vec<String> = filters.iter().map(ToString::to_string).collect();
            params.push(("q".into(), q.join(";")));
        }
        if let Some(w) = window {
            let rel = match w.rel {
                TimeRel::Before => "before",
                TimeRel::After => "after",
                TimeRel::Between => "between",
            };
            params.push(("timerel".into(), rel.into()));
            params.push(("timeproperty".into(), w.property.clone()));
            params.push(("timeAt".into(), format_wire(&w.at)));
            if let Some(end) = &w.end {
                params.push(("endTimeAt".into(), format_wire(end)));
            }
        }
        let resp = self
            .send(self.http.get(format!("{}/entities", self.base)).query(&params))
            .await?;
        let docs = Self::json(resp).await?;
        docs.as_array()
            .ok_or_else(|| ClientError::Decode("expected an array".into()))?
            .iter()
            .map(|d| parse_entity(d).map_err(|e| ClientError::Decode(e.to_string())))
            .collect()
    }

    pub async fn subscribe(&self, request: &SubscriptionRequest) -> Result<String, ClientError> {
        let resp = self
            .send(self.http.post(format!("{}/subscriptions", self.base)).json(request))
            .await?;
        let body = Self::json(resp).await?;
        body["id"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| ClientError::Decode("subscription id missing".into()))
    }

    pub async fn unsubscribe(&self, id: &str) -> Result<(), ClientError> {
        self.send(self.http.delete(format!("{}/subscriptions/{id}", self.base)))
            .await
            .map(|_| ())
    }

    pub async fn status(&self) -> Result<BrokerMetrics, ClientError> {
        let resp = self.send(self.http.get(format!("{}/status", self.base))).await?;
        Self::json(resp)
            .await
            .and_then(|v| serde_json::from_value(v).map_err(|e| ClientError::Decode(e.to_string())))
    }
}
