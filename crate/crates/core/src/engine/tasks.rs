//! Turnaround task lists with dependency-checked status changes.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::EngineError;
use crate::model::records::FLIGHT_NOTIFICATION;
use crate::model::{make_entity_id, EntityId, FlightNotificationRecord, TaskStatus};
use crate::time::Timestamp;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TaskTemplate {
    pub key: String,
    pub description: String,
    #[serde(default)]
    pub depends_on: Vec<String>,
}

fn template(key: &str, description: &str, deps: &[&str]) -> TaskTemplate {
    TaskTemplate {
        key: key.into(),
        description: description.into(),
        depends_on: deps.iter().map(|d| d.to_string()).collect(),
    }
}

/// Deboarding, cleaning and boarding run in sequence; fueling and catering
/// run alongside them; pushback waits for everything.
pub fn default_template() -> Vec<TaskTemplate> {
    vec![
        template("deboarding", "Deboarding", &[]),
        template("cleaning", "Cabin cleaning", &["deboarding"]),
        template("fueling", "Fueling", &[]),
        template("catering", "Catering", &[]),
        template("boarding", "Boarding", &["cleaning"]),
        template("pushback", "Pushback", &["boarding", "fueling", "catering"]),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskPlan {
    pub flight: EntityId,
    /// In template order.
    pub tasks: Vec<FlightNotificationRecord>,
}

/// Rejects unknown dependency keys and cycles.
pub fn check_template(tasks: &[TaskTemplate]) -> Result<(), EngineError> {
    let keys: BTreeSet<&str> = tasks.iter().map(|t| t.key.as_str()).collect();
    if keys.len() != tasks.len() {
        return Err(EngineError::InvalidPlan("task keys must be unique".into()));
    }
    for t in tasks {
        if let Some(d) = t.depends_on.iter().find(|d| !keys.contains(d.as_str())) {
            return Err(EngineError::InvalidPlan(format!(
                "{} depends on unknown task {d}",
                t.key
            )));
        }
    }
    // Kahn's algorithm: anything left over sits on a cycle.
    let mut indegree: BTreeMap<&str, usize> = tasks.iter().map(|t| (t.key.as_str(), t.depends_on.len())).collect();
    let mut ready: Vec<&str> = indegree.iter().filter(|(_, n)| **n == 0).map(|(k, _)| *k).collect();
    let mut seen = 0;
    while let Some(k) = ready.pop() {
        seen += 1;
        for t in tasks.iter().filter(|t| t.depends_on.iter().any(|d| d == k)) {
            let n = indegree.get_mut(t.key.as_str()).expect("known key");
            *n -= 1;
            if *n == 0 {
                ready.push(&t.key);
            }
        }
    }
    if seen != tasks.len() {
        return Err(EngineError::InvalidPlan("task dependencies form a cycle".into()));
    }
    Ok(())
}

pub fn task_id(flight: &EntityId, key: &str) -> Result<EntityId, EngineError> {
    make_entity_id(FLIGHT_NOTIFICATION, &format!("{}-{key}", flight.local_key()))
        .map_err(|e| EngineError::InvalidPlan(e.to_string()))
}

impl TaskPlan {
    /// Every task starts inactive.
    pub fn from_template(
        flight: &EntityId,
        template: &[TaskTemplate],
        issued: Timestamp,
        issuer: &str,
    ) -> Result<Self, EngineError> {
        check_template(template)?;
        let tasks = template
            .iter()
            .map(|t| {
                Ok(FlightNotificationRecord {
                    id: task_id(flight, &t.key)?,
                    description: Some(t.description.clone()),
                    date_issued: Some(issued),
                    date_modified: Some(issued),
                    issuer: Some(issuer.to_string()),
                    status: Some(TaskStatus::Inactive),
                    ref_flight: Some(flight.clone()),
                    depends_on: t
                        .depends_on
                        .iter()
                        .map(|d| task_id(flight, d))
                        .collect::<Result<_, _>>()?,
                })
            })
            .collect::<Result<_, EngineError>>()?;
        Ok(Self {
            flight: flight.clone(),
            tasks,
        })
    }

    /// Rebuilds a plan from stored notifications in the given order.
    pub fn from_records(flight: &EntityId, tasks: Vec<FlightNotificationRecord>) -> Self {
        Self {
            flight: flight.clone(),
            tasks,
        }
    }

    pub fn task(&self, id: &EntityId) -> Option<&FlightNotificationRecord> {
        self.tasks.iter().find(|t| &t.id == id)
    }

    fn status(&self, id: &EntityId) -> TaskStatus {
        self.task(id).and_then(|t| t.status).unwrap_or(TaskStatus::Unknown)
    }
}

/// Moves `task` to `status`. Completing requires every dependency to be
/// completed already. Returns the new plan and the changed task.
pub fn manage_task(
    plan: &TaskPlan,
    task: &EntityId,
    status: TaskStatus,
    at: Timestamp,
) -> Result<(TaskPlan, FlightNotificationRecord), EngineError> {
    let idx = plan
        .tasks
        .iter()
        .position(|t| &t.id == task)
        .ok_or_else(|| EngineError::UnknownTask(task.to_string()))?;
    let current = plan.tasks[idx].status.unwrap_or(TaskStatus::Unknown);
    if !current.can_transition_to(status) {
        return Err(EngineError::IllegalTransition {
            task: task.to_string(),
            from: current,
            to: status,
        });
    }
    if status == TaskStatus::Completed {
        if let Some(blocking) = plan.tasks[idx]
            .depends_on
            .iter()
            .find(|d| plan.status(d) != TaskStatus::Completed)
        {
            return Err(EngineError::Blocked {
                task: task.to_string(),
                blocking: blocking.to_string(),
            });
        }
    }
    let mut next = plan.clone();
    let t = &mut next.tasks[idx];
    t.status = Some(status);
    t.date_modified = Some(match t.date_issued {
        Some(issued) if issued > at => issued,
        _ => at,
    });
    let changed = t.clone();
    Ok((next, changed))
}
