use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Wpfm,
    SlmXapp,
    MlXapp,
    LegacyXapp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationStatus {
    Unvalidated,
    Validated,
    Deployed,
    Retired,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeploymentRecord {
    pub t: f64,
    pub action: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCatalogEntry {
    pub model_id: String,
    pub kind: ModelKind,
    pub version: u32,
    pub task_tag: String,
    pub supported_classes: Vec<String>,
    pub validation_status: ValidationStatus,
    #[serde(default)]
    pub deployment_history: Vec<DeploymentRecord>,
    /// Configuration snapshot, frozen at registration.
    #[serde(default)]
    pub config: Value,
}

impl ModelCatalogEntry {
    pub fn new(
        model_id: &str,
        kind: ModelKind,
        version: u32,
        task_tag: &str,
        classes: &[&str],
    ) -> Self {
        Self {
            model_id: model_id.into(),
            kind,
            version,
            task_tag: task_tag.into(),
            supported_classes: classes.iter().map(|c| c.to_string()).collect(),
            validation_status: ValidationStatus::Unvalidated,
            deployment_history: Vec::new(),
            config: Value::Null,
        }
    }

    pub fn with_config(mut self, config: Value) -> Self {
        self.config = config;
        self
    }
}

/// Catalog-wide audit trail entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogEvent {
    pub t: f64,
    pub model_id: String,
    pub version: Option<u32>,
    pub action: String,
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("{model_id} v{version} is already registered")]
    Duplicate { model_id: String, version: u32 },
    #[error("{model_id} v{version} is not registered")]
    Unknown { model_id: String, version: u32 },
    #[error("{model_id} v{version} is {status:?}; expected {expected:?}")]
    WrongStatus {
        model_id: String,
        version: u32,
        status: ValidationStatus,
        expected: ValidationStatus,
    },
    #[error("catalog file: {0}")]
    Io(#[from] std::io::Error),
    #[error("catalog file: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum RollbackOutcome {
    Redeployed {
        model_id: String,
        retired: u32,
        restored: u32,
        config: Value,
    },
    /// No earlier validated version exists; control falls back to the
    /// legacy rule-based path.
    FallbackLegacy { model_id: String },
}

/// Append-only registry of model variants.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelCatalog {
    entries: Vec<ModelCatalogEntry>,
    history: Vec<CatalogEvent>,
}

impl ModelCatalog {
    pub fn entries(&self) -> &[ModelCatalogEntry] {
        &self.entries
    }

    pub fn history(&self) -> &[CatalogEvent] {
        &self.history
    }

    pub fn get(&self, model_id: &str, version: u32) -> Option<&ModelCatalogEntry> {
        self.entries
            .iter()
            .find(|e| e.model_id == model_id && e.version == version)
    }

    pub fn deployed(&self, model_id: &str) -> Option<&ModelCatalogEntry> {
        self.entries
            .iter()
            .find(|e| e.model_id == model_id && e.validation_status == ValidationStatus::Deployed)
    }

    pub fn deployed_for_task(&self, task_tag: &str) -> Option<&ModelCatalogEntry> {
        self.entries
            .iter()
            .find(|e| e.task_tag == task_tag && e.validation_status == ValidationStatus::Deployed)
    }

    pub fn latest_version(&self, model_id: &str) -> Option<u32> {
        self.entries
            .iter()
            .filter(|e| e.model_id == model_id)
            .map(|e| e.version)
            .max()
    }

    /// Validated, not deployed entries serving `task_tag`, newest first.
    pub fn validated_alternatives(&self, task_tag: &str) -> Vec<&ModelCatalogEntry> {
        let mut v: Vec<&ModelCatalogEntry> = self
            .entries
            .iter()
            .filter(|e| {
                e.task_tag == task_tag && e.validation_status == ValidationStatus::Validated
            })
            .collect();
        v.sort_by(|a, b| b.version.cmp(&a.version).then(a.model_id.cmp(&b.model_id)));
        v
    }

    fn note(&mut self, t: f64, model_id: &str, version: Option<u32>, action: &str) {
        self.history.push(CatalogEvent {
            t,
            model_id: model_id.into(),
            version,
            action: action.into(),
        });
    }

    fn index(&self, model_id: &str, version: u32) -> Result<usize, CatalogError> {
        self.entries
            .iter()
            .position(|e| e.model_id == model_id && e.version == version)
            .ok_or_else(|| CatalogError::Unknown {
                model_id: model_id.into(),
                version,
            })
    }

    /// Stores `entry` as unvalidated.
    pub fn register(&mut self, mut entry: ModelCatalogEntry, t: f64) -> Result<(), CatalogError> {
        if self.get(&entry.model_id, entry.version).is_some() {
            return Err(CatalogError::Duplicate {
                model_id: entry.model_id,
                version: entry.version,
            });
        }
        entry.validation_status = ValidationStatus::Unvalidated;
        entry.deployment_history.push(DeploymentRecord {
            t,
            action: "register".into(),
        });
        self.note(t, &entry.model_id, Some(entry.version), "register");
        self.entries.push(entry);
        Ok(())
    }

    pub fn validate(&mut self, model_id: &str, version: u32, t: f64) -> Result<(), CatalogError> {
        let i = self.index(model_id, version)?;
        let e = &mut self.entries[i];
        if e.validation_status != ValidationStatus::Unvalidated {
            return Err(CatalogError::WrongStatus {
                model_id: model_id.into(),
                version,
                status: e.validation_status,
                expected: ValidationStatus::Unvalidated,
            });
        }
        e.validation_status = ValidationStatus::Validated;
        e.deployment_history.push(DeploymentRecord {
            t,
            action: "validate".into(),
        });
        self.note(t, model_id, Some(version), "validate");
        Ok(())
    }

    /// Deploys a validated version; the previously deployed version of the
    /// same model returns to validated.
    pub fn deploy(&mut self, model_id: &str, version: u32, t: f64) -> Result<(), CatalogError> {
        let i = self.index(model_id, version)?;
        let status = self.entries[i].validation_status;
        if status != ValidationStatus::Validated {
            return Err(CatalogError::WrongStatus {
                model_id: model_id.into(),
                version,
                status,
                expected: ValidationStatus::Validated,
            });
        }
        for e in self.entries.iter_mut().filter(|e| e.model_id == model_id) {
            if e.validation_status == ValidationStatus::Deployed {
                e.validation_status = ValidationStatus::Validated;
                e.deployment_history.push(DeploymentRecord {
                    t,
                    action: "undeploy".into(),
                });
            }
        }
        let e = &mut self.entries[i];
        e.validation_status = ValidationStatus::Deployed;
        e.deployment_history.push(DeploymentRecord {
            t,
            action: "deploy".into(),
        });
        self.note(t, model_id, Some(version), "deploy");
        Ok(())
    }

    /// Retires the deployed version and redeploys the newest earlier
    /// validated one, or reports a legacy fallback if there is none.
    pub fn rollback(&mut self, model_id: &str, t: f64) -> RollbackOutcome {
        let current = self.deployed(model_id).map(|e| e.version);
        let prior = self
            .entries
            .iter()
            .filter(|e| {
                e.model_id == model_id
                    && e.validation_status == ValidationStatus::Validated
                    && current.is_none_or(|c| e.version < c)
            })
            .map(|e| e.version)
            .max();
        let (Some(cur), Some(prev)) = (current, prior) else {
            self.note(t, model_id, current, "fallback_legacy");
            return RollbackOutcome::FallbackLegacy {
                model_id: model_id.into(),
            };
        };
        for e in self.entries.iter_mut().filter(|e| e.model_id == model_id) {
            if e.version == cur {
                e.validation_status = ValidationStatus::Retired;
                e.deployment_history.push(DeploymentRecord {
                    t,
                    action: "retire".into(),
                });
            } else if e.version == prev {
                e.validation_status = ValidationStatus::Deployed;
                e.deployment_history.push(DeploymentRecord {
                    t,
                    action: "redeploy".into(),
                });
            }
        }
        self.note(t, model_id, Some(cur), "retire");
        self.note(t, model_id, Some(prev), "redeploy");
        RollbackOutcome::Redeployed {
            model_id: model_id.into(),
            retired: cur,
            restored: prev,
            config: self
                .get(model_id, prev)
                .map(|e| e.config.clone())
                .unwrap_or_default(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("catalog serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, CatalogError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), CatalogError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CatalogError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn wpfm(v: u32) -> ModelCatalogEntry {
        ModelCatalogEntry::new(
            "wpfm",
            ModelKind::Wpfm,
            v,
            "technology_recognition",
            &["lte", "nr", "wifi"],
        )
        .with_config(serde_json::json!({"checkpoint": format!("wpfm-{v}"), "lr": 1e-4}))
    }

    fn deployed_count(c: &ModelCatalog, id: &str) -> usize {
        c.entries()
            .iter()
            .filter(|e| e.model_id == id && e.validation_status == ValidationStatus::Deployed)
            .count()
    }

    #[test]
    fn register_and_duplicate() {
        let mut c = ModelCatalog::default();
        c.register(wpfm(1), 0.0).unwrap();
        assert_eq!(
            c.get("wpfm", 1).unwrap().validation_status,
            ValidationStatus::Unvalidated
        );
        assert!(matches!(
            c.register(wpfm(1), 1.0),
            Err(CatalogError::Duplicate { .. })
        ));
        c.validate("wpfm", 1, 0.0).unwrap();
        c.deploy("wpfm", 1, 0.0).unwrap();
        c.register(wpfm(2), 2.0).unwrap();
        assert_eq!(c.deployed("wpfm").unwrap().version, 1);
        assert_eq!(deployed_count(&c, "wpfm"), 1);
    }

    #[test]
    fn rollback_walks_history() {
        let mut c = ModelCatalog::default();
        for v in 1..=3 {
            c.register(wpfm(v), 0.0).unwrap();
            c.validate("wpfm", v, 0.0).unwrap();
            c.deploy("wpfm", v, f64::from(v)).unwrap();
        }
        let snapshot = c.get("wpfm", 2).unwrap().config.clone();
        match c.rollback("wpfm", 10.0) {
            RollbackOutcome::Redeployed {
                retired,
                restored,
                config,
                ..
            } => {
                assert_eq!((retired, restored), (3, 2));
                assert_eq!(
                    serde_json::to_string(&config).unwrap(),
                    serde_json::to_string(&snapshot).unwrap()
                );
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(
            c.get("wpfm", 3).unwrap().validation_status,
            ValidationStatus::Retired
        );
        assert!(matches!(
            c.rollback("wpfm", 11.0),
            RollbackOutcome::Redeployed { restored: 1, .. }
        ));
        assert!(matches!(
            c.rollback("wpfm", 12.0),
            RollbackOutcome::FallbackLegacy { .. }
        ));
        assert_eq!(c.deployed("wpfm").unwrap().version, 1);
    }

    #[test]
    fn only_version_falls_back() {
        let mut c = ModelCatalog::default();
        c.register(wpfm(1), 0.0).unwrap();
        c.validate("wpfm", 1, 0.0).unwrap();
        c.deploy("wpfm", 1, 0.0).unwrap();
        assert!(matches!(
            c.rollback("wpfm", 5.0),
            RollbackOutcome::FallbackLegacy { .. }
        ));
    }

    #[test]
    fn json_round_trip() {
        let mut c = ModelCatalog::default();
        c.register(wpfm(1), 0.0).unwrap();
        c.validate("wpfm", 1, 0.5).unwrap();
        let dir = std::env::temp_dir().join(format!("catalog-{}.json", std::process::id()));
        c.save(&dir).unwrap();
        assert_eq!(ModelCatalog::load(&dir).unwrap(), c);
        std::fs::remove_file(dir).ok();
    }

    #[derive(Debug, Clone)]
    enum Op {
        Register(u32),
        Validate(u32),
        Deploy(u32),
        Rollback,
    }

    fn op() -> impl Strategy<Value = Op> {
        prop_oneof![
            (1u32..6).prop_map(Op::Register),
            (1u32..6).prop_map(Op::Validate),
            (1u32..6).prop_map(Op::Deploy),
            Just(Op::Rollback),
        ]
    }

    proptest! {
        #[test]
        fn at_most_one_deployed_and_history_grows(ops in prop::collection::vec(op(), 1..40)) {
            let mut c = ModelCatalog::default();
            let mut history_len = 0;
            for (k, op) in ops.into_iter().enumerate() {
                let t = k as f64;
                let _ = match op {
                    Op::Register(v) => c.register(wpfm(v), t).map(|_| ()),
                    Op::Validate(v) => c.validate("wpfm", v, t),
                    Op::Deploy(v) => c.deploy("wpfm", v, t),
                    Op::Rollback => { c.rollback("wpfm", t); Ok(()) }
                };
                prop_assert!(deployed_count(&c, "wpfm") <= 1);
                prop_assert!(c.history().len() >= history_len);
                history_len = c.history().len();
            }
        }
    }
}
