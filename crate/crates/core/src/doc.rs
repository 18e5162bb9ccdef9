//! Versioned JSON envelope shared by every file the tool reads or writes.
//!
//! ```json
//! { "schema": "resilex.design/1", "tool_version": "0.1.0",
//!   "inputs": { "design": "<sha256>" }, "body": { ... } }
//! ```

use std::collections::BTreeMap;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const DESIGN_SCHEMA: &str = "resilex.design/1";
pub const PROFILE_SCHEMA: &str = "resilex.profile/1";
pub const CATALOG_SCHEMA: &str = "resilex.catalog/1";
pub const PLAN_SCHEMA: &str = "resilex.plan/1";
pub const REPORT_SCHEMA: &str = "resilex.report/1";
pub const RULES_SCHEMA: &str = "resilex.rules/1";
pub const GROUPING_SCHEMA: &str = "resilex.grouping/1";
pub const ENUMERATION_SCHEMA: &str = "resilex.enumeration/1";
pub const DEPENDENCE_SCHEMA: &str = "resilex.dependence/1";
pub const CAMPAIGN_SCHEMA: &str = "resilex.campaign/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Document<T> {
    pub schema: String,
    pub tool_version: String,
    /// Content hashes of the inputs the body was derived from, keyed by role.
    #[serde(default)]
    pub inputs: BTreeMap<String, String>,
    pub body: T,
}

impl<T: Serialize + DeserializeOwned> Document<T> {
    pub fn new(schema: &str, body: T) -> Self {
        Self { schema: schema.to_string(), tool_version: TOOL_VERSION.to_string(), inputs: BTreeMap::new(), body }
    }

    pub fn with_input(mut self, role: &str, hash: impl Into<String>) -> Self {
        self.inputs.insert(role.to_string(), hash.into());
        self
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Parses a document and checks its schema tag.
    pub fn from_json(text: &str, schema: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let found = value.get("schema").and_then(|s| s.as_str()).unwrap_or("<missing>");
        if found != schema {
            return Err(Error::SchemaMismatch { expected: schema.into(), found: found.into() });
        }
        Ok(serde_json::from_value(value)?)
    }
}
