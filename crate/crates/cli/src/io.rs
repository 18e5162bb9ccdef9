//! File plumbing: hashed reads, versioned writes.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use resilex_core::catalog::{load_catalog, TechniqueCatalog};
use resilex_core::doc::{DESIGN_SCHEMA, PLAN_SCHEMA, PROFILE_SCHEMA};
use resilex_core::eval::ProtectionPlan;
use resilex_core::{DesignModel, Document, VulnerabilityProfile, TOOL_VERSION};
use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Environment variable naming the catalog used when `--catalog` is absent.
pub const CATALOG_ENV: &str = "RESILEX_CATALOG";

pub fn sha256(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Input hashes collected while a command runs, keyed by role.
#[derive(Default)]
pub struct Inputs(pub BTreeMap<String, String>);

impl Inputs {
    pub fn read(&mut self, role: &str, path: &Path) -> Result<String> {
        let bytes =
            fs::read(path).map_err(anyhow::Error::from).with_context(|| format!("reading {}", path.display()))?;
        self.0.insert(role.to_string(), sha256(&bytes));
        String::from_utf8(bytes).with_context(|| format!("{} is not UTF-8", path.display()))
    }

    pub fn note(&mut self, role: &str, text: &str) {
        self.0.insert(role.to_string(), sha256(text.as_bytes()));
    }

    pub fn doc<T: Serialize + DeserializeOwned>(&mut self, role: &str, path: &Path, schema: &str) -> Result<T> {
        let text = self.read(role, path)?;
        let doc = Document::<T>::from_json(&text, schema).with_context(|| format!("parsing {}", path.display()))?;
        Ok(doc.body)
    }

    pub fn design(&mut self, path: &Path) -> Result<DesignModel> {
        let d: DesignModel = self.doc("design", path, DESIGN_SCHEMA)?;
        d.validate()?;
        Ok(d)
    }

    pub fn profile(&mut self, path: &Path) -> Result<VulnerabilityProfile> {
        let p: VulnerabilityProfile = self.doc("profile", path, PROFILE_SCHEMA)?;
        p.validate()?;
        Ok(p)
    }

    /// `empty` stands for the plan with no protection at all.
    pub fn plan(&mut self, arg: &str) -> Result<ProtectionPlan> {
        if arg == "empty" {
            self.note("plan", "empty");
            return Ok(ProtectionPlan { name: "empty".into(), ..ProtectionPlan::empty() });
        }
        self.doc("plan", Path::new(arg), PLAN_SCHEMA)
    }

    /// `--catalog`, else the path in the environment, else the built-in.
    pub fn catalog(&mut self, flag: Option<&PathBuf>) -> Result<TechniqueCatalog> {
        let path = flag.cloned().or_else(|| std::env::var_os(CATALOG_ENV).map(PathBuf::from));
        match path {
            Some(p) => {
                let text = self.read("catalog", &p)?;
                load_catalog(&text).with_context(|| format!("loading catalog {}", p.display()))
            }
            None => {
                let cat = TechniqueCatalog::default();
                self.note("catalog", &cat.to_document().to_json()?);
                Ok(cat)
            }
        }
    }

    pub fn wrap<T: Serialize + DeserializeOwned>(&self, schema: &str, body: T) -> Document<T> {
        let mut d = Document::new(schema, body);
        d.inputs = self.0.clone();
        d
    }

    /// First line of every CSV output.
    pub fn csv_banner(&self) -> String {
        let inputs: Vec<String> = self.0.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!("# resilex {TOOL_VERSION} inputs: {}\n", inputs.join(" "))
    }
}

pub fn write_doc<T: Serialize + DeserializeOwned>(path: &Path, doc: &Document<T>) -> Result<()> {
    write(path, doc.to_json()?.as_bytes())
}

pub fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

/// Renders CSV through `f` behind the provenance banner.
pub fn write_csv(path: &Path, inputs: &Inputs, f: impl FnOnce(&mut Vec<u8>) -> resilex_core::Result<()>) -> Result<()> {
    let mut buf = inputs.csv_banner().into_bytes();
    f(&mut buf)?;
    write(path, &buf)
}
