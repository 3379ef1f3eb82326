//! Flat key-value run configuration: built-in defaults, then an INI file
//! (global keys first, then the `[command]` section), then command-line
//! overrides.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use ini::Ini;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Params {
    values: BTreeMap<String, String>,
    known: Vec<&'static str>,
}

impl Params {
    pub fn with_defaults(defaults: &[(&'static str, &str)]) -> Self {
        Params {
            values: defaults
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
            known: defaults.iter().map(|(k, _)| *k).collect(),
        }
    }

    /// Overlay keys from `path`. Unknown keys are rejected so typos surface.
    pub fn load_ini(&mut self, path: &Path, command: &str) -> Result<()> {
        let ini = Ini::load_from_file(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        for section in [None, Some(command)] {
            if let Some(props) = ini.section(section) {
                for (k, v) in props.iter() {
                    self.set(k, v)?;
                }
            }
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('_', "-");
        if !self.known.iter().any(|k| *k == key) {
            bail!("unknown key '{key}' (known: {})", self.known.join(", "));
        }
        self.values.insert(key, value.trim().to_string());
        Ok(())
    }

    pub fn set_opt<T: ToString>(&mut self, key: &str, value: &Option<T>) -> Result<()> {
        match value {
            Some(v) => self.set(key, &v.to_string()),
            None => Ok(()),
        }
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or("")
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.raw(key);
        raw.parse::<T>()
            .map_err(|e| anyhow!("{key} = '{raw}': {e}"))
    }

    pub fn opt<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        if self.raw(key).is_empty() {
            Ok(None)
        } else {
            self.get(key).map(Some)
        }
    }

    pub fn flag(&self, key: &str) -> Result<bool> {
        match self.raw(key) {
            "true" | "yes" | "1" | "on" => Ok(true),
            "false" | "no" | "0" | "off" | "" => Ok(false),
            other => bail!("{key} = '{other}' is not a boolean"),
        }
    }

    pub fn list(&self, key: &str) -> Result<Vec<f64>> {
        parse_scales(self.raw(key)).with_context(|| format!("parsing {key}"))
    }

    /// All resolved values, as recorded in the manifest.
    pub fn values(&self) -> &BTreeMap<String, String> {
        &self.values
    }
}

/// `"16..512"` (powers of two between the ends) or a comma list.
pub fn parse_scales(s: &str) -> Result<Vec<f64>> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(Vec::new());
    }
    if let Some((a, b)) = s.split_once("..") {
        let lo: f64 = a.trim().parse().context("range start")?;
        let hi: f64 = b.trim().parse().context("range end")?;
        if !(lo > 0.0 && hi >= lo && lo.log2().fract() == 0.0) {
            bail!("dyadic range '{s}' needs a power-of-two start and end >= start");
        }
        let mut out = Vec::new();
        let mut x = lo;
        while x <= hi {
            out.push(x);
            x *= 2.0;
        }
        return Ok(out);
    }
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| anyhow!("'{t}': {e}")))
        .collect()
}
