//! Flat `key = value` configuration with `[section]` headers.

use dftfunclab::{LabError, Result};
use std::collections::BTreeMap;
use std::str::FromStr;

#[derive(Debug, Default, Clone)]
pub struct Config {
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Config::default();
        let mut section = String::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| LabError::Input(format!("config line {}: expected `key = value`", n + 1)))?;
            cfg.sections.entry(section.clone()).or_default().insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(cfg)
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections.get(section).and_then(|s| s.get(key)).map(String::as_str)
    }
}

/// Resolves each parameter from its flag, then the config section, then a default,
/// and records the resolved text for the output and the run manifest.
pub struct Resolver<'a> {
    config: &'a Config,
    section: &'a str,
    pub resolved: BTreeMap<String, String>,
}

impl<'a> Resolver<'a> {
    pub fn new(config: &'a Config, section: &'a str) -> Self {
        Resolver { config, section, resolved: BTreeMap::new() }
    }

    fn lookup(&mut self, key: &str, flag: Option<String>) -> Option<String> {
        let text = flag.or_else(|| self.config.get(self.section, key).map(str::to_string))?;
        self.resolved.insert(key.to_string(), text.clone());
        Some(text)
    }

    pub fn optional<T: FromStr>(&mut self, key: &str, flag: Option<String>) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.lookup(key, flag) {
            None => Ok(None),
            Some(text) => text.parse::<T>().map(Some).map_err(|e| LabError::Input(format!("--{key} `{text}`: {e}"))),
        }
    }

    pub fn value<T: FromStr>(&mut self, key: &str, flag: Option<String>, default: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let flag = flag.or_else(|| self.config.get(self.section, key).map(str::to_string)).or_else(|| Some(default.to_string()));
        Ok(self.optional(key, flag)?.expect("default supplied"))
    }

    pub fn required<T: FromStr>(&mut self, key: &str, flag: Option<String>) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.optional(key, flag)?.ok_or_else(|| LabError::Input(format!("missing --{key}")))
    }

    pub fn list(&mut self, key: &str, flag: Option<String>, default: &str) -> Result<Vec<f64>> {
        let text: String = self.value(key, flag, default)?;
        parse_list(&text).map_err(|e| LabError::Input(format!("--{key}: {e}")))
    }
}

pub fn parse_list(text: &str) -> std::result::Result<Vec<f64>, std::num::ParseFloatError> {
    text.split(',').filter(|t| !t.trim().is_empty()).map(|t| t.trim().parse::<f64>()).collect()
}

/// `start:stop:factor`, a geometric sweep including both ends when they align.
pub fn parse_geometric(text: &str) -> Result<Vec<f64>> {
    let parts = parse_list(&text.replace(':', ",")).map_err(|e| LabError::Input(format!("sweep `{text}`: {e}")))?;
    let [start, stop, factor] = parts[..] else {
        return Err(LabError::Input(format!("sweep `{text}` must be start:stop:factor")));
    };
    if !(start > 0.0 && stop >= start && factor > 1.0) {
        return Err(LabError::Input(format!("sweep `{text}` needs 0 < start <= stop and factor > 1")));
    }
    let mut out = Vec::new();
    let mut k = 0;
    loop {
        let x = start * factor.powi(k);
        if x > stop * (1.0 + 1e-12) {
            break;
        }
        out.push(x);
        k += 1;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_and_comments() {
        let cfg = Config::parse("top = 1\n[sce]\n n = 3 # particles\nkernel=riesz:1\n").unwrap();
        assert_eq!(cfg.get("", "top"), Some("1"));
        assert_eq!(cfg.get("sce", "n"), Some("3"));
        assert_eq!(cfg.get("sce", "kernel"), Some("riesz:1"));
        assert!(Config::parse("[a]\nnot a pair\n").is_err());
    }

    #[test]
    fn flag_beats_config() {
        let cfg = Config::parse("[zeta]\ns = 2\nlattice = BCC\n").unwrap();
        let mut r = Resolver::new(&cfg, "zeta");
        let s: f64 = r.value("s", Some("1".into()), "3").unwrap();
        let lat: String = r.value("lattice", None, "Z1").unwrap();
        let tol: f64 = r.value("tol", None, "1e-8").unwrap();
        assert_eq!((s, lat.as_str(), tol), (1.0, "BCC", 1e-8));
        assert_eq!(r.resolved.len(), 3);
    }

    #[test]
    fn geometric_sweep() {
        assert_eq!(parse_geometric("1e3:1e6:10").unwrap().len(), 4);
        assert!(parse_geometric("1:2").is_err());
    }
}
