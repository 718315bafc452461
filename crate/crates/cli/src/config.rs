//! JSON experiment configs with per-key validation.

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::fmt;

use fiberdim::num::parse_rational;
use fiberdim::Rational;
use num_bigint::BigUint;
use serde_json::{Map, Value};

/// A config problem tied to the offending key.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config key \"{}\": {}", self.key, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn err(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        key: key.to_string(),
        message: message.into(),
    }
}

/// Keys accepted by every experiment.
const COMMON: &[&str] = &["experiment", "out", "description"];

#[derive(Debug)]
pub struct Config {
    pub experiment: String,
    params: Map<String, Value>,
    used: RefCell<BTreeSet<String>>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let v: Value =
            serde_json::from_str(text).map_err(|e| err("<root>", format!("invalid JSON: {e}")))?;
        Self::from_value(v)
    }

    pub fn from_value(v: Value) -> Result<Self, ConfigError> {
        let Value::Object(params) = v else {
            return Err(err("<root>", "config must be a JSON object"));
        };
        let experiment = match params.get("experiment") {
            Some(Value::String(s)) => s.clone(),
            Some(_) => return Err(err("experiment", "must be a string")),
            None => return Err(err("experiment", "missing")),
        };
        Ok(Self {
            experiment,
            params,
            used: RefCell::new(BTreeSet::new()),
        })
    }

    /// Parameters as given, for echoing into results.
    pub fn params(&self) -> &Map<String, Value> {
        &self.params
    }

    pub fn out_dir(&self) -> Option<String> {
        self.params
            .get("out")
            .and_then(Value::as_str)
            .map(str::to_string)
    }

    fn get(&self, key: &str) -> Option<&Value> {
        self.used.borrow_mut().insert(key.to_string());
        self.params.get(key)
    }

    fn required(&self, key: &str) -> Result<&Value, ConfigError> {
        self.get(key).ok_or_else(|| err(key, "missing"))
    }

    pub fn u64(&self, key: &str) -> Result<u64, ConfigError> {
        as_u64(key, self.required(key)?)
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64, ConfigError> {
        self.get(key).map_or(Ok(default), |v| as_u64(key, v))
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        self.u64_or(key, default as u64).map(|v| v as usize)
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.as_f64().ok_or_else(|| err(key, "must be a number")),
        }
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.as_bool().ok_or_else(|| err(key, "must be a boolean")),
        }
    }

    pub fn str_or(&self, key: &str, default: &str) -> Result<String, ConfigError> {
        match self.get(key) {
            None => Ok(default.to_string()),
            Some(v) => v
                .as_str()
                .map(str::to_string)
                .ok_or_else(|| err(key, "must be a string")),
        }
    }

    pub fn rational_or(&self, key: &str, default: Rational) -> Result<Rational, ConfigError> {
        self.get(key).map_or(Ok(default), |v| as_rational(key, v))
    }

    pub fn u64_list_or(&self, key: &str, default: &[u64]) -> Result<Vec<u64>, ConfigError> {
        match self.get(key) {
            None => Ok(default.to_vec()),
            Some(v) => as_list(key, v)?.iter().map(|x| as_u64(key, x)).collect(),
        }
    }

    pub fn biguint_list(&self, key: &str) -> Result<Vec<BigUint>, ConfigError> {
        as_list(key, self.required(key)?)?
            .iter()
            .map(|x| as_biguint(key, x))
            .collect()
    }

    pub fn biguint_list_or(&self, key: &str, default: &[u64]) -> Result<Vec<BigUint>, ConfigError> {
        if self.params.contains_key(key) {
            self.biguint_list(key)
        } else {
            self.get(key);
            Ok(default.iter().map(|&v| BigUint::from(v)).collect())
        }
    }

    pub fn rational_list_or(
        &self,
        key: &str,
        default: &[Rational],
    ) -> Result<Vec<Rational>, ConfigError> {
        match self.get(key) {
            None => Ok(default.to_vec()),
            Some(v) => as_list(key, v)?.iter().map(|x| as_rational(key, x)).collect(),
        }
    }

    pub fn value(&self, key: &str) -> Option<Value> {
        self.get(key).cloned()
    }

    /// Seeds from `"seeds"` (list), or `"seed"` with `"seed_count"` consecutive values.
    pub fn seeds(&self) -> Result<Vec<u64>, ConfigError> {
        if self.params.contains_key("seeds") {
            let s = self.u64_list_or("seeds", &[])?;
            if s.is_empty() {
                return Err(err("seeds", "must not be empty"));
            }
            return Ok(s);
        }
        let first = self.u64("seed")?;
        let count = self.u64_or("seed_count", 1)?;
        if count == 0 {
            return Err(err("seed_count", "must be >= 1"));
        }
        Ok((first..first + count).collect())
    }

    /// Rejects keys no accessor asked for.
    pub fn finish(&self) -> Result<(), ConfigError> {
        let used = self.used.borrow();
        match self
            .params
            .keys()
            .find(|k| !COMMON.contains(&k.as_str()) && !used.contains(*k))
        {
            Some(k) => Err(err(k, "unknown key for this experiment")),
            None => Ok(()),
        }
    }
}

fn as_u64(key: &str, v: &Value) -> Result<u64, ConfigError> {
    v.as_u64()
        .ok_or_else(|| err(key, "must be a non-negative integer"))
}

fn as_list<'a>(key: &str, v: &'a Value) -> Result<&'a Vec<Value>, ConfigError> {
    v.as_array().ok_or_else(|| err(key, "must be an array"))
}

fn as_biguint(key: &str, v: &Value) -> Result<BigUint, ConfigError> {
    match v {
        Value::Number(n) => n
            .as_u64()
            .map(BigUint::from)
            .ok_or_else(|| err(key, "entries must be non-negative integers")),
        Value::String(s) => s
            .parse()
            .map_err(|_| err(key, format!("cannot parse integer {s:?}"))),
        _ => Err(err(key, "entries must be integers or decimal strings")),
    }
}

fn as_rational(key: &str, v: &Value) -> Result<Rational, ConfigError> {
    match v {
        Value::Number(n) => n
            .as_i64()
            .map(|i| Rational::from_integer(i.into()))
            .ok_or_else(|| err(key, "use a \"p/q\" string for non-integers")),
        Value::String(s) => parse_rational(s).map_err(|e| err(key, e.to_string())),
        _ => Err(err(key, "must be an integer or a \"p/q\" string")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn missing_and_unknown_keys() {
        let c = Config::from_value(json!({"experiment": "x", "depth": 3, "typo": 1})).unwrap();
        assert_eq!(c.u64("seed").unwrap_err().key, "seed");
        assert_eq!(c.u64_or("depth", 1).unwrap(), 3);
        assert_eq!(c.finish().unwrap_err().key, "typo");
        assert_eq!(Config::parse("[]").unwrap_err().key, "<root>");
        assert_eq!(Config::parse("{}").unwrap_err().key, "experiment");
    }

    #[test]
    fn typed_values() {
        let c = Config::from_value(json!({"experiment": "x", "eps": "1/4", "a": [2, "3"],
            "seed": 5, "seed_count": 3}))
        .unwrap();
        assert_eq!(
            c.rational_or("eps", Rational::from_integer(0.into())).unwrap(),
            Rational::new(1.into(), 4.into())
        );
        assert_eq!(c.biguint_list("a").unwrap(), vec![BigUint::from(2u32), BigUint::from(3u32)]);
        assert_eq!(c.seeds().unwrap(), vec![5, 6, 7]);
        assert!(c.finish().is_ok());
        let bad = Config::from_value(json!({"experiment": "x", "eps": 0.25})).unwrap();
        assert_eq!(bad.rational_or("eps", Rational::from_integer(0.into())).unwrap_err().key, "eps");
    }
}
