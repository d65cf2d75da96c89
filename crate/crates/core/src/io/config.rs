//! Flat `key = value` config files. `#` starts a comment; blank lines are
//! ignored; list values are comma-separated.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Config {
    entries: BTreeMap<String, (String, usize)>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut offset = 0;
        for (n, raw) in text.split_inclusive('\n').enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if !line.is_empty() {
                let (key, value) = line.split_once('=').ok_or_else(|| Error::Format {
                    offset: offset as u64,
                    message: format!("line {}: expected `key = value`", n + 1),
                })?;
                let key = key.trim().to_ascii_lowercase().replace('-', "_");
                if key.is_empty() {
                    return Err(Error::Format {
                        offset: offset as u64,
                        message: format!("line {}: empty key", n + 1),
                    });
                }
                if entries.insert(key.clone(), (value.trim().to_string(), n + 1)).is_some() {
                    return Err(Error::Format {
                        offset: offset as u64,
                        message: format!("line {}: duplicate key '{key}'", n + 1),
                    });
                }
            }
            offset += raw.len();
        }
        Ok(Config { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(v, _)| v.as_str())
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        let Some((v, line)) = self.entries.get(key) else {
            return Ok(None);
        };
        v.parse()
            .map(Some)
            .map_err(|_| Error::arg(format!("line {line}: cannot parse '{v}' for key '{key}'")))
    }

    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        let Some((v, line)) = self.entries.get(key) else {
            return Ok(None);
        };
        v.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse()
                    .map_err(|_| Error::arg(format!("line {line}: cannot parse '{s}' in list '{key}'")))
            })
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_values_lists_and_comments() {
        let c = Config::parse("# campaign\nkind = mse-vs-d\n\nd = 20, 40,60  # grid\nseed=7\n").unwrap();
        assert_eq!(c.get_str("kind"), Some("mse-vs-d"));
        assert_eq!(c.get_list::<usize>("d").unwrap(), Some(vec![20, 40, 60]));
        assert_eq!(c.get::<u64>("seed").unwrap(), Some(7));
        assert_eq!(c.get::<u64>("missing").unwrap(), None);
        assert!(c.get::<u64>("kind").is_err());
    }

    #[test]
    fn reports_offsets() {
        let e = Config::parse("a = 1\nbroken line\n").unwrap_err();
        match e {
            Error::Format { offset, message } => {
                assert_eq!(offset, 6);
                assert!(message.contains("line 2"));
            }
            other => panic!("{other}"),
        }
        assert!(Config::parse("a = 1\na = 2\n").is_err());
        assert!(Config::parse(" = 2\n").is_err());
    }
}
