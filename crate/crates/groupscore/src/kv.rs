//! Tiny `key = value` config-file parser shared by the generator and trainer
//! configs. Lines starting with `#` and blank lines are ignored.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

pub fn parse(text: &str, file: &Path) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::parse(
                file,
                (i + 1) as u64,
                format!("expected `key = value`, got `{line}`"),
            ));
        };
        map.insert(key.trim().to_owned(), value.trim().to_owned());
    }
    Ok(map)
}

pub fn read_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse(&text, path)
}

pub fn get_parsed<T: std::str::FromStr>(
    map: &BTreeMap<String, String>,
    key: &str,
) -> Result<Option<T>> {
    match map.get(key) {
        None => Ok(None),
        Some(raw) => raw
            .parse::<T>()
            .map(Some)
            .map_err(|_| Error::Config(format!("bad value for `{key}`: `{raw}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    #[test]
    fn parses_keys_and_skips_comments() {
        let text = "# comment\n\nseed = 42\nname = foo bar\n";
        let map = parse(text, &PathBuf::from("test.cfg")).unwrap();
        assert_eq!(map.get("seed").unwrap(), "42");
        assert_eq!(map.get("name").unwrap(), "foo bar");
        let seed: Option<u64> = get_parsed(&map, "seed").unwrap();
        assert_eq!(seed, Some(42));
        let missing: Option<u64> = get_parsed(&map, "nope").unwrap();
        assert_eq!(missing, None);
    }

    #[test]
    fn rejects_malformed_lines_and_values() {
        assert!(parse("just words\n", &PathBuf::from("x.cfg")).is_err());
        let map = parse("seed = abc\n", &PathBuf::from("x.cfg")).unwrap();
        assert!(get_parsed::<u64>(&map, "seed").is_err());
    }
}
