//! Minimal INI reader: `[section]` headers, `key = value` lines, `#`/`;` comments.

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub name: String,
    pub line: usize,
    pub entries: Vec<Entry>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct IniDoc {
    pub sections: Vec<Section>,
}

impl IniDoc {
    pub fn parse(text: &str) -> Result<Self> {
        let mut doc = IniDoc::default();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| Error::config_at(line_no, "unterminated section header"))?
                    .trim();
                if name.is_empty() {
                    return Err(Error::config_at(line_no, "empty section name"));
                }
                if doc.section(name).is_some() {
                    return Err(Error::config_at(line_no, format!("duplicate section [{name}]")));
                }
                doc.sections.push(Section {
                    name: name.to_string(),
                    line: line_no,
                    entries: Vec::new(),
                });
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config_at(line_no, format!("expected key = value, got `{line}`")))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::config_at(line_no, "empty key"));
            }
            let section = doc
                .sections
                .last_mut()
                .ok_or_else(|| Error::config_at(line_no, "key outside of any section"))?;
            if section.entries.iter().any(|e| e.key == key) {
                return Err(Error::config_at(
                    line_no,
                    format!("duplicate key `{key}` in [{}]", section.name),
                ));
            }
            section.entries.push(Entry {
                key: key.to_string(),
                value: value.trim().to_string(),
                line: line_no,
            });
        }
        Ok(doc)
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&Entry> {
        self.section(section)?.entries.iter().find(|e| e.key == key)
    }

    /// Insert or replace a value (used by sweeps). New entries get line 0.
    pub fn set(&mut self, section: &str, key: &str, value: &str) {
        let idx = match self.sections.iter().position(|s| s.name == section) {
            Some(i) => i,
            None => {
                self.sections.push(Section {
                    name: section.to_string(),
                    line: 0,
                    entries: Vec::new(),
                });
                self.sections.len() - 1
            }
        };
        let sec = &mut self.sections[idx];
        match sec.entries.iter_mut().find(|e| e.key == key) {
            Some(e) => e.value = value.to_string(),
            None => sec.entries.push(Entry {
                key: key.to_string(),
                value: value.to_string(),
                line: 0,
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_comments() {
        let doc = IniDoc::parse("# c\n[a]\nx = 1\n; c\n[b]\ny=two words\n").unwrap();
        assert_eq!(doc.get("a", "x").unwrap().value, "1");
        assert_eq!(doc.get("b", "y").unwrap().value, "two words");
        assert_eq!(doc.get("b", "y").unwrap().line, 6);
    }

    #[test]
    fn errors_carry_lines() {
        for (text, line) in [
            ("[a]\nx = 1\nx = 2\n", 3),
            ("x = 1\n", 1),
            ("[a]\n\nnonsense\n", 3),
            ("[a\n", 1),
            ("[a]\n[a]\n", 2),
        ] {
            match IniDoc::parse(text) {
                Err(Error::Config { line: Some(l), .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }
}
