//! Versioned `key = value` text format shared by the model files.
//!
//! ```text
//! format = bikedet-svm
//! version = 1
//!
//! [full]
//! w = 0.5,-1.25
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. Keys may repeat.
//! Floats are written with Rust's shortest round-trip formatting.

pub const SVM_FORMAT: &str = "bikedet-svm";
pub const CASCADE_FORMAT: &str = "bikedet-cascade";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelFileError {
    #[error("malformed model file: {0}")]
    Format(String),
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("missing key {0:?}")]
    MissingKey(String),
    #[error("invalid number {0:?}")]
    Number(String),
    #[error("unsupported model file version {0}")]
    Version(String),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub(crate) struct Section {
    entries: Vec<(String, String)>,
}

impl Section {
    pub fn push(&mut self, key: &str, value: impl Into<String>) {
        self.entries.push((key.to_string(), value.into()));
    }

    pub fn get(&self, key: &str) -> Result<&str, ModelFileError> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| ModelFileError::MissingKey(key.to_string()))
    }

    pub fn get_or<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.get(key).unwrap_or(default)
    }

    pub fn get_all<'a>(&'a self, key: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.entries
            .iter()
            .filter(move |(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ModelText {
    pub root: Section,
    sections: Vec<(String, Section)>,
}

impl ModelText {
    pub fn new(format: &str) -> Self {
        let mut root = Section::default();
        root.push("format", format);
        root.push("version", VERSION.to_string());
        Self {
            root,
            sections: Vec::new(),
        }
    }

    pub fn section(&mut self, name: &str) -> &mut Section {
        self.sections.push((name.to_string(), Section::default()));
        &mut self.sections.last_mut().expect("just pushed").1
    }

    pub fn find_section(&self, name: &str) -> Option<&Section> {
        self.sections
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, s)| s)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let write = |out: &mut String, s: &Section| {
            for (k, v) in &s.entries {
                out.push_str(k);
                out.push_str(" = ");
                out.push_str(v);
                out.push('\n');
            }
        };
        write(&mut out, &self.root);
        for (name, s) in &self.sections {
            out.push_str(&format!("\n[{name}]\n"));
            write(&mut out, s);
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, ModelFileError> {
        let mut parsed = Self {
            root: Section::default(),
            sections: Vec::new(),
        };
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| ModelFileError::Syntax {
                        line: i + 1,
                        reason: "unterminated section header".into(),
                    })?;
                parsed
                    .sections
                    .push((name.trim().to_string(), Section::default()));
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ModelFileError::Syntax {
                line: i + 1,
                reason: "expected key = value".into(),
            })?;
            let target = match parsed.sections.last_mut() {
                Some((_, s)) => s,
                None => &mut parsed.root,
            };
            target.push(k.trim(), v.trim());
        }
        Ok(parsed)
    }

    pub fn expect_format(&self, format: &str) -> Result<(), ModelFileError> {
        let found = self.root.get("format")?;
        if found != format {
            return Err(ModelFileError::Format(format!(
                "expected {format}, found {found}"
            )));
        }
        let version = self.root.get("version")?;
        if version.parse::<u32>().ok() != Some(VERSION) {
            return Err(ModelFileError::Version(version.to_string()));
        }
        Ok(())
    }
}

/// The value of the top-level `format` key.
pub(crate) fn format_of(text: &str) -> Result<&str, ModelFileError> {
    for line in text.lines() {
        let line = line.trim();
        if let Some((k, v)) = line.split_once('=') {
            if k.trim() == "format" {
                return Ok(v.trim());
            }
        }
        if line.starts_with('[') {
            break;
        }
    }
    Err(ModelFileError::MissingKey("format".into()))
}

pub(crate) fn float(v: f64) -> String {
    v.to_string()
}

pub(crate) fn join_floats(vs: &[f64]) -> String {
    vs.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

pub(crate) fn parse_float(s: &str) -> Result<f64, ModelFileError> {
    match s.trim().parse::<f64>() {
        Ok(v) if !v.is_nan() => Ok(v),
        _ => Err(ModelFileError::Number(s.to_string())),
    }
}

pub(crate) fn parse_floats(s: &str) -> Result<Vec<f64>, ModelFileError> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(parse_float).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sections_and_repeats() {
        let mut m = ModelText::new(CASCADE_FORMAT);
        m.root.push("stage", "width 1 2");
        m.root.push("stage", "height 3 4");
        m.section("extra").push("k", "v");
        let back = ModelText::parse(&m.render()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.root.get_all("stage").count(), 2);
        assert_eq!(format_of(&m.render()).unwrap(), CASCADE_FORMAT);
        back.expect_format(CASCADE_FORMAT).unwrap();
        assert!(back.expect_format(SVM_FORMAT).is_err());
    }

    #[test]
    fn rejects_bad_lines_and_versions() {
        assert!(matches!(
            ModelText::parse("format\n"),
            Err(ModelFileError::Syntax { line: 1, .. })
        ));
        assert!(ModelText::parse("[open\n").is_err());
        let m = ModelText::parse("format = bikedet-svm\nversion = 9\n").unwrap();
        assert!(matches!(
            m.expect_format(SVM_FORMAT),
            Err(ModelFileError::Version(_))
        ));
        assert!(parse_float("nan").is_err());
        assert_eq!(parse_float("-inf").unwrap(), f64::NEG_INFINITY);
    }

    proptest! {
        #[test]
        fn floats_round_trip(vs in prop::collection::vec(any::<f64>().prop_filter("not nan", |v| !v.is_nan()), 0..8)) {
            let back = parse_floats(&join_floats(&vs)).unwrap();
            prop_assert_eq!(back.len(), vs.len());
            for (a, b) in back.iter().zip(&vs) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
