//! Test-suite data model and its on-disk formats.
//!
//! A suite file is UTF-8 JSON Lines. An optional first record names the
//! suite (`{"suite": "...", "version": "..."}`); every other record is one
//! test item:
//!
//! ```text
//! {"id":"amb-001","category":"Ambiguity","phenomenon":"Lexical ambiguity",
//!  "source":"Das Gericht gestern Abend war lecker.",
//!  "rules":[{"polarity":"positive","kind":"regex","pattern":"\\bdish\\b"},
//!           {"polarity":"negative","kind":"regex","pattern":"\\bcourt\\b"}]}
//! ```
//!
//! System outputs are tab-separated `item_id<TAB>output_text` files with
//! `\t`, `\n` and `\\` escaped inside the text.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rules;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleKind {
    Regex,
    #[serde(rename = "literal")]
    LiteralSentence,
}

/// A control rule: a match signals a correct (positive) or incorrect
/// (negative) translation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rule {
    pub polarity: Polarity,
    pub kind: RuleKind,
    pub pattern: String,
    #[serde(default)]
    pub case_insensitive: bool,
}

impl Rule {
    pub fn regex(polarity: Polarity, pattern: impl Into<String>) -> Self {
        Rule {
            polarity,
            kind: RuleKind::Regex,
            pattern: pattern.into(),
            case_insensitive: false,
        }
    }

    pub fn literal(polarity: Polarity, sentence: impl Into<String>) -> Self {
        Rule {
            polarity,
            kind: RuleKind::LiteralSentence,
            pattern: sentence.into(),
            case_insensitive: false,
        }
    }

    pub fn positive_regex(pattern: impl Into<String>) -> Self {
        Self::regex(Polarity::Positive, pattern)
    }

    pub fn negative_regex(pattern: impl Into<String>) -> Self {
        Self::regex(Polarity::Negative, pattern)
    }

    pub fn case_insensitive(mut self, yes: bool) -> Self {
        self.case_insensitive = yes;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestItem {
    pub id: String,
    pub category: String,
    pub phenomenon: String,
    pub source: String,
    pub rules: Vec<Rule>,
}

/// An ordered, validated collection of test items.
///
/// Immutable once built; refinements produce a new suite.
#[derive(Debug, Clone)]
pub struct TestSuite {
    name: String,
    version: String,
    items: Vec<TestItem>,
    category_index: IndexMap<String, IndexMap<String, Vec<String>>>,
    positions: HashMap<String, usize>,
}

impl PartialEq for TestSuite {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.version == other.version
            && self.items == other.items
            && self.category_index == other.category_index
    }
}

impl TestSuite {
    /// Validates `items` and builds the category → phenomenon → ids index.
    pub fn new(
        name: impl Into<String>,
        version: impl Into<String>,
        items: Vec<TestItem>,
    ) -> Result<Self> {
        let mut positions = HashMap::with_capacity(items.len());
        let mut category_index: IndexMap<String, IndexMap<String, Vec<String>>> = IndexMap::new();
        let mut phenomenon_home: HashMap<&str, &str> = HashMap::new();
        let mut checked: HashSet<&Rule> = HashSet::new();

        for (pos, item) in items.iter().enumerate() {
            validate_fields(item)?;
            for (index, rule) in item.rules.iter().enumerate() {
                if !checked.contains(rule) {
                    rules::compile_rule(&item.id, index, rule)?;
                    checked.insert(rule);
                }
            }
            if positions.insert(item.id.clone(), pos).is_some() {
                return Err(Error::DuplicateId(item.id.clone()));
            }
            match phenomenon_home.get(item.phenomenon.as_str()) {
                Some(home) if *home != item.category => {
                    return Err(Error::InvalidRecord(format!(
                        "phenomenon `{}` appears in categories `{}` and `{}`",
                        item.phenomenon, home, item.category
                    )));
                }
                Some(_) => {}
                None => {
                    phenomenon_home.insert(&item.phenomenon, &item.category);
                }
            }
            category_index
                .entry(item.category.clone())
                .or_default()
                .entry(item.phenomenon.clone())
                .or_default()
                .push(item.id.clone());
        }

        Ok(TestSuite {
            name: name.into(),
            version: version.into(),
            items,
            category_index,
            positions,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn items(&self) -> &[TestItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn item(&self, id: &str) -> Option<&TestItem> {
        self.positions.get(id).map(|&pos| &self.items[pos])
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.positions.get(id).copied()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.positions.contains_key(id)
    }

    pub fn category_index(&self) -> &IndexMap<String, IndexMap<String, Vec<String>>> {
        &self.category_index
    }

    pub fn categories(&self) -> impl Iterator<Item = &str> {
        self.category_index.keys().map(String::as_str)
    }

    /// `(category, phenomenon)` pairs in first-appearance order.
    pub fn phenomena(&self) -> impl Iterator<Item = (&str, &str)> {
        self.category_index.iter().flat_map(|(cat, phens)| {
            phens
                .keys()
                .map(move |phen| (cat.as_str(), phen.as_str()))
        })
    }

    /// Returns a copy with `rule` appended to item `item_id`.
    pub fn with_added_rule(&self, item_id: &str, rule: Rule) -> Result<TestSuite> {
        let pos = self
            .position(item_id)
            .ok_or_else(|| Error::UnknownItem(item_id.to_string()))?;
        let mut next = self.clone();
        let item = &mut next.items[pos];
        item.rules.push(rule);
        validate_rules(item)?;
        Ok(next)
    }

    /// Serializes to the line-delimited suite format.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let header = SuiteHeader {
            suite: self.name.clone(),
            version: self.version.clone(),
        };
        out.push_str(&serde_json::to_string(&header).expect("header serializes"));
        out.push('\n');
        for item in &self.items {
            out.push_str(&serde_json::to_string(item).expect("item serializes"));
            out.push('\n');
        }
        out
    }
}

fn validate_fields(item: &TestItem) -> Result<()> {
    if item.id.trim().is_empty() {
        return Err(Error::InvalidRecord("item id is empty".into()));
    }
    if item.category.trim().is_empty() {
        return Err(Error::MissingField(item.id.clone(), "category"));
    }
    if item.phenomenon.trim().is_empty() {
        return Err(Error::MissingField(item.id.clone(), "phenomenon"));
    }
    if item.source.trim().is_empty() {
        return Err(Error::EmptySource(item.id.clone()));
    }
    if item.rules.is_empty() {
        return Err(Error::NoRules(item.id.clone()));
    }
    Ok(())
}

fn validate_rules(item: &TestItem) -> Result<()> {
    for (index, rule) in item.rules.iter().enumerate() {
        rules::compile_rule(&item.id, index, rule)?;
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct SuiteHeader {
    suite: String,
    #[serde(default)]
    version: String,
}

/// Parses suite text. `origin` is used in error messages and as the default
/// suite name when there is no header record.
pub fn parse_suite(text: &str, origin: &str) -> Result<TestSuite> {
    let mut header: Option<SuiteHeader> = None;
    let mut items = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();

    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: origin.to_string(),
            line: line_no,
            message,
        };
        let value: serde_json::Value =
            serde_json::from_str(line).map_err(|e| parse_err(e.to_string()))?;
        if value.get("suite").is_some() {
            if header.is_some() || !items.is_empty() {
                return Err(parse_err("suite header must be the first record".into()));
            }
            header = Some(serde_json::from_value(value).map_err(|e| parse_err(e.to_string()))?);
            continue;
        }
        let item: TestItem = serde_json::from_value(value).map_err(|e| parse_err(e.to_string()))?;
        if seen.insert(item.id.clone(), line_no).is_some() {
            return Err(Error::DuplicateId(item.id));
        }
        items.push(item);
    }

    let (name, version) = match header {
        Some(h) => (h.suite, h.version),
        None => (default_name(origin), String::new()),
    };
    TestSuite::new(name, version, items)
}

fn default_name(origin: &str) -> String {
    Path::new(origin)
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or(origin)
        .to_string()
}

pub fn load_suite(path: impl AsRef<Path>) -> Result<TestSuite> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_suite(&text, &path.display().to_string())
}

pub fn write_suite(suite: &TestSuite, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, suite.to_jsonl()).map_err(|e| Error::io(path, e))
}

/// Item counts per phenomenon and category.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SuiteStats {
    pub total: usize,
    pub categories: IndexMap<String, CategoryStats>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CategoryStats {
    pub items: usize,
    pub phenomena: IndexMap<String, usize>,
}

impl SuiteStats {
    pub fn category_count(&self, category: &str) -> Option<usize> {
        self.categories.get(category).map(|c| c.items)
    }

    pub fn phenomenon_count(&self, phenomenon: &str) -> Option<usize> {
        self.categories
            .values()
            .find_map(|c| c.phenomena.get(phenomenon).copied())
    }
}

pub fn suite_stats(suite: &TestSuite) -> SuiteStats {
    let categories = suite
        .category_index()
        .iter()
        .map(|(cat, phens)| {
            let phenomena: IndexMap<String, usize> = phens
                .iter()
                .map(|(phen, ids)| (phen.clone(), ids.len()))
                .collect();
            let items = phenomena.values().sum();
            (cat.clone(), CategoryStats { items, phenomena })
        })
        .collect::<IndexMap<_, _>>();
    SuiteStats {
        total: categories.values().map(|c| c.items).sum(),
        categories,
    }
}

/// Translations of the suite by one system.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemOutput {
    pub system_name: String,
    pub translations: IndexMap<String, String>,
}

impl SystemOutput {
    pub fn new(system_name: impl Into<String>) -> Self {
        SystemOutput {
            system_name: system_name.into(),
            translations: IndexMap::new(),
        }
    }

    pub fn with(mut self, item_id: impl Into<String>, text: impl Into<String>) -> Self {
        self.translations.insert(item_id.into(), text.into());
        self
    }

    pub fn get(&self, item_id: &str) -> Option<&str> {
        self.translations.get(item_id).map(String::as_str)
    }

    /// Serializes to the tab-separated outputs format.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (id, text) in &self.translations {
            out.push_str(id);
            out.push('\t');
            out.push_str(&escape_field(text));
            out.push('\n');
        }
        out
    }
}

pub fn escape_field(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for ch in text.chars() {
        match ch {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out
}

pub fn unescape_field(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.chars();
    while let Some(ch) = chars.next() {
        if ch != '\\' {
            out.push(ch);
            continue;
        }
        match chars.next() {
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('\\') => out.push('\\'),
            Some(other) => {
                out.push('\\');
                out.push(other);
            }
            None => out.push('\\'),
        }
    }
    out
}

/// Parses outputs text for `system_name`, checking every id against `suite`.
pub fn parse_outputs(
    text: &str,
    system_name: &str,
    suite: &TestSuite,
    origin: &str,
) -> Result<SystemOutput> {
    if system_name.trim().is_empty() {
        return Err(Error::EmptySystemName);
    }
    let mut output = SystemOutput::new(system_name);
    for (idx, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let (id, raw) = line.split_once('\t').ok_or_else(|| Error::Parse {
            path: origin.to_string(),
            line: idx + 1,
            message: "expected `item_id<TAB>output_text`".into(),
        })?;
        if !suite.contains(id) {
            return Err(Error::UnknownItem(id.to_string()));
        }
        if output.translations.contains_key(id) {
            return Err(Error::DuplicateOutput {
                system: system_name.to_string(),
                item_id: id.to_string(),
            });
        }
        output.translations.insert(id.to_string(), unescape_field(raw));
    }
    Ok(output)
}

/// Name of the sidecar manifest in an outputs directory.
pub const OUTPUTS_MANIFEST: &str = "manifest.jsonl";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub system: String,
    pub file: String,
}

fn read_manifest(dir: &Path) -> Result<Option<Vec<ManifestEntry>>> {
    let path = dir.join(OUTPUTS_MANIFEST);
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut entries = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let entry: ManifestEntry = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        entries.push(entry);
    }
    Ok(Some(entries))
}

/// Loads one outputs file. The system name comes from the sibling
/// `manifest.jsonl` when it lists this file, otherwise from the file stem.
pub fn load_outputs(path: impl AsRef<Path>, suite: &TestSuite) -> Result<SystemOutput> {
    let path = path.as_ref();
    let file_name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
    let from_manifest = match path.parent() {
        Some(dir) => read_manifest(dir)?
            .and_then(|entries| entries.into_iter().find(|e| e.file == file_name))
            .map(|e| e.system),
        None => None,
    };
    let name = from_manifest.unwrap_or_else(|| default_name(file_name));
    load_outputs_as(path, &name, suite)
}

pub fn load_outputs_as(
    path: impl AsRef<Path>,
    system_name: &str,
    suite: &TestSuite,
) -> Result<SystemOutput> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_outputs(&text, system_name, suite, &path.display().to_string())
}

/// Files making up an outputs directory, in manifest order or, without a
/// manifest, every `*.tsv` file sorted by name.
pub fn output_files(dir: impl AsRef<Path>) -> Result<Vec<(String, PathBuf)>> {
    let dir = dir.as_ref();
    if !dir.is_dir() {
        return Err(Error::io(
            dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "outputs directory not found"),
        ));
    }
    if let Some(entries) = read_manifest(dir)? {
        return Ok(entries
            .into_iter()
            .map(|e| (e.system, dir.join(e.file)))
            .collect());
    }
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "tsv"))
        .collect();
    files.sort();
    Ok(files
        .into_iter()
        .map(|p| {
            let name = default_name(&p.file_name().unwrap().to_string_lossy());
            (name, p)
        })
        .collect())
}

pub fn load_outputs_dir(dir: impl AsRef<Path>, suite: &TestSuite) -> Result<Vec<SystemOutput>> {
    output_files(dir)?
        .into_iter()
        .map(|(name, path)| load_outputs_as(&path, &name, suite))
        .collect()
}

/// Writes `outputs` as `<system>.tsv` files plus a manifest.
pub fn write_outputs_dir(outputs: &[SystemOutput], dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = String::new();
    for (idx, output) in outputs.iter().enumerate() {
        let file = format!("{:02}-{}.tsv", idx, sanitize_file_stem(&output.system_name));
        let path = dir.join(&file);
        fs::write(&path, output.to_tsv()).map_err(|e| Error::io(&path, e))?;
        let entry = ManifestEntry {
            system: output.system_name.clone(),
            file,
        };
        manifest.push_str(&serde_json::to_string(&entry)?);
        manifest.push('\n');
    }
    let path = dir.join(OUTPUTS_MANIFEST);
    fs::write(&path, manifest).map_err(|e| Error::io(&path, e))
}

fn sanitize_file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}
