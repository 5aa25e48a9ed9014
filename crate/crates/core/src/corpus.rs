//! Benchmark grid, prompt manifests and the image-generator port.
//!
//! A [`Manifest`] is always fully balanced: every (class, attribute,
//! difficulty) cell holds exactly `items_per_cell` items with indices
//! `0..items_per_cell`. The constructors enforce this, so downstream
//! analytics never re-check it.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::ops::{Index, IndexMut};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use indexmap::IndexMap;
use percent_encoding::{utf8_percent_encode, AsciiSet, CONTROLS};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("class list is empty")]
    NoClasses,
    #[error("attribute list is empty")]
    NoAttributes,
    #[error("duplicate class name {0:?}")]
    DuplicateClass(String),
    #[error("duplicate attribute name {0:?}")]
    DuplicateAttribute(String),
    #[error("attribute {attribute:?} is missing a non-empty {difficulty} descriptor")]
    MissingDescriptor {
        attribute: String,
        difficulty: Difficulty,
    },
    #[error("no prompt template for {attribute}/{difficulty}")]
    MissingTemplate {
        attribute: String,
        difficulty: Difficulty,
    },
    #[error("items_per_cell must be at least 1")]
    ZeroItemsPerCell,
    #[error("empty manifest")]
    EmptyManifest,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unbalanced cell {cell}: {message}")]
    Unbalanced { cell: String, message: String },
    #[error("duplicate item {0}")]
    DuplicateItem(String),
    #[error("item_id {found:?} does not match its fields (expected {expected:?})")]
    ItemIdMismatch { expected: String, found: String },
    #[error("attribute {attribute:?} has conflicting {difficulty} descriptors")]
    InconsistentDescriptor {
        attribute: String,
        difficulty: Difficulty,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CorpusError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        CorpusError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Difficulty category of an item. The derived ordering is Easy < Medium < Hard.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Difficulty {
    Easy,
    Medium,
    Hard,
}

impl Difficulty {
    pub const ALL: [Difficulty; 3] = [Difficulty::Easy, Difficulty::Medium, Difficulty::Hard];

    pub fn as_str(self) -> &'static str {
        match self {
            Difficulty::Easy => "easy",
            Difficulty::Medium => "medium",
            Difficulty::Hard => "hard",
        }
    }

    /// Ordinal label used in correlation analyses: easy = 1, medium = 2, hard = 3.
    pub fn level(self) -> u8 {
        self.position() as u8 + 1
    }

    pub fn position(self) -> usize {
        match self {
            Difficulty::Easy => 0,
            Difficulty::Medium => 1,
            Difficulty::Hard => 2,
        }
    }
}

impl fmt::Display for Difficulty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Difficulty {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "easy" | "e" => Ok(Difficulty::Easy),
            "medium" | "m" => Ok(Difficulty::Medium),
            "hard" | "h" => Ok(Difficulty::Hard),
            other => Err(format!(
                "unknown difficulty {other:?} (expected easy, medium or hard)"
            )),
        }
    }
}

/// One value per difficulty level.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PerDifficulty<T> {
    pub easy: T,
    pub medium: T,
    pub hard: T,
}

impl<T> PerDifficulty<T> {
    pub const fn new(easy: T, medium: T, hard: T) -> Self {
        PerDifficulty { easy, medium, hard }
    }

    pub fn from_fn(mut f: impl FnMut(Difficulty) -> T) -> Self {
        PerDifficulty {
            easy: f(Difficulty::Easy),
            medium: f(Difficulty::Medium),
            hard: f(Difficulty::Hard),
        }
    }

    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> PerDifficulty<U> {
        PerDifficulty {
            easy: f(&self.easy),
            medium: f(&self.medium),
            hard: f(&self.hard),
        }
    }

    /// Iterates in canonical order (easy, medium, hard).
    pub fn iter(&self) -> impl Iterator<Item = (Difficulty, &T)> {
        [
            (Difficulty::Easy, &self.easy),
            (Difficulty::Medium, &self.medium),
            (Difficulty::Hard, &self.hard),
        ]
        .into_iter()
    }
}

impl PerDifficulty<u32> {
    pub fn total(&self) -> u32 {
        self.easy + self.medium + self.hard
    }

    /// Weighted sum `Σ self[d] * weights[d]`.
    pub fn dot(&self, weights: &PerDifficulty<u32>) -> u32 {
        self.easy * weights.easy + self.medium * weights.medium + self.hard * weights.hard
    }
}

impl<T: std::ops::AddAssign + Copy> PerDifficulty<T> {
    pub fn add_assign(&mut self, other: &PerDifficulty<T>) {
        self.easy += other.easy;
        self.medium += other.medium;
        self.hard += other.hard;
    }
}

impl<T> Index<Difficulty> for PerDifficulty<T> {
    type Output = T;

    fn index(&self, d: Difficulty) -> &T {
        match d {
            Difficulty::Easy => &self.easy,
            Difficulty::Medium => &self.medium,
            Difficulty::Hard => &self.hard,
        }
    }
}

impl<T> IndexMut<Difficulty> for PerDifficulty<T> {
    fn index_mut(&mut self, d: Difficulty) -> &mut T {
        match d {
            Difficulty::Easy => &mut self.easy,
            Difficulty::Medium => &mut self.medium,
            Difficulty::Hard => &mut self.hard,
        }
    }
}

/// A (class, attribute) combination.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub class: String,
    pub attribute: String,
}

impl Cell {
    pub fn new(class: impl Into<String>, attribute: impl Into<String>) -> Self {
        Cell {
            class: class.into(),
            attribute: attribute.into(),
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.class, self.attribute)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeDescriptor {
    pub name: String,
    pub descriptors: PerDifficulty<String>,
}

/// Parses a descriptor table: a JSON object keyed by attribute, then by
/// difficulty. Attribute order in the document is preserved.
pub fn parse_descriptor_table(json: &str) -> Result<Vec<AttributeDescriptor>, CorpusError> {
    let raw: IndexMap<String, IndexMap<Difficulty, String>> =
        serde_json::from_str(json).map_err(|e| CorpusError::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
    let mut out = Vec::with_capacity(raw.len());
    for (name, levels) in raw {
        let get = |d: Difficulty| -> Result<String, CorpusError> {
            match levels.get(&d) {
                Some(text) if !text.trim().is_empty() => Ok(text.clone()),
                _ => Err(CorpusError::MissingDescriptor {
                    attribute: name.clone(),
                    difficulty: d,
                }),
            }
        };
        let descriptors = PerDifficulty::new(
            get(Difficulty::Easy)?,
            get(Difficulty::Medium)?,
            get(Difficulty::Hard)?,
        );
        out.push(AttributeDescriptor { name, descriptors });
    }
    Ok(out)
}

/// Prompt templates per (attribute, difficulty). Placeholders `{class}`,
/// `{descriptor}`, `{attribute}` and `{difficulty}` are substituted verbatim.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TemplateTable {
    entries: HashMap<(String, Difficulty), Vec<String>>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(String),
    Many(Vec<String>),
}

impl TemplateTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, attribute: &str, difficulty: Difficulty, templates: Vec<String>) {
        self.entries
            .insert((attribute.to_string(), difficulty), templates);
    }

    /// Same template for every attribute and difficulty.
    pub fn uniform(template: &str, attributes: &[AttributeDescriptor]) -> Self {
        let mut table = Self::new();
        for attr in attributes {
            for d in Difficulty::ALL {
                table.insert(&attr.name, d, vec![template.to_string()]);
            }
        }
        table
    }

    /// Parses `{attribute: {difficulty: template | [template, ...]}}`.
    pub fn from_json(json: &str) -> Result<Self, CorpusError> {
        let raw: IndexMap<String, IndexMap<Difficulty, OneOrMany>> = serde_json::from_str(json)
            .map_err(|e| CorpusError::Parse {
                line: e.line(),
                message: e.to_string(),
            })?;
        let mut table = Self::new();
        for (attr, levels) in raw {
            for (d, t) in levels {
                let list = match t {
                    OneOrMany::One(s) => vec![s],
                    OneOrMany::Many(v) => v,
                };
                table.insert(&attr, d, list);
            }
        }
        Ok(table)
    }

    pub fn get(&self, attribute: &str, difficulty: Difficulty) -> Option<&[String]> {
        self.entries
            .get(&(attribute.to_string(), difficulty))
            .map(Vec::as_slice)
            .filter(|v| !v.is_empty())
    }
}

fn render_template(
    template: &str,
    class: &str,
    attr: &AttributeDescriptor,
    d: Difficulty,
) -> String {
    template
        .replace("{class}", class)
        .replace("{descriptor}", &attr.descriptors[d])
        .replace("{attribute}", &attr.name)
        .replace("{difficulty}", d.as_str())
}

// Everything outside unreserved characters, so '/' inside names cannot collide
// with the component separator.
const ID_COMPONENT: &AsciiSet = &CONTROLS
    .add(b' ')
    .add(b'"')
    .add(b'#')
    .add(b'%')
    .add(b'/')
    .add(b'<')
    .add(b'>')
    .add(b'?')
    .add(b'`')
    .add(b'{')
    .add(b'}')
    .add(b'\\')
    .add(b'|')
    .add(b'^')
    .add(b'[')
    .add(b']');

pub fn encode_component(s: &str) -> String {
    utf8_percent_encode(s, ID_COMPONENT).to_string()
}

/// Deterministic item id: `class/attribute/difficulty/index`, each component
/// percent-encoded.
pub fn item_id(class: &str, attribute: &str, difficulty: Difficulty, index: u32) -> String {
    format!(
        "{}/{}/{}/{}",
        encode_component(class),
        encode_component(attribute),
        difficulty.as_str(),
        index
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Item {
    pub item_id: String,
    pub class: String,
    pub attribute: String,
    pub difficulty: Difficulty,
    pub index: u32,
    pub prompt: String,
    /// Attribute descriptor text the prompt was built from.
    pub descriptor: String,
}

impl Item {
    pub fn cell(&self) -> Cell {
        Cell::new(self.class.clone(), self.attribute.clone())
    }
}

/// A fully balanced benchmark grid. Items are stored in canonical order:
/// class, then attribute, then difficulty, then index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    classes: Vec<String>,
    attributes: Vec<AttributeDescriptor>,
    items_per_cell: u32,
    items: Vec<Item>,
    by_id: HashMap<String, usize>,
}

impl Manifest {
    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn attributes(&self) -> &[AttributeDescriptor] {
        &self.attributes
    }

    pub fn attribute_names(&self) -> Vec<&str> {
        self.attributes.iter().map(|a| a.name.as_str()).collect()
    }

    pub fn items_per_cell(&self) -> u32 {
        self.items_per_cell
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn item(&self, item_id: &str) -> Option<&Item> {
        self.by_id.get(item_id).map(|&i| &self.items[i])
    }

    pub fn contains(&self, item_id: &str) -> bool {
        self.by_id.contains_key(item_id)
    }

    pub fn cell_count(&self) -> usize {
        self.classes.len() * self.attributes.len()
    }

    /// All cells in canonical order (class-major).
    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.classes.iter().flat_map(move |c| {
            self.attributes
                .iter()
                .map(move |a| Cell::new(c.clone(), a.name.clone()))
        })
    }

    fn class_position(&self, class: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == class)
    }

    fn attribute_position(&self, attribute: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == attribute)
    }

    /// Items of one (cell, difficulty), ordered by index.
    pub fn cell_items(&self, cell: &Cell, difficulty: Difficulty) -> Option<&[Item]> {
        let ci = self.class_position(&cell.class)?;
        let ai = self.attribute_position(&cell.attribute)?;
        let n = self.items_per_cell as usize;
        let start = ((ci * self.attributes.len() + ai) * 3 + difficulty.position()) * n;
        Some(&self.items[start..start + n])
    }

    /// Hex SHA-256 of the canonical JSONL serialization.
    pub fn identity_hash(&self) -> String {
        let digest = Sha256::digest(self.to_jsonl().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Validates a flat item list and assembles the balanced grid. Classes and
    /// attributes are ordered by first appearance; `items_per_cell` is one past
    /// the largest index seen.
    pub fn from_items(items: Vec<Item>) -> Result<Self, CorpusError> {
        if items.is_empty() {
            return Err(CorpusError::EmptyManifest);
        }
        let mut classes: Vec<String> = Vec::new();
        let mut class_pos: HashMap<String, usize> = HashMap::new();
        let mut attr_names: Vec<String> = Vec::new();
        let mut attr_pos: HashMap<String, usize> = HashMap::new();
        let mut descriptors: Vec<PerDifficulty<Option<String>>> = Vec::new();
        let mut items_per_cell = 0u32;
        let mut seen_ids = HashSet::new();

        for item in &items {
            let expected = item_id(&item.class, &item.attribute, item.difficulty, item.index);
            if expected != item.item_id {
                return Err(CorpusError::ItemIdMismatch {
                    expected,
                    found: item.item_id.clone(),
                });
            }
            if !seen_ids.insert(item.item_id.clone()) {
                return Err(CorpusError::DuplicateItem(item.item_id.clone()));
            }
            if !class_pos.contains_key(&item.class) {
                class_pos.insert(item.class.clone(), classes.len());
                classes.push(item.class.clone());
            }
            let ai = *attr_pos.entry(item.attribute.clone()).or_insert_with(|| {
                attr_names.push(item.attribute.clone());
                descriptors.push(PerDifficulty::default());
                attr_names.len() - 1
            });
            let slot = &mut descriptors[ai][item.difficulty];
            match slot {
                None => *slot = Some(item.descriptor.clone()),
                Some(existing) if *existing != item.descriptor => {
                    return Err(CorpusError::InconsistentDescriptor {
                        attribute: item.attribute.clone(),
                        difficulty: item.difficulty,
                    })
                }
                Some(_) => {}
            }
            items_per_cell = items_per_cell.max(item.index + 1);
        }

        let attributes = attr_names
            .into_iter()
            .zip(descriptors)
            .map(|(name, levels)| {
                let take = |d: Difficulty| match &levels[d] {
                    Some(t) if !t.trim().is_empty() => Ok(t.clone()),
                    _ => Err(CorpusError::MissingDescriptor {
                        attribute: name.clone(),
                        difficulty: d,
                    }),
                };
                Ok(AttributeDescriptor {
                    descriptors: PerDifficulty::new(
                        take(Difficulty::Easy)?,
                        take(Difficulty::Medium)?,
                        take(Difficulty::Hard)?,
                    ),
                    name,
                })
            })
            .collect::<Result<Vec<_>, CorpusError>>()?;

        let n = items_per_cell as usize;
        let total = classes.len() * attributes.len() * 3 * n;
        let mut slots: Vec<Option<Item>> = vec![None; total];
        for item in items {
            let ci = class_pos[&item.class];
            let ai = attr_pos[&item.attribute];
            let pos = ((ci * attributes.len() + ai) * 3 + item.difficulty.position()) * n
                + item.index as usize;
            slots[pos] = Some(item);
        }
        for (ci, class) in classes.iter().enumerate() {
            for (ai, attr) in attributes.iter().enumerate() {
                for d in Difficulty::ALL {
                    let start = ((ci * attributes.len() + ai) * 3 + d.position()) * n;
                    let present: Vec<usize> =
                        (0..n).filter(|&i| slots[start + i].is_some()).collect();
                    if present.len() != n {
                        let missing: Vec<usize> =
                            (0..n).filter(|&i| slots[start + i].is_none()).collect();
                        return Err(CorpusError::Unbalanced {
                            cell: format!("{}/{}/{}", class, attr.name, d),
                            message: format!(
                                "has {} of {} items (missing indices {:?})",
                                present.len(),
                                n,
                                missing
                            ),
                        });
                    }
                }
            }
        }
        let items: Vec<Item> = slots.into_iter().map(|s| s.expect("checked")).collect();
        Ok(Self::assemble(classes, attributes, items_per_cell, items))
    }

    fn assemble(
        classes: Vec<String>,
        attributes: Vec<AttributeDescriptor>,
        items_per_cell: u32,
        items: Vec<Item>,
    ) -> Self {
        let by_id = items
            .iter()
            .enumerate()
            .map(|(i, it)| (it.item_id.clone(), i))
            .collect();
        Manifest {
            classes,
            attributes,
            items_per_cell,
            items,
            by_id,
        }
    }

    /// Canonical JSONL text, one item per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for item in &self.items {
            out.push_str(&serde_json::to_string(item).expect("item serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, CorpusError> {
        Self::read_jsonl(text.as_bytes())
    }

    pub fn read_jsonl(reader: impl BufRead) -> Result<Self, CorpusError> {
        let mut items = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| CorpusError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let item: Item = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            items.push(item);
        }
        Self::from_items(items)
    }
}

/// Expands descriptor templates over the full grid. The template for item
/// `index` of a cell is `templates[index % templates.len()]`.
pub fn build_manifest(
    classes: &[String],
    descriptors: &[AttributeDescriptor],
    items_per_cell: u32,
    templates: &TemplateTable,
) -> Result<Manifest, CorpusError> {
    if classes.is_empty() {
        return Err(CorpusError::NoClasses);
    }
    if descriptors.is_empty() {
        return Err(CorpusError::NoAttributes);
    }
    if items_per_cell == 0 {
        return Err(CorpusError::ZeroItemsPerCell);
    }
    let mut seen = HashSet::new();
    for c in classes {
        if !seen.insert(c.as_str()) {
            return Err(CorpusError::DuplicateClass(c.clone()));
        }
    }
    let mut seen = HashSet::new();
    for a in descriptors {
        if !seen.insert(a.name.as_str()) {
            return Err(CorpusError::DuplicateAttribute(a.name.clone()));
        }
        for (d, text) in a.descriptors.iter() {
            if text.trim().is_empty() {
                return Err(CorpusError::MissingDescriptor {
                    attribute: a.name.clone(),
                    difficulty: d,
                });
            }
            if templates.get(&a.name, d).is_none() {
                return Err(CorpusError::MissingTemplate {
                    attribute: a.name.clone(),
                    difficulty: d,
                });
            }
        }
    }

    let mut items =
        Vec::with_capacity(classes.len() * descriptors.len() * 3 * items_per_cell as usize);
    for class in classes {
        for attr in descriptors {
            for d in Difficulty::ALL {
                let pool = templates.get(&attr.name, d).expect("checked above");
                for index in 0..items_per_cell {
                    let template = &pool[index as usize % pool.len()];
                    items.push(Item {
                        item_id: item_id(class, &attr.name, d, index),
                        class: class.clone(),
                        attribute: attr.name.clone(),
                        difficulty: d,
                        index,
                        prompt: render_template(template, class, attr, d),
                        descriptor: attr.descriptors[d].clone(),
                    });
                }
            }
        }
    }
    Ok(Manifest::assemble(
        classes.to_vec(),
        descriptors.to_vec(),
        items_per_cell,
        items,
    ))
}

pub fn save_manifest(manifest: &Manifest, path: &Path) -> Result<(), CorpusError> {
    fs::write(path, manifest.to_jsonl()).map_err(|e| CorpusError::io(path, e))
}

pub fn load_manifest(path: &Path) -> Result<Manifest, CorpusError> {
    let file = File::open(path).map_err(|e| CorpusError::io(path, e))?;
    Manifest::read_jsonl(BufReader::new(file))
}

/// Reads a class list: either a JSON array of strings or plain text with one
/// class per line.
pub fn parse_class_list(text: &str) -> Result<Vec<String>, CorpusError> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('[') {
        return serde_json::from_str(trimmed).map_err(|e| CorpusError::Parse {
            line: e.line(),
            message: e.to_string(),
        });
    }
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect())
}

// ---------------------------------------------------------------------------
// Generator port
// ---------------------------------------------------------------------------

/// A text-to-image backend. Implementations receive prompts in manifest order.
pub trait GeneratorBackend {
    fn submit(&mut self, prompt: &str) -> Result<String, String>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GenerationOutcome {
    Reference(String),
    Error(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationEntry {
    pub item_id: String,
    #[serde(flatten)]
    pub outcome: GenerationOutcome,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationReport {
    pub entries: Vec<GenerationEntry>,
}

impl GenerationReport {
    pub fn references(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| matches!(e.outcome, GenerationOutcome::Reference(_)))
            .count()
    }

    pub fn errors(&self) -> usize {
        self.entries.len() - self.references()
    }
}

/// Submits every item's prompt once, in manifest order. Backend failures are
/// recorded per item and never abort the batch.
pub fn run_generator(manifest: &Manifest, backend: &mut dyn GeneratorBackend) -> GenerationReport {
    run_generator_on(manifest.items(), backend)
}

pub fn run_generator_on(items: &[Item], backend: &mut dyn GeneratorBackend) -> GenerationReport {
    let entries = items
        .iter()
        .map(|item| GenerationEntry {
            item_id: item.item_id.clone(),
            outcome: match backend.submit(&item.prompt) {
                Ok(r) => GenerationOutcome::Reference(r),
                Err(e) => GenerationOutcome::Error(e),
            },
        })
        .collect();
    GenerationReport { entries }
}

/// File-backed stand-in for an image generator: appends each prompt to
/// `prompts.log` in its output directory and hands back `mock://NNNNNN`.
pub struct MockGenerator {
    log: BufWriter<File>,
    log_path: PathBuf,
    submitted: u64,
}

impl MockGenerator {
    pub const LOG_NAME: &'static str = "prompts.log";

    pub fn create(out_dir: &Path) -> Result<Self, CorpusError> {
        fs::create_dir_all(out_dir).map_err(|e| CorpusError::io(out_dir, e))?;
        let log_path = out_dir.join(Self::LOG_NAME);
        let file = File::create(&log_path).map_err(|e| CorpusError::io(&log_path, e))?;
        Ok(MockGenerator {
            log: BufWriter::new(file),
            log_path,
            submitted: 0,
        })
    }

    pub fn log_path(&self) -> &Path {
        &self.log_path
    }

    pub fn finish(mut self) -> Result<PathBuf, CorpusError> {
        self.log
            .flush()
            .map_err(|e| CorpusError::io(&self.log_path, e))?;
        Ok(self.log_path)
    }
}

impl GeneratorBackend for MockGenerator {
    fn submit(&mut self, prompt: &str) -> Result<String, String> {
        let line = prompt.replace(['\n', '\r'], " ");
        writeln!(self.log, "{line}").map_err(|e| e.to_string())?;
        let reference = format!("mock://{:06}", self.submitted);
        self.submitted += 1;
        Ok(reference)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn occlusion() -> AttributeDescriptor {
        AttributeDescriptor {
            name: "occlusion".into(),
            descriptors: PerDifficulty::new(
                "No occlusion, object fully visible".into(),
                "Significant occlusion (30-50% of object)".into(),
                "Majority of object occluded (70-90%)".into(),
            ),
        }
    }

    fn attrs(n: usize) -> Vec<AttributeDescriptor> {
        (0..n)
            .map(|i| AttributeDescriptor {
                name: format!("attr{i}"),
                descriptors: PerDifficulty::new(
                    format!("easy {i}"),
                    format!("medium {i}"),
                    format!("hard {i}"),
                ),
            })
            .collect()
    }

    #[test]
    fn ten_attributes_twelve_per_cell_gives_360_items() {
        let a = attrs(10);
        let t = TemplateTable::uniform("A {class}, {descriptor}", &a);
        let m = build_manifest(&["golden retriever".into()], &a, 12, &t).unwrap();
        assert_eq!(m.len(), 360);
        assert_eq!(m.cell_count(), 10);
    }

    #[test]
    fn minimal_grid() {
        let a = attrs(1);
        let t = TemplateTable::uniform("{class}", &a);
        let m = build_manifest(&["A".into()], &a, 1, &t).unwrap();
        assert_eq!(m.len(), 3);
        assert!(m.items().iter().all(|i| i.index == 0));
    }

    #[test]
    fn template_substitution() {
        let a = vec![occlusion()];
        let t = TemplateTable::uniform("A {class}, {descriptor}", &a);
        let m = build_manifest(&["koala".into()], &a, 1, &t).unwrap();
        assert_eq!(
            m.items()[0].prompt,
            "A koala, No occlusion, object fully visible"
        );
    }

    #[test]
    fn round_robin_templates() {
        let a = vec![occlusion()];
        let mut t = TemplateTable::uniform("x", &a);
        t.insert(
            "occlusion",
            Difficulty::Easy,
            vec!["one {class}".into(), "two {class}".into()],
        );
        let m = build_manifest(&["cat".into()], &a, 3, &t).unwrap();
        let easy = m
            .cell_items(&Cell::new("cat", "occlusion"), Difficulty::Easy)
            .unwrap();
        let prompts: Vec<_> = easy.iter().map(|i| i.prompt.as_str()).collect();
        assert_eq!(prompts, ["one cat", "two cat", "one cat"]);
    }

    #[test]
    fn validation_errors_name_the_key() {
        let a = attrs(1);
        let t = TemplateTable::uniform("{class}", &a);
        let err = build_manifest(&["A".into(), "A".into()], &a, 1, &t).unwrap_err();
        assert!(matches!(err, CorpusError::DuplicateClass(ref c) if c == "A"));

        let mut t2 = TemplateTable::new();
        t2.insert("attr0", Difficulty::Easy, vec!["x".into()]);
        t2.insert("attr0", Difficulty::Medium, vec!["x".into()]);
        let err = build_manifest(&["A".into()], &a, 1, &t2).unwrap_err();
        assert!(matches!(
            err,
            CorpusError::MissingTemplate { ref attribute, difficulty: Difficulty::Hard } if attribute == "attr0"
        ));

        let err =
            parse_descriptor_table(r#"{"size": {"easy": "big", "medium": "mid"}}"#).unwrap_err();
        assert!(matches!(
            err,
            CorpusError::MissingDescriptor { ref attribute, difficulty: Difficulty::Hard } if attribute == "size"
        ));
        assert!(matches!(
            build_manifest(&["A".into()], &a, 0, &t).unwrap_err(),
            CorpusError::ZeroItemsPerCell
        ));
    }

    #[test]
    fn item_ids_escape_separators() {
        assert_eq!(
            item_id("golden retriever", "occlusion", Difficulty::Hard, 3),
            "golden%20retriever/occlusion/hard/3"
        );
        assert_ne!(
            item_id("a/b", "c", Difficulty::Easy, 0),
            item_id("a", "b/c", Difficulty::Easy, 0)
        );
    }

    #[test]
    fn load_rejects_short_cell() {
        let a = attrs(2);
        let t = TemplateTable::uniform("{class}", &a);
        let m = build_manifest(&["A".into(), "B".into()], &a, 12, &t).unwrap();
        let text: String = m
            .to_jsonl()
            .lines()
            .filter(|l| !l.contains("\"item_id\":\"B/attr1/medium/5\""))
            .map(|l| format!("{l}\n"))
            .collect();
        let err = Manifest::from_jsonl(&text).unwrap_err();
        match err {
            CorpusError::Unbalanced { cell, .. } => assert_eq!(cell, "B/attr1/medium"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn load_reports_line_numbers_and_empty() {
        assert!(matches!(
            Manifest::from_jsonl("").unwrap_err(),
            CorpusError::EmptyManifest
        ));
        let a = attrs(1);
        let t = TemplateTable::uniform("{class}", &a);
        let m = build_manifest(&["A".into()], &a, 1, &t).unwrap();
        let mut text = m.to_jsonl();
        text.push_str("{not json}\n");
        match Manifest::from_jsonl(&text).unwrap_err() {
            CorpusError::Parse { line, .. } => assert_eq!(line, 4),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn generator_collects_failures() {
        struct FailSecond(usize);
        impl GeneratorBackend for FailSecond {
            fn submit(&mut self, _prompt: &str) -> Result<String, String> {
                self.0 += 1;
                if self.0 == 2 {
                    Err("quota exceeded".into())
                } else {
                    Ok(format!("ref{}", self.0))
                }
            }
        }
        let a = attrs(1);
        let t = TemplateTable::uniform("{class}", &a);
        let m = build_manifest(&["A".into()], &a, 1, &t).unwrap();
        let report = run_generator(&m, &mut FailSecond(0));
        assert_eq!(report.entries.len(), 3);
        assert_eq!(report.references(), 2);
        assert_eq!(report.errors(), 1);
        assert_eq!(
            report.entries[1].outcome,
            GenerationOutcome::Error("quota exceeded".into())
        );
    }

    #[test]
    fn mock_generator_logs_prompts_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let a = attrs(1);
        let t = TemplateTable::uniform("{difficulty} {class}", &a);
        let m = build_manifest(&["A".into()], &a, 1, &t).unwrap();
        let mut mock = MockGenerator::create(dir.path()).unwrap();
        let report = run_generator(&m, &mut mock);
        let log = mock.finish().unwrap();
        assert_eq!(report.references(), 3);
        assert_eq!(
            fs::read_to_string(log).unwrap(),
            "easy A\nmedium A\nhard A\n"
        );

        let mut mock = MockGenerator::create(&dir.path().join("empty")).unwrap();
        let report = run_generator_on(&[], &mut mock);
        assert!(report.entries.is_empty());
    }

    #[test]
    fn difficulty_ordering_and_parsing() {
        assert!(Difficulty::Easy < Difficulty::Medium && Difficulty::Medium < Difficulty::Hard);
        assert_eq!("Hard".parse::<Difficulty>().unwrap(), Difficulty::Hard);
        assert!("extreme".parse::<Difficulty>().is_err());
        assert_eq!(Difficulty::Medium.level(), 2);
    }
}
