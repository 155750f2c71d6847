//! A brute-force reimplementation of the pipeline for a small pattern
//! grammar, used to cross-check the library.

use std::collections::BTreeMap;

use rand::rngs::StdRng;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use tqh::{Polarity, Rule, SystemOutput, TestItem, TestSuite};

#[derive(Debug, Clone)]
pub enum Pattern {
    /// Plain substring.
    Sub(String),
    /// Whole word, `\bword\b`.
    Word(String),
    /// Any of several substrings, `a|b|c`.
    Alt(Vec<String>),
    /// Whole-sentence equality.
    Literal(String),
}

#[derive(Debug, Clone)]
pub struct OracleRule {
    pub positive: bool,
    pub pattern: Pattern,
    pub fold_case: bool,
}

impl OracleRule {
    pub fn to_rule(&self) -> Rule {
        let polarity = if self.positive { Polarity::Positive } else { Polarity::Negative };
        let rule = match &self.pattern {
            Pattern::Sub(w) => Rule::regex(polarity, w.clone()),
            Pattern::Word(w) => Rule::regex(polarity, format!(r"\b{w}\b")),
            Pattern::Alt(ws) => Rule::regex(polarity, ws.join("|")),
            Pattern::Literal(s) => Rule::literal(polarity, s.clone()),
        };
        rule.case_insensitive(self.fold_case)
    }

    pub fn matches(&self, output: &str) -> bool {
        let fold = |s: &str| if self.fold_case { s.to_ascii_lowercase() } else { s.to_string() };
        let text = fold(output.trim());
        match &self.pattern {
            Pattern::Sub(w) => text.contains(&fold(w)),
            Pattern::Word(w) => has_word(&text, &fold(w)),
            Pattern::Alt(ws) => ws.iter().any(|w| text.contains(&fold(w))),
            Pattern::Literal(s) => text == fold(s.trim()),
        }
    }
}

fn is_word_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

fn has_word(text: &str, word: &str) -> bool {
    let t = text.as_bytes();
    let w = word.as_bytes();
    if w.len() > t.len() {
        return false;
    }
    (0..=t.len() - w.len()).any(|i| {
        &t[i..i + w.len()] == w
            && (i == 0 || !is_word_byte(t[i - 1]))
            && (i + w.len() == t.len() || !is_word_byte(t[i + w.len()]))
    })
}

#[derive(Debug, Clone)]
pub struct OracleItem {
    pub id: String,
    pub category: String,
    pub phenomenon: String,
    pub rules: Vec<OracleRule>,
}

#[derive(Debug, Clone)]
pub struct Case {
    pub items: Vec<OracleItem>,
    pub systems: Vec<String>,
    /// `outputs[item][system]`
    pub outputs: Vec<Vec<String>>,
}

const WORDS: &[&str] = &["dish", "Dish", "court", "cat", "cats", "dog", "shop", "shops", "closed"];
const NOISE: &[&str] = &["dog_house", "xdish", "dish,", "court.", "the", "a", "DOG", "Cat"];

fn sentence(rng: &mut StdRng) -> String {
    let n = rng.random_range(1..=5);
    let words: Vec<&str> = (0..n)
        .map(|_| {
            if rng.random_bool(0.7) {
                *WORDS.choose(rng).unwrap()
            } else {
                *NOISE.choose(rng).unwrap()
            }
        })
        .collect();
    words.join(" ")
}

fn random_rule(rng: &mut StdRng, literals: &[String]) -> OracleRule {
    let pattern = match rng.random_range(0..4) {
        0 => Pattern::Sub(WORDS.choose(rng).unwrap().to_string()),
        1 => Pattern::Word(WORDS.choose(rng).unwrap().to_string()),
        2 => {
            let k = rng.random_range(2..=3);
            Pattern::Alt((0..k).map(|_| WORDS.choose(rng).unwrap().to_string()).collect())
        }
        _ => Pattern::Literal(literals.choose(rng).unwrap().clone()),
    };
    OracleRule {
        positive: rng.random_bool(0.5),
        pattern,
        fold_case: rng.random_bool(0.3),
    }
}

/// A random case of at most `max_items` items and `max_systems` systems.
pub fn random_case(seed: u64, max_items: usize, max_systems: usize) -> Case {
    let mut rng = StdRng::seed_from_u64(seed);
    let categories = ["Ambiguity", "Negation", "Punctuation"];
    let n_items = rng.random_range(1..=max_items);
    let n_systems = rng.random_range(1..=max_systems);
    let systems: Vec<String> = (0..n_systems).map(|s| format!("sys{s}")).collect();
    let mut items = Vec::new();
    let mut outputs = Vec::new();
    for i in 0..n_items {
        let c = rng.random_range(0..categories.len());
        let p = rng.random_range(0..2);
        let literals: Vec<String> = (0..2).map(|_| sentence(&mut rng)).collect();
        let n_rules = rng.random_range(1..=3);
        let rules = (0..n_rules).map(|_| random_rule(&mut rng, &literals)).collect();
        let row = (0..n_systems)
            .map(|_| {
                let body = if rng.random_bool(0.2) {
                    literals.choose(&mut rng).unwrap().clone()
                } else {
                    sentence(&mut rng)
                };
                let pad = [" ", "", "\t", "  "];
                format!("{}{}{}", pad.choose(&mut rng).unwrap(), body, pad.choose(&mut rng).unwrap())
            })
            .collect();
        outputs.push(row);
        items.push(OracleItem {
            id: format!("item-{i:03}"),
            category: categories[c].to_string(),
            phenomenon: format!("{}-{p}", categories[c]),
            rules,
        });
    }
    Case { items, systems, outputs }
}

impl Case {
    pub fn suite(&self) -> TestSuite {
        let items = self
            .items
            .iter()
            .map(|it| TestItem {
                id: it.id.clone(),
                category: it.category.clone(),
                phenomenon: it.phenomenon.clone(),
                source: "Quelle.".into(),
                rules: it.rules.iter().map(OracleRule::to_rule).collect(),
            })
            .collect();
        TestSuite::new("oracle", "1", items).unwrap()
    }

    pub fn system_outputs(&self) -> Vec<SystemOutput> {
        self.systems
            .iter()
            .enumerate()
            .map(|(s, name)| {
                let mut out = SystemOutput::new(name);
                for (i, item) in self.items.iter().enumerate() {
                    out = out.with(item.id.clone(), self.outputs[i][s].clone());
                }
                out
            })
            .collect()
    }
}

/// 'P', 'F', 'N' (no match) or 'C' (contradiction), plus matched rule
/// indices.
pub type Cell = (char, Vec<usize>);

#[derive(Debug, Clone, PartialEq)]
pub struct Expected {
    pub cells: Vec<Vec<Cell>>,
    pub valid: Vec<String>,
    /// label -> per-system (correct, total)
    pub categories: BTreeMap<String, Vec<(u64, u64)>>,
    pub phenomena: BTreeMap<String, Vec<(u64, u64)>>,
    pub micro: Vec<(u64, u64)>,
    pub macro_avg: Vec<Option<f64>>,
    /// label -> systems in the best cluster
    pub category_clusters: BTreeMap<String, Vec<String>>,
    pub phenomenon_clusters: BTreeMap<String, Vec<String>>,
}

const CRITICAL: f64 = 1.6448536269514722;

fn not_worse(best: u64, x: u64, n: u64) -> bool {
    let p = (best + x) as f64 / (2 * n) as f64;
    let se = (p * (1.0 - p) * 2.0 / n as f64).sqrt();
    if se == 0.0 {
        return true;
    }
    (best as f64 - x as f64) / n as f64 / se <= CRITICAL
}

fn cluster(cells: &[(u64, u64)], systems: &[String]) -> Vec<String> {
    let n = cells[0].1;
    if n == 0 {
        return Vec::new();
    }
    let best = cells.iter().map(|c| c.0).max().unwrap();
    systems
        .iter()
        .zip(cells)
        .filter(|(_, c)| not_worse(best, c.0, n))
        .map(|(s, _)| s.clone())
        .collect()
}

pub fn expected(case: &Case) -> Expected {
    let n_sys = case.systems.len();
    let cells: Vec<Vec<Cell>> = case
        .items
        .iter()
        .zip(&case.outputs)
        .map(|(item, outs)| {
            outs.iter()
                .map(|out| {
                    let matched: Vec<usize> =
                        (0..item.rules.len()).filter(|&r| item.rules[r].matches(out)).collect();
                    let pos = matched.iter().any(|&r| item.rules[r].positive);
                    let neg = matched.iter().any(|&r| !item.rules[r].positive);
                    let status = match (pos, neg) {
                        (true, false) => 'P',
                        (false, true) => 'F',
                        (true, true) => 'C',
                        (false, false) => 'N',
                    };
                    (status, matched)
                })
                .collect()
        })
        .collect();
    let valid_idx: Vec<usize> = (0..case.items.len())
        .filter(|&i| cells[i].iter().all(|c| c.0 == 'P' || c.0 == 'F'))
        .collect();

    let mut categories: BTreeMap<String, Vec<(u64, u64)>> = BTreeMap::new();
    let mut phenomena: BTreeMap<String, Vec<(u64, u64)>> = BTreeMap::new();
    for item in &case.items {
        categories.entry(item.category.clone()).or_insert_with(|| vec![(0, 0); n_sys]);
        phenomena.entry(item.phenomenon.clone()).or_insert_with(|| vec![(0, 0); n_sys]);
    }
    for &i in &valid_idx {
        let item = &case.items[i];
        for s in 0..n_sys {
            let pass = u64::from(cells[i][s].0 == 'P');
            let cell = &mut categories.get_mut(&item.category).unwrap()[s];
            cell.0 += pass;
            cell.1 += 1;
            let cell = &mut phenomena.get_mut(&item.phenomenon).unwrap()[s];
            cell.0 += pass;
            cell.1 += 1;
        }
    }
    let micro: Vec<(u64, u64)> = (0..n_sys)
        .map(|s| {
            let correct = valid_idx.iter().filter(|&&i| cells[i][s].0 == 'P').count() as u64;
            (correct, valid_idx.len() as u64)
        })
        .collect();
    // Sum in first-appearance order so the float result is bit-identical.
    let mut order: Vec<&str> = Vec::new();
    for item in &case.items {
        if !order.contains(&item.category.as_str()) {
            order.push(&item.category);
        }
    }
    let macro_avg = (0..n_sys)
        .map(|s| {
            let accs: Vec<f64> = order
                .iter()
                .map(|c| &categories[*c])
                .filter(|c| c[s].1 > 0)
                .map(|c| c[s].0 as f64 / c[s].1 as f64)
                .collect();
            (!accs.is_empty()).then(|| accs.iter().sum::<f64>() / accs.len() as f64)
        })
        .collect();
    let clusters = |t: &BTreeMap<String, Vec<(u64, u64)>>| {
        t.iter().map(|(k, v)| (k.clone(), cluster(v, &case.systems))).collect()
    };
    Expected {
        valid: valid_idx.iter().map(|&i| case.items[i].id.clone()).collect(),
        category_clusters: clusters(&categories),
        phenomenon_clusters: clusters(&phenomena),
        cells,
        categories,
        phenomena,
        micro,
        macro_avg,
    }
}
