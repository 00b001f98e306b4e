//! The 25 phenotype categories and the ICD-9 → category lookup.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::types::PhenotypeMask;

pub const NUM_PHENOTYPES: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PhenotypeType {
    Acute,
    Chronic,
    Mixed,
}

/// Category names in fixed order, with type and the prevalence observed on the
/// full eICU cohort (used as the synthetic generator's default rates).
pub const CATEGORIES: [(&str, PhenotypeType, f64); NUM_PHENOTYPES] = [
    ("Respiratory failure; insufficiency; arrest", PhenotypeType::Acute, 0.241),
    ("Fluid and electrolyte disorders", PhenotypeType::Acute, 0.156),
    ("Septicemia", PhenotypeType::Acute, 0.145),
    ("Acute and unspecified renal failure", PhenotypeType::Acute, 0.142),
    ("Pneumonia", PhenotypeType::Acute, 0.120),
    ("Acute cerebrovascular disease", PhenotypeType::Acute, 0.108),
    ("Acute myocardial infarction", PhenotypeType::Acute, 0.090),
    ("Gastrointestinal hemorrhage", PhenotypeType::Acute, 0.079),
    ("Shock", PhenotypeType::Acute, 0.068),
    ("Pleurisy; pneumothorax; pulmonary collapse", PhenotypeType::Acute, 0.039),
    ("Other lower respiratory disease", PhenotypeType::Acute, 0.030),
    ("Complications of surgical", PhenotypeType::Acute, 0.011),
    ("Other upper respiratory disease", PhenotypeType::Acute, 0.007),
    ("Hypertension with complications", PhenotypeType::Chronic, 0.019),
    ("Essential hypertension", PhenotypeType::Chronic, 0.203),
    ("Chronic kidney disease", PhenotypeType::Chronic, 0.104),
    ("Chronic obstructive pulmonary disease", PhenotypeType::Chronic, 0.093),
    ("Disorders of lipid metabolism", PhenotypeType::Chronic, 0.054),
    ("Coronary atherosclerosis and related", PhenotypeType::Chronic, 0.041),
    ("Diabetes mellitus without complication", PhenotypeType::Chronic, 0.006),
    ("Cardiac dysrhythmias", PhenotypeType::Mixed, 0.165),
    ("Congestive heart failure; non hypertensive", PhenotypeType::Mixed, 0.106),
    ("Diabetes mellitus with complications", PhenotypeType::Mixed, 0.047),
    ("Other liver diseases", PhenotypeType::Mixed, 0.039),
    ("Conduction disorders", PhenotypeType::Mixed, 0.013),
];

pub fn category_index(name: &str) -> Option<usize> {
    CATEGORIES.iter().position(|(n, _, _)| *n == name)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PhenotypeCatalog {
    code_map: BTreeMap<String, usize>,
}

impl PhenotypeCatalog {
    /// Builds a catalog from `(code, category)` pairs. A code listed under two
    /// different categories is rejected.
    pub fn from_pairs<I, S>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, usize)>,
        S: AsRef<str>,
    {
        let mut code_map = BTreeMap::new();
        for (code, idx) in pairs {
            let code = normalize_code(code.as_ref());
            if idx >= NUM_PHENOTYPES {
                return Err(Error::Config(format!(
                    "phenotype index {idx} for code `{code}` out of range 0..{NUM_PHENOTYPES}"
                )));
            }
            if let Some(prev) = code_map.insert(code.clone(), idx) {
                if prev != idx {
                    return Err(Error::Config(format!(
                        "ICD-9 code `{code}` mapped to both category {prev} and {idx}"
                    )));
                }
            }
        }
        Ok(Self { code_map })
    }

    /// Parses the `code,category_index` line format. Blank lines and lines
    /// starting with `#` are ignored; a leading `code,category_index` header is
    /// allowed.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (code, idx) = line.rsplit_once(',').ok_or_else(|| {
                Error::Config(format!("phenotype map line {}: expected `code,index`", lineno + 1))
            })?;
            let idx = match idx.trim().parse::<usize>() {
                Ok(i) => i,
                Err(_) if lineno == 0 => continue,
                Err(_) => {
                    return Err(Error::Config(format!(
                        "phenotype map line {}: bad category index `{}`",
                        lineno + 1,
                        idx.trim()
                    )))
                }
            };
            pairs.push((code.to_string(), idx));
        }
        Self::from_pairs(pairs)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("code,category_index\n");
        for (code, idx) in &self.code_map {
            out.push_str(&format!("{code},{idx}\n"));
        }
        out
    }

    pub fn category_of(&self, code: &str) -> Option<usize> {
        self.code_map.get(&normalize_code(code)).copied()
    }

    pub fn len(&self) -> usize {
        self.code_map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.code_map.is_empty()
    }

    pub fn codes(&self) -> impl Iterator<Item = (&str, usize)> {
        self.code_map.iter().map(|(c, &i)| (c.as_str(), i))
    }

    /// Mask of categories hit by any of `codes`.
    pub fn mask(&self, codes: &BTreeSet<String>) -> PhenotypeMask {
        let mut mask = PhenotypeMask::default();
        for code in codes {
            if let Some(n) = self.category_of(code) {
                mask.set(n);
            }
        }
        mask
    }
}

pub fn normalize_code(code: &str) -> String {
    code.trim().to_ascii_uppercase()
}
