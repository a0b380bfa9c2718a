//! Business model representation.
//!
//! A business model is a total map from catalog elements to one allowed
//! choice each, plus a little numeric metadata and a free-text profile per
//! value dimension. The [`PatternCatalog`] fixes element and choice order,
//! which in turn fixes the one-hot layout produced by [`encode`].

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical;
use crate::common::{Dimension, Timestamp, VentureId};

const DEFAULT_CATALOG: &str = include_str!("../data/pattern_catalog.json");

/// Names of the numeric metadata features appended after the one-hot blocks.
pub const METADATA_FEATURES: [&str; 2] = ["team_size", "venture_age_months"];

#[derive(Debug, Error)]
pub enum OntologyError {
    #[error("invalid catalog: {0}")]
    InvalidCatalog(String),
    #[error("catalog version mismatch: expected `{expected}`, found `{found}`")]
    CatalogMismatch { expected: String, found: String },
    #[error("versions belong to different ventures (`{0}` and `{1}`)")]
    DifferentVentures(VentureId, VentureId),
    #[error("base version belongs to venture `{found}`, not `{expected}`")]
    BaseVentureMismatch { expected: VentureId, found: VentureId },
    #[error("stale base: revision cites {cited:?} but the latest version is {latest:?}")]
    StaleBase { cited: Option<u32>, latest: Option<u32> },
    #[error("feature vector has {found} values, catalog expects {expected}")]
    FeatureLength { expected: usize, found: usize },
    #[error("feature block for `{0}` is not one-hot")]
    NotOneHot(String),
    #[error("business model failed validation ({} problems)", .0.len())]
    Invalid(Vec<ValidationError>),
    #[error("reading catalog: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing catalog: {0}")]
    Parse(#[from] serde_json::Error),
}

/// One problem found while validating a business model document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "code", rename_all = "snake_case")]
pub enum ValidationError {
    UnknownElement { element: String },
    UnknownChoice { element: String, choice: String },
    MissingElement { element: String },
    NegativeMetadata { field: String },
    UnknownIndustry { industry: String },
    CatalogMismatch { expected: String, found: String },
}

impl ValidationError {
    pub fn code(&self) -> &'static str {
        match self {
            ValidationError::UnknownElement { .. } => "unknown_element",
            ValidationError::UnknownChoice { .. } => "unknown_choice",
            ValidationError::MissingElement { .. } => "missing_element",
            ValidationError::NegativeMetadata { .. } => "negative_metadata",
            ValidationError::UnknownIndustry { .. } => "unknown_industry",
            ValidationError::CatalogMismatch { .. } => "catalog_mismatch",
        }
    }

    /// Path of the offending document field.
    pub fn field(&self) -> String {
        match self {
            ValidationError::UnknownElement { element }
            | ValidationError::UnknownChoice { element, .. }
            | ValidationError::MissingElement { element } => format!("choices.{element}"),
            ValidationError::NegativeMetadata { field } => format!("metadata.{field}"),
            ValidationError::UnknownIndustry { .. } => "metadata.industry".to_owned(),
            ValidationError::CatalogMismatch { .. } => "catalog_version".to_owned(),
        }
    }

    pub fn message(&self) -> String {
        match self {
            ValidationError::UnknownElement { element } => {
                format!("element `{element}` is not in the catalog")
            }
            ValidationError::UnknownChoice { element, choice } => {
                format!("choice `{choice}` is not allowed for element `{element}`")
            }
            ValidationError::MissingElement { element } => {
                format!("element `{element}` has no choice")
            }
            ValidationError::NegativeMetadata { field } => format!("`{field}` must be non-negative"),
            ValidationError::UnknownIndustry { industry } => {
                format!("industry `{industry}` is not in the catalog")
            }
            ValidationError::CatalogMismatch { expected, found } => {
                format!("document targets catalog `{found}`, service uses `{expected}`")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementDef {
    pub element_id: String,
    pub dimension: Dimension,
    pub display_name: String,
    pub choices: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternCatalog {
    pub catalog_version: String,
    pub industries: Vec<String>,
    pub elements: Vec<ElementDef>,
}

impl PatternCatalog {
    /// The bundled nine-element catalog.
    pub fn default_catalog() -> Self {
        Self::from_json(DEFAULT_CATALOG).expect("bundled pattern catalog is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, OntologyError> {
        let catalog: PatternCatalog = canonical::from_str(text)?;
        catalog.check()?;
        Ok(catalog)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, OntologyError> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    fn check(&self) -> Result<(), OntologyError> {
        if self.elements.is_empty() {
            return Err(OntologyError::InvalidCatalog("no elements".into()));
        }
        let mut seen = BTreeSet::new();
        for element in &self.elements {
            if !seen.insert(element.element_id.as_str()) {
                return Err(OntologyError::InvalidCatalog(format!(
                    "duplicate element `{}`",
                    element.element_id
                )));
            }
            if element.choices.len() < 2 {
                return Err(OntologyError::InvalidCatalog(format!(
                    "element `{}` needs at least two choices",
                    element.element_id
                )));
            }
            let unique: BTreeSet<_> = element.choices.iter().collect();
            if unique.len() != element.choices.len() {
                return Err(OntologyError::InvalidCatalog(format!(
                    "element `{}` repeats a choice",
                    element.element_id
                )));
            }
        }
        let industries: BTreeSet<_> = self.industries.iter().collect();
        if industries.len() != self.industries.len() {
            return Err(OntologyError::InvalidCatalog("duplicate industry".into()));
        }
        Ok(())
    }

    pub fn element(&self, element_id: &str) -> Option<&ElementDef> {
        self.elements.iter().find(|e| e.element_id == element_id)
    }

    pub fn element_index(&self, element_id: &str) -> Option<usize> {
        self.elements.iter().position(|e| e.element_id == element_id)
    }

    pub fn elements_in(&self, dimension: Dimension) -> impl Iterator<Item = &ElementDef> {
        self.elements.iter().filter(move |e| e.dimension == dimension)
    }

    /// Number of one-hot indicators (sum of choice counts).
    pub fn indicator_count(&self) -> usize {
        self.elements.iter().map(|e| e.choices.len()).sum()
    }

    pub fn feature_len(&self) -> usize {
        self.indicator_count() + METADATA_FEATURES.len()
    }

    /// Human-readable names for every encoded feature, in vector order.
    pub fn feature_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.feature_len());
        for element in &self.elements {
            for choice in &element.choices {
                names.push(format!("{}={}", element.element_id, choice));
            }
        }
        names.extend(METADATA_FEATURES.iter().map(|s| s.to_string()));
        names
    }

    /// Index of the indicator for `(element, choice)`.
    pub fn indicator_index(&self, element_id: &str, choice_id: &str) -> Option<usize> {
        let mut offset = 0;
        for element in &self.elements {
            if element.element_id == element_id {
                return element.choices.iter().position(|c| c == choice_id).map(|i| offset + i);
            }
            offset += element.choices.len();
        }
        None
    }
}

/// Unvalidated business model as submitted by a client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub catalog_version: Option<String>,
    #[serde(default)]
    pub choices: BTreeMap<String, String>,
    pub metadata: RawMetadata,
    #[serde(default)]
    pub profile: BTreeMap<Dimension, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawMetadata {
    pub team_size: i64,
    pub venture_age_months: i64,
    pub industry: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metadata {
    pub team_size: u32,
    pub venture_age_months: u32,
    pub industry: String,
}

/// A validated business model: one allowed choice per catalog element.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BusinessModel {
    pub catalog_version: String,
    pub choices: BTreeMap<String, String>,
    pub metadata: Metadata,
    /// Startup profile shown to mentors; stored, never interpreted.
    pub profile: BTreeMap<Dimension, String>,
}

impl BusinessModel {
    pub fn choice(&self, element_id: &str) -> Option<&str> {
        self.choices.get(element_id).map(String::as_str)
    }

    /// Copy of this model with one element switched to `choice_id`.
    pub fn with_choice(&self, element_id: &str, choice_id: &str) -> BusinessModel {
        let mut next = self.clone();
        next.choices.insert(element_id.to_owned(), choice_id.to_owned());
        next
    }

    pub fn to_document(&self) -> ModelDocument {
        ModelDocument {
            catalog_version: Some(self.catalog_version.clone()),
            choices: self.choices.clone(),
            metadata: RawMetadata {
                team_size: self.metadata.team_size.into(),
                venture_age_months: self.metadata.venture_age_months.into(),
                industry: self.metadata.industry.clone(),
            },
            profile: self.profile.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BusinessModelVersion {
    pub venture_id: VentureId,
    pub version: u32,
    pub parent: Option<u32>,
    pub created_at: Timestamp,
    pub model: BusinessModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub schema_id: String,
    pub values: Vec<f64>,
}

/// Checks a document against the catalog and reports every violation.
pub fn validate_model(
    document: &ModelDocument,
    catalog: &PatternCatalog,
) -> Result<BusinessModel, Vec<ValidationError>> {
    let mut errors = Vec::new();

    if let Some(found) = &document.catalog_version {
        if *found != catalog.catalog_version {
            errors.push(ValidationError::CatalogMismatch {
                expected: catalog.catalog_version.clone(),
                found: found.clone(),
            });
        }
    }

    for element in &catalog.elements {
        match document.choices.get(&element.element_id) {
            None => errors.push(ValidationError::MissingElement {
                element: element.element_id.clone(),
            }),
            Some(choice) if !element.choices.contains(choice) => {
                errors.push(ValidationError::UnknownChoice {
                    element: element.element_id.clone(),
                    choice: choice.clone(),
                })
            }
            Some(_) => {}
        }
    }
    for element_id in document.choices.keys() {
        if catalog.element(element_id).is_none() {
            errors.push(ValidationError::UnknownElement { element: element_id.clone() });
        }
    }

    let meta = &document.metadata;
    let team_size = non_negative(meta.team_size, "team_size", &mut errors);
    let age = non_negative(meta.venture_age_months, "venture_age_months", &mut errors);
    if !catalog.industries.iter().any(|i| *i == meta.industry) {
        errors.push(ValidationError::UnknownIndustry { industry: meta.industry.clone() });
    }

    if !errors.is_empty() {
        return Err(errors);
    }
    Ok(BusinessModel {
        catalog_version: catalog.catalog_version.clone(),
        choices: document.choices.clone(),
        metadata: Metadata {
            team_size,
            venture_age_months: age,
            industry: meta.industry.clone(),
        },
        profile: document.profile.clone(),
    })
}

fn non_negative(value: i64, field: &str, errors: &mut Vec<ValidationError>) -> u32 {
    match u32::try_from(value) {
        Ok(v) => v,
        Err(_) if value < 0 => {
            errors.push(ValidationError::NegativeMetadata { field: field.to_owned() });
            0
        }
        Err(_) => u32::MAX,
    }
}

/// One-hot encodes the model's choices in catalog order, followed by the
/// numeric metadata.
pub fn encode(model: &BusinessModel, catalog: &PatternCatalog) -> Result<FeatureVector, OntologyError> {
    if model.catalog_version != catalog.catalog_version {
        return Err(OntologyError::CatalogMismatch {
            expected: catalog.catalog_version.clone(),
            found: model.catalog_version.clone(),
        });
    }
    let mut values = Vec::with_capacity(catalog.feature_len());
    for element in &catalog.elements {
        let chosen = model.choice(&element.element_id);
        values.extend(
            element
                .choices
                .iter()
                .map(|c| if Some(c.as_str()) == chosen { 1.0 } else { 0.0 }),
        );
    }
    values.push(f64::from(model.metadata.team_size));
    values.push(f64::from(model.metadata.venture_age_months));
    Ok(FeatureVector { schema_id: catalog.catalog_version.clone(), values })
}

/// Recovers the element choices from the one-hot blocks of a feature vector.
pub fn decode_choices(
    features: &FeatureVector,
    catalog: &PatternCatalog,
) -> Result<BTreeMap<String, String>, OntologyError> {
    if features.schema_id != catalog.catalog_version {
        return Err(OntologyError::CatalogMismatch {
            expected: catalog.catalog_version.clone(),
            found: features.schema_id.clone(),
        });
    }
    if features.values.len() != catalog.feature_len() {
        return Err(OntologyError::FeatureLength {
            expected: catalog.feature_len(),
            found: features.values.len(),
        });
    }
    let mut choices = BTreeMap::new();
    let mut offset = 0;
    for element in &catalog.elements {
        let block = &features.values[offset..offset + element.choices.len()];
        let hot: Vec<usize> = (0..block.len()).filter(|&i| block[i] == 1.0).collect();
        let cold = block.iter().filter(|&&v| v == 0.0).count();
        if hot.len() != 1 || cold != block.len() - 1 {
            return Err(OntologyError::NotOneHot(element.element_id.clone()));
        }
        choices.insert(element.element_id.clone(), element.choices[hot[0]].clone());
        offset += element.choices.len();
    }
    Ok(choices)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChoiceChange {
    pub element_id: String,
    pub old_choice: String,
    pub new_choice: String,
}

/// Element-level changes from `from` to `to`, in catalog order.
pub fn diff(
    from: &BusinessModelVersion,
    to: &BusinessModelVersion,
    catalog: &PatternCatalog,
) -> Result<Vec<ChoiceChange>, OntologyError> {
    if from.venture_id != to.venture_id {
        return Err(OntologyError::DifferentVentures(from.venture_id.clone(), to.venture_id.clone()));
    }
    for model in [&from.model, &to.model] {
        if model.catalog_version != catalog.catalog_version {
            return Err(OntologyError::CatalogMismatch {
                expected: catalog.catalog_version.clone(),
                found: model.catalog_version.clone(),
            });
        }
    }
    let changes = catalog
        .elements
        .iter()
        .filter_map(|element| {
            let old = from.model.choice(&element.element_id)?;
            let new = to.model.choice(&element.element_id)?;
            (old != new).then(|| ChoiceChange {
                element_id: element.element_id.clone(),
                old_choice: old.to_owned(),
                new_choice: new.to_owned(),
            })
        })
        .collect();
    Ok(changes)
}

/// Builds the next version of a venture's model.
///
/// History is linear: a revision must cite the venture's latest version
/// (`latest`), and the first version must cite nothing.
pub fn new_version(
    venture_id: &VentureId,
    base: Option<&BusinessModelVersion>,
    latest: Option<u32>,
    model: BusinessModel,
    created_at: Timestamp,
) -> Result<BusinessModelVersion, OntologyError> {
    if let Some(base) = base {
        if base.venture_id != *venture_id {
            return Err(OntologyError::BaseVentureMismatch {
                expected: venture_id.clone(),
                found: base.venture_id.clone(),
            });
        }
    }
    let cited = base.map(|b| b.version);
    if cited != latest {
        return Err(OntologyError::StaleBase { cited, latest });
    }
    Ok(BusinessModelVersion {
        venture_id: venture_id.clone(),
        version: cited.unwrap_or(0) + 1,
        parent: cited,
        created_at,
        model,
    })
}
