use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::features::{
    bag_of_subtokens, bag_of_tokens, build_subtoken_vocab, build_token_vocab, FeatureModel, NlpConfig,
    SparseVector, Vocabulary,
};
use crate::reduce::{lsa_fit, LsaModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NlpVariant {
    Word,
    Char,
    CharWord,
}

/// How documents become feature vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureSpec {
    /// One of the eight numbered NLP configurations.
    Nlp { config: usize, variant: NlpVariant },
    BagOfTokens,
    BagOfSubtokens { min: usize, max: usize },
}

impl FeatureSpec {
    pub fn label(&self) -> String {
        match self {
            FeatureSpec::Nlp { config, variant } => {
                let v = match variant {
                    NlpVariant::Word => "word",
                    NlpVariant::Char => "char",
                    NlpVariant::CharWord => "char_word",
                };
                format!("nlp{config}-{v}")
            }
            FeatureSpec::BagOfTokens => "bot".into(),
            FeatureSpec::BagOfSubtokens { min, max } => format!("bost{min}-{max}"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            FeatureSpec::Nlp { config, .. } => NlpConfig::table(config).map(|_| ()),
            FeatureSpec::BagOfTokens => Ok(()),
            FeatureSpec::BagOfSubtokens { min, max } => {
                if min == 0 || min > max {
                    Err(Error::Config(format!("subtoken range {min}..={max} is inconsistent")))
                } else {
                    Ok(())
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Base {
    Nlp(FeatureModel),
    Tokens(Vocabulary),
    Subtokens { vocab: Vocabulary, min: usize, max: usize },
}

/// A fitted feature extractor, optionally followed by LSA.
#[derive(Clone, Debug, PartialEq)]
pub struct Featurizer {
    pub spec: FeatureSpec,
    base: Base,
    pub lsa: Option<LsaModel>,
}

#[derive(Serialize, Deserialize)]
struct FeaturizerRepr {
    spec: FeatureSpec,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    nlp: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    vocab: Option<Vocabulary>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    lsa: Option<LsaModel>,
}

impl Featurizer {
    /// Fits on training documents only.
    pub fn fit(spec: &FeatureSpec, docs: &[Vec<String>], lsa_k: Option<usize>, seed: u64) -> Result<Self> {
        spec.validate()?;
        let base = match *spec {
            FeatureSpec::Nlp { config, variant } => {
                let cfg = NlpConfig::table(config)?;
                Base::Nlp(match variant {
                    NlpVariant::Word => FeatureModel::fit_word(docs, &cfg)?,
                    NlpVariant::Char => FeatureModel::fit_char(docs, &cfg)?,
                    NlpVariant::CharWord => FeatureModel::fit_char_word(docs, &cfg)?,
                })
            }
            FeatureSpec::BagOfTokens => Base::Tokens(build_token_vocab(docs)?),
            FeatureSpec::BagOfSubtokens { min, max } => Base::Subtokens {
                vocab: build_subtoken_vocab(docs, min, max)?,
                min,
                max,
            },
        };
        let mut out = Featurizer {
            spec: spec.clone(),
            base,
            lsa: None,
        };
        if let Some(k) = lsa_k {
            let rows: Vec<SparseVector> = docs.iter().map(|d| out.base_transform(d)).collect();
            let width = rows.first().map_or(0, SparseVector::width);
            out.lsa = Some(lsa_fit(&rows, k.min(width).min(rows.len()).max(1), seed)?);
        }
        Ok(out)
    }

    fn base_transform(&self, tokens: &[String]) -> SparseVector {
        match &self.base {
            Base::Nlp(m) => m.transform(tokens),
            Base::Tokens(v) => bag_of_tokens(v, tokens),
            Base::Subtokens { vocab, min, max } => bag_of_subtokens(vocab, tokens, *min, *max),
        }
    }

    pub fn width(&self) -> usize {
        match (&self.lsa, &self.base) {
            (Some(l), _) => l.k,
            (None, Base::Nlp(m)) => m.width(),
            (None, Base::Tokens(v)) | (None, Base::Subtokens { vocab: v, .. }) => v.len(),
        }
    }

    pub fn transform(&self, tokens: &[String]) -> Result<SparseVector> {
        let x = self.base_transform(tokens);
        match &self.lsa {
            Some(l) => Ok(SparseVector::from_dense(&l.transform(&x)?)),
            None => Ok(x),
        }
    }

    pub fn transform_all(&self, docs: &[Vec<String>]) -> Result<Vec<SparseVector>> {
        docs.iter().map(|d| self.transform(d)).collect()
    }

    pub fn to_value(&self) -> Result<Value> {
        let (nlp, vocab) = match &self.base {
            Base::Nlp(m) => (Some(serde_json::from_str(&m.to_json()?)?), None),
            Base::Tokens(v) | Base::Subtokens { vocab: v, .. } => (None, Some(v.clone())),
        };
        Ok(serde_json::to_value(FeaturizerRepr {
            spec: self.spec.clone(),
            nlp,
            vocab,
            lsa: self.lsa.clone(),
        })?)
    }

    pub fn from_value(value: &Value) -> Result<Self> {
        let repr: FeaturizerRepr = serde_json::from_value(value.clone())?;
        let missing = || Error::Structural(format!("featurizer `{}` lacks its vocabulary", repr.spec.label()));
        let base = match repr.spec {
            FeatureSpec::Nlp { .. } => {
                let v = repr.nlp.as_ref().ok_or_else(missing)?;
                Base::Nlp(FeatureModel::from_json(&v.to_string())?)
            }
            FeatureSpec::BagOfTokens => Base::Tokens(repr.vocab.clone().ok_or_else(missing)?),
            FeatureSpec::BagOfSubtokens { min, max } => Base::Subtokens {
                vocab: repr.vocab.clone().ok_or_else(missing)?,
                min,
                max,
            },
        };
        Ok(Featurizer {
            spec: repr.spec,
            base,
            lsa: repr.lsa,
        })
    }
}
