use log::info;
use sentiflow_core::baselines::{
    ensemble_classify, EnsembleMembers, EnsembleSpec, LexiconModel, MemberKind, TransformerMember,
};
use sentiflow_core::corpus::Document;
use sentiflow_core::engine::{count_params, load_checkpoint, LanguageGate, ModelConfig};
use sentiflow_core::textprep::{LanguageProfile, Vocabulary};
use sentiflow_core::{Classification, ModelParams, NaiveBayesModel};

use crate::config::PipelineConfig;
use crate::error::{ServiceError, ServiceResult};

#[derive(Debug, Clone)]
pub struct Transformer {
    pub params: ModelParams,
    pub vocab: Vocabulary,
    pub config: ModelConfig,
}

/// Everything the classification stage reads. Immutable once built and shared
/// between workers.
#[derive(Debug, Clone)]
pub struct Models {
    spec: EnsembleSpec,
    transformer: Option<Transformer>,
    naive_bayes: Option<NaiveBayesModel>,
    lexicon: LexiconModel,
    gate: Option<LanguageGate>,
}

impl Models {
    pub fn new(
        spec: EnsembleSpec,
        transformer: Option<Transformer>,
        naive_bayes: Option<NaiveBayesModel>,
        lexicon: LexiconModel,
        gate: Option<LanguageGate>,
    ) -> ServiceResult<Self> {
        spec.validate()?;
        let missing = |kind| ServiceError::Config(format!("ensemble member `{kind:?}` has no loaded model"));
        if spec.uses(MemberKind::Transformer) && transformer.is_none() {
            return Err(missing(MemberKind::Transformer));
        }
        if spec.uses(MemberKind::NaiveBayes) && naive_bayes.is_none() {
            return Err(missing(MemberKind::NaiveBayes));
        }
        Ok(Models {
            spec,
            transformer,
            naive_bayes,
            lexicon,
            gate,
        })
    }

    /// Lexicon-only ensemble without a language gate. Needs no model files.
    pub fn lexicon_only() -> Self {
        Models::new(
            EnsembleSpec::single(MemberKind::Lexicon),
            None,
            None,
            LexiconModel::default(),
            None,
        )
        .expect("lexicon member is always present")
    }

    pub fn load(config: &PipelineConfig) -> ServiceResult<Self> {
        let spec = config.ensemble.spec();
        let paths = &config.model;
        let transformer = match (&paths.checkpoint, &paths.vocabulary) {
            (Some(ckpt), Some(vocab)) if spec.uses(MemberKind::Transformer) => {
                let vocab = Vocabulary::load(vocab)?;
                let ckpt = load_checkpoint::<f64>(ckpt, Some(&vocab.content_hash()))?;
                let aspects = config.aspect_set()?;
                if ckpt.config.n_aspects != aspects.len() {
                    return Err(ServiceError::Config(format!(
                        "checkpoint has {} aspect heads, configuration names {} aspects",
                        ckpt.config.n_aspects,
                        aspects.len()
                    )));
                }
                if let Some((name, id)) = config.domains.iter().find(|(_, id)| **id >= ckpt.config.n_domains) {
                    return Err(ServiceError::Config(format!(
                        "domain `{name}` = {id} but the model knows {} domains",
                        ckpt.config.n_domains
                    )));
                }
                info!(
                    "loaded transformer: {} parameters, vocabulary of {}",
                    count_params(&ckpt.params),
                    vocab.len()
                );
                Some(Transformer {
                    params: ckpt.params,
                    vocab,
                    config: ckpt.config,
                })
            }
            _ => None,
        };
        let naive_bayes = match &paths.naive_bayes {
            Some(p) if spec.uses(MemberKind::NaiveBayes) => Some(NaiveBayesModel::load(p)?),
            _ => None,
        };
        let mut lexicon = LexiconModel::new(Default::default(), paths.lexicon_neutral_band)?;
        lexicon.extend(&LexiconModel::default());
        if let Some(p) = &paths.lexicon {
            lexicon.extend(&LexiconModel::load(p, paths.lexicon_neutral_band)?);
        }
        let gate = if config.language.enabled {
            let mut gate = LanguageGate::english(config.language.threshold);
            for p in &config.language.profiles {
                gate.profiles.push(LanguageProfile::load(p)?);
            }
            Some(gate)
        } else {
            None
        };
        Models::new(spec, transformer, naive_bayes, lexicon, gate)
    }

    pub fn spec(&self) -> &EnsembleSpec {
        &self.spec
    }

    pub fn transformer(&self) -> Option<&Transformer> {
        self.transformer.as_ref()
    }

    pub fn naive_bayes(&self) -> Option<&NaiveBayesModel> {
        self.naive_bayes.as_ref()
    }

    pub fn lexicon(&self) -> &LexiconModel {
        &self.lexicon
    }

    pub fn gate(&self) -> Option<&LanguageGate> {
        self.gate.as_ref()
    }

    pub fn members(&self) -> EnsembleMembers<'_, f64> {
        EnsembleMembers {
            transformer: self.transformer.as_ref().map(|t| TransformerMember {
                params: &t.params,
                vocab: &t.vocab,
                config: &t.config,
            }),
            naive_bayes: self.naive_bayes.as_ref(),
            lexicon: Some(&self.lexicon),
            gate: self.gate.as_ref(),
        }
    }

    pub fn classify(&self, doc: &Document) -> sentiflow_core::Result<Classification> {
        ensemble_classify(doc, &self.spec, &self.members())
    }

    /// Trainable parameters of the transformer member, 0 without one.
    pub fn param_count(&self) -> u64 {
        self.transformer.as_ref().map_or(0, |t| count_params(&t.params) as u64)
    }
}
