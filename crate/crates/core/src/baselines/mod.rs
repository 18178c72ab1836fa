//! Classical classifiers and the soft-vote ensemble.

mod ensemble;
mod lexicon;
mod naive_bayes;

pub use ensemble::{ensemble_classify, fuse, EnsembleMembers, EnsembleSpec, MemberKind, TransformerMember};
pub use lexicon::{lexicon_classify, LexiconModel};
pub use naive_bayes::{nb_classify, nb_train, nb_train_documents, DomainNaiveBayes, NaiveBayesModel};
