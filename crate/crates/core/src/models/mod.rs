//! Application models built on the simplex samplers: latent Dirichlet
//! allocation with online minibatches, and a Dirichlet-process mixture of
//! multinomials with exact and stochastic slice samplers.

mod corpus;
mod dp;
mod lda;

pub use corpus::{Corpus, Document};
pub use dp::{
    dp_alpha_update, dp_slice_gibbs_step, dp_slice_stochastic_step, dp_slice_stochastic_step_with, DpHyper,
    DpState,
};
pub use lda::{
    lda_doc_topic_mean, lda_local_z_sweep, lda_scir_step, lda_sgrld_step, lda_step, lda_word_probabilities,
    stepsize_schedule, LdaHyper, LdaState, TopicAssignment,
};
