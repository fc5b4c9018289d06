//! Character-level LSTM generation of drug-like SMILES, with a two-stage
//! validity pipeline, a naive roulette-wheel control generator and the
//! statistics used to compare generated sets against a training set.

pub mod lexicon;
pub mod baseline;
pub mod chemstats;
pub mod genpipe;
pub mod molparse;
pub mod neural;
pub mod toycorpus;
