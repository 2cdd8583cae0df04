//! Restricted narrative English compiled into semantic role graphs, bound to
//! world entities and executed on a tick-driven script VM.

pub mod grammar;
pub mod lexicon;
pub mod semantic;
pub mod world;
pub mod bind;
pub mod exec;
pub mod rules;
pub mod sim;
pub mod trace;
pub mod session;
