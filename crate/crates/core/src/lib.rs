//! PosPTL separability for string constraints and context-free languages.

pub mod automata;
pub mod cli;
pub mod constraints;
pub mod corpus;
pub mod grammars;
pub mod ompa;
pub mod pda;
pub mod search;
pub mod twoway;
pub mod words;
