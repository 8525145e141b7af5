//! Command implementations and the HTTP session service behind the
//! `phrasegame` binary.

pub mod commands;
pub mod server;
