//! Acceptance checks spanning the library and the command-line tool. The
//! checks live in `tests/acceptance.rs`; run them alone with
//! `cargo test -p lfgp-validation --test acceptance`, optionally followed by
//! `-- <criterion numbers>`.
