use std::fs;
use std::io::{self, Read};
use std::path::Path;

use qcore::corpus::get_fixture;
use qcore::logic::{parse_formula, Formula};
use qcore::morphism::{parse_witness, Witness};
use qcore::structure::parse_structure;
use qcore::{Signature, Structure};

use crate::Failure;

/// Text of an input argument: `-` is standard input, otherwise the path as
/// given, then with `.txt` appended.
fn read_text(arg: &str) -> Result<Option<String>, Failure> {
    if arg == "-" {
        let mut buf = String::new();
        io::stdin()
            .read_to_string(&mut buf)
            .map_err(|e| Failure::io(format!("standard input: {e}")))?;
        return Ok(Some(buf));
    }
    for candidate in [arg.to_string(), format!("{arg}.txt")] {
        let path = Path::new(&candidate);
        if path.is_file() {
            return fs::read_to_string(path)
                .map(Some)
                .map_err(|e| Failure::io(format!("{candidate}: {e}")));
        }
    }
    Ok(None)
}

/// A structure from a file, standard input, or the built-in fixture named
/// by the argument's file stem.
pub fn structure(arg: &str) -> Result<Structure, Failure> {
    if let Some(text) = read_text(arg)? {
        return parse_structure(&text).map_err(|e| Failure::from_error(e).context(arg));
    }
    let stem = Path::new(arg)
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or(arg);
    match get_fixture(stem) {
        Ok(f) => Ok(f.structure),
        Err(_) => Err(Failure::io(format!("{arg}: no such file or fixture"))),
    }
}

/// A formula from a file or standard input, or the argument itself read as
/// formula text.
pub fn formula(arg: &str, sig: &Signature) -> Result<Formula, Failure> {
    let text = read_text(arg)?.unwrap_or_else(|| arg.to_string());
    parse_formula(text.trim(), sig).map_err(|e| Failure::from_error(e).context("formula"))
}

pub fn witness(arg: &str) -> Result<Witness, Failure> {
    let text = read_text(arg)?.ok_or_else(|| Failure::io(format!("{arg}: no such file")))?;
    parse_witness(&text).map_err(|e| Failure::from_error(e).context(arg))
}
