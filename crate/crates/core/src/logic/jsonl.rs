//! JSON Lines form of a finite structure: a header record followed by one
//! record per positive fact, facts in canonical order.

use serde::{Deserialize, Serialize};

use super::{FiniteStructure, LogicError, Signature, Symbol};

#[derive(Serialize, Deserialize)]
struct Header {
    domain_size: usize,
    signature: Vec<Symbol>,
}

#[derive(Serialize, Deserialize)]
struct Fact {
    rel: String,
    args: Vec<usize>,
}

pub fn to_jsonl(m: &FiniteStructure) -> String {
    let header = Header {
        domain_size: m.domain_size(),
        signature: m.signature().symbols().to_vec(),
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for (s, args) in m.facts() {
        let fact = Fact {
            rel: m.signature().name(s).to_string(),
            args: args.to_vec(),
        };
        out.push_str(&serde_json::to_string(&fact).expect("fact serializes"));
        out.push('\n');
    }
    out
}

pub fn from_jsonl(text: &str) -> Result<FiniteStructure, LogicError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let first = lines
        .next()
        .ok_or_else(|| LogicError::Json("missing header record".into()))?;
    let header: Header =
        serde_json::from_str(first).map_err(|e| LogicError::Json(e.to_string()))?;
    let mut m = FiniteStructure::new(Signature::new(header.signature)?, header.domain_size);
    for line in lines {
        let fact: Fact = serde_json::from_str(line).map_err(|e| LogicError::Json(e.to_string()))?;
        m.add_named(&fact.rel, fact.args)?;
    }
    Ok(m)
}
