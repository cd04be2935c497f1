//! Minimal s-expression reader shared by the formula parsers.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SexpError {
    #[error("unexpected end of input")]
    UnexpectedEof,
    #[error("unbalanced ')' at byte {0}")]
    Unbalanced(usize),
    #[error("trailing input after expression at byte {0}")]
    Trailing(usize),
}

impl Sexp {
    pub fn as_atom(&self) -> Option<&str> {
        match self {
            Sexp::Atom(s) => Some(s),
            Sexp::List(_) => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Sexp]> {
        match self {
            Sexp::List(items) => Some(items),
            Sexp::Atom(_) => None,
        }
    }

    /// Head symbol of a list, if the list starts with an atom.
    pub fn head(&self) -> Option<&str> {
        self.as_list()?.first()?.as_atom()
    }
}

impl fmt::Display for Sexp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sexp::Atom(s) => write!(f, "{s}"),
            Sexp::List(items) => {
                write!(f, "(")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, " ")?;
                    }
                    write!(f, "{item}")?;
                }
                write!(f, ")")
            }
        }
    }
}

enum Token {
    Open(usize),
    Close(usize),
    Atom(String),
}

fn tokenize(input: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut chars = input.char_indices().peekable();
    while let Some(&(pos, c)) = chars.peek() {
        match c {
            '(' => {
                tokens.push(Token::Open(pos));
                chars.next();
            }
            ')' => {
                tokens.push(Token::Close(pos));
                chars.next();
            }
            ';' => {
                // comment to end of line
                while let Some(&(_, c)) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                }
            }
            c if c.is_whitespace() => {
                chars.next();
            }
            _ => {
                let mut word = String::new();
                while let Some(&(_, c)) = chars.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' || c == ';' {
                        break;
                    }
                    word.push(c);
                    chars.next();
                }
                tokens.push(Token::Atom(word));
            }
        }
    }
    tokens
}

fn parse_tokens(tokens: &[Token], pos: &mut usize) -> Result<Sexp, SexpError> {
    match tokens.get(*pos) {
        None => Err(SexpError::UnexpectedEof),
        Some(Token::Close(at)) => Err(SexpError::Unbalanced(*at)),
        Some(Token::Atom(s)) => {
            *pos += 1;
            Ok(Sexp::Atom(s.clone()))
        }
        Some(Token::Open(_)) => {
            *pos += 1;
            let mut items = Vec::new();
            loop {
                match tokens.get(*pos) {
                    None => return Err(SexpError::UnexpectedEof),
                    Some(Token::Close(_)) => {
                        *pos += 1;
                        return Ok(Sexp::List(items));
                    }
                    Some(_) => items.push(parse_tokens(tokens, pos)?),
                }
            }
        }
    }
}

/// Parses exactly one expression.
pub fn parse(input: &str) -> Result<Sexp, SexpError> {
    let tokens = tokenize(input);
    let mut pos = 0;
    let expr = parse_tokens(&tokens, &mut pos)?;
    match tokens.get(pos) {
        None => Ok(expr),
        Some(Token::Open(at)) | Some(Token::Close(at)) => Err(SexpError::Trailing(*at)),
        Some(Token::Atom(_)) => Err(SexpError::Trailing(input.len())),
    }
}

/// Parses a sequence of top-level expressions.
pub fn parse_many(input: &str) -> Result<Vec<Sexp>, SexpError> {
    let tokens = tokenize(input);
    let mut pos = 0;
    let mut out = Vec::new();
    while pos < tokens.len() {
        out.push(parse_tokens(&tokens, &mut pos)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_lists() {
        let e = parse("(forall x (exists y (rel R x y)))").unwrap();
        assert_eq!(e.head(), Some("forall"));
        assert_eq!(e.to_string(), "(forall x (exists y (rel R x y)))");
    }

    #[test]
    fn comments_and_many() {
        let es = parse_many("; header\n(a b) c (d)").unwrap();
        assert_eq!(es.len(), 3);
        assert_eq!(es[1], Sexp::Atom("c".into()));
    }

    #[test]
    fn errors() {
        assert_eq!(parse("(a b"), Err(SexpError::UnexpectedEof));
        assert!(matches!(parse(")"), Err(SexpError::Unbalanced(0))));
        assert!(matches!(parse("(a) (b)"), Err(SexpError::Trailing(_))));
    }
}
