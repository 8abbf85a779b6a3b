//! Text format for client programs.
//!
//! ```text
//! client 1:
//!   put 0 7
//!   get x 0
//!   put 1 x
//!
//! client 2:
//!   get y 1
//! ```
//!
//! Integer tokens are literals; identifier tokens are variables scoped to
//! their client. `get x k` binds `x` to the value read from key `k`; later
//! uses of `x` substitute that value. Blank lines and `#` comments are
//! ignored.

use std::collections::BTreeMap;

use sessionkv_core::kernel::{Application, ApplicationError, ClientId, Operand, RawStatement};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseError {
    Line(usize, String),
    App(ApplicationError),
}

impl std::fmt::Display for ParseError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ParseError::Line(n, msg) => write!(f, "line {n}: {msg}"),
            ParseError::App(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for ParseError {}

pub fn parse_application(text: &str) -> Result<Application, ParseError> {
    let mut programs: BTreeMap<ClientId, Vec<RawStatement>> = BTreeMap::new();
    let mut current: Option<ClientId> = None;
    // variables are interned per client, in order of first appearance
    let mut vars: BTreeMap<ClientId, Vec<String>> = BTreeMap::new();

    for (i, raw) in text.lines().enumerate() {
        let n = i + 1;
        let err = |msg: &str| ParseError::Line(n, msg.to_string());
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens[0] == "client" {
            let rest = line["client".len()..].trim();
            let id_text = rest
                .strip_suffix(':')
                .ok_or_else(|| err("expected `client <id>:`"))?
                .trim();
            let id: u64 = id_text
                .parse()
                .map_err(|_| err("client id must be a positive integer"))?;
            if id == 0 {
                return Err(err("client id 0 is reserved"));
            }
            let c = ClientId(id);
            if programs.contains_key(&c) {
                return Err(err("duplicate client section"));
            }
            programs.insert(c, Vec::new());
            vars.insert(c, Vec::new());
            current = Some(c);
            continue;
        }
        let c = current.ok_or_else(|| err("statement before any `client <id>:` header"))?;
        let scope = vars.get_mut(&c).unwrap();
        let operand = |tok: &str, scope: &mut Vec<String>| -> Result<Operand, ParseError> {
            if tok.chars().all(|ch| ch.is_ascii_digit()) {
                return Ok(Operand::Lit(tok.parse().map_err(|_| err("integer too large"))?));
            }
            if !tok.chars().all(|ch| ch.is_ascii_alphanumeric() || ch == '_')
                || !tok.starts_with(|ch: char| ch.is_ascii_alphabetic() || ch == '_')
            {
                return Err(err("operand must be an integer or an identifier"));
            }
            let x = match scope.iter().position(|v| v == tok) {
                Some(x) => x,
                None => {
                    scope.push(tok.to_string());
                    scope.len() - 1
                }
            };
            Ok(Operand::Var(x as u32))
        };
        let stmt = match (tokens[0], tokens.len()) {
            ("put", 3) => RawStatement::Put {
                key: operand(tokens[1], scope)?,
                value: operand(tokens[2], scope)?,
            },
            ("get", 3) => {
                let key = operand(tokens[2], scope)?;
                let Operand::Var(var) = operand(tokens[1], scope)? else {
                    return Err(err("get binds an identifier, not an integer"));
                };
                RawStatement::Get { var, key }
            }
            ("put", _) => return Err(err("usage: put <key> <value>")),
            ("get", _) => return Err(err("usage: get <var> <key>")),
            _ => return Err(err("expected `put`, `get`, or `client <id>:`")),
        };
        programs.get_mut(&c).unwrap().push(stmt);
    }

    Application::from_statements(programs).map_err(ParseError::App)
}

#[cfg(test)]
mod tests {
    use super::*;
    use sessionkv_core::kernel::Statement;

    #[test]
    fn parses_two_clients() {
        let app = parse_application(
            "client 1:\n  put 0 7\n  get x 0  # read it back\n\nclient 2:\n  get y 0\n",
        )
        .unwrap();
        assert_eq!(app.0.len(), 2);
        let p1 = &app.0[&ClientId(1)];
        assert!(matches!(p1.0[0], Statement::Put { .. }));
        assert!(matches!(p1.0[1], Statement::Get { var: 0, .. }));
    }

    #[test]
    fn variables_flow_into_later_statements() {
        let app = parse_application("client 1:\n  get x 0\n  put 1 x\n").unwrap();
        let p1 = &app.0[&ClientId(1)];
        assert_eq!(
            p1.0[1],
            Statement::Put {
                op: match p1.0[1] {
                    Statement::Put { op, .. } => op,
                    _ => unreachable!(),
                },
                key: Operand::Lit(1),
                value: Operand::Var(0),
            }
        );
    }

    #[test]
    fn rejects_bad_input() {
        assert!(parse_application("put 0 1\n").is_err());
        assert!(parse_application("client 0:\n").is_err());
        assert!(parse_application("client 1:\nput x 1\n").is_err()); // unbound var
        assert!(parse_application("client 1:\nget 3 0\n").is_err());
        assert!(parse_application("client 1:\nclient 1:\n").is_err());
        assert!(parse_application("client 1:\nfrob 1 2\n").is_err());
    }
}
