//! Parser for the final-state filter mini-language:
//! `k=1,survivors=0,2,ghosts=(a,b);(c,d)`.
//!
//! Fields may appear in any order; `survivors` and `ghosts` values run
//! until the next `field=` token. Positions are integers on lattice
//! instances and vertex labels on general graphs, so values are kept as
//! strings here and resolved by the caller.

use ghostwalk::{Error, Result};

#[derive(Debug, Default, PartialEq, Eq)]
pub struct StateSpec {
    pub k: Option<usize>,
    pub survivors: Vec<String>,
    pub ghosts: Vec<(String, String)>,
}

pub fn parse_state_spec(text: &str) -> Result<StateSpec> {
    let mut spec = StateSpec::default();
    let mut current: Option<(&str, String)> = None;
    let mut seen_fields: Vec<String> = Vec::new();

    let flush = |field: &str, value: String, spec: &mut StateSpec| -> Result<()> {
        match field {
            "k" => {
                spec.k = Some(
                    value
                        .trim()
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad k value {value:?}")))?,
                )
            }
            "survivors" => {
                spec.survivors = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(String::from)
                    .collect()
            }
            "ghosts" => spec.ghosts = parse_ghost_pairs(&value)?,
            other => return Err(Error::Parse(format!("unknown state field {other:?}"))),
        }
        Ok(())
    };

    for token in text.split(',') {
        match token.split_once('=') {
            Some((field, first)) => {
                if let Some((f, v)) = current.take() {
                    flush(f, v, &mut spec)?;
                }
                let field = field.trim();
                if seen_fields.iter().any(|f| f == field) {
                    return Err(Error::Parse(format!("duplicate state field {field:?}")));
                }
                seen_fields.push(field.to_string());
                let field = match field {
                    "k" => "k",
                    "survivors" => "survivors",
                    "ghosts" => "ghosts",
                    other => return Err(Error::Parse(format!("unknown state field {other:?}"))),
                };
                current = Some((field, first.to_string()));
            }
            None => match current.as_mut() {
                Some((_, v)) => {
                    v.push(',');
                    v.push_str(token);
                }
                None => {
                    return Err(Error::Parse(format!(
                        "state spec must start with a field, got {token:?}"
                    )))
                }
            },
        }
    }
    if let Some((f, v)) = current.take() {
        flush(f, v, &mut spec)?;
    }

    if let Some(k) = spec.k {
        if k != spec.ghosts.len() && !(spec.ghosts.is_empty() && k == 0) {
            return Err(Error::Parse(format!(
                "state says k={k} but lists {} ghost pairs",
                spec.ghosts.len()
            )));
        }
    }
    Ok(spec)
}

fn parse_ghost_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let text = text.trim();
    if text.is_empty() {
        return Ok(Vec::new());
    }
    text.split(';')
        .map(|pair| {
            let inner = pair
                .trim()
                .strip_prefix('(')
                .and_then(|s| s.strip_suffix(')'))
                .ok_or_else(|| Error::Parse(format!("ghost pair {pair:?} needs parentheses")))?;
            let (a, b) = inner
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("ghost pair {pair:?} needs two positions")))?;
            Ok((a.trim().to_string(), b.trim().to_string()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_spec() {
        let spec = parse_state_spec("k=1,survivors=0,2,ghosts=(4,6)").unwrap();
        assert_eq!(spec.k, Some(1));
        assert_eq!(spec.survivors, vec!["0", "2"]);
        assert_eq!(spec.ghosts, vec![("4".into(), "6".into())]);
    }

    #[test]
    fn parses_negative_positions_and_multiple_pairs() {
        let spec = parse_state_spec("ghosts=(-2,0);(4,4),k=2").unwrap();
        assert_eq!(spec.k, Some(2));
        assert_eq!(
            spec.ghosts,
            vec![("-2".into(), "0".into()), ("4".into(), "4".into())]
        );
        assert!(spec.survivors.is_empty());
    }

    #[test]
    fn rejects_malformed() {
        assert!(parse_state_spec("survivors").is_err());
        assert!(parse_state_spec("k=x").is_err());
        assert!(parse_state_spec("ghosts=4,6").is_err());
        assert!(parse_state_spec("k=2,ghosts=(0,2)").is_err());
        assert!(parse_state_spec("k=1,k=1").is_err());
        assert!(parse_state_spec("widgets=3").is_err());
    }
}
