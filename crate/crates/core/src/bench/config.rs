//! Key-value grid configuration.
//!
//! ```text
//! # comment
//! sigma1_sq = 1
//! sigma2_sq = 1e2, 1e3
//! rho       = 1e-4, 1e-3
//! n         = 1e5
//! trials    = 100
//! base_seed = 42
//! arms      = rge_ssi, only_ssi, only_rge
//! ```
//!
//! `sigma2_sq`, `rho`, `n` and `trials` are required. `sigma1_sq` defaults
//! to 1, `base_seed` to 0 and `arms` to all three. Counts accept scientific
//! notation as long as the value is a whole number.

use super::{Arm, GridSpec};
use crate::{Error, Result};

/// Configurations shipped with the crate, by name.
pub const BUILTIN_CONFIGS: &[(&str, &str)] = &[
    ("paper-grid", include_str!("../../assets/paper-grid.conf")),
    ("smoke", include_str!("../../assets/smoke.conf")),
];

pub fn builtin_config(name: &str) -> Option<GridSpec> {
    BUILTIN_CONFIGS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(n, text)| parse_config(n, text).expect("shipped configs parse"))
}

struct Token<'a> {
    text: &'a str,
    column: usize,
}

fn split_list<'a>(line: &'a str, value_start: usize) -> Vec<Token<'a>> {
    let mut out = Vec::new();
    let mut offset = value_start;
    for piece in line[value_start..].split(',') {
        let lead = piece.len() - piece.trim_start().len();
        out.push(Token {
            text: piece.trim(),
            column: offset + lead + 1,
        });
        offset += piece.len() + 1;
    }
    out
}

/// Parses a nonnegative whole number, also in scientific notation (`1e5`).
pub fn parse_count(text: &str) -> Option<u64> {
    if let Ok(v) = text.parse::<u64>() {
        return Some(v);
    }
    let v = text.parse::<f64>().ok()?;
    (v.is_finite() && v >= 0.0 && v.fract() == 0.0 && v < u64::MAX as f64).then_some(v as u64)
}

pub fn parse_config(source_name: &str, text: &str) -> Result<GridSpec> {
    let mut sigma1_sq = None;
    let mut sigma2_sq_list = None;
    let mut rho_list = None;
    let mut n = None;
    let mut trials = None;
    let mut base_seed = None;
    let mut arms = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("");
        if line.trim().is_empty() {
            continue;
        }
        let err = |column: usize, msg: String| Error::parse(source_name, line_no, column, msg);
        let Some(eq) = line.find('=') else {
            return Err(err(1, "expected `key = value`".into()));
        };
        let key = line[..eq].trim();
        let key_col = line.len() - line.trim_start().len() + 1;
        let tokens = split_list(line, eq + 1);
        if tokens.iter().any(|t| t.text.is_empty()) {
            let col = tokens
                .iter()
                .find(|t| t.text.is_empty())
                .map_or(eq + 2, |t| t.column);
            return Err(err(col, format!("empty value for `{key}`")));
        }

        let floats = |tokens: &[Token<'_>]| -> Result<Vec<f64>> {
            tokens
                .iter()
                .map(|t| {
                    t.text
                        .parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| err(t.column, format!("invalid number `{}`", t.text)))
                })
                .collect()
        };
        let single = |tokens: &[Token<'_>]| -> Result<()> {
            match tokens {
                [_] => Ok(()),
                _ => Err(err(
                    tokens[1].column,
                    format!("`{key}` takes a single value"),
                )),
            }
        };
        let count = |t: &Token<'_>| {
            parse_count(t.text).ok_or_else(|| err(t.column, format!("invalid count `{}`", t.text)))
        };

        let slot_taken = match key {
            "sigma1_sq" => {
                single(&tokens)?;
                sigma1_sq.replace(floats(&tokens)?[0]).is_some()
            }
            "sigma2_sq" => sigma2_sq_list.replace(floats(&tokens)?).is_some(),
            "rho" => rho_list.replace(floats(&tokens)?).is_some(),
            "n" => {
                single(&tokens)?;
                n.replace(count(&tokens[0])? as usize).is_some()
            }
            "trials" => {
                single(&tokens)?;
                trials.replace(count(&tokens[0])? as usize).is_some()
            }
            "base_seed" => {
                single(&tokens)?;
                base_seed.replace(count(&tokens[0])?).is_some()
            }
            "arms" => {
                let parsed = tokens
                    .iter()
                    .map(|t| {
                        t.text
                            .parse::<Arm>()
                            .map_err(|e| err(t.column, e.to_string()))
                    })
                    .collect::<Result<Vec<_>>>()?;
                arms.replace(parsed).is_some()
            }
            other => return Err(err(key_col, format!("unknown key `{other}`"))),
        };
        if slot_taken {
            return Err(err(key_col, format!("duplicate key `{key}`")));
        }
    }

    let missing = |k: &str| {
        Error::parse(
            source_name,
            text.lines().count().max(1),
            1,
            format!("missing key `{k}`"),
        )
    };
    let spec = GridSpec {
        sigma1_sq: sigma1_sq.unwrap_or(1.0),
        sigma2_sq_list: sigma2_sq_list.ok_or_else(|| missing("sigma2_sq"))?,
        rho_list: rho_list.ok_or_else(|| missing("rho"))?,
        n: n.ok_or_else(|| missing("n"))?,
        trials: trials.ok_or_else(|| missing("trials"))?,
        base_seed: base_seed.unwrap_or(0),
        arms: arms.unwrap_or_else(|| Arm::ALL.to_vec()),
    };
    spec.validate()
        .map_err(|e| Error::parse(source_name, 0, 0, e.to_string()))?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_configs_parse() {
        let g = builtin_config("paper-grid").unwrap();
        assert_eq!(g.sigma2_sq_list, vec![1e2, 1e3, 1e4, 1e5, 1e6]);
        assert_eq!(g.rho_list, vec![1e-4, 3e-4, 1e-3, 3e-3, 1e-2]);
        assert_eq!((g.n, g.trials, g.sigma1_sq), (100_000, 100, 1.0));
        assert_eq!(g.cell_count(), 75);
        let s = builtin_config("smoke").unwrap();
        assert_eq!(s.cell_count(), 2);
        assert!(builtin_config("nope").is_none());
    }

    #[test]
    fn defaults_apply() {
        let g = parse_config("t", "sigma2_sq = 10\nrho = 0.1\nn = 50\ntrials = 2\n").unwrap();
        assert_eq!(g.sigma1_sq, 1.0);
        assert_eq!(g.base_seed, 0);
        assert_eq!(g.arms, Arm::ALL.to_vec());
    }

    fn error_at(text: &str) -> (usize, usize) {
        match parse_config("t", text).unwrap_err() {
            Error::Parse { line, column, .. } => (line, column),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn errors_point_at_the_offending_token() {
        assert_eq!(error_at("rho = 0.1, abc\n"), (1, 12));
        assert_eq!(error_at("# c\nbogus = 1\n"), (2, 1));
        assert_eq!(error_at("n = 1.5\n"), (1, 5));
        assert_eq!(error_at("n = 1\nn = 2\n"), (2, 1));
        assert_eq!(error_at("no equals sign\n"), (1, 1));
        assert_eq!(error_at("arms = rge_ssi, foo\n"), (1, 17));
        assert_eq!(error_at("rho = 0.1,\n"), (1, 11));
        let (line, _) = error_at("rho = 0.1\nn = 10\ntrials = 1\n");
        assert_eq!(line, 3);
    }

    #[test]
    fn counts_accept_scientific_notation() {
        assert_eq!(parse_count("1e5"), Some(100_000));
        assert_eq!(parse_count("100"), Some(100));
        assert_eq!(parse_count("2.5"), None);
        assert_eq!(parse_count("-1"), None);
    }
}
