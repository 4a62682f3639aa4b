//! Input-state grammar for the simulate command.
//!
//! A product of two registers is written with a standalone `x` between two
//! sides; each side is a mixture of weighted state tokens joined by
//! standalone `+` separators:
//!
//! ```text
//! ghz3:+0 x ghz3:+0
//! 0.9*phi+ + 0.1*psi+ x phi+
//! ```
//!
//! Tokens: `ghzN:+k` / `ghzN:-k` name the k-th N-party GHZ class with the
//! given sign; `phi+`, `phi-`, `psi+`, `psi-` are the two-party shorthands
//! (aligned and anti-aligned classes).

use mepp::exact::WeightedMixture;
use mepp::ghz::GhzLabel;
use mepp::Sign;

use crate::CliError;

fn usage(msg: String) -> CliError {
    CliError::Usage(msg)
}

fn parse_token(token: &str) -> Result<(usize, GhzLabel), CliError> {
    let bell = |index: usize, sign: Sign| {
        GhzLabel::from_class_index(2, index, sign)
            .map(|l| (2usize, l))
            .map_err(|e| usage(e.to_string()))
    };
    match token {
        "phi+" => return bell(0, Sign::Plus),
        "phi-" => return bell(0, Sign::Minus),
        "psi+" => return bell(1, Sign::Plus),
        "psi-" => return bell(1, Sign::Minus),
        _ => {}
    }
    let rest = token
        .strip_prefix("ghz")
        .ok_or_else(|| usage(format!("unknown state token `{token}`")))?;
    let (n_raw, label_raw) = rest
        .split_once(':')
        .ok_or_else(|| usage(format!("token `{token}` is missing `:`")))?;
    let n: usize = n_raw
        .parse()
        .map_err(|_| usage(format!("bad party count in `{token}`")))?;
    let (sign, index_raw) = match label_raw.as_bytes().first() {
        Some(b'+') => (Sign::Plus, &label_raw[1..]),
        Some(b'-') => (Sign::Minus, &label_raw[1..]),
        _ => {
            return Err(usage(format!(
                "token `{token}` needs a sign, e.g. ghz{n}:+0"
            )))
        }
    };
    let index: usize = index_raw
        .parse()
        .map_err(|_| usage(format!("bad class index in `{token}`")))?;
    let label =
        GhzLabel::from_class_index(n, index, sign).map_err(|e| usage(e.to_string()))?;
    Ok((n, label))
}

fn parse_side(tokens: &[&str]) -> Result<WeightedMixture<f64>, CliError> {
    if tokens.is_empty() {
        return Err(usage("empty state side".into()));
    }
    let mut labels: Vec<(GhzLabel, f64)> = Vec::new();
    let mut n_parties: Option<usize> = None;
    for chunk in tokens.split(|t| *t == "+") {
        let [term] = chunk else {
            return Err(usage(format!(
                "expected a single weighted token between `+` separators, got `{}`",
                chunk.join(" ")
            )));
        };
        let (weight, token) = match term.split_once('*') {
            Some((w, tok)) => {
                let w: f64 = w
                    .parse()
                    .map_err(|_| usage(format!("bad weight in `{term}`")))?;
                if w < 0.0 {
                    return Err(usage(format!("negative weight in `{term}`")));
                }
                (w, tok)
            }
            None => (1.0, *term),
        };
        let (n, label) = parse_token(token)?;
        if *n_parties.get_or_insert(n) != n {
            return Err(usage("mixed register sizes inside one side".into()));
        }
        labels.push((label, weight));
    }
    let total: f64 = labels.iter().map(|(_, w)| w).sum();
    if total <= 0.0 {
        return Err(usage("state side has zero total weight".into()));
    }
    for (_, w) in &mut labels {
        *w /= total;
    }
    let n = n_parties.expect("side has at least one token");
    WeightedMixture::ghz_mixture(n, &labels).map_err(|e| usage(e.to_string()))
}

/// Parses `side x side` into two normalized mixtures.
pub fn parse_product(
    input: &str,
) -> Result<(WeightedMixture<f64>, WeightedMixture<f64>), CliError> {
    let tokens: Vec<&str> = input.split_whitespace().collect();
    let Some(split_at) = tokens.iter().position(|t| *t == "x") else {
        return Err(usage(format!(
            "state `{input}` must contain a standalone `x` between the two registers"
        )));
    };
    let first = parse_side(&tokens[..split_at])?;
    let second = parse_side(&tokens[split_at + 1..])?;
    Ok((first, second))
}
