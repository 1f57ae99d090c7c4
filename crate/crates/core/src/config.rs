//! Flat `key = value` instance files.
//!
//! ```text
//! # comment
//! m1 = 2
//! m2 = 2
//! h12 = 0.0838+0.5207i, 0.2226-0.2482i
//! h21 = 0.4407+0.6653i, 0.5650-0.0015i
//! z1 = 0.0765+0.0276i, -0.0093+0.0062i
//! z2 = -0.0449+0.0314i, -0.0396-0.0672i
//! n0 = 1
//! p1_db = 3
//! p2_db = 3
//! eps = 0.02            # or eps11 = ..., eps12 = ..., eps21, eps22, eps1, eps2
//! ```

use std::collections::HashMap;
use std::path::Path;

use num_complex::Complex64;

use crate::channel::{db_to_linear, linear_to_db, ErrorBounds, SystemInstance};
use crate::error::{Error, Result};

const EPS_KEYS: [&str; 6] = ["eps11", "eps12", "eps21", "eps22", "eps1", "eps2"];
const KEYS: [&str; 16] = [
    "m1", "m2", "h12", "h21", "z1", "z2", "n0", "p1_db", "p2_db", "eps", "eps11", "eps12", "eps21",
    "eps22", "eps1", "eps2",
];

/// Parses `a`, `bi`, `a+bi` or `a-bi` (no internal spaces required).
pub fn parse_complex(s: &str) -> Option<Complex64> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if t.is_empty() {
        return None;
    }
    let Some(body) = t.strip_suffix(['i', 'j']) else {
        return t.parse::<f64>().ok().map(|re| Complex64::new(re, 0.0));
    };
    // Split at the last sign that is not leading and not part of an exponent.
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let imag = |s: &str| match s {
        "" | "+" => Some(1.0),
        "-" => Some(-1.0),
        _ => s.parse::<f64>().ok(),
    };
    match split {
        Some(k) => Some(Complex64::new(body[..k].parse().ok()?, imag(&body[k..])?)),
        None => Some(Complex64::new(0.0, imag(body)?)),
    }
}

pub fn format_complex(z: Complex64) -> String {
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    format!("{}{}{}i", z.re, sign, z.im.abs())
}

fn err(line: usize, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        message: message.into(),
    }
}

/// Parses an instance file body.
pub fn parse_instance(text: &str) -> Result<SystemInstance> {
    let mut values: HashMap<&str, (usize, &str)> = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(line_no, format!("expected `key = value`, found `{line}`")))?;
        let key = key.trim();
        let value = value.trim();
        let Some(&known) = KEYS.iter().find(|k| **k == key) else {
            return Err(err(line_no, format!("unknown key `{key}`")));
        };
        if value.is_empty() {
            return Err(err(line_no, format!("missing value for `{key}`")));
        }
        if let Some((prev, _)) = values.insert(known, (line_no, value)) {
            return Err(err(
                line_no,
                format!("duplicate key `{key}` (first set on line {prev})"),
            ));
        }
    }
    let last_line = text.lines().count().max(1);

    let real = |key: &str| -> Result<Option<(usize, f64)>> {
        match values.get(key) {
            None => Ok(None),
            Some(&(line, v)) => v
                .parse::<f64>()
                .map(|x| Some((line, x)))
                .map_err(|_| err(line, format!("`{key}` expects a real number, found `{v}`"))),
        }
    };
    let required = |key: &str| -> Result<(usize, f64)> {
        real(key)?.ok_or_else(|| err(last_line, format!("missing required key `{key}`")))
    };
    let count = |key: &str| -> Result<(usize, usize)> {
        let (line, v) = *values
            .get(key)
            .ok_or_else(|| err(last_line, format!("missing required key `{key}`")))?;
        match v.parse::<usize>() {
            Ok(n) if n > 0 => Ok((line, n)),
            _ => Err(err(
                line,
                format!("`{key}` expects a positive integer, found `{v}`"),
            )),
        }
    };
    let vector = |key: &str, len: usize| -> Result<Vec<Complex64>> {
        let (line, v) = *values
            .get(key)
            .ok_or_else(|| err(last_line, format!("missing required key `{key}`")))?;
        let entries = v
            .split(',')
            .map(|s| {
                parse_complex(s).ok_or_else(|| {
                    err(line, format!("bad complex entry `{}` in `{key}`", s.trim()))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if entries.len() != len {
            return Err(err(
                line,
                format!("`{key}` has {} entries, expected {len}", entries.len()),
            ));
        }
        Ok(entries)
    };

    let (_, m1) = count("m1")?;
    let (_, m2) = count("m2")?;
    let h12 = vector("h12", m2)?;
    let h21 = vector("h21", m1)?;
    let z1 = vector("z1", m1)?;
    let z2 = vector("z2", m2)?;
    let (n0_line, n0) = required("n0")?;
    if !(n0 > 0.0) {
        return Err(err(n0_line, "`n0` must be positive"));
    }
    let (p1_line, p1_db) = required("p1_db")?;
    let (p2_line, p2_db) = required("p2_db")?;
    for (line, p) in [(p1_line, p1_db), (p2_line, p2_db)] {
        if !p.is_finite() {
            return Err(err(line, "power must be finite"));
        }
    }

    let shared = real("eps")?;
    let named: Vec<Option<(usize, f64)>> =
        EPS_KEYS.iter().map(|k| real(k)).collect::<Result<_>>()?;
    let eps = match shared {
        Some((line, _)) if named.iter().any(Option::is_some) => {
            return Err(err(
                line,
                "`eps` cannot be combined with the individual eps keys",
            ));
        }
        Some((_, e)) => [e; 6],
        None if named.iter().all(Option::is_none) => [0.0; 6],
        None => {
            let mut out = [0.0; 6];
            for (i, v) in named.iter().enumerate() {
                out[i] = v
                    .ok_or_else(|| {
                        err(
                            last_line,
                            format!("missing `{}` (all six eps keys are required)", EPS_KEYS[i]),
                        )
                    })?
                    .1;
            }
            out
        }
    };
    for (i, e) in eps.iter().enumerate() {
        if !(*e >= 0.0 && e.is_finite()) {
            let line = named[i].or(shared).map(|(l, _)| l).unwrap_or(last_line);
            return Err(err(line, "error bounds must be finite and nonnegative"));
        }
    }
    let bounds = ErrorBounds {
        eps11: eps[0],
        eps12: eps[1],
        eps21: eps[2],
        eps22: eps[3],
        eps1: eps[4],
        eps2: eps[5],
    };
    SystemInstance::new(
        &h12,
        &h21,
        &z1,
        &z2,
        n0,
        db_to_linear(p1_db),
        db_to_linear(p2_db),
        bounds,
    )
}

pub fn load_instance(path: &Path) -> Result<SystemInstance> {
    parse_instance(&std::fs::read_to_string(path)?)
}

/// Serializes an instance in the format accepted by [`parse_instance`].
pub fn write_instance(inst: &SystemInstance) -> String {
    let vec = |v: &crate::linalg::ComplexMatrix| {
        v.row_major()
            .iter()
            .map(|z| format_complex(*z))
            .collect::<Vec<_>>()
            .join(", ")
    };
    let e = inst.eps;
    format!(
        "m1 = {}\nm2 = {}\nh12 = {}\nh21 = {}\nz1 = {}\nz2 = {}\nn0 = {}\np1_db = {}\np2_db = {}\n\
         eps11 = {}\neps12 = {}\neps21 = {}\neps22 = {}\neps1 = {}\neps2 = {}\n",
        inst.m1,
        inst.m2,
        vec(&inst.h12),
        vec(&inst.h21),
        vec(&inst.z1),
        vec(&inst.z2),
        inst.n0,
        linear_to_db(inst.p1),
        linear_to_db(inst.p2),
        e.eps11,
        e.eps12,
        e.eps21,
        e.eps22,
        e.eps1,
        e.eps2
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    const REFERENCE: &str = "\
# two-antenna reference channels
m1 = 2
m2 = 2
h12 = 0.0838+0.5207i, 0.2226-0.2482i
h21 = 0.4407+0.6653i, 0.5650-0.0015i
z1 = 0.0765+0.0276i, -0.0093+0.0062i
z2 = -0.0449+0.0314i, -0.0396-0.0672i
n0 = 1
p1_db = 3
p2_db = 3   # both users
";

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn complex_literals() {
        assert_eq!(parse_complex("0.5650-0.0015i"), Some(c(0.5650, -0.0015)));
        assert_eq!(parse_complex(" -0.0093+0.0062i "), Some(c(-0.0093, 0.0062)));
        assert_eq!(parse_complex("2"), Some(c(2.0, 0.0)));
        assert_eq!(parse_complex("-i"), Some(c(0.0, -1.0)));
        assert_eq!(parse_complex("0.5i"), Some(c(0.0, 0.5)));
        assert_eq!(parse_complex("1e-3-2E+2i"), Some(c(1e-3, -200.0)));
        assert_eq!(parse_complex("abc"), None);
        assert_eq!(parse_complex(""), None);
    }

    #[test]
    fn reference_file_matches_builtin_instance() {
        let inst = parse_instance(REFERENCE).unwrap();
        assert_eq!(inst, SystemInstance::reference(3.0));
    }

    #[test]
    fn shared_and_named_error_bounds() {
        let inst = parse_instance(&format!("{REFERENCE}eps = 0.02\n")).unwrap();
        assert_eq!(inst.eps, ErrorBounds::uniform(0.02));
        let named = "eps11 = 0.1\neps12 = 0.2\neps21 = 0.3\neps22 = 0.4\neps1 = 0.5\neps2 = 0.6\n";
        let inst = parse_instance(&format!("{REFERENCE}{named}")).unwrap();
        assert_eq!(inst.eps.as_array(), [0.1, 0.2, 0.3, 0.4, 0.5, 0.6]);
        let e = parse_instance(&format!("{REFERENCE}eps = 0.1\neps1 = 0.2\n")).unwrap_err();
        assert!(matches!(e, Error::Config { line: 11, .. }), "{e}");
        assert!(parse_instance(&format!("{REFERENCE}eps1 = 0.2\n")).is_err());
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad = REFERENCE.replace(
            "z1 = 0.0765+0.0276i, -0.0093+0.0062i",
            "z1 = 0.0765+0.0276i",
        );
        match parse_instance(&bad).unwrap_err() {
            Error::Config { line, message } => {
                assert_eq!(line, 6);
                assert!(message.contains("expected 2"), "{message}");
            }
            e => panic!("unexpected {e}"),
        }
        let bad = REFERENCE.replace("n0 = 1", "n0 = one");
        assert!(matches!(
            parse_instance(&bad).unwrap_err(),
            Error::Config { line: 8, .. }
        ));
        let bad = format!("{REFERENCE}colour = blue\n");
        assert!(matches!(
            parse_instance(&bad).unwrap_err(),
            Error::Config { line: 11, .. }
        ));
        let bad = format!("{REFERENCE}n0 = 2\n");
        assert!(parse_instance(&bad)
            .unwrap_err()
            .to_string()
            .contains("duplicate"));
        let bad = REFERENCE.replace("h12 = ", "h12 ");
        assert!(matches!(
            parse_instance(&bad).unwrap_err(),
            Error::Config { line: 4, .. }
        ));
    }

    #[test]
    fn round_trip() {
        let inst = SystemInstance::reference(6.0).with_eps(ErrorBounds::uniform(0.03));
        let back = parse_instance(&write_instance(&inst)).unwrap();
        assert_eq!(back.h12, inst.h12);
        assert_eq!(back.z2, inst.z2);
        assert_eq!(back.eps, inst.eps);
        assert!((back.p1 - inst.p1).abs() < 1e-12);
    }
}
