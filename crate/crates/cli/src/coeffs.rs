//! Coefficient files: one `label = hexfloat` per line, `#` starts a comment.

use std::collections::BTreeMap;

use hornfit::program::HornerSkeleton;
use hornfit::softfp::F32;

use crate::config::parse_hex;
use crate::CliError;

/// Values by coefficient index. Labels must belong to `skel` and appear at
/// most once; a file may give only some of the coefficients.
pub fn parse(skel: &HornerSkeleton, text: &str) -> Result<BTreeMap<usize, F32>, CliError> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |why: String| CliError::Config(format!("coefficient file line {}: {why}", n + 1));
        let (label, value) = line
            .split_once('=')
            .ok_or_else(|| bad("expected `label = value`".into()))?;
        let k = skel
            .index_of(label.trim())
            .map_err(|e| bad(e.to_string()))?;
        let v = parse_hex(value).map_err(|e| bad(e.to_string()))?;
        if out.insert(k, v).is_some() {
            return Err(bad(format!("`{}` given twice", label.trim())));
        }
    }
    Ok(out)
}

pub fn write(skel: &HornerSkeleton, coeffs: &[F32]) -> String {
    let width = skel.labels().iter().map(String::len).max().unwrap_or(0);
    let mut out = format!("# {} form, highest degree first\n", skel.form());
    for (label, c) in skel.labels().iter().zip(coeffs) {
        out.push_str(&format!("{label:<width$} = {c}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use hornfit::program::Form;

    fn skel() -> HornerSkeleton {
        HornerSkeleton::new(Form::Odd, vec!["c11".into(), "c9".into(), "c3".into()]).unwrap()
    }

    #[test]
    fn write_then_parse_is_identity() {
        let c: Vec<F32> = ["0x1.6d2026p-9", "-0x0p+0", "-0x1.5554d8p-2"]
            .iter()
            .map(|s| s.parse().unwrap())
            .collect();
        let text = write(&skel(), &c);
        let back = parse(&skel(), &text).unwrap();
        let got: Vec<F32> = back.values().copied().collect();
        assert_eq!(got, c);
        assert!(got[1].is_sign_negative());
    }

    #[test]
    fn comments_partial_files_and_errors() {
        let m = parse(&skel(), "# header\n\n c9 = 0x1p-3  # trailing\n").unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m[&1], "0x1p-3".parse().unwrap());
        assert!(parse(&skel(), "c9 = 0.125\n").is_err());
        assert!(parse(&skel(), "c7 = 0x1p-3\n").is_err());
        assert!(parse(&skel(), "c9 0x1p-3\n").is_err());
        assert!(parse(&skel(), "c9 = 0x1p-3\nc9 = 0x1p-4\n").is_err());
    }
}
