//! C99 source for a finished program.

use hornfit::program::{Addend, Form, HornerSkeleton, Multiplier, Step};
use hornfit::softfp::F32;

fn literal(x: F32) -> String {
    format!("{x}f")
}

/// Operand text for an addend, with a leading space for non-negative
/// literals so that the columns of a Horner chain line up.
fn addend(x: F32) -> String {
    if x.is_sign_negative() {
        literal(x)
    } else {
        format!(" {}", literal(x))
    }
}

/// A self-contained `float name(float a)` evaluating `skel` with `coeffs`
/// using `fmaf` only.
pub fn emit_c(skel: &HornerSkeleton, coeffs: &[F32], name: &str) -> String {
    assert_eq!(coeffs.len(), skel.num_coeffs(), "one value per coefficient");
    let mut out = format!("float {name}(float a) {{\n");
    let line = |out: &mut String, s: String| {
        out.push_str("  ");
        out.push_str(&s);
        out.push_str(";\n");
    };
    let steps = skel.steps();
    if skel.form() == Form::Plain && steps.len() == 1 {
        line(&mut out, format!("return {}", literal(coeffs[0])));
        out.push_str("}\n");
        return out;
    }
    if skel.uses_square() {
        line(&mut out, "float s = a * a".into());
    }
    let by = |m: Multiplier| if m == Multiplier::S { "s" } else { "a" };
    for (j, step) in steps.iter().enumerate() {
        let last = j + 1 == steps.len();
        let text = match *step {
            Step::Load(k) => format!("float r = {}", literal(coeffs[k])),
            Step::Fma {
                by: m,
                add: Addend::Coeff(k),
            } => format!("r = fmaf(r, {}, {})", by(m), addend(coeffs[k])),
            Step::Fma {
                by: m,
                add: Addend::Zero,
            } => format!("r = r * {}", by(m)),
            Step::Fma {
                by: m,
                add: Addend::A,
            } if last => format!("return fmaf(r, {}, a)", by(m)),
            Step::Fma {
                by: m,
                add: Addend::A,
            } => format!("r = fmaf(r, {}, a)", by(m)),
            Step::Fma {
                by: m,
                add: Addend::One,
            } if last => format!("return fmaf(r, {}, 1.0f)", by(m)),
            Step::Fma {
                by: m,
                add: Addend::One,
            } => format!("r = fmaf(r, {}, 1.0f)", by(m)),
        };
        let returns = text.starts_with("return");
        line(&mut out, text);
        if last && !returns {
            line(&mut out, "return r".into());
        }
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn skel(form: Form, labels: &[&str]) -> HornerSkeleton {
        HornerSkeleton::new(form, labels.iter().map(|s| s.to_string()).collect()).unwrap()
    }

    fn tokens(s: &str) -> Vec<String> {
        let mut spaced = String::new();
        for ch in s.chars() {
            if "(),;{}".contains(ch) {
                spaced.extend([' ', ch, ' ']);
            } else {
                spaced.push(ch);
            }
        }
        spaced.split_whitespace().map(str::to_string).collect()
    }

    const FIGURE: &str = "
      float atan_poly(float a) {
        float s = a * a;
        float r = 0x1.6d2026p-9f;
        r = fmaf(r, s, -0x1.03f2d4p-6f);
        r = fmaf(r, s,  0x1.5beeb4p-5f);
        r = fmaf(r, s, -0x1.33194ep-4f);
        r = fmaf(r, s,  0x1.b403a8p-4f);
        r = fmaf(r, s, -0x1.22f5c2p-3f);
        r = fmaf(r, s,  0x1.997748p-3f);
        r = fmaf(r, s, -0x1.5554d8p-2f);
        r = r * s;
        return fmaf(r, a, a);
      }";

    #[test]
    fn atan_figure_is_reproduced() {
        let labels = ["c17", "c15", "c13", "c11", "c9", "c7", "c5", "c3"];
        let values = [
            "0x1.6d2026p-9",
            "-0x1.03f2d4p-6",
            "0x1.5beeb4p-5",
            "-0x1.33194ep-4",
            "0x1.b403a8p-4",
            "-0x1.22f5c2p-3",
            "0x1.997748p-3",
            "-0x1.5554d8p-2",
        ];
        let c: Vec<F32> = values.iter().map(|v| v.parse().unwrap()).collect();
        let src = emit_c(&skel(Form::Odd, &labels), &c, "atan_poly");
        assert_eq!(tokens(&src), tokens(FIGURE));
        assert!(src.contains("r = fmaf(r, s,  0x1.5beeb4p-5f);"));
    }

    #[test]
    fn degree_zero_plain_returns_the_constant() {
        let src = emit_c(&skel(Form::Plain, &["c0"]), &[F32::ZERO], "p");
        assert_eq!(src, "float p(float a) {\n  return 0x0p+0f;\n}\n");
    }

    #[test]
    fn other_forms_end_correctly() {
        let half: F32 = "0x1p-1".parse().unwrap();
        let even = emit_c(
            &skel(Form::EvenPlusOne, &["c4", "c2"]),
            &[half, -half],
            "cosish",
        );
        assert!(
            even.ends_with("  r = fmaf(r, s, -0x1p-1f);\n  return fmaf(r, s, 1.0f);\n}\n"),
            "{even}"
        );
        let plain = emit_c(&skel(Form::Plain, &["c1", "c0"]), &[half, F32::ZERO], "lin");
        assert!(!plain.contains("float s"));
        assert!(
            plain.ends_with("  r = fmaf(r, a,  0x0p+0f);\n  return r;\n}\n"),
            "{plain}"
        );
    }

    #[test]
    fn emission_is_deterministic() {
        let s = skel(Form::Odd, &["c5", "c3"]);
        let c = [
            "0x1.1p-7".parse().unwrap(),
            "-0x1.555556p-3".parse().unwrap(),
        ];
        assert_eq!(emit_c(&s, &c, "f"), emit_c(&s, &c, "f"));
    }
}
