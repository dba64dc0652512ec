// SPDX-License-Identifier: Apache-2.0

//! `$display`-style formatting, following the output conventions of common
//! Verilog simulators closely enough for log comparison.

use crate::eval::{eval_self, EvalCtx};
use crate::ir::{EExpr, EKind};
use crate::value::Value;

/// Render a system-task argument list. A string literal argument is a format
/// that consumes the arguments after it; other arguments print as `%d`.
pub fn format_args(ctx: &mut dyn EvalCtx, args: &[EExpr], scope: &str) -> String {
    let mut out = String::new();
    let mut i = 0;
    while i < args.len() {
        if let EKind::Str(fmt) = &args[i].kind {
            i += 1;
            let consumed = format_one(ctx, fmt, &args[i..], scope, &mut out);
            i += consumed;
        } else {
            let v = eval_self(ctx, &args[i]);
            out.push_str(&decimal(&v, args[i].signed, None));
            i += 1;
        }
    }
    out
}

fn format_one(
    ctx: &mut dyn EvalCtx,
    fmt: &str,
    args: &[EExpr],
    scope: &str,
    out: &mut String,
) -> usize {
    let mut used = 0;
    let mut chars = fmt.chars().peekable();
    while let Some(c) = chars.next() {
        if c != '%' {
            out.push(c);
            continue;
        }
        let mut left = false;
        let mut spec_width = String::new();
        while let Some(&d) = chars.peek() {
            if d == '-' {
                left = true;
                chars.next();
            } else if d.is_ascii_digit() || d == '.' {
                spec_width.push(d);
                chars.next();
            } else {
                break;
            }
        }
        let Some(spec) = chars.next() else {
            out.push('%');
            break;
        };
        let width: Option<usize> = spec_width
            .split('.')
            .next()
            .filter(|s| !s.is_empty())
            .and_then(|s| s.parse().ok());
        let text = match spec.to_ascii_lowercase() {
            '%' => "%".to_string(),
            'm' => scope.to_string(),
            'l' => String::new(),
            s @ ('d' | 'b' | 'h' | 'x' | 'o' | 'c' | 's' | 't' | 'e' | 'f' | 'g' | 'v') => {
                let Some(arg) = args.get(used) else {
                    out.push('%');
                    out.push(spec);
                    continue;
                };
                used += 1;
                if s == 's' {
                    if let EKind::Str(lit) = &arg.kind {
                        pad(lit.clone(), width, left)
                    } else {
                        pad(as_string(&eval_self(ctx, arg)), width, left)
                    }
                } else {
                    let v = eval_self(ctx, arg);
                    match s {
                        'd' | 'e' | 'f' | 'g' => pad(decimal(&v, arg.signed, width.map(|_| 0)), width, left),
                        'b' => pad(radix(&v, 1, width == Some(0)), width, left),
                        'h' | 'x' => pad(radix(&v, 4, width == Some(0)), width, left),
                        'o' => pad(radix(&v, 3, width == Some(0)), width, left),
                        'c' => ((v.bits & 0xff) as u8 as char).to_string(),
                        'v' => radix(&v, 1, false),
                        _ => {
                            let raw = decimal(&v, false, Some(0));
                            pad(raw, Some(width.unwrap_or(20)), left)
                        }
                    }
                }
            }
            other => {
                let mut s = String::from('%');
                s.push(other);
                s
            }
        };
        out.push_str(&text);
    }
    used
}

fn pad(s: String, width: Option<usize>, left: bool) -> String {
    match width {
        Some(w) if w > s.len() => {
            if left {
                format!("{s:<w$}")
            } else {
                format!("{s:>w$}")
            }
        }
        _ => s,
    }
}

fn as_string(v: &Value) -> String {
    let mut bytes = Vec::new();
    let n = v.width.div_ceil(8);
    for i in (0..n).rev() {
        let b = ((v.bits >> (8 * i)) & 0xff) as u8;
        if b != 0 {
            bytes.push(b);
        }
    }
    String::from_utf8_lossy(&bytes).into_owned()
}

/// Decimal rendering. With `min_width` of `None` the result is padded to the
/// widest value the vector can hold, as an unadorned `%d` does.
pub fn decimal(v: &Value, signed: bool, min_width: Option<usize>) -> String {
    let natural = {
        let max = crate::value::mask(v.width);
        let digits = max.to_string().len();
        if signed {
            digits + 1
        } else {
            digits
        }
    };
    let text = if v.xmask == crate::value::mask(v.width) {
        "x".to_string()
    } else if v.xmask != 0 {
        "X".to_string()
    } else if signed && v.sign_bit_set() {
        v.to_i64().to_string()
    } else {
        v.bits.to_string()
    };
    match min_width {
        None => format!("{text:>natural$}"),
        Some(_) => text,
    }
}

/// Binary, octal or hex digits. `bits_per` is 1, 3 or 4.
fn radix(v: &Value, bits_per: u32, minimal: bool) -> String {
    let ndig = v.width.div_ceil(bits_per);
    let mut s = String::with_capacity(ndig as usize);
    for d in (0..ndig).rev() {
        let lo = d * bits_per;
        let m = crate::value::mask(bits_per.min(v.width - lo)) << lo;
        let x = v.xmask & m;
        let c = if x == m {
            'x'
        } else if x != 0 {
            'X'
        } else {
            std::char::from_digit(((v.bits & m) >> lo) as u32, 16).unwrap_or('?')
        };
        s.push(c);
    }
    if minimal {
        let trimmed = s.trim_start_matches('0');
        if trimmed.is_empty() {
            "0".to_string()
        } else {
            trimmed.to_string()
        }
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_padding() {
        assert_eq!(decimal(&Value::new(8, 5), false, None), "  5");
        assert_eq!(decimal(&Value::new(8, 5), false, Some(0)), "5");
        assert_eq!(decimal(&Value::new(32, 7), true, None), "          7");
        assert_eq!(decimal(&Value::new(4, 0xf), true, Some(0)), "-1");
        assert_eq!(decimal(&Value::unknown(4), false, None), " x");
    }

    #[test]
    fn radix_digits() {
        assert_eq!(radix(&Value::new(4, 5), 1, false), "0101");
        assert_eq!(radix(&Value::new(4, 5), 1, true), "101");
        assert_eq!(radix(&Value::new(12, 0xabc), 4, false), "abc");
        assert_eq!(radix(&Value::with_x(8, 0x0f, 0xf0), 4, false), "xf");
        assert_eq!(radix(&Value::with_x(8, 0, 0x10), 4, false), "X0");
    }
}
