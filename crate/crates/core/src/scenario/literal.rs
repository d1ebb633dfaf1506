//! Tokens of one scenario line and complex amplitude literals.

use num_complex::Complex64;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Int(i64),
    Float(f64),
    Str(String),
    Punct(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Token {
    pub tok: Tok,
    pub text: String,
    /// 1-based character column.
    pub col: usize,
}

impl Token {
    pub fn is_punct(&self, p: &str) -> bool {
        matches!(&self.tok, Tok::Punct(q) if *q == p)
    }

    pub fn is_ident(&self, s: &str) -> bool {
        matches!(&self.tok, Tok::Ident(q) if q == s)
    }
}

const PUNCT: [&str; 16] = ["->", "..", "{", "}", "[", "]", "(", ")", ",", ":", ";", "=", "+", "-", "/", "*"];

/// Splits a line (comments already removed) into tokens.
pub(crate) fn tokenize(line: &str) -> Result<Vec<Token>, (usize, String)> {
    let chars: Vec<char> = line.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let is_float = i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit();
            if is_float {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '-' || chars[j] == '+') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        i = j;
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let tok = if is_float {
                Tok::Float(text.parse().map_err(|_| (col, format!("bad number '{text}'")))?)
            } else {
                Tok::Int(text.parse().map_err(|_| (col, format!("integer '{text}' out of range")))?)
            };
            out.push(Token { tok, text, col });
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '\'') {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            out.push(Token {
                tok: Tok::Ident(text.clone()),
                text,
                col,
            });
            continue;
        }
        if c == '"' {
            let start = i;
            i += 1;
            while i < chars.len() && chars[i] != '"' {
                i += 1;
            }
            if i == chars.len() {
                return Err((col, "unterminated string".into()));
            }
            i += 1;
            let text: String = chars[start..i].iter().collect();
            out.push(Token {
                tok: Tok::Str(text[1..text.len() - 1].to_string()),
                text,
                col,
            });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        match PUNCT.iter().find(|p| rest.starts_with(**p)) {
            Some(p) => {
                out.push(Token {
                    tok: Tok::Punct(p),
                    text: p.to_string(),
                    col,
                });
                i += p.chars().count();
            }
            None => return Err((col, format!("unexpected character '{c}'"))),
        }
    }
    Ok(out)
}

/// Evaluates an amplitude expression: signed terms, each a product or
/// quotient of integers, decimals, `sqrtN` and the imaginary unit `i`
/// (juxtaposed `i` multiplies, as in `1/2i`).
pub(crate) fn eval_amplitude(tokens: &[Token]) -> Result<Complex64, (usize, String)> {
    let end_col = tokens.last().map_or(1, |t| t.col);
    if tokens.is_empty() {
        return Err((end_col, "malformed complex literal: empty".into()));
    }
    let mut pos = 0;
    let mut total = Complex64::default();
    let mut first = true;
    while pos < tokens.len() {
        let mut sign = 1.0;
        if tokens[pos].is_punct("+") || tokens[pos].is_punct("-") {
            if tokens[pos].is_punct("-") {
                sign = -1.0;
            }
            pos += 1;
        } else if !first {
            return Err((tokens[pos].col, format!("malformed complex literal: expected '+' or '-' before '{}'", tokens[pos].text)));
        }
        first = false;
        let (mut term, next) = factor(tokens, pos)?;
        pos = next;
        loop {
            match tokens.get(pos) {
                Some(t) if t.is_punct("/") || t.is_punct("*") => {
                    let divide = t.is_punct("/");
                    let (v, next) = factor(tokens, pos + 1)?;
                    if divide {
                        if v == Complex64::default() {
                            return Err((t.col, "malformed complex literal: division by zero".into()));
                        }
                        term /= v;
                    } else {
                        term *= v;
                    }
                    pos = next;
                }
                Some(t) if matches!(&t.tok, Tok::Ident(s) if is_unit_factor(s)) => {
                    let (v, next) = factor(tokens, pos)?;
                    term *= v;
                    pos = next;
                }
                _ => break,
            }
        }
        total += term * sign;
    }
    Ok(total)
}

fn is_unit_factor(s: &str) -> bool {
    s == "i" || sqrt_ident(s).is_some()
}

/// `sqrtN` or `sqrtNi`.
fn sqrt_ident(s: &str) -> Option<Complex64> {
    let rest = s.strip_prefix("sqrt")?;
    let (digits, imag) = match rest.strip_suffix('i') {
        Some(d) => (d, true),
        None => (rest, false),
    };
    if digits.is_empty() || !digits.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let root = digits.parse::<f64>().ok()?.sqrt();
    Some(if imag { Complex64::new(0.0, root) } else { Complex64::new(root, 0.0) })
}

fn factor(tokens: &[Token], pos: usize) -> Result<(Complex64, usize), (usize, String)> {
    let Some(t) = tokens.get(pos) else {
        let col = tokens.last().map_or(1, |t| t.col + t.text.len());
        return Err((col, "malformed complex literal: unexpected end".into()));
    };
    let v = match &t.tok {
        Tok::Int(n) => Complex64::new(*n as f64, 0.0),
        Tok::Float(x) => Complex64::new(*x, 0.0),
        Tok::Ident(s) if s == "i" => Complex64::new(0.0, 1.0),
        Tok::Ident(s) => sqrt_ident(s).ok_or_else(|| (t.col, format!("malformed complex literal: unknown symbol '{s}'")))?,
        _ => return Err((t.col, format!("malformed complex literal: unexpected '{}'", t.text))),
    };
    Ok((v, pos + 1))
}
