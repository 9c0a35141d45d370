//! JSON system definitions whose coefficients may be polynomials in `alpha`.
//!
//! ```json
//! {
//!   "name": "hopf normal form",
//!   "jacobian": [["alpha", -1], [1, "alpha"]],
//!   "phi": { "3": [[-1, 0, -1, 0], [0, -1, 0, -1]] },
//!   "alpha_range": [-0.1, 0.1],
//!   "metadata": {}
//! }
//! ```
//!
//! `phi` maps a degree `k >= 2` to a 2 x (k+1) matrix; row `r`, column `i` is the
//! coefficient of `x1^(k-i) x2^i` in component `r`. Missing degrees are zero.
//! Entries are JSON numbers or strings such as `"2*alpha - 1/3"` or `"(1+alpha)^2"`.

use std::collections::BTreeMap;
use std::path::Path;

use num_traits::{One, Zero};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::matrix::Mat;
use crate::scalar::{parse_rational, Rational};
use crate::system::PlanarPolySystem;

/// A polynomial in `alpha` with exact rational coefficients, lowest degree first.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AlphaPoly(Vec<Rational>);

impl AlphaPoly {
    pub fn constant(c: Rational) -> Self {
        Self(vec![c]).trimmed()
    }

    pub fn alpha() -> Self {
        Self(vec![Rational::zero(), Rational::one()])
    }

    fn trimmed(mut self) -> Self {
        while self.0.last().is_some_and(Zero::is_zero) {
            self.0.pop();
        }
        self
    }

    pub fn degree(&self) -> Option<usize> {
        self.0.len().checked_sub(1)
    }

    pub fn as_constant(&self) -> Option<Rational> {
        match self.0.len() {
            0 => Some(Rational::zero()),
            1 => Some(self.0[0].clone()),
            _ => None,
        }
    }

    pub fn eval(&self, alpha: &Rational) -> Rational {
        self.0.iter().rev().fold(Rational::zero(), |acc, c| acc * alpha + c)
    }

    fn add(&self, rhs: &Self) -> Self {
        let n = self.0.len().max(rhs.0.len());
        let get = |p: &Self, i: usize| p.0.get(i).cloned().unwrap_or_else(Rational::zero);
        Self((0..n).map(|i| get(self, i) + get(rhs, i)).collect()).trimmed()
    }

    fn neg(&self) -> Self {
        Self(self.0.iter().map(|c| -c).collect())
    }

    fn mul(&self, rhs: &Self) -> Self {
        if self.0.is_empty() || rhs.0.is_empty() {
            return Self::default();
        }
        let mut out = vec![Rational::zero(); self.0.len() + rhs.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in rhs.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self(out).trimmed()
    }
}

/// Parses `+ - * / ^ ( )`, rational literals and the variable `alpha`.
/// Division is only by nonzero constants and exponents are small integers.
pub fn parse_alpha_expr(text: &str) -> std::result::Result<AlphaPoly, String> {
    let normalized = text.replace('\u{2212}', "-");
    let mut p = ExprParser { s: normalized.as_bytes(), pos: 0 };
    let out = p.expr()?;
    p.skip_ws();
    if p.pos != p.s.len() {
        return Err(format!("unexpected {:?} at offset {}", p.s[p.pos] as char, p.pos));
    }
    Ok(out)
}

struct ExprParser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl ExprParser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn expr(&mut self) -> std::result::Result<AlphaPoly, String> {
        let mut acc = self.term()?;
        while let Some(c @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            acc = if c == b'+' { acc.add(&rhs) } else { acc.add(&rhs.neg()) };
        }
        Ok(acc)
    }

    fn term(&mut self) -> std::result::Result<AlphaPoly, String> {
        let mut acc = self.unary()?;
        while let Some(c @ (b'*' | b'/')) = self.peek() {
            self.pos += 1;
            let rhs = self.unary()?;
            if c == b'*' {
                acc = acc.mul(&rhs);
            } else {
                let d = rhs.as_constant().ok_or("division by an expression in alpha")?;
                if d.is_zero() {
                    return Err("division by zero".into());
                }
                acc = acc.mul(&AlphaPoly::constant(d.recip()));
            }
        }
        Ok(acc)
    }

    fn unary(&mut self) -> std::result::Result<AlphaPoly, String> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(self.unary()?.neg())
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> std::result::Result<AlphaPoly, String> {
        let base = self.primary()?;
        if self.peek() != Some(b'^') {
            return Ok(base);
        }
        self.pos += 1;
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        let digits = std::str::from_utf8(&self.s[start..self.pos]).expect("ascii digits");
        let e: u32 = digits.parse().map_err(|_| format!("expected a small integer exponent at offset {start}"))?;
        if e > 16 {
            return Err(format!("exponent {e} is too large"));
        }
        Ok((0..e).fold(AlphaPoly::constant(Rational::one()), |acc, _| acc.mul(&base)))
    }

    fn primary(&mut self) -> std::result::Result<AlphaPoly, String> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(format!("missing ')' at offset {}", self.pos));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.s.len() && self.s[self.pos].is_ascii_alphanumeric() {
                    self.pos += 1;
                }
                match &self.s[start..self.pos] {
                    b"alpha" => Ok(AlphaPoly::alpha()),
                    other => Err(format!("unknown name {:?}", String::from_utf8_lossy(other))),
                }
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let start = self.pos;
                while self.pos < self.s.len() {
                    let c = self.s[self.pos];
                    let exp_sign = matches!(c, b'+' | b'-') && matches!(self.s[self.pos - 1], b'e' | b'E');
                    if c.is_ascii_digit() || c == b'.' || c == b'e' || c == b'E' || exp_sign {
                        self.pos += 1;
                    } else {
                        break;
                    }
                }
                let lit = std::str::from_utf8(&self.s[start..self.pos]).expect("ascii literal");
                parse_rational(lit).map(AlphaPoly::constant).ok_or_else(|| format!("bad number {lit:?}"))
            }
            Some(c) => Err(format!("unexpected {:?} at offset {}", c as char, self.pos)),
            None => Err("unexpected end of expression".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemDefinition {
    pub name: String,
    pub jacobian: Vec<Vec<AlphaPoly>>,
    /// Degree `k` to its 2 x (k+1) coefficient matrix.
    pub phi: BTreeMap<usize, Vec<Vec<AlphaPoly>>>,
    pub alpha_range: Option<(f64, f64)>,
    pub metadata: Value,
}

fn def_err(field: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Definition { field: field.into(), message: message.into() }
}

fn parse_entry(v: &Value, field: &str) -> Result<AlphaPoly> {
    match v {
        Value::Number(n) => {
            let text = n.to_string();
            parse_rational(&text).map(AlphaPoly::constant).ok_or_else(|| def_err(field, format!("bad number {text}")))
        }
        Value::String(s) => parse_alpha_expr(s).map_err(|e| def_err(field, format!("{e} in {s:?}"))),
        _ => Err(def_err(field, "expected a number or an expression string")),
    }
}

fn parse_matrix(v: &Value, field: &str, rows: usize, cols: usize) -> Result<Vec<Vec<AlphaPoly>>> {
    let arr = v.as_array().ok_or_else(|| def_err(field, "expected an array of rows"))?;
    let found_cols = arr.iter().map(|r| r.as_array().map_or(0, Vec::len)).max().unwrap_or(0);
    let ragged = arr.iter().any(|r| r.as_array().map_or(true, |r| r.len() != found_cols));
    if arr.len() != rows || found_cols != cols || ragged {
        return Err(Error::shape(field, (rows, cols), (arr.len(), found_cols)));
    }
    arr.iter()
        .enumerate()
        .map(|(i, row)| {
            row.as_array()
                .expect("checked above")
                .iter()
                .enumerate()
                .map(|(j, e)| parse_entry(e, &format!("{field}[{i}][{j}]")))
                .collect()
        })
        .collect()
}

impl SystemDefinition {
    pub fn parse_str(text: &str) -> Result<Self> {
        let root: Value = serde_json::from_str(text)
            .map_err(|e| def_err(format!("line {} column {}", e.line(), e.column()), e.to_string()))?;
        let obj = root.as_object().ok_or_else(|| def_err("(root)", "expected a JSON object"))?;
        for key in obj.keys() {
            if !matches!(key.as_str(), "name" | "jacobian" | "phi" | "alpha_range" | "metadata") {
                return Err(def_err(key.clone(), "unknown field"));
            }
        }
        let name = match obj.get("name") {
            Some(Value::String(s)) => s.clone(),
            Some(_) => return Err(def_err("name", "expected a string")),
            None => return Err(def_err("name", "missing")),
        };
        let jacobian = parse_matrix(obj.get("jacobian").ok_or_else(|| def_err("jacobian", "missing"))?, "jacobian", 2, 2)?;
        let mut phi = BTreeMap::new();
        match obj.get("phi") {
            None | Some(Value::Null) => {}
            Some(Value::Object(map)) => {
                for (key, m) in map {
                    let field = format!("phi.{key}");
                    let k: usize = key.parse().map_err(|_| def_err(&field, "degree keys must be integers"))?;
                    if k < 2 {
                        return Err(def_err(&field, "nonlinear degrees start at 2; the linear part is the jacobian"));
                    }
                    phi.insert(k, parse_matrix(m, &field, 2, k + 1)?);
                }
            }
            Some(_) => return Err(def_err("phi", "expected an object mapping degree to matrix")),
        }
        let alpha_range = match obj.get("alpha_range") {
            None | Some(Value::Null) => None,
            Some(Value::Array(a)) if a.len() == 2 && a.iter().all(Value::is_number) => {
                let lo = a[0].as_f64().expect("number");
                let hi = a[1].as_f64().expect("number");
                if lo > hi {
                    return Err(def_err("alpha_range", "lower bound exceeds upper bound"));
                }
                Some((lo, hi))
            }
            Some(_) => return Err(def_err("alpha_range", "expected [low, high]")),
        };
        let metadata = obj.get("metadata").cloned().unwrap_or(Value::Null);
        Ok(Self { name, jacobian, phi, alpha_range, metadata })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
        Self::parse_str(&text)
    }

    /// Whether any coefficient depends on `alpha`.
    pub fn is_parametric(&self) -> bool {
        self.jacobian.iter().chain(self.phi.values().flatten()).flatten().any(|p| p.degree().unwrap_or(0) > 0)
    }

    /// Highest declared nonlinear degree (1 when `phi` is empty).
    pub fn declared_degree(&self) -> usize {
        self.phi.keys().next_back().copied().unwrap_or(1)
    }

    pub fn instantiate(&self, alpha: &Rational) -> Result<PlanarPolySystem<Rational>> {
        let eval = |m: &Vec<Vec<AlphaPoly>>| Mat::from_rows(m.iter().map(|r| r.iter().map(|p| p.eval(alpha)).collect()).collect());
        let jacobian = eval(&self.jacobian);
        let phi = (2..=self.declared_degree())
            .map(|k| self.phi.get(&k).map_or_else(|| Mat::zeros(2, k + 1), eval))
            .collect();
        PlanarPolySystem::build(jacobian, phi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Scalar;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    #[test]
    fn expressions() {
        let a = q(1, 10);
        let cases = [
            ("alpha", q(1, 10)),
            ("\u{2212}1", q(-1, 1)),
            ("2*alpha - 1/3", q(1, 5) - q(1, 3)),
            ("(1+alpha)^2", q(121, 100)),
            ("-alpha^2", q(-1, 100)),
            ("1.5e-1 + alpha/2", q(3, 20) + q(1, 20)),
        ];
        for (text, want) in cases {
            assert_eq!(parse_alpha_expr(text).unwrap().eval(&a), want, "{text}");
        }
        for bad in ["beta", "1/alpha", "1/0", "(1", "2^", "", "1 2"] {
            assert!(parse_alpha_expr(bad).is_err(), "{bad}");
        }
    }

    const NORMAL_FORM: &str = r#"{
        "name": "normal form",
        "jacobian": [["alpha", "−1"], [1, "alpha"]],
        "phi": {"3": [[-1, 0, -1, 0], [0, -1, 0, -1]]},
        "alpha_range": [-0.1, 0.1]
    }"#;

    #[test]
    fn normal_form_parses() {
        let d = SystemDefinition::parse_str(NORMAL_FORM).unwrap();
        assert!(d.is_parametric());
        let s = d.instantiate(&q(1, 100)).unwrap();
        assert_eq!(s.degree(), 3);
        assert_eq!(s.tau(), q(1, 50));
        assert_eq!(s.to_f64().evaluate_field(&[1.0, 1.0]), [-2.99, -0.99]);
    }

    #[test]
    fn decimal_numbers_stay_exact() {
        let d = SystemDefinition::parse_str(r#"{"name": "x", "jacobian": [[0.1, -1], [1, 0.1]]}"#).unwrap();
        let s = d.instantiate(&Rational::from_i64(0)).unwrap();
        assert_eq!(s.tau(), q(1, 5));
        assert!(!d.is_parametric());
    }

    #[test]
    fn shape_error_names_the_field() {
        let text = r#"{"name": "x", "jacobian": [[0, -1], [1, 0]], "phi": {"3": [[1, 0, 0, 0, 0], [0, 0, 0, 0, 0]]}}"#;
        let err = SystemDefinition::parse_str(text).unwrap_err();
        assert!(matches!(err, Error::Shape { ref what, .. } if what == "phi.3"), "{err}");
        assert!(err.to_string().contains("2x5"));
    }

    #[test]
    fn diagnostics() {
        let err = SystemDefinition::parse_str("{\n \"name\": \"x\",\n \"jacobian\": [[0, -1], [1, 0]]\n ,}").unwrap_err();
        assert!(err.to_string().contains("line 4"), "{err}");
        let err = SystemDefinition::parse_str(r#"{"name": "x", "jacobian": [[0, "gamma"], [1, 0]]}"#).unwrap_err();
        assert!(err.to_string().contains("jacobian[0][1]"), "{err}");
        let err = SystemDefinition::parse_str(r#"{"name": "x", "jacobian": [[0, 1], [1, 0]], "phi": {"1": [[0, 0]]}}"#)
            .unwrap_err();
        assert!(err.to_string().contains("phi.1"), "{err}");
        assert!(SystemDefinition::parse_str(r#"{"jacobian": [[0, 1], [1, 0]]}"#).is_err());
        assert!(SystemDefinition::parse_str(r#"{"name": "x", "jacobian": [[0, 1], [1, 0]], "extra": 1}"#).is_err());
    }

    #[test]
    fn missing_degrees_are_zero_and_all_zero_is_rejected() {
        let d = SystemDefinition::parse_str(
            r#"{"name": "x", "jacobian": [[0, -1], [1, 0]], "phi": {"2": [[0, 0, 0], [0, 0, 0]]}}"#,
        )
        .unwrap();
        assert!(matches!(d.instantiate(&q(0, 1)), Err(Error::DegenerateLinear { .. })));
        let d = SystemDefinition::parse_str(
            r#"{"name": "x", "jacobian": [[0, -1], [1, 0]], "phi": {"4": [[1, 0, 0, 0, 0], [0, 0, 0, 0, 0]]}}"#,
        )
        .unwrap();
        assert_eq!(d.instantiate(&q(0, 1)).unwrap().degree(), 4);
    }
}
