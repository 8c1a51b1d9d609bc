//! Formula parsing: `target ~ .` and `target ~ a + b + c`.

use serde::{Deserialize, Serialize};

use super::{DataFrame, FrameError};

/// Predictor side of a formula.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Predictors {
    /// The dot form: every column except the target.
    All,
    /// An explicit list of column names.
    Named(Vec<String>),
}

/// A parsed formula: a target column and a predictor subset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Formula {
    pub target: String,
    pub predictors: Predictors,
}

impl Formula {
    /// Explicitly named predictors; empty for the dot form.
    pub fn explicit_predictors(&self) -> &[String] {
        match &self.predictors {
            Predictors::All => &[],
            Predictors::Named(v) => v,
        }
    }

    /// Predictor column names resolved against `data`.
    pub fn predictor_names(&self, data: &DataFrame) -> Vec<String> {
        match &self.predictors {
            Predictors::All => data
                .columns()
                .iter()
                .filter(|c| c.name != self.target)
                .map(|c| c.name.clone())
                .collect(),
            Predictors::Named(v) => v.clone(),
        }
    }

    /// Renders the formula back to its textual form.
    pub fn format(&self) -> String {
        match &self.predictors {
            Predictors::All => format!("{} ~ .", self.target),
            Predictors::Named(v) => format!("{} ~ {}", self.target, v.join(" + ")),
        }
    }
}

impl std::fmt::Display for Formula {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.format())
    }
}

// Column names may contain dots (CSV headers like `Sepal.Length`); the
// dot form of a formula is therefore detected as a *lone* dot below.
fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '.'
}

struct Scanner<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Scanner<'a> {
    fn new(text: &'a str) -> Self {
        Scanner { text, pos: 0 }
    }

    fn skip_ws(&mut self) {
        while self.text[self.pos..].starts_with(char::is_whitespace) {
            self.pos += self.text[self.pos..].chars().next().unwrap().len_utf8();
        }
    }

    fn peek(&self) -> Option<char> {
        self.text[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn ident(&mut self) -> Result<String, FrameError> {
        self.skip_ws();
        let start = self.pos;
        while matches!(self.peek(), Some(c) if is_ident_char(c)) {
            self.bump();
        }
        if self.pos == start {
            return Err(FrameError::FormulaSyntax {
                position: start,
                message: "expected identifier".into(),
            });
        }
        Ok(self.text[start..self.pos].to_string())
    }

    fn expect(&mut self, c: char) -> Result<(), FrameError> {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.bump();
            Ok(())
        } else {
            Err(FrameError::FormulaSyntax {
                position: self.pos,
                message: format!("expected `{c}`"),
            })
        }
    }
}

/// Parses `"<ident> ~ ."` or `"<ident> ~ <ident> (+ <ident>)*"`.
pub fn parse_formula(text: &str) -> Result<Formula, FrameError> {
    let mut s = Scanner::new(text);
    let target = s.ident()?;
    if target == "." {
        return Err(FrameError::FormulaSyntax {
            position: 0,
            message: "target may not be `.`".into(),
        });
    }
    s.expect('~')?;
    s.skip_ws();
    let rest_is_lone_dot = text[s.pos..].trim() == ".";
    let predictors = if rest_is_lone_dot {
        s.expect('.')?;
        Predictors::All
    } else {
        let mut names = vec![s.ident()?];
        loop {
            s.skip_ws();
            match s.peek() {
                Some('+') => {
                    s.bump();
                    names.push(s.ident()?);
                }
                _ => break,
            }
        }
        Predictors::Named(names)
    };
    s.skip_ws();
    if s.pos != text.len() {
        return Err(FrameError::FormulaSyntax {
            position: s.pos,
            message: "unexpected trailing input".into(),
        });
    }
    if matches!(&predictors, Predictors::Named(v) if v.iter().any(|p| p == &target)) {
        return Err(FrameError::TargetInPredictors(target));
    }
    Ok(Formula { target, predictors })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_form() {
        let f = parse_formula("Species ~ .").unwrap();
        assert_eq!(f.target, "Species");
        assert_eq!(f.predictors, Predictors::All);
    }

    #[test]
    fn explicit_list() {
        let f = parse_formula("y ~ x1 + x2").unwrap();
        assert_eq!(f.target, "y");
        assert_eq!(
            f.predictors,
            Predictors::Named(vec!["x1".into(), "x2".into()])
        );
    }

    #[test]
    fn missing_target_is_syntax_error() {
        let err = parse_formula("~ x").unwrap_err();
        assert!(matches!(err, FrameError::FormulaSyntax { .. }));
    }

    #[test]
    fn trailing_garbage_rejected() {
        assert!(parse_formula("y ~ x1 +").is_err());
        assert!(parse_formula("y ~ x1 x2").is_err());
    }

    #[test]
    fn target_among_predictors_rejected() {
        assert!(matches!(
            parse_formula("y ~ y + x"),
            Err(FrameError::TargetInPredictors(_))
        ));
    }

    #[test]
    fn format_round_trip() {
        for text in ["Species ~ .", "y ~ x1 + x2", "a ~ b"] {
            let f = parse_formula(text).unwrap();
            assert_eq!(parse_formula(&f.format()).unwrap(), f);
            assert_eq!(f.format(), text);
        }
    }
}
