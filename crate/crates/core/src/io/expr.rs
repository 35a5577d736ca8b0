//! Numeric expressions: decimal literals, `+ - * /`, parentheses and
//! `sqrt(...)`. Evaluated in `f64`.

/// Evaluates `text`. On failure returns the 0-based character offset of the
/// problem and a message.
pub fn parse_number(text: &str) -> Result<f64, (usize, String)> {
    let chars: Vec<char> = text.chars().collect();
    let mut p = Parser { s: &chars, pos: 0 };
    let v = p.expr()?;
    if p.pos != chars.len() {
        return Err((p.pos, format!("unexpected '{}'", chars[p.pos])));
    }
    if !v.is_finite() {
        return Err((0, format!("'{text}' is not finite")));
    }
    Ok(v)
}

struct Parser<'a> {
    s: &'a [char],
    pos: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<char> {
        self.s.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<f64, (usize, String)> {
        let mut v = self.term()?;
        while let Some(op @ ('+' | '-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            v = if op == '+' { v + rhs } else { v - rhs };
        }
        Ok(v)
    }

    fn term(&mut self) -> Result<f64, (usize, String)> {
        let mut v = self.factor()?;
        while let Some(op @ ('*' | '/')) = self.peek() {
            self.pos += 1;
            let rhs = self.factor()?;
            v = if op == '*' { v * rhs } else { v / rhs };
        }
        Ok(v)
    }

    fn factor(&mut self) -> Result<f64, (usize, String)> {
        match self.peek() {
            Some('-') => {
                self.pos += 1;
                Ok(-self.factor()?)
            }
            Some('+') => {
                self.pos += 1;
                self.factor()
            }
            Some('(') => {
                self.pos += 1;
                let v = self.expr()?;
                self.expect(')')?;
                Ok(v)
            }
            Some(c) if c.is_ascii_alphabetic() => self.function(),
            Some(_) => self.literal(),
            None => Err((self.pos, "expected a number".into())),
        }
    }

    fn function(&mut self) -> Result<f64, (usize, String)> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_alphanumeric()) {
            self.pos += 1;
        }
        let name: String = self.s[start..self.pos].iter().collect();
        match name.as_str() {
            "sqrt" => {
                self.expect('(')?;
                let v = self.expr()?;
                self.expect(')')?;
                Ok(v.sqrt())
            }
            "inf" | "nan" | "infinity" => Err((start, format!("'{name}' is not finite"))),
            _ => Err((start, format!("unknown function '{name}'"))),
        }
    }

    fn literal(&mut self) -> Result<f64, (usize, String)> {
        let start = self.pos;
        while let Some(c) = self.peek() {
            let exp_sign = matches!(c, '+' | '-')
                && self.pos > start
                && matches!(self.s[self.pos - 1], 'e' | 'E');
            if c.is_ascii_digit() || matches!(c, '.' | 'e' | 'E') || exp_sign {
                self.pos += 1;
            } else {
                break;
            }
        }
        let lit: String = self.s[start..self.pos].iter().collect();
        if lit.is_empty() {
            return Err((start, format!("unexpected '{}'", self.s[start])));
        }
        lit.parse::<f64>()
            .map_err(|_| (start, format!("malformed number '{lit}'")))
    }

    fn expect(&mut self, c: char) -> Result<(), (usize, String)> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err((self.pos, format!("expected '{c}'")))
        }
    }
}
