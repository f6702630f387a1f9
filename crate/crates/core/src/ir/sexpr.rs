//! S-expression text form for word-level expressions.
//!
//! Atoms: `#b1010` (binary constant, width = digit count), `#x0f` (hex
//! constant, width = 4 per digit), signal names with optional `|...|`
//! quoting. Forms: `(ite c t e)`, `(= a b)`, `(bvadd a b)`,
//! `(extract hi lo a)` (the SMT-LIB spelling `((_ extract hi lo) a)` is also
//! accepted), `(not a)`, `(and a b)`, `(or a b)`, `(xor a b)`.

use super::expr::Expr;
use super::IrError;

#[derive(Debug, PartialEq)]
enum Token {
    Open,
    Close,
    Atom(String),
}

fn tokenize(text: &str) -> Result<Vec<Token>, IrError> {
    let mut tokens = Vec::new();
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            '(' => {
                chars.next();
                tokens.push(Token::Open);
            }
            ')' => {
                chars.next();
                tokens.push(Token::Close);
            }
            '|' => {
                chars.next();
                let mut name = String::new();
                loop {
                    match chars.next() {
                        Some('|') => break,
                        Some(ch) => name.push(ch),
                        None => return Err(IrError::Parse("unterminated |name|".into())),
                    }
                }
                tokens.push(Token::Atom(name));
            }
            ch if ch.is_whitespace() => {
                chars.next();
            }
            _ => {
                let mut atom = String::new();
                while let Some(&ch) = chars.peek() {
                    if ch.is_whitespace() || ch == '(' || ch == ')' {
                        break;
                    }
                    atom.push(ch);
                    chars.next();
                }
                tokens.push(Token::Atom(atom));
            }
        }
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Result<&Token, IrError> {
        let t = self
            .tokens
            .get(self.pos)
            .ok_or_else(|| IrError::Parse("unexpected end".into()))?;
        self.pos += 1;
        Ok(t)
    }

    fn expect_close(&mut self) -> Result<(), IrError> {
        match self.next()? {
            Token::Close => Ok(()),
            t => Err(IrError::Parse(format!("expected ')', got {t:?}"))),
        }
    }

    fn atom(&mut self) -> Result<String, IrError> {
        match self.next()? {
            Token::Atom(a) => Ok(a.clone()),
            t => Err(IrError::Parse(format!("expected atom, got {t:?}"))),
        }
    }

    fn number(&mut self) -> Result<u32, IrError> {
        let a = self.atom()?;
        a.parse()
            .map_err(|_| IrError::Parse(format!("expected number, got '{a}'")))
    }

    fn parse_atom(atom: &str) -> Result<Expr, IrError> {
        if let Some(bits) = atom.strip_prefix("#b") {
            if bits.is_empty() || !bits.chars().all(|c| c == '0' || c == '1') {
                return Err(IrError::Parse(format!("bad binary constant '{atom}'")));
            }
            let value = u64::from_str_radix(bits, 2)
                .map_err(|_| IrError::Parse(format!("constant '{atom}' exceeds 64 bits")))?;
            return Expr::constant(bits.len() as u32, value);
        }
        if let Some(digits) = atom.strip_prefix("#x") {
            if digits.is_empty() || !digits.chars().all(|c| c.is_ascii_hexdigit()) {
                return Err(IrError::Parse(format!("bad hex constant '{atom}'")));
            }
            let value = u64::from_str_radix(digits, 16)
                .map_err(|_| IrError::Parse(format!("constant '{atom}' exceeds 64 bits")))?;
            return Expr::constant(4 * digits.len() as u32, value);
        }
        Ok(Expr::Signal(atom.to_string()))
    }

    fn parse_expr(&mut self) -> Result<Expr, IrError> {
        match self.next()? {
            Token::Atom(a) => {
                let a = a.clone();
                Self::parse_atom(&a)
            }
            Token::Close => Err(IrError::Parse("unexpected ')'".into())),
            Token::Open => {
                // `((_ extract hi lo) a)`
                if matches!(self.peek(), Some(Token::Open)) {
                    self.next()?;
                    let underscore = self.atom()?;
                    let op = self.atom()?;
                    if underscore != "_" || op != "extract" {
                        return Err(IrError::Parse(format!(
                            "unknown form ({underscore} {op} ...)"
                        )));
                    }
                    let hi = self.number()?;
                    let lo = self.number()?;
                    self.expect_close()?;
                    let arg = self.parse_expr()?;
                    self.expect_close()?;
                    return Ok(Expr::Extract {
                        hi,
                        lo,
                        arg: Box::new(arg),
                    });
                }
                let head = self.atom()?;
                let expr = match head.as_str() {
                    "ite" => {
                        let c = self.parse_expr()?;
                        let t = self.parse_expr()?;
                        let e = self.parse_expr()?;
                        Expr::Ite(Box::new(c), Box::new(t), Box::new(e))
                    }
                    "=" => {
                        let a = self.parse_expr()?;
                        let b = self.parse_expr()?;
                        Expr::Eq(Box::new(a), Box::new(b))
                    }
                    "bvadd" => {
                        let a = self.parse_expr()?;
                        let b = self.parse_expr()?;
                        Expr::BvAdd(Box::new(a), Box::new(b))
                    }
                    "extract" => {
                        let hi = self.number()?;
                        let lo = self.number()?;
                        let arg = self.parse_expr()?;
                        Expr::Extract {
                            hi,
                            lo,
                            arg: Box::new(arg),
                        }
                    }
                    "not" => Expr::Not(Box::new(self.parse_expr()?)),
                    "and" => {
                        let a = self.parse_expr()?;
                        let b = self.parse_expr()?;
                        Expr::And(Box::new(a), Box::new(b))
                    }
                    "or" => {
                        let a = self.parse_expr()?;
                        let b = self.parse_expr()?;
                        Expr::Or(Box::new(a), Box::new(b))
                    }
                    "xor" => {
                        let a = self.parse_expr()?;
                        let b = self.parse_expr()?;
                        Expr::Xor(Box::new(a), Box::new(b))
                    }
                    other => return Err(IrError::Parse(format!("unknown operator '{other}'"))),
                };
                self.expect_close()?;
                Ok(expr)
            }
        }
    }
}

pub fn parse_expr(text: &str) -> Result<Expr, IrError> {
    let tokens = tokenize(text)?;
    let mut parser = Parser { tokens, pos: 0 };
    let expr = parser.parse_expr()?;
    if parser.pos != parser.tokens.len() {
        return Err(IrError::Parse("trailing tokens after expression".into()));
    }
    Ok(expr)
}

pub fn print_expr(expr: &Expr) -> String {
    match expr {
        Expr::Const { width, value } => {
            let mut bits = String::with_capacity(*width as usize + 2);
            bits.push_str("#b");
            for k in (0..*width).rev() {
                bits.push(if (value >> k) & 1 == 1 { '1' } else { '0' });
            }
            bits
        }
        Expr::Signal(name) => {
            if name
                .chars()
                .all(|c| c.is_alphanumeric() || c == '_' || c == '#' || c == '[' || c == ']')
            {
                name.clone()
            } else {
                format!("|{name}|")
            }
        }
        Expr::Ite(c, t, e) => {
            format!(
                "(ite {} {} {})",
                print_expr(c),
                print_expr(t),
                print_expr(e)
            )
        }
        Expr::Eq(a, b) => format!("(= {} {})", print_expr(a), print_expr(b)),
        Expr::BvAdd(a, b) => format!("(bvadd {} {})", print_expr(a), print_expr(b)),
        Expr::Extract { hi, lo, arg } => format!("(extract {hi} {lo} {})", print_expr(arg)),
        Expr::Not(a) => format!("(not {})", print_expr(a)),
        Expr::And(a, b) => format!("(and {} {})", print_expr(a), print_expr(b)),
        Expr::Or(a, b) => format!("(or {} {})", print_expr(a), print_expr(b)),
        Expr::Xor(a, b) => format!("(xor {} {})", print_expr(a), print_expr(b)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_piped_names_and_constants() {
        let e = parse_expr("(ite (= |reset#1| #b1) #x00 (bvadd |counter#1| #x02))").unwrap();
        match &e {
            Expr::Ite(c, t, _) => {
                assert_eq!(
                    **c,
                    Expr::Eq(
                        Box::new(Expr::Signal("reset#1".into())),
                        Box::new(Expr::Const { width: 1, value: 1 }),
                    )
                );
                assert_eq!(**t, Expr::Const { width: 8, value: 0 });
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn smtlib_extract_spelling_accepted() {
        let a = parse_expr("((_ extract 2 1) counter)").unwrap();
        let b = parse_expr("(extract 2 1 counter)").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn print_parse_round_trip() {
        for text in [
            "(ite (= reset #b1) #b000 (ite (= enable #b1) (bvadd counter #b010) (bvadd counter #b001)))",
            "(xor (extract 2 0 a) (not b))",
            "(or (and x y) (= #b01 z))",
        ] {
            let e = parse_expr(text).unwrap();
            assert_eq!(parse_expr(&print_expr(&e)).unwrap(), e);
        }
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(parse_expr("(ite a b").is_err());
        assert!(parse_expr("(frob a b)").is_err());
        assert!(parse_expr("#b").is_err());
        assert!(parse_expr("(= a b) junk").is_err());
    }
}
