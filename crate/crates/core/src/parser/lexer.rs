use num_bigint::BigInt;
use num_traits::{One, Zero};

use super::Diagnostic;
use crate::kernel::Number;

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Tok {
    /// Unquoted lowercase identifier; may be a keyword.
    Name(String),
    /// `'quoted atom'`, never a keyword.
    Quoted(String),
    Var(String),
    Num(Number),
    Punct(&'static str),
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Name(n) => format!("`{n}`"),
            Tok::Quoted(n) => format!("'{n}'"),
            Tok::Var(v) => format!("variable `{v}`"),
            Tok::Num(n) => format!("number `{n}`"),
            Tok::Punct(p) => format!("`{p}`"),
            Tok::Eof => "end of input".to_string(),
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

const HYPHENATED: [(&str, &str); 3] = [("fulfilled", "if"), ("violated", "if"), ("sanction", "do")];

// Longest spellings first.
const PUNCT: [(&str, &str); 27] = [
    ("\\=", "!="),
    ("!=", "!="),
    (">=", ">="),
    ("<=", "<="),
    ("=<", "<="),
    ("≠", "!="),
    ("≥", ">="),
    ("≤", "<="),
    ("×", "*"),
    ("−", "-"),
    ("∅", "[]"),
    ("=", "="),
    (">", ">"),
    ("<", "<"),
    ("+", "+"),
    ("-", "-"),
    ("*", "*"),
    ("/", "/"),
    ("&", "&"),
    (":", ":"),
    (",", ","),
    ("(", "("),
    (")", ")"),
    ("[", "["),
    ("]", "]"),
    ("{", "{"),
    ("}", "}"),
];

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
    col: usize,
}

impl<'a> Cursor<'a> {
    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn peek2(&self) -> Option<char> {
        self.rest().chars().nth(1)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn take_while(&mut self, pred: impl Fn(char) -> bool) -> &'a str {
        let start = self.pos;
        while self.peek().is_some_and(&pred) {
            self.bump();
        }
        &self.src[start..self.pos]
    }
}

fn is_ident(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

pub(crate) fn tokenize(src: &str) -> Result<Vec<Token>, Diagnostic> {
    let mut cur = Cursor { src, pos: 0, line: 1, col: 1 };
    let mut out = Vec::new();
    loop {
        // whitespace and `%` comments
        loop {
            match cur.peek() {
                Some(c) if c.is_whitespace() => {
                    cur.bump();
                }
                Some('%') => {
                    cur.take_while(|c| c != '\n');
                }
                _ => break,
            }
        }
        let (line, col) = (cur.line, cur.col);
        let Some(c) = cur.peek() else {
            out.push(Token { tok: Tok::Eof, line, col });
            return Ok(out);
        };
        let tok = if c.is_ascii_lowercase() {
            let word = cur.take_while(is_ident).to_string();
            match HYPHENATED.iter().find(|(w, _)| *w == word) {
                Some((_, suffix)) if hyphen_suffix(cur.rest(), suffix) => {
                    for _ in 0..=suffix.len() {
                        cur.bump();
                    }
                    Tok::Name(format!("{word}-{suffix}"))
                }
                _ => Tok::Name(word),
            }
        } else if c.is_ascii_uppercase() || c == '_' {
            Tok::Var(cur.take_while(is_ident).to_string())
        } else if c.is_ascii_digit() {
            Tok::Num(lex_number(&mut cur))
        } else if c == '\'' {
            cur.bump();
            Tok::Quoted(lex_quoted(&mut cur, line, col)?)
        } else if c == '.' {
            cur.bump();
            Tok::Punct(".")
        } else if let Some((spelling, canon)) = PUNCT.iter().find(|(s, _)| cur.rest().starts_with(s)) {
            for _ in spelling.chars() {
                cur.bump();
            }
            Tok::Punct(canon)
        } else {
            return Err(Diagnostic::new(line, col, format!("unexpected character `{}`", c.escape_debug())));
        };
        out.push(Token { tok, line, col });
    }
}

fn hyphen_suffix(rest: &str, suffix: &str) -> bool {
    let Some(after) = rest.strip_prefix('-').and_then(|r| r.strip_prefix(suffix)) else {
        return false;
    };
    !after.chars().next().is_some_and(is_ident)
}

fn lex_number(cur: &mut Cursor<'_>) -> Number {
    let int_part = cur.take_while(|c| c.is_ascii_digit());
    let mut numer: BigInt = int_part.parse().unwrap_or_else(|_| BigInt::zero());
    let mut denom = BigInt::one();
    if cur.peek() == Some('.') && cur.peek2().is_some_and(|c| c.is_ascii_digit()) {
        cur.bump();
        let frac = cur.take_while(|c| c.is_ascii_digit());
        for d in frac.chars() {
            numer = numer * 10 + BigInt::from(d.to_digit(10).unwrap_or(0));
            denom *= 10;
        }
    }
    Number::new(numer, denom)
}

fn lex_quoted(cur: &mut Cursor<'_>, line: usize, col: usize) -> Result<String, Diagnostic> {
    let mut s = String::new();
    loop {
        match cur.bump() {
            None => return Err(Diagnostic::new(line, col, "unterminated quoted atom")),
            Some('\'') => return Ok(s),
            Some('\\') => match cur.bump() {
                Some('n') => s.push('\n'),
                Some('t') => s.push('\t'),
                Some(c @ ('\'' | '\\')) => s.push(c),
                _ => return Err(Diagnostic::new(cur.line, cur.col, "invalid escape in quoted atom")),
            },
            Some(c) => s.push(c),
        }
    }
}
