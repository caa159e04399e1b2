//! Parser for model strings such as `product(halfspace(2,1),euclidean(1))`.
//!
//! The grammar is the one printed by `Model`'s `Display`, so every model
//! round-trips through its string form.

use crate::error::{Error, Result};
use crate::models::{Model, Profile};

/// Catalog entries shown by `list-models`: (syntax, example, description).
pub const CATALOG: &[(&str, &str, &str)] = &[
    ("euclidean(n)", "euclidean(3)", "flat R^n"),
    ("halfspace(n,a)", "halfspace(2,1)", "upper half-space, curvature -a^2"),
    ("hyperbolic(n)", "hyperbolic(3)", "alias for halfspace(n,1)"),
    ("sphere(n,r)", "sphere(2,1)", "round sphere of radius r (positive curvature, fixture only)"),
    ("revolution(cosh)", "revolution(cosh)", "dr^2 + cosh(r)^2 dθ^2 (hyperbolic plane, Fermi chart)"),
    ("revolution(exp)", "revolution(exp)", "dr^2 + e^(2r) dθ^2 (hyperbolic plane, horocyclic chart)"),
    (
        "revolution(polynomial-convex(c2,...))",
        "revolution(polynomial-convex(0.5))",
        "dr^2 + f(r)^2 dθ^2 with f = 1 + c2 r^2 + c3 r^3 + ...",
    ),
    ("product(M1,M2)", "product(halfspace(2,1),euclidean(1))", "Riemannian product"),
];

#[derive(Debug)]
enum Node {
    Num(f64),
    Call(String, Vec<Node>),
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, msg: &str) -> Error {
        Error::usage(format!("model `{}`: {msg} at column {}", self.src, self.pos + 1))
    }

    fn skip_ws(&mut self) {
        while self.src[self.pos..].starts_with(char::is_whitespace) {
            self.pos += self.src[self.pos..].chars().next().map_or(1, char::len_utf8);
        }
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.src[self.pos..].starts_with(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn take_while(&mut self, f: impl Fn(char) -> bool) -> &'a str {
        let start = self.pos;
        while let Some(c) = self.src[self.pos..].chars().next() {
            if !f(c) {
                break;
            }
            self.pos += c.len_utf8();
        }
        &self.src[start..self.pos]
    }

    fn node(&mut self) -> Result<Node> {
        self.skip_ws();
        let c = self.src[self.pos..].chars().next().ok_or_else(|| self.err("unexpected end"))?;
        if c.is_ascii_digit() || c == '-' || c == '+' || c == '.' {
            let text = self.take_while(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '+'));
            let v: f64 = text.parse().map_err(|_| self.err(&format!("bad number `{text}`")))?;
            return Ok(Node::Num(v));
        }
        if !c.is_ascii_alphabetic() {
            return Err(self.err(&format!("unexpected `{c}`")));
        }
        let name = self.take_while(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_').to_ascii_lowercase();
        let mut args = Vec::new();
        if self.eat('(') {
            if !self.eat(')') {
                loop {
                    args.push(self.node()?);
                    if self.eat(')') {
                        break;
                    }
                    if !self.eat(',') {
                        return Err(self.err("expected `,` or `)`"));
                    }
                }
            }
        }
        Ok(Node::Call(name, args))
    }
}

fn number(n: &Node, what: &str) -> Result<f64> {
    match n {
        Node::Num(v) => Ok(*v),
        Node::Call(name, _) => Err(Error::usage(format!("{what}: expected a number, found `{name}`"))),
    }
}

fn dimension(n: &Node) -> Result<usize> {
    let v = number(n, "dimension")?;
    if v.fract() != 0.0 || !(1.0..=64.0).contains(&v) {
        return Err(Error::usage(format!("dimension must be an integer in 1..=64, got {v}")));
    }
    Ok(v as usize)
}

fn arity(name: &str, args: &[Node], n: usize) -> Result<()> {
    if args.len() != n {
        return Err(Error::usage(format!("`{name}` takes {n} argument(s), got {}", args.len())));
    }
    Ok(())
}

fn profile(n: &Node) -> Result<Profile<f64>> {
    match n {
        Node::Call(name, args) => match name.as_str() {
            "cosh" => arity(name, args, 0).map(|_| Profile::Cosh),
            "exp" => arity(name, args, 0).map(|_| Profile::Exp),
            "polynomial-convex" => {
                if args.is_empty() {
                    return Err(Error::usage("polynomial-convex needs at least one coefficient"));
                }
                let c = args.iter().map(|a| number(a, "coefficient")).collect::<Result<Vec<_>>>()?;
                Profile::polynomial_convex(c)
            }
            other => Err(Error::usage(format!("unknown profile `{other}` (expected cosh, exp, polynomial-convex)"))),
        },
        Node::Num(_) => Err(Error::usage("revolution expects a profile name")),
    }
}

fn build(n: &Node) -> Result<Model<f64>> {
    let Node::Call(name, args) = n else {
        return Err(Error::usage("expected a model name"));
    };
    match name.as_str() {
        "euclidean" => {
            arity(name, args, 1)?;
            Ok(Model::euclidean(dimension(&args[0])?))
        }
        "halfspace" => {
            arity(name, args, 2)?;
            Model::half_space(dimension(&args[0])?, number(&args[1], "curvature parameter")?)
        }
        "hyperbolic" => {
            arity(name, args, 1)?;
            Model::half_space(dimension(&args[0])?, 1.0)
        }
        "sphere" => {
            arity(name, args, 2)?;
            Model::sphere(dimension(&args[0])?, number(&args[1], "radius")?)
        }
        "revolution" => {
            arity(name, args, 1)?;
            Ok(Model::revolution(profile(&args[0])?))
        }
        "product" => {
            arity(name, args, 2)?;
            Ok(Model::product(build(&args[0])?, build(&args[1])?))
        }
        other => Err(Error::usage(format!("unknown model `{other}`; run `list-models` for the catalog"))),
    }
}

/// Parses a model string.
pub fn parse_model(src: &str) -> Result<Model<f64>> {
    let mut p = Parser { src, pos: 0 };
    let node = p.node()?;
    p.skip_ws();
    if p.pos != src.len() {
        return Err(p.err("trailing input"));
    }
    build(&node)
}
