//! Minimal PENMAN reader for AMR graphs returned by the model. Only used to
//! check that an AMR is well formed and to inspect its concepts.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AmrNode {
    pub variable: String,
    pub concept: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AmrTarget {
    Node(String),
    Constant(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AmrEdge {
    pub source: String,
    pub role: String,
    pub target: AmrTarget,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AmrGraph {
    pub root: String,
    pub nodes: Vec<AmrNode>,
    pub edges: Vec<AmrEdge>,
}

impl AmrGraph {
    pub fn parse(text: &str) -> Result<Self> {
        let mut parser = Parser {
            chars: text.chars().collect(),
            pos: 0,
            nodes: Vec::new(),
            edges: Vec::new(),
        };
        parser.skip_ws();
        let root = parser.node()?;
        parser.skip_ws();
        if parser.pos != parser.chars.len() {
            return Err(Error::Amr(format!("trailing input at offset {}", parser.pos)));
        }
        // Bare symbols naming a declared variable are re-entrancies.
        let vars: Vec<String> = parser.nodes.iter().map(|n| n.variable.clone()).collect();
        for edge in &mut parser.edges {
            if let AmrTarget::Constant(c) = &edge.target {
                if vars.contains(c) {
                    edge.target = AmrTarget::Node(c.clone());
                }
            }
        }
        Ok(AmrGraph {
            root,
            nodes: parser.nodes,
            edges: parser.edges,
        })
    }

    pub fn concept_of(&self, variable: &str) -> Option<&str> {
        self.nodes.iter().find(|n| n.variable == variable).map(|n| n.concept.as_str())
    }

    pub fn concepts(&self) -> Vec<&str> {
        self.nodes.iter().map(|n| n.concept.as_str()).collect()
    }

    /// Concept reached from `source` over `role`, if that edge leads to a node.
    pub fn child_concept(&self, source: &str, role: &str) -> Option<&str> {
        self.edges.iter().find_map(|e| match &e.target {
            AmrTarget::Node(v) if e.source == source && e.role == role => self.concept_of(v),
            _ => None,
        })
    }
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
    nodes: Vec<AmrNode>,
    edges: Vec<AmrEdge>,
}

impl Parser {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(Error::Amr(format!("expected `{c}` at offset {}", self.pos)))
        }
    }

    fn symbol(&mut self) -> Result<String> {
        self.skip_ws();
        let start = self.pos;
        while self
            .peek()
            .is_some_and(|c| !c.is_whitespace() && !matches!(c, '(' | ')' | '/' | ':' | '"'))
        {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Amr(format!("expected a symbol at offset {start}")));
        }
        Ok(self.chars[start..self.pos].iter().collect())
    }

    fn quoted(&mut self) -> Result<String> {
        self.expect('"')?;
        let mut out = String::new();
        loop {
            match self.peek() {
                None => return Err(Error::Amr("unterminated string".into())),
                Some('"') => {
                    self.pos += 1;
                    return Ok(out);
                }
                Some('\\') => {
                    self.pos += 1;
                    if let Some(c) = self.peek() {
                        out.push(c);
                        self.pos += 1;
                    }
                }
                Some(c) => {
                    out.push(c);
                    self.pos += 1;
                }
            }
        }
    }

    fn node(&mut self) -> Result<String> {
        self.expect('(')?;
        let variable = self.symbol()?;
        if self.nodes.iter().any(|n| n.variable == variable) {
            return Err(Error::Amr(format!("variable `{variable}` declared twice")));
        }
        self.expect('/')?;
        let concept = self.symbol()?;
        self.nodes.push(AmrNode {
            variable: variable.clone(),
            concept,
        });
        loop {
            self.skip_ws();
            match self.peek() {
                Some(')') => {
                    self.pos += 1;
                    return Ok(variable);
                }
                Some(':') => {
                    self.pos += 1;
                    let role = format!(":{}", self.symbol()?);
                    self.skip_ws();
                    let target = match self.peek() {
                        Some('(') => AmrTarget::Node(self.node()?),
                        Some('"') => AmrTarget::Constant(self.quoted()?),
                        _ => AmrTarget::Constant(self.symbol()?),
                    };
                    self.edges.push(AmrEdge {
                        source: variable.clone(),
                        role,
                        target,
                    });
                }
                Some(c) => return Err(Error::Amr(format!("unexpected `{c}` at offset {}", self.pos))),
                None => return Err(Error::Amr("unbalanced parentheses".into())),
            }
        }
    }
}
