//! Recursive-descent parser for the script format.
//!
//! ```text
//! script   := line*
//! line     := header | comment | surface | cell | blank
//! header   := "# surfaces to reuse:" (sid ("," sid)*)?
//! surface  := sid "=" Kind "(" name "=" number ("," name "=" number)* ")"
//! cell     := cid "=" "Cell" "(" "region" "=" term ("&" term)* ")"
//! term     := ("+" | "-") sid
//! ```
//!
//! Grammar violations are syntax errors; unknown kinds or parameters, bad
//! radii, undefined or duplicate ids and repeated terms are semantic errors.

use std::collections::{BTreeMap, HashSet};

use super::{ScriptAst, ScriptError, SurfaceDef};
use crate::geom::{Cell, Sign, SignedSurface, SurfaceKind};
use crate::SurfaceGeom;

const HEADER: &str = "# surfaces to reuse:";

struct Cursor<'a> {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    _src: &'a str,
}

impl<'a> Cursor<'a> {
    fn new(src: &'a str, line: usize) -> Self {
        Cursor {
            chars: src.chars().collect(),
            pos: 0,
            line,
            _src: src,
        }
    }

    fn col(&self) -> usize {
        self.pos + 1
    }

    fn syntax<T>(&self, msg: impl Into<String>) -> Result<T, ScriptError> {
        Err(ScriptError::Syntax {
            line: self.line,
            col: self.col(),
            msg: msg.into(),
        })
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c == ' ' || c == '\t') {
            self.pos += 1;
        }
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.pos >= self.chars.len()
    }

    fn expect(&mut self, c: char) -> Result<(), ScriptError> {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            match self.peek() {
                Some(found) => self.syntax(format!("expected '{c}', found '{found}'")),
                None => self.syntax(format!("expected '{c}', found end of line")),
            }
        }
    }

    fn ident(&mut self) -> Result<(String, usize), ScriptError> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
            _ => return self.syntax("expected identifier"),
        }
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_') {
            self.pos += 1;
        }
        Ok((self.chars[start..self.pos].iter().collect(), start + 1))
    }

    fn keyword(&mut self, word: &str) -> Result<(), ScriptError> {
        let save = self.pos;
        let (id, col) = self.ident()?;
        if id != word {
            self.pos = save;
            return Err(ScriptError::Syntax {
                line: self.line,
                col,
                msg: format!("expected '{word}', found '{id}'"),
            });
        }
        Ok(())
    }

    fn number(&mut self) -> Result<f64, ScriptError> {
        self.skip_ws();
        let start = self.pos;
        if matches!(self.peek(), Some('+' | '-')) {
            self.pos += 1;
        }
        let digits = |cur: &mut Self| {
            let s = cur.pos;
            while matches!(cur.peek(), Some(c) if c.is_ascii_digit()) {
                cur.pos += 1;
            }
            cur.pos - s
        };
        let mut mantissa = digits(self);
        if self.peek() == Some('.') {
            self.pos += 1;
            mantissa += digits(self);
        }
        if mantissa == 0 {
            self.pos = start;
            return self.syntax("expected number");
        }
        if matches!(self.peek(), Some('e' | 'E')) {
            self.pos += 1;
            if matches!(self.peek(), Some('+' | '-')) {
                self.pos += 1;
            }
            if digits(self) == 0 {
                return self.syntax("malformed exponent");
            }
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        match text.parse::<f64>() {
            Ok(v) => Ok(v),
            Err(_) => {
                self.pos = start;
                self.syntax(format!("malformed number '{text}'"))
            }
        }
    }
}

fn numbered(id: &str, prefix: char) -> bool {
    let mut chars = id.chars();
    chars.next() == Some(prefix)
        && id.len() > 1
        && chars.all(|c| c.is_ascii_digit())
}

enum Statement {
    Surface {
        id: String,
        kind: (String, usize),
        params: Vec<(String, f64, usize)>,
        close_col: usize,
    },
    Cell {
        id: String,
        terms: Vec<(Sign, String, usize)>,
    },
}

fn parse_header(cur: &mut Cursor) -> Result<Vec<(String, usize)>, ScriptError> {
    cur.pos = HEADER.chars().count();
    let mut ids = Vec::new();
    if cur.at_end() {
        return Ok(ids);
    }
    loop {
        let (id, col) = cur.ident()?;
        if !numbered(&id, 's') {
            return Err(ScriptError::Syntax {
                line: cur.line,
                col,
                msg: format!("'{id}' is not a surface id"),
            });
        }
        ids.push((id, col));
        if cur.at_end() {
            return Ok(ids);
        }
        cur.expect(',')?;
    }
}

fn parse_statement(cur: &mut Cursor) -> Result<Statement, ScriptError> {
    let (id, id_col) = cur.ident()?;
    cur.expect('=')?;
    let (rhs, rhs_col) = cur.ident()?;
    cur.expect('(')?;
    let stmt = if rhs == "Cell" {
        if !numbered(&id, 'c') {
            return Err(ScriptError::Syntax {
                line: cur.line,
                col: id_col,
                msg: format!("cell id '{id}' must look like c<number>"),
            });
        }
        cur.keyword("region")?;
        cur.expect('=')?;
        let mut terms = Vec::new();
        loop {
            cur.skip_ws();
            let col = cur.col();
            let sign = match cur.peek().and_then(Sign::from_symbol) {
                Some(s) => s,
                None => return cur.syntax("expected '+' or '-' before surface id"),
            };
            cur.pos += 1;
            let (sid, sid_col) = cur.ident()?;
            if !numbered(&sid, 's') {
                return Err(ScriptError::Syntax {
                    line: cur.line,
                    col: sid_col,
                    msg: format!("'{sid}' is not a surface id"),
                });
            }
            terms.push((sign, sid, col));
            cur.skip_ws();
            if cur.peek() == Some('&') {
                cur.pos += 1;
            } else {
                break;
            }
        }
        cur.expect(')')?;
        Statement::Cell { id, terms }
    } else {
        if !numbered(&id, 's') {
            return Err(ScriptError::Syntax {
                line: cur.line,
                col: id_col,
                msg: format!("surface id '{id}' must look like s<number>"),
            });
        }
        let mut params = Vec::new();
        loop {
            let (name, col) = cur.ident()?;
            cur.expect('=')?;
            let v = cur.number()?;
            params.push((name, v, col));
            cur.skip_ws();
            if cur.peek() == Some(',') {
                cur.pos += 1;
            } else {
                break;
            }
        }
        cur.skip_ws();
        let close_col = cur.col();
        cur.expect(')')?;
        Statement::Surface {
            id,
            kind: (rhs, rhs_col),
            params,
            close_col,
        }
    };
    if !cur.at_end() {
        return cur.syntax("unexpected trailing input");
    }
    Ok(stmt)
}

/// Parses a standalone script.
pub fn parse(text: &str) -> Result<ScriptAst, ScriptError> {
    parse_with_externals(text, &[])
}

/// Parses a script that may reference the `externals` surface ids without
/// defining them, e.g. a completion referring to the reused input surfaces.
pub fn parse_with_externals(text: &str, externals: &[String]) -> Result<ScriptAst, ScriptError> {
    let mut ast = ScriptAst::default();
    let mut declared: HashSet<String> = externals.iter().cloned().collect();
    let mut defined: HashSet<String> = HashSet::new();
    let mut cell_ids: HashSet<String> = HashSet::new();
    let mut seen_statement = false;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let semantic = |col: usize, msg: String| ScriptError::Semantic { line, col, msg };
        let trimmed = raw.trim_end();
        let lead = trimmed.len() - trimmed.trim_start().len();
        let content = trimmed.trim_start();
        if content.is_empty() {
            continue;
        }
        let mut cur = Cursor::new(content, line);
        if content.starts_with('#') {
            if content.starts_with(HEADER) {
                if seen_statement || ast.reuse_header.is_some() {
                    return Err(ScriptError::Syntax {
                        line,
                        col: lead + 1,
                        msg: "reuse header must be the first line".into(),
                    });
                }
                let ids = parse_header(&mut cur).map_err(|e| shift(e, lead))?;
                let mut header = Vec::new();
                for (id, col) in ids {
                    if header.contains(&id) {
                        return Err(semantic(lead + col, format!("{id} listed twice in header")));
                    }
                    declared.insert(id.clone());
                    header.push(id);
                }
                ast.reuse_header = Some(header);
            }
            continue;
        }
        seen_statement = true;
        match parse_statement(&mut cur).map_err(|e| shift(e, lead))? {
            Statement::Surface {
                id,
                kind: (kind_name, kind_col),
                params,
                close_col,
            } => {
                if defined.contains(&id) {
                    return Err(semantic(lead + 1, format!("surface {id} defined twice")));
                }
                if declared.contains(&id) && ast.reuse_header.is_none() {
                    return Err(semantic(
                        lead + 1,
                        format!("surface {id} is reused and must not be redefined"),
                    ));
                }
                let kind = SurfaceKind::from_name(&kind_name).ok_or_else(|| {
                    semantic(lead + kind_col, format!("unknown surface kind {kind_name}"))
                })?;
                let names = kind.param_names();
                let mut values: BTreeMap<&str, f64> = BTreeMap::new();
                for (name, v, col) in &params {
                    let Some(known) = names.iter().find(|n| **n == name.as_str()) else {
                        return Err(semantic(
                            lead + col,
                            format!("{kind_name} has no parameter {name}"),
                        ));
                    };
                    if values.insert(known, *v).is_some() {
                        return Err(semantic(lead + col, format!("parameter {name} given twice")));
                    }
                    if !v.is_finite() {
                        return Err(semantic(lead + col, format!("parameter {name} is not finite")));
                    }
                }
                if let Some(missing) = names.iter().find(|n| !values.contains_key(*n)) {
                    return Err(semantic(
                        lead + close_col,
                        format!("{kind_name} is missing parameter {missing}"),
                    ));
                }
                let ordered: Vec<f64> = names.iter().map(|n| values[n]).collect();
                let geom = SurfaceGeom::from_params(kind, &ordered).expect("count matches kind");
                if let Err(msg) = geom.validate() {
                    let col = params
                        .iter()
                        .find(|(n, _, _)| n == "r")
                        .map_or(1, |(_, _, c)| *c);
                    return Err(semantic(lead + col, msg));
                }
                defined.insert(id.clone());
                ast.surfaces.push(SurfaceDef { id, geom });
            }
            Statement::Cell { id, terms } => {
                if !cell_ids.insert(id.clone()) {
                    return Err(semantic(lead + 1, format!("cell {id} defined twice")));
                }
                let mut region: Vec<SignedSurface> = Vec::new();
                for (sign, sid, col) in terms {
                    if !defined.contains(&sid) && !declared.contains(&sid) {
                        return Err(semantic(lead + col, format!("surface {sid} is not defined")));
                    }
                    let term = SignedSurface::new(sign, sid);
                    if region.contains(&term) {
                        return Err(semantic(lead + col, format!("term {term} repeated")));
                    }
                    region.push(term);
                }
                ast.cells.push(Cell { id, region });
            }
        }
    }
    Ok(ast)
}

fn shift(e: ScriptError, lead: usize) -> ScriptError {
    match e {
        ScriptError::Syntax { line, col, msg } => ScriptError::Syntax {
            line,
            col: col + lead,
            msg,
        },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Axis;

    fn syntax_at(text: &str) -> (usize, usize) {
        match parse(text) {
            Err(ScriptError::Syntax { line, col, .. }) => (line, col),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    fn is_semantic(r: Result<ScriptAst, ScriptError>) -> bool {
        matches!(r, Err(ScriptError::Semantic { .. }))
    }

    #[test]
    fn minimal_script_parses() {
        let ast = parse("s1 = XPlane(x0=0.0)\nc1 = Cell(region = +s1)").unwrap();
        assert_eq!(ast.reuse_header, None);
        assert_eq!(
            ast.surfaces[0].geom,
            SurfaceGeom::Plane {
                axis: Axis::X,
                offset: 0.0
            }
        );
        assert_eq!(ast.cells[0].region, vec![SignedSurface::new(Sign::Plus, "s1")]);
    }

    #[test]
    fn undefined_reference() {
        assert!(is_semantic(parse("c1 = Cell(region = +s9)")));
        assert!(parse("# surfaces to reuse: s9\nc1 = Cell(region = +s9)").is_ok());
        assert!(parse_with_externals("c1 = Cell(region = +s9)", &["s9".into()]).is_ok());
    }

    #[test]
    fn missing_number_is_syntax_error() {
        assert_eq!(syntax_at("s1 = XPlane(x0=)"), (1, 16));
    }

    #[test]
    fn other_syntax_errors() {
        assert_eq!(syntax_at("s1 = XPlane(x0=1.0"), (1, 19));
        assert_eq!(syntax_at("s1 XPlane(x0=1.0)").0, 1);
        assert_eq!(syntax_at("s1 = XPlane(x0=1.0)\nc1 = Cell(region = s1)"), (2, 20));
        assert_eq!(syntax_at("s1 = XPlane(x0=1.0) extra").0, 1);
        assert_eq!(syntax_at("foo = XPlane(x0=1.0)"), (1, 1));
        assert_eq!(syntax_at("s1 = XPlane(x0=1.0e)").0, 1);
        assert_eq!(syntax_at("s1 = XPlane(x0=1.0)\n# surfaces to reuse: s1").0, 2);
    }

    #[test]
    fn semantic_errors() {
        assert!(is_semantic(parse("s1 = Sphere(r=1.0)")));
        assert!(is_semantic(parse("s1 = XPlane(y0=1.0)")));
        assert!(is_semantic(parse("s1 = ZCylinder(x0=0.0, y0=0.0)")));
        assert!(is_semantic(parse("s1 = ZCylinder(x0=0.0, y0=0.0, r=0.0)")));
        assert!(is_semantic(parse("s1 = ZCylinder(x0=0.0, y0=0.0, r=-1.0)")));
        assert!(is_semantic(parse("s1 = XPlane(x0=1.0)\ns1 = XPlane(x0=2.0)")));
        assert!(is_semantic(parse(
            "s1 = XPlane(x0=1.0)\nc1 = Cell(region = +s1)\nc1 = Cell(region = -s1)"
        )));
        assert!(is_semantic(parse("s1 = XPlane(x0=1.0)\nc1 = Cell(region = +s1 & +s1)")));
        // use before definition
        assert!(is_semantic(parse("c1 = Cell(region = +s1)\ns1 = XPlane(x0=1.0)")));
        // completions may not redefine reused surfaces
        assert!(is_semantic(parse_with_externals(
            "s2 = XPlane(x0=1.0)",
            &["s2".into()]
        )));
    }

    #[test]
    fn opposite_signs_are_legal_syntax() {
        assert!(parse("s1 = XPlane(x0=1.0)\nc1 = Cell(region = +s1 & -s1)").is_ok());
    }

    #[test]
    fn tolerant_spacing_and_order() {
        let ast = parse(
            "  # surfaces to reuse:   s1,s2\n\ns1=XPlane( x0 = 1 )\ns2 = ZCylinder(r=2.5e-1, y0=-1, x0=.5)\nc1=Cell(region=+s1&-s2)\n",
        )
        .unwrap();
        assert_eq!(ast.reuse_header, Some(vec!["s1".into(), "s2".into()]));
        assert_eq!(
            ast.surfaces[1].geom,
            SurfaceGeom::Cylinder {
                axis: Axis::Z,
                center: [0.5, -1.0],
                radius: 0.25
            }
        );
    }

    #[test]
    fn empty_header() {
        let ast = parse("# surfaces to reuse:\ns1 = XPlane(x0=0.0)").unwrap();
        assert_eq!(ast.reuse_header, Some(vec![]));
    }

    #[test]
    fn other_comments_are_ignored() {
        let ast = parse("# a note\ns1 = XPlane(x0=0.0)\n# another\nc1 = Cell(region = -s1)").unwrap();
        assert_eq!(ast.cells.len(), 1);
    }
}
