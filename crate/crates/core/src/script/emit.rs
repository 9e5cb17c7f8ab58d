use std::collections::{BTreeSet, HashMap};

use super::{cell_line, header_line, surface_line, ScriptError};
use crate::geom::{Cell, SignedSurface};
use crate::sequence::SplitExample;
use crate::Part;

struct Renumber<'a> {
    part: &'a Part,
    map: HashMap<String, String>,
    lines: Vec<String>,
}

impl<'a> Renumber<'a> {
    fn visit(&mut self, id: &str) -> Result<String, ScriptError> {
        if let Some(new) = self.map.get(id) {
            return Ok(new.clone());
        }
        let surface = self
            .part
            .surface(id)
            .ok_or_else(|| ScriptError::InconsistentExample(format!("unknown surface {id}")))?;
        let new = format!("s{}", self.map.len() + 1);
        self.lines.push(surface_line(&new, &surface.geom));
        self.map.insert(id.to_string(), new.clone());
        Ok(new)
    }

    fn cell(&mut self, cell: &Cell, new_id: String) -> Result<String, ScriptError> {
        let region = cell
            .region
            .iter()
            .map(|t| Ok(SignedSurface::new(t.sign, self.visit(&t.surface)?)))
            .collect::<Result<Vec<_>, ScriptError>>()?;
        Ok(cell_line(&Cell { id: new_id, region }))
    }
}

fn lookup<'p>(part: &'p Part, id: &str) -> Result<&'p Cell, ScriptError> {
    part.cell(id)
        .ok_or_else(|| ScriptError::InconsistentExample(format!("unknown cell {id}")))
}

fn text(lines: impl IntoIterator<Item = String>) -> String {
    lines.into_iter().map(|l| l + "\n").collect()
}

/// Renders a split as `(input_text, output_text)`.
///
/// Surfaces are renumbered `s1..` by first use across the input cells, then
/// across the output cells; cells are numbered `c1..` in sequence order.
pub fn emit(example: &SplitExample, part: &Part) -> Result<(String, String), ScriptError> {
    let inputs = example
        .input_cells
        .iter()
        .map(|id| lookup(part, id))
        .collect::<Result<Vec<_>, _>>()?;
    let outputs = example
        .output_cells
        .iter()
        .map(|id| lookup(part, id))
        .collect::<Result<Vec<_>, _>>()?;

    let used = |cells: &[&Cell]| -> BTreeSet<String> {
        cells
            .iter()
            .flat_map(|c| c.surface_ids().map(str::to_string))
            .collect()
    };
    let in_set = used(&inputs);
    let out_set = used(&outputs);
    let shared: BTreeSet<String> = in_set.intersection(&out_set).cloned().collect();
    let claimed: BTreeSet<String> = example.reused_surfaces.iter().cloned().collect();
    if shared != claimed || claimed.len() != example.reused_surfaces.len() {
        return Err(ScriptError::InconsistentExample(format!(
            "reused surfaces {:?} do not match the shared surfaces {:?}",
            example.reused_surfaces, shared
        )));
    }

    let mut rn = Renumber {
        part,
        map: HashMap::new(),
        lines: Vec::new(),
    };
    let mut input_cells = Vec::new();
    for (i, c) in inputs.iter().enumerate() {
        input_cells.push(rn.cell(c, format!("c{}", i + 1))?);
    }
    let input_surfaces = std::mem::take(&mut rn.lines);

    let mut reused: Vec<(usize, String)> = shared
        .iter()
        .map(|id| {
            let new = &rn.map[id];
            (new[1..].parse::<usize>().expect("numbered id"), new.clone())
        })
        .collect();
    reused.sort();
    let header = header_line(&reused.into_iter().map(|(_, id)| id).collect::<Vec<_>>());

    let mut output_cells = Vec::new();
    for (i, c) in outputs.iter().enumerate() {
        output_cells.push(rn.cell(c, format!("c{}", inputs.len() + i + 1))?);
    }

    let input_text = text(std::iter::once(header).chain(input_surfaces).chain(input_cells));
    let output_text = text(rn.lines.into_iter().chain(output_cells));
    Ok((input_text, output_text))
}
