//! Free-format MPS export and import.
//!
//! The writer emits an `OBJSENSE MAX` section and an objective row holding
//! the single maximized variable; floats are printed with Rust's shortest
//! round-trippable representation, so re-importing reproduces coefficients
//! bit-exactly.

use std::io::{BufRead, Write};

use super::{LpError, LpProblem, Sense};

pub fn write_mps(p: &LpProblem, w: &mut impl Write) -> Result<(), LpError> {
    writeln!(w, "NAME {}", sanitize(&p.name))?;
    writeln!(w, "OBJSENSE")?;
    writeln!(w, "    MAX")?;
    writeln!(w, "ROWS")?;
    writeln!(w, " N  OBJ")?;
    for c in p.constraints() {
        let tag = match c.sense {
            Sense::Le => "L",
            Sense::Ge => "G",
            Sense::Eq => "E",
        };
        writeln!(w, " {}  {}", tag, sanitize(&c.name))?;
    }

    // transpose to column-major entries
    let mut columns: Vec<Vec<(usize, f64)>> = vec![Vec::new(); p.vars().len()];
    for (r, c) in p.constraints().iter().enumerate() {
        for &(v, coef) in &c.terms {
            columns[v].push((r, coef));
        }
    }

    writeln!(w, "COLUMNS")?;
    for (v, var) in p.vars().iter().enumerate() {
        let name = sanitize(&var.name);
        if v == p.objective() {
            writeln!(w, "    {name} OBJ 1")?;
        }
        for &(r, coef) in &columns[v] {
            writeln!(w, "    {name} {} {coef}", sanitize(&p.constraints()[r].name))?;
        }
    }

    writeln!(w, "RHS")?;
    for c in p.constraints() {
        if c.rhs != 0.0 {
            writeln!(w, "    RHS {} {}", sanitize(&c.name), c.rhs)?;
        }
    }

    writeln!(w, "BOUNDS")?;
    for var in p.vars() {
        let name = sanitize(&var.name);
        match (var.lower.is_finite(), var.upper.is_finite()) {
            (false, false) => writeln!(w, " FR BND {name}")?,
            (false, true) => {
                writeln!(w, " MI BND {name}")?;
                writeln!(w, " UP BND {name} {}", var.upper)?;
            }
            (true, false) => {
                if var.lower != 0.0 {
                    writeln!(w, " LO BND {name} {}", var.lower)?;
                }
            }
            (true, true) => {
                if var.lower != 0.0 {
                    writeln!(w, " LO BND {name} {}", var.lower)?;
                }
                writeln!(w, " UP BND {name} {}", var.upper)?;
            }
        }
    }
    writeln!(w, "ENDATA")?;
    Ok(())
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
        .collect()
}

#[derive(PartialEq)]
enum Section {
    None,
    ObjSense,
    Rows,
    Columns,
    Rhs,
    Bounds,
    Done,
}

/// Reads a free-format MPS file produced by [`write_mps`] (or a compatible
/// one whose objective is a single variable with coefficient 1).
pub fn read_mps(r: &mut impl BufRead) -> Result<LpProblem, LpError> {
    use std::collections::HashMap;

    let err = |line: usize, detail: &str| LpError::Mps {
        line,
        detail: detail.to_string(),
    };

    let mut problem = LpProblem::new("imported");
    let mut section = Section::None;
    let mut obj_row: Option<String> = None;
    let mut maximize = false;
    // rows kept in declaration order; terms filled column-major then re-sorted
    let mut row_index: HashMap<String, usize> = HashMap::new();
    let mut rows: Vec<(String, Sense, Vec<(usize, f64)>, f64)> = Vec::new();
    let mut var_index: HashMap<String, usize> = HashMap::new();
    let mut objective_terms: Vec<(usize, f64)> = Vec::new();

    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let trimmed = line.trim_end();
        if trimmed.is_empty() || trimmed.starts_with('*') {
            continue;
        }
        let indented = trimmed.starts_with(' ') || trimmed.starts_with('\t');
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        if !indented {
            match tokens[0] {
                "NAME" => {
                    if let Some(name) = tokens.get(1) {
                        problem.name = name.to_string();
                    }
                    continue;
                }
                "OBJSENSE" => {
                    section = Section::ObjSense;
                    if let Some(&dir) = tokens.get(1) {
                        maximize = dir.eq_ignore_ascii_case("MAX");
                    }
                    continue;
                }
                "ROWS" => {
                    section = Section::Rows;
                    continue;
                }
                "COLUMNS" => {
                    section = Section::Columns;
                    continue;
                }
                "RHS" => {
                    section = Section::Rhs;
                    continue;
                }
                "BOUNDS" => {
                    section = Section::Bounds;
                    continue;
                }
                "RANGES" => return Err(err(lineno, "RANGES section is not supported")),
                "ENDATA" => {
                    section = Section::Done;
                    break;
                }
                other => return Err(err(lineno, &format!("unknown section {other:?}"))),
            }
        }
        match section {
            Section::ObjSense => {
                maximize = tokens[0].eq_ignore_ascii_case("MAX");
            }
            Section::Rows => {
                let [tag, name] = tokens[..] else {
                    return Err(err(lineno, "expected '<sense> <row>'"));
                };
                match tag {
                    "N" => {
                        if obj_row.is_none() {
                            obj_row = Some(name.to_string());
                        }
                    }
                    "L" | "G" | "E" => {
                        let sense = match tag {
                            "L" => Sense::Le,
                            "G" => Sense::Ge,
                            _ => Sense::Eq,
                        };
                        row_index.insert(name.to_string(), rows.len());
                        rows.push((name.to_string(), sense, Vec::new(), 0.0));
                    }
                    _ => return Err(err(lineno, "unknown row sense")),
                }
            }
            Section::Columns => {
                if tokens.len() < 3 || tokens.len() % 2 == 0 {
                    return Err(err(lineno, "expected '<var> (<row> <coef>)+'"));
                }
                let next = var_index.len();
                let vid = *var_index.entry(tokens[0].to_string()).or_insert_with(|| {
                    problem.add_var(tokens[0], 0.0, f64::INFINITY);
                    next
                });
                for pair in tokens[1..].chunks(2) {
                    let coef: f64 = pair[1]
                        .parse()
                        .map_err(|_| err(lineno, "bad coefficient"))?;
                    if Some(pair[0]) == obj_row.as_deref() {
                        objective_terms.push((vid, coef));
                    } else {
                        let &row = row_index
                            .get(pair[0])
                            .ok_or_else(|| err(lineno, "unknown row"))?;
                        rows[row].2.push((vid, coef));
                    }
                }
            }
            Section::Rhs => {
                if tokens.len() < 3 || tokens.len() % 2 == 0 {
                    return Err(err(lineno, "expected '<set> (<row> <value>)+'"));
                }
                for pair in tokens[1..].chunks(2) {
                    let value: f64 = pair[1].parse().map_err(|_| err(lineno, "bad rhs"))?;
                    if Some(pair[0]) == obj_row.as_deref() {
                        continue; // objective offsets are not used
                    }
                    let &row = row_index
                        .get(pair[0])
                        .ok_or_else(|| err(lineno, "unknown row"))?;
                    rows[row].3 = value;
                }
            }
            Section::Bounds => {
                let kind = tokens[0];
                let name = tokens.get(2).ok_or_else(|| err(lineno, "missing var"))?;
                let next = var_index.len();
                let vid = *var_index.entry(name.to_string()).or_insert_with(|| {
                    problem.add_var(*name, 0.0, f64::INFINITY);
                    next
                });
                let value = tokens.get(3).map(|t| t.parse::<f64>());
                let value = match value {
                    Some(Ok(v)) => Some(v),
                    Some(Err(_)) => return Err(err(lineno, "bad bound value")),
                    None => None,
                };
                // direct access: vars were added through problem only
                let var = &mut problem.vars_mut()[vid];
                match kind {
                    "UP" => var.upper = value.ok_or_else(|| err(lineno, "UP needs a value"))?,
                    "LO" => var.lower = value.ok_or_else(|| err(lineno, "LO needs a value"))?,
                    "FX" => {
                        let v = value.ok_or_else(|| err(lineno, "FX needs a value"))?;
                        var.lower = v;
                        var.upper = v;
                    }
                    "FR" => {
                        var.lower = f64::NEG_INFINITY;
                        var.upper = f64::INFINITY;
                    }
                    "MI" => var.lower = f64::NEG_INFINITY,
                    "PL" => var.upper = f64::INFINITY,
                    other => return Err(err(lineno, &format!("bound kind {other:?} unsupported"))),
                }
            }
            _ => return Err(err(lineno, "data outside any section")),
        }
    }
    if section != Section::Done {
        return Err(err(0, "missing ENDATA"));
    }
    if !maximize {
        return Err(err(0, "only OBJSENSE MAX programs are supported"));
    }
    match objective_terms[..] {
        [(vid, coef)] if coef == 1.0 => problem.set_objective(vid),
        _ => {
            return Err(err(
                0,
                "objective must be a single designated variable with coefficient 1",
            ))
        }
    }
    for (name, sense, mut terms, rhs) in rows {
        terms.sort_unstable_by_key(|&(v, _)| v);
        problem.add_constraint(name, terms, sense, rhs)?;
    }
    Ok(problem)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridDims;
    use crate::lp::{
        build_lower_lp, solve, BuildOptions, ClarabelBackend, MicrolpBackend, SolveStatus,
    };
    use approx::assert_abs_diff_eq;
    use std::io::BufReader;

    fn roundtrip(p: &LpProblem) -> LpProblem {
        let mut buf = Vec::new();
        write_mps(p, &mut buf).unwrap();
        read_mps(&mut BufReader::new(buf.as_slice())).unwrap()
    }

    #[test]
    fn lower_11_roundtrips_and_solves_externally() {
        let model = build_lower_lp(GridDims::new(1, 1).unwrap(), &BuildOptions::default()).unwrap();
        let imported = roundtrip(&model.problem);

        assert_eq!(imported.vars().len(), model.problem.vars().len());
        assert_eq!(imported.constraints().len(), model.problem.constraints().len());
        for (a, b) in model
            .problem
            .constraints()
            .iter()
            .zip(imported.constraints())
        {
            assert_eq!(a.terms, b.terms, "row {}", a.name);
            assert_eq!(a.rhs, b.rhs);
            assert_eq!(a.sense, b.sense);
        }

        // the re-imported model solved by the other backend reproduces the value
        let sol = solve(&imported, &MicrolpBackend).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_abs_diff_eq!(sol.objective, 0.5, epsilon = 1e-6);
    }

    #[test]
    fn coefficients_identical_after_reimport_on_mid_sized_model() {
        let model = build_lower_lp(GridDims::new(2, 3).unwrap(), &BuildOptions::default()).unwrap();
        let imported = roundtrip(&model.problem);
        for (a, b) in model
            .problem
            .constraints()
            .iter()
            .zip(imported.constraints())
        {
            assert_eq!(a.terms, b.terms);
            assert_eq!(a.rhs, b.rhs);
        }
        let x = solve(&imported, &ClarabelBackend::default()).unwrap();
        let y = solve(&model.problem, &ClarabelBackend::default()).unwrap();
        assert_abs_diff_eq!(x.objective, y.objective, epsilon = 1e-7);
    }

    #[test]
    fn rejects_minimization_and_ranges() {
        let text = "NAME t\nOBJSENSE\n    MIN\nROWS\n N  OBJ\nCOLUMNS\n    x OBJ 1\nENDATA\n";
        assert!(read_mps(&mut BufReader::new(text.as_bytes())).is_err());
        let text = "NAME t\nRANGES\nENDATA\n";
        assert!(read_mps(&mut BufReader::new(text.as_bytes())).is_err());
    }
}
