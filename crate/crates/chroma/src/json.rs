//! JSON interchange formats.
//!
//! Symbols are `[arity, id]` pairs and diagrams are arrays of symbols.
//! Emitters produce one canonical form (diagram-set members in tree order,
//! structure entries by size then lexicographically), so equal values always
//! serialize to equal bytes.

use std::collections::BTreeMap;
use std::fmt;

use chroma_core::amalgamation::{
    AmalgamResult, Method, Refutation, SpecialSystem, SpectraRow, Verdict,
};
use chroma_core::diagrams::{Diagram, DiagramSet, Language, RelSymbol};
use chroma_core::rank::RankTable;
use chroma_core::structures::{Coloring, ColoringStructure, MembershipViolation};
use chroma_core::walpha::ClaimReport;
use chroma_core::Ordinal;
use serde_json::{json, Map, Value};

/// A schema error, with the JSON path where it was found.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormatError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for FormatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "at {}: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for FormatError {}

fn err<T>(path: &str, message: impl Into<String>) -> Result<T, FormatError> {
    Err(FormatError {
        path: path.to_string(),
        message: message.into(),
    })
}

type Res<T> = Result<T, FormatError>;

fn field<'a>(v: &'a Value, key: &str, path: &str) -> Res<&'a Value> {
    match v.as_object() {
        Some(o) => match o.get(key) {
            Some(x) => Ok(x),
            None => err(path, format!("missing field \"{key}\"")),
        },
        None => err(path, "expected an object"),
    }
}

fn sub(path: &str, key: impl fmt::Display) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

fn idx(path: &str, i: usize) -> String {
    format!("{path}[{i}]")
}

pub fn as_u32(v: &Value, path: &str) -> Res<u32> {
    match v.as_u64() {
        Some(n) if n <= u32::MAX as u64 => Ok(n as u32),
        _ => err(path, "expected a non-negative 32-bit integer"),
    }
}

fn as_array<'a>(v: &'a Value, path: &str) -> Res<&'a Vec<Value>> {
    v.as_array()
        .map_or_else(|| err(path, "expected an array"), Ok)
}

pub fn u32_list(v: &Value, path: &str) -> Res<Vec<u32>> {
    as_array(v, path)?
        .iter()
        .enumerate()
        .map(|(i, x)| as_u32(x, &idx(path, i)))
        .collect()
}

pub fn symbol_to_json(s: RelSymbol) -> Value {
    json!([s.arity, s.id])
}

pub fn symbol_from_json(v: &Value, path: &str) -> Res<RelSymbol> {
    match u32_list(v, path)?.as_slice() {
        [a, id] if *a >= 1 => Ok(RelSymbol::new(*a, *id)),
        _ => err(path, "expected a symbol [arity ≥ 1, id]"),
    }
}

pub fn diagram_to_json(d: &Diagram) -> Value {
    Value::Array(d.symbols().iter().map(|s| symbol_to_json(*s)).collect())
}

pub fn diagram_from_json(v: &Value, path: &str) -> Res<Diagram> {
    let d = Diagram::new(
        as_array(v, path)?
            .iter()
            .enumerate()
            .map(|(i, x)| symbol_from_json(x, &idx(path, i)))
            .collect::<Res<_>>()?,
    );
    if !d.is_well_formed() {
        return err(path, "the k-th symbol of a diagram must have arity k");
    }
    Ok(d)
}

pub fn diagram_key(d: &Diagram) -> String {
    d.to_string()
}

pub fn diagram_set_to_json(w: &DiagramSet) -> Value {
    let lang = w.language();
    let mut arities = Map::new();
    for (a, c) in lang.tracked() {
        arities.insert(a.to_string(), json!(c));
    }
    let mut o = Map::new();
    o.insert("arities".into(), Value::Object(arities));
    if lang.repeats() {
        o.insert("repeats".into(), json!(true));
    }
    o.insert(
        "members".into(),
        Value::Array(w.members().map(diagram_to_json).collect()),
    );
    Value::Object(o)
}

pub fn diagram_set_from_json(v: &Value) -> Res<DiagramSet> {
    let ar = field(v, "arities", "")?;
    let Some(ar) = ar.as_object() else {
        return err("arities", "expected an object");
    };
    let mut counts = Vec::new();
    for (k, c) in ar {
        let path = sub("arities", k);
        let Ok(a) = k.parse::<u32>() else {
            return err(&path, "arity keys must be positive integers");
        };
        counts.push((a, as_u32(c, &path)?));
    }
    counts.sort_unstable();
    let repeats = match v.get("repeats") {
        None => false,
        Some(b) => b
            .as_bool()
            .map_or_else(|| err("repeats", "expected a boolean"), Ok)?,
    };
    let lang = Language::new(counts, repeats).map_err(|e| FormatError {
        path: "arities".into(),
        message: e.to_string(),
    })?;
    let members = as_array(field(v, "members", "")?, "members")?
        .iter()
        .enumerate()
        .map(|(i, x)| diagram_from_json(x, &idx("members", i)))
        .collect::<Res<Vec<_>>>()?;
    DiagramSet::new(lang, members).map_err(|e| FormatError {
        path: "members".into(),
        message: e.to_string(),
    })
}

fn subset_key(s: &[u32]) -> String {
    let inner: Vec<String> = s.iter().map(u32::to_string).collect();
    format!("[{}]", inner.join(","))
}

pub fn structure_to_json(m: &ColoringStructure) -> Value {
    let mut colors = Map::new();
    for (s, id) in m.explicit_colors() {
        colors.insert(subset_key(&s), json!([s.len(), id]));
    }
    let mut o = Map::new();
    o.insert("universe".into(), json!(m.universe()));
    o.insert("colors".into(), Value::Object(colors));
    let defaults = m.size_defaults();
    if !defaults.is_empty() {
        let mut d = Map::new();
        for (k, id) in defaults {
            d.insert(k.to_string(), json!([k, id]));
        }
        o.insert("defaults".into(), Value::Object(d));
    }
    Value::Object(o)
}

/// Subsets missing from `colors` keep their size default (id 0 if none).
pub fn structure_from_json(v: &Value, path: &str) -> Res<ColoringStructure> {
    let upath = sub(path, "universe");
    let universe = u32_list(field(v, "universe", path)?, &upath)?;
    let mut m = ColoringStructure::new(universe).map_err(|e| FormatError {
        path: upath,
        message: e.to_string(),
    })?;
    if let Some(d) = v.get("defaults") {
        let dpath = sub(path, "defaults");
        let Some(d) = d.as_object() else {
            return err(&dpath, "expected an object");
        };
        for (k, s) in d {
            let p = sub(&dpath, k);
            let Ok(size) = k.parse::<u32>() else {
                return err(&p, "size keys must be positive integers");
            };
            let sym = symbol_from_json(s, &p)?;
            if sym.arity != size {
                return err(&p, "symbol arity must equal the subset size");
            }
            m.set_size_default(size, sym.id);
        }
    }
    let cpath = sub(path, "colors");
    let Some(colors) = field(v, "colors", path)?.as_object() else {
        return err(&cpath, "expected an object");
    };
    for (k, s) in colors {
        let p = sub(&cpath, k);
        let subset: Value = serde_json::from_str(k).map_err(|_| FormatError {
            path: p.clone(),
            message: "keys must be JSON arrays of elements".into(),
        })?;
        let subset = u32_list(&subset, &p)?;
        let sym = symbol_from_json(s, &p)?;
        if sym.arity as usize != subset.len() {
            return err(&p, "symbol arity must equal the subset size");
        }
        m.set(&subset, sym.id).map_err(|e| FormatError {
            path: p,
            message: e.to_string(),
        })?;
    }
    Ok(m)
}

pub fn system_to_json(s: &SpecialSystem) -> Value {
    json!({
        "x": s.x,
        "a1": s.a1,
        "a2": s.a2,
        "c1": structure_to_json(&s.c1),
        "c2": structure_to_json(&s.c2),
    })
}

pub fn system_from_json(v: &Value, path: &str) -> Res<SpecialSystem> {
    let sys = SpecialSystem {
        x: u32_list(field(v, "x", path)?, &sub(path, "x"))?,
        a1: as_u32(field(v, "a1", path)?, &sub(path, "a1"))?,
        a2: as_u32(field(v, "a2", path)?, &sub(path, "a2"))?,
        c1: structure_from_json(field(v, "c1", path)?, &sub(path, "c1"))?,
        c2: structure_from_json(field(v, "c2", path)?, &sub(path, "c2"))?,
    };
    sys.validate().map_err(|e| FormatError {
        path: path.to_string(),
        message: e.to_string(),
    })?;
    Ok(sys)
}

fn refutation_to_json(r: &Refutation) -> Value {
    json!({
        "branch": r.branch.as_ref().map(|(s, sym)| json!({
            "subset": s,
            "symbol": symbol_to_json(*sym),
        })),
        "subset": r.subset,
        "diagram": diagram_to_json(&r.diagram),
    })
}

fn refutation_from_json(v: &Value, path: &str) -> Res<Refutation> {
    let b = field(v, "branch", path)?;
    let branch = if b.is_null() {
        None
    } else {
        let bp = sub(path, "branch");
        Some((
            u32_list(field(b, "subset", &bp)?, &sub(&bp, "subset"))?,
            symbol_from_json(field(b, "symbol", &bp)?, &sub(&bp, "symbol"))?,
        ))
    };
    Ok(Refutation {
        branch,
        subset: u32_list(field(v, "subset", path)?, &sub(path, "subset"))?,
        diagram: diagram_from_json(field(v, "diagram", path)?, &sub(path, "diagram"))?,
    })
}

pub fn amalgam_to_json(r: &AmalgamResult) -> Value {
    match r {
        AmalgamResult::Witness { coloring, method } => json!({
            "result": "sat",
            "method": method.name(),
            "coloring": structure_to_json(coloring),
        }),
        AmalgamResult::Identified { amalgam, point } => json!({
            "result": "identified",
            "method": Method::Search.name(),
            "point": point,
            "amalgam": structure_to_json(amalgam),
        }),
        AmalgamResult::Unsat { refutations } => json!({
            "result": "unsat",
            "method": Method::Search.name(),
            "refutations": refutations.iter().map(refutation_to_json).collect::<Vec<_>>(),
        }),
        AmalgamResult::BudgetExhausted => json!({
            "result": "budget-exhausted",
            "method": Method::Search.name(),
        }),
    }
}

pub fn amalgam_from_json(v: &Value) -> Res<AmalgamResult> {
    let method_name = field(v, "method", "")?.as_str().unwrap_or_default();
    let Some(method) = Method::from_name(method_name) else {
        return err("method", "unknown method");
    };
    match field(v, "result", "")?.as_str() {
        Some("sat") => Ok(AmalgamResult::Witness {
            coloring: structure_from_json(field(v, "coloring", "")?, "coloring")?,
            method,
        }),
        Some("identified") => Ok(AmalgamResult::Identified {
            amalgam: structure_from_json(field(v, "amalgam", "")?, "amalgam")?,
            point: as_u32(field(v, "point", "")?, "point")?,
        }),
        Some("unsat") => Ok(AmalgamResult::Unsat {
            refutations: as_array(field(v, "refutations", "")?, "refutations")?
                .iter()
                .enumerate()
                .map(|(i, r)| refutation_from_json(r, &idx("refutations", i)))
                .collect::<Res<_>>()?,
        }),
        Some("budget-exhausted") => Ok(AmalgamResult::BudgetExhausted),
        _ => err(
            "result",
            "expected sat, identified, unsat or budget-exhausted",
        ),
    }
}

/// `{"ranks": {"<diagram>": "<CNF>"}}`, members in tree order.
pub fn rank_table_to_json(t: &RankTable) -> Value {
    let mut ranks = Map::new();
    for (d, r) in t.iter() {
        ranks.insert(diagram_key(d), json!(r.to_string()));
    }
    json!({ "ranks": ranks })
}

pub fn rank_table_from_json(v: &Value) -> Res<BTreeMap<Diagram, Ordinal>> {
    let Some(ranks) = field(v, "ranks", "")?.as_object() else {
        return err("ranks", "expected an object");
    };
    let mut out = BTreeMap::new();
    for (k, r) in ranks {
        let p = sub("ranks", k);
        let key: Value = serde_json::from_str(k).map_err(|_| FormatError {
            path: p.clone(),
            message: "keys must be diagrams".into(),
        })?;
        let d = diagram_from_json(&key, &p)?;
        let Some(r) = r.as_str() else {
            return err(&p, "expected a CNF string");
        };
        let r = r.parse::<Ordinal>().map_err(|e| FormatError {
            path: p.clone(),
            message: e.to_string(),
        })?;
        out.insert(d, r);
    }
    Ok(out)
}

pub fn membership_to_json(r: &Result<(), MembershipViolation>) -> Value {
    match r {
        Ok(()) => json!({ "member": true }),
        Err(v) => json!({
            "member": false,
            "subset": v.subset,
            "diagram": diagram_to_json(&v.diagram),
        }),
    }
}

fn verdict_to_json(v: &Verdict) -> Value {
    match v {
        Verdict::Yes => json!("yes"),
        Verdict::Unknown => json!("unknown"),
        Verdict::No(sys) => json!({ "no": system_to_json(sys) }),
    }
}

fn verdict_from_json(v: &Value, path: &str) -> Res<Verdict> {
    match v.as_str() {
        Some("yes") => Ok(Verdict::Yes),
        Some("unknown") => Ok(Verdict::Unknown),
        Some(_) => err(path, "expected yes, unknown or {\"no\": system}"),
        None => Ok(Verdict::No(Box::new(system_from_json(
            field(v, "no", path)?,
            &sub(path, "no"),
        )?))),
    }
}

pub fn spectra_to_json(rows: &[SpectraRow]) -> Value {
    json!({
        "rows": rows.iter().map(|r| json!({
            "lambda": r.lambda,
            "dap": verdict_to_json(&r.dap),
            "ap": verdict_to_json(&r.ap),
        })).collect::<Vec<_>>(),
    })
}

pub fn spectra_from_json(v: &Value) -> Res<Vec<SpectraRow>> {
    as_array(field(v, "rows", "")?, "rows")?
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let p = idx("rows", i);
            Ok(SpectraRow {
                lambda: as_u32(field(r, "lambda", &p)?, &sub(&p, "lambda"))? as usize,
                dap: verdict_from_json(field(r, "dap", &p)?, &sub(&p, "dap"))?,
                ap: verdict_from_json(field(r, "ap", &p)?, &sub(&p, "ap"))?,
            })
        })
        .collect()
}

pub fn claim_report_to_json(r: &ClaimReport) -> Value {
    json!({
        "passed": r.passed(),
        "checked": r.checked,
        "mismatches": r.mismatches.iter().map(|m| json!({
            "node": diagram_to_json(&m.node),
            "expected": m.expected,
            "actual": m.actual,
        })).collect::<Vec<_>>(),
    })
}

/// Materializes a coloring for output.
pub fn coloring_to_json<C: Coloring + ?Sized>(c: &C) -> Result<Value, String> {
    ColoringStructure::from_coloring(c)
        .map(|m| structure_to_json(&m))
        .map_err(|e| e.to_string())
}

/// Canonical text: pretty-printed with a trailing newline.
pub fn render(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("values serialize");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use chroma_core::diagrams::FullTree;
    use chroma_core::structures::monochromatic_model;

    fn t1() -> DiagramSet {
        let lang = Language::new([(1, 2), (2, 2), (3, 1)], false).unwrap();
        let ids: [&[u32]; 6] = [&[], &[0], &[1], &[0, 0], &[0, 1], &[0, 0, 0]];
        DiagramSet::new(lang, ids.iter().map(|i| Diagram::from_ids(i))).unwrap()
    }

    #[test]
    fn diagram_sets_round_trip() {
        let w = t1();
        let v = diagram_set_to_json(&w);
        assert_eq!(diagram_set_from_json(&v).unwrap(), w);
        assert_eq!(v["arities"], json!({"1": 2, "2": 2, "3": 1}));
        assert_eq!(v["members"][1], json!([[1, 0]]));
        let full = FullTree {
            language: Language::uniform(3, 2, true),
        }
        .truncate(3);
        let v = diagram_set_to_json(&full);
        assert_eq!(v["repeats"], json!(true));
        assert_eq!(diagram_set_from_json(&v).unwrap(), full);
    }

    #[test]
    fn schema_errors_name_the_path() {
        let v = json!({"arities": {"1": 1}, "members": [[], [[2, 0]]]});
        let e = diagram_set_from_json(&v).unwrap_err();
        assert_eq!(e.path, "members[1]");
        let v = json!({"arities": {"1": 1}, "members": [[[1, 0]]]});
        assert_eq!(diagram_set_from_json(&v).unwrap_err().path, "members");
        let v = json!({"universe": [0, 1], "colors": {"[0,2]": [2, 0]}});
        assert_eq!(
            structure_from_json(&v, "s").unwrap_err().path,
            "s.colors.[0,2]"
        );
    }

    #[test]
    fn structures_round_trip() {
        let mut m = ColoringStructure::new(vec![0, 1, 2]).unwrap();
        m.set(&[1], 1).unwrap();
        m.set(&[0, 2], 1).unwrap();
        let v = structure_to_json(&m);
        assert_eq!(v["colors"]["[1]"], json!([1, 1]));
        assert_eq!(v["colors"]["[0,1,2]"], json!([3, 0]));
        assert_eq!(structure_from_json(&v, "").unwrap(), m);

        let mut big = monochromatic_model(&Diagram::from_ids(&[1, 0, 1]), 25);
        big.set(&[3, 4], 0).unwrap();
        let v = structure_to_json(&big);
        assert!(v.get("defaults").is_some());
        assert_eq!(structure_from_json(&v, "").unwrap(), big);
    }

    #[test]
    fn results_round_trip() {
        let c1 = monochromatic_model(&Diagram::from_ids(&[0, 0]), 2);
        let sys = SpecialSystem {
            x: vec![0],
            a1: 1,
            a2: 2,
            c1: c1.clone(),
            c2: ColoringStructure::new(vec![0, 2]).unwrap(),
        };
        let v = system_to_json(&sys);
        assert_eq!(system_from_json(&v, "").unwrap(), sys);

        let results = [
            AmalgamResult::Witness {
                coloring: monochromatic_model(&Diagram::from_ids(&[0, 0, 0]), 3),
                method: Method::Case2,
            },
            AmalgamResult::Identified {
                amalgam: c1,
                point: 1,
            },
            AmalgamResult::Unsat {
                refutations: vec![Refutation {
                    branch: Some((vec![1, 2], RelSymbol::new(2, 1))),
                    subset: vec![0, 1, 2],
                    diagram: Diagram::from_ids(&[0, 1, 0]),
                }],
            },
            AmalgamResult::BudgetExhausted,
        ];
        for r in results {
            assert_eq!(amalgam_from_json(&amalgam_to_json(&r)).unwrap(), r);
        }

        let rows = vec![
            SpectraRow {
                lambda: 1,
                dap: Verdict::No(Box::new(sys)),
                ap: Verdict::Yes,
            },
            SpectraRow {
                lambda: 2,
                dap: Verdict::Unknown,
                ap: Verdict::Unknown,
            },
        ];
        assert_eq!(spectra_from_json(&spectra_to_json(&rows)).unwrap(), rows);
    }

    #[test]
    fn rank_tables_round_trip() {
        let w = t1();
        let t = RankTable::compute(&w);
        let v = rank_table_to_json(&t);
        assert_eq!(v["ranks"]["[]"], json!("3"));
        assert_eq!(v["ranks"]["[[1,1]]"], json!("0"));
        let back = rank_table_from_json(&v).unwrap();
        assert_eq!(back.len(), w.len());
        for (d, r) in t.iter() {
            assert_eq!(back.get(d), Some(r));
        }
    }
}
