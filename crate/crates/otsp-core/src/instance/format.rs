//! Instance document formats.
//!
//! Two interchangeable encodings are supported:
//!
//! * a structured JSON document `{ "scale": int, "costs": [[int]],
//!   "order": [int] }` (or `"chains": [[int], ...]` for chain instances),
//!   costs row-major, full symmetric matrix;
//! * a TSPLIB-like text format with `DIMENSION`, `EDGE_WEIGHT_SECTION`
//!   (full matrix) and either `ORDER_SECTION` (whitespace-separated
//!   0-based indices) or `CHAIN_SECTION` (one chain per line, each line
//!   terminated by `-1`).
//!
//! Cost entries are integers. Decimal entries are accepted only when the
//! document declares a `scale`; every entry is then multiplied by
//! `10^scale` and must come out integral. Serialized documents always
//! carry already-scaled integers, so parse(serialize(x)) == x.

use super::{ChainInstance, CostMatrix, Instance, OrderConstraint, Tour};
use crate::error::{Error, Result};
use num_bigint::BigInt;
use serde_json::{json, Map, Value};
use std::str::FromStr;

/// Either kind of instance document.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Document {
    Otsp(Instance),
    Chain(ChainInstance),
}

impl Document {
    pub fn n(&self) -> usize {
        match self {
            Document::Otsp(i) => i.n(),
            Document::Chain(c) => c.n(),
        }
    }

    pub fn costs(&self) -> &CostMatrix {
        match self {
            Document::Otsp(i) => &i.costs,
            Document::Chain(c) => &c.costs,
        }
    }
}

/// Parses either format, sniffing JSON by a leading `{`.
pub fn parse_document(text: &str) -> Result<Document> {
    if text.trim_start().starts_with('{') {
        parse_json(text)
    } else {
        parse_text(text)
    }
}

fn bigint_to_number(v: &BigInt) -> Value {
    Value::Number(
        serde_json::Number::from_str(&v.to_string()).expect("integer string is a valid number"),
    )
}

/// Serializes an instance as a JSON document.
pub fn to_json(doc: &Document) -> String {
    let costs = doc.costs();
    let n = costs.n();
    let rows: Vec<Value> = (0..n)
        .map(|u| Value::Array((0..n).map(|v| bigint_to_number(costs.at(u, v))).collect()))
        .collect();
    let mut obj = Map::new();
    obj.insert("scale".into(), json!(costs.scale()));
    obj.insert("costs".into(), Value::Array(rows));
    match doc {
        Document::Otsp(inst) => {
            obj.insert("order".into(), json!(inst.order.vertices()));
        }
        Document::Chain(inst) => {
            obj.insert("chains".into(), json!(inst.chains()));
        }
    }
    serde_json::to_string_pretty(&Value::Object(obj)).expect("serialization cannot fail") + "\n"
}

/// Serializes an instance in the TSPLIB-like text format.
pub fn to_text(doc: &Document) -> String {
    let costs = doc.costs();
    let n = costs.n();
    let mut out = String::new();
    out.push_str(&format!("DIMENSION: {}\n", n));
    out.push_str(&format!("SCALE: {}\n", costs.scale()));
    out.push_str("EDGE_WEIGHT_FORMAT: FULL_MATRIX\n");
    out.push_str("EDGE_WEIGHT_SECTION\n");
    for u in 0..n {
        let row: Vec<String> = (0..n).map(|v| costs.at(u, v).to_string()).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    match doc {
        Document::Otsp(inst) => {
            out.push_str("ORDER_SECTION\n");
            let row: Vec<String> = inst.order.vertices().iter().map(|d| d.to_string()).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        Document::Chain(inst) => {
            out.push_str("CHAIN_SECTION\n");
            for chain in inst.chains() {
                let mut row: Vec<String> = chain.iter().map(|d| d.to_string()).collect();
                row.push("-1".into());
                out.push_str(&row.join(" "));
                out.push('\n');
            }
        }
    }
    out.push_str("EOF\n");
    out
}

/// Parses a decimal or integer literal into `value * 10^scale`, requiring an
/// exact integer result.
fn parse_scaled_integer(token: &str, scale: u32, location: &str) -> Result<BigInt> {
    let token = token.trim();
    if token.is_empty() {
        return Err(Error::parse(location, "empty numeric literal"));
    }
    if token.contains(['e', 'E']) {
        return Err(Error::parse(location, "exponent notation is not supported"));
    }
    let (int_part, frac_part) = match token.split_once('.') {
        None => (token, ""),
        Some((i, f)) => (i, f),
    };
    let frac_digits = frac_part.len() as u32;
    if frac_digits > 0 && scale == 0 {
        return Err(Error::parse(
            location,
            format!("non-integer cost '{}' without a declared scale", token),
        ));
    }
    if frac_digits > scale {
        // Trailing digits beyond the scale must be zero to stay exact.
        let (keep, rest) = frac_part.split_at(scale as usize);
        if rest.bytes().any(|b| b != b'0') {
            return Err(Error::parse(
                location,
                format!("cost '{}' is not integral at scale {}", token, scale),
            ));
        }
        return parse_scaled_integer(&format!("{}.{}", int_part, keep), scale, location);
    }
    let digits = format!("{}{}", int_part, frac_part);
    let base: BigInt = digits
        .parse()
        .map_err(|_| Error::parse(location, format!("invalid numeric literal '{}'", token)))?;
    Ok(base * BigInt::from(10u32).pow(scale - frac_digits))
}

fn parse_json(text: &str) -> Result<Document> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| Error::parse(format!("line {}", e.line()), e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| Error::parse("document", "expected a JSON object"))?;
    for key in obj.keys() {
        if !matches!(key.as_str(), "scale" | "costs" | "order" | "chains") {
            return Err(Error::parse(key.clone(), "unknown field"));
        }
    }
    let scale = match obj.get("scale") {
        None => 0,
        Some(v) => v
            .as_u64()
            .and_then(|s| u32::try_from(s).ok())
            .ok_or_else(|| Error::parse("scale", "expected a small nonnegative integer"))?,
    };
    let costs_val = obj
        .get("costs")
        .ok_or_else(|| Error::parse("costs", "missing field"))?
        .as_array()
        .ok_or_else(|| Error::parse("costs", "expected an array of rows"))?;
    let mut any_fractional = false;
    let mut raw_rows: Vec<Vec<String>> = Vec::with_capacity(costs_val.len());
    for (u, row) in costs_val.iter().enumerate() {
        let row = row
            .as_array()
            .ok_or_else(|| Error::parse(format!("costs[{}]", u), "expected an array"))?;
        let mut out = Vec::with_capacity(row.len());
        for (v, cell) in row.iter().enumerate() {
            let num = cell.as_number().ok_or_else(|| {
                Error::parse(format!("costs[{}][{}]", u, v), "expected a number")
            })?;
            let lit = num.to_string();
            if lit.contains('.') || lit.contains(['e', 'E']) {
                any_fractional = true;
            }
            out.push(lit);
        }
        raw_rows.push(out);
    }
    // If every entry is an integer the matrix is taken as already scaled;
    // with fractional entries present everything is rescaled by 10^scale.
    let apply_scale = if any_fractional { scale } else { 0 };
    let mut rows = Vec::with_capacity(raw_rows.len());
    for (u, raw) in raw_rows.iter().enumerate() {
        let mut out = Vec::with_capacity(raw.len());
        for (v, lit) in raw.iter().enumerate() {
            out.push(parse_scaled_integer(lit, apply_scale, &format!("costs[{}][{}]", u, v))?);
        }
        rows.push(out);
    }
    let costs = CostMatrix::new(rows, scale).map_err(|e| match e {
        Error::Structural(msg) => Error::parse("costs", msg),
        other => other,
    })?;
    let n = costs.n();
    match (obj.get("order"), obj.get("chains")) {
        (Some(_), Some(_)) => Err(Error::parse("order", "both 'order' and 'chains' present")),
        (None, None) => Err(Error::parse("order", "one of 'order' or 'chains' is required")),
        (Some(order), None) => {
            let order = parse_index_array(order, n, "order")?;
            let order = OrderConstraint::new(order, n).map_err(parameter_to_parse("order"))?;
            Ok(Document::Otsp(Instance::new(costs, order)?))
        }
        (None, Some(chains)) => {
            let arr = chains
                .as_array()
                .ok_or_else(|| Error::parse("chains", "expected an array of chains"))?;
            let mut parsed = Vec::with_capacity(arr.len());
            for (j, chain) in arr.iter().enumerate() {
                parsed.push(parse_index_array(chain, n, &format!("chains[{}]", j))?);
            }
            let inst =
                ChainInstance::new(costs, parsed).map_err(parameter_to_parse("chains"))?;
            Ok(Document::Chain(inst))
        }
    }
}

fn parameter_to_parse(location: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::Parameter(msg) => Error::parse(location, msg),
        other => other,
    }
}

fn parse_index_array(value: &Value, n: usize, location: &str) -> Result<Vec<usize>> {
    let arr = value
        .as_array()
        .ok_or_else(|| Error::parse(location, "expected an array of vertex indices"))?;
    let mut out = Vec::with_capacity(arr.len());
    for (i, v) in arr.iter().enumerate() {
        let idx = v
            .as_u64()
            .ok_or_else(|| Error::parse(format!("{}[{}]", location, i), "expected an index"))?;
        let idx = usize::try_from(idx)
            .map_err(|_| Error::parse(format!("{}[{}]", location, i), "index out of range"))?;
        if idx >= n {
            return Err(Error::parse(
                format!("{}[{}]", location, i),
                format!("vertex {} out of range for n={}", idx, n),
            ));
        }
        out.push(idx);
    }
    Ok(out)
}

fn parse_text(text: &str) -> Result<Document> {
    let mut dimension: Option<usize> = None;
    let mut scale: u32 = 0;
    let mut weights: Vec<(String, usize)> = Vec::new(); // token, line number
    let mut order_tokens: Vec<(String, usize)> = Vec::new();
    let mut chain_lines: Vec<(Vec<String>, usize)> = Vec::new();
    #[derive(PartialEq)]
    enum Section {
        Header,
        Weights,
        Order,
        Chains,
    }
    let mut section = Section::Header;
    for (idx, raw_line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw_line.trim();
        if line.is_empty() {
            continue;
        }
        let keyword = line.split([':', ' ']).next().unwrap_or("");
        match keyword {
            "EOF" => break,
            "DIMENSION" | "SCALE" | "EDGE_WEIGHT_FORMAT" | "NAME" | "TYPE" | "COMMENT" => {
                let value = line
                    .split_once(':')
                    .map(|(_, v)| v.trim())
                    .ok_or_else(|| Error::parse(format!("line {}", lineno), "expected KEY: VALUE"))?;
                match keyword {
                    "DIMENSION" => {
                        dimension = Some(value.parse().map_err(|_| {
                            Error::parse(format!("line {}", lineno), "invalid DIMENSION")
                        })?);
                    }
                    "SCALE" => {
                        scale = value.parse().map_err(|_| {
                            Error::parse(format!("line {}", lineno), "invalid SCALE")
                        })?;
                    }
                    "EDGE_WEIGHT_FORMAT" => {
                        if value != "FULL_MATRIX" {
                            return Err(Error::parse(
                                format!("line {}", lineno),
                                format!("unsupported EDGE_WEIGHT_FORMAT '{}'", value),
                            ));
                        }
                    }
                    _ => {}
                }
                section = Section::Header;
            }
            "EDGE_WEIGHT_SECTION" => section = Section::Weights,
            "ORDER_SECTION" => section = Section::Order,
            "CHAIN_SECTION" => section = Section::Chains,
            _ => match section {
                Section::Header => {
                    return Err(Error::parse(
                        format!("line {}", lineno),
                        format!("unexpected content '{}'", line),
                    ));
                }
                Section::Weights => {
                    weights.extend(line.split_whitespace().map(|t| (t.to_string(), lineno)));
                }
                Section::Order => {
                    order_tokens.extend(line.split_whitespace().map(|t| (t.to_string(), lineno)));
                }
                Section::Chains => {
                    chain_lines
                        .push((line.split_whitespace().map(str::to_string).collect(), lineno));
                }
            },
        }
    }
    let n = dimension.ok_or_else(|| Error::parse("document", "missing DIMENSION"))?;
    if weights.len() != n * n {
        return Err(Error::parse(
            "EDGE_WEIGHT_SECTION",
            format!("expected {} entries for a full matrix, got {}", n * n, weights.len()),
        ));
    }
    let mut rows = Vec::with_capacity(n);
    for u in 0..n {
        let mut row = Vec::with_capacity(n);
        for v in 0..n {
            let (tok, lineno) = &weights[u * n + v];
            row.push(parse_scaled_integer(
                tok,
                if tok.contains('.') { scale } else { 0 },
                &format!("line {}", lineno),
            )?);
        }
        rows.push(row);
    }
    let costs = CostMatrix::new(rows, scale).map_err(|e| match e {
        Error::Structural(msg) => Error::parse("EDGE_WEIGHT_SECTION", msg),
        other => other,
    })?;
    match (!order_tokens.is_empty(), !chain_lines.is_empty()) {
        (true, true) => Err(Error::parse(
            "document",
            "both ORDER_SECTION and CHAIN_SECTION present",
        )),
        (false, false) => Err(Error::parse(
            "document",
            "one of ORDER_SECTION or CHAIN_SECTION is required",
        )),
        (true, false) => {
            let mut order = Vec::with_capacity(order_tokens.len());
            for (tok, lineno) in &order_tokens {
                let d: usize = tok.parse().map_err(|_| {
                    Error::parse(format!("line {}", lineno), format!("invalid index '{}'", tok))
                })?;
                order.push(d);
            }
            let order = OrderConstraint::new(order, n).map_err(parameter_to_parse("ORDER_SECTION"))?;
            Ok(Document::Otsp(Instance::new(costs, order)?))
        }
        (false, true) => {
            let mut chains = Vec::with_capacity(chain_lines.len());
            for (tokens, lineno) in &chain_lines {
                let loc = format!("line {}", lineno);
                if tokens.last().map(String::as_str) != Some("-1") {
                    return Err(Error::parse(loc, "chain line must end with -1"));
                }
                let mut chain = Vec::with_capacity(tokens.len() - 1);
                for tok in &tokens[..tokens.len() - 1] {
                    let d: usize = tok
                        .parse()
                        .map_err(|_| Error::parse(&loc, format!("invalid index '{}'", tok)))?;
                    chain.push(d);
                }
                chains.push(chain);
            }
            let inst =
                ChainInstance::new(costs, chains).map_err(parameter_to_parse("CHAIN_SECTION"))?;
            Ok(Document::Chain(inst))
        }
    }
}

/// Serializes a tour as JSON.
pub fn tour_to_json(tour: &Tour) -> String {
    let mut obj = Map::new();
    obj.insert("cycle".into(), json!(tour.cycle()));
    obj.insert("cost".into(), bigint_to_number(tour.cost()));
    serde_json::to_string_pretty(&Value::Object(obj)).expect("serialization cannot fail") + "\n"
}

/// Parses a tour document against a cost matrix, recomputing and checking
/// the stored cost.
pub fn tour_from_json(text: &str, costs: &CostMatrix) -> Result<Tour> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| Error::parse(format!("line {}", e.line()), e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| Error::parse("document", "expected a JSON object"))?;
    let cycle = parse_index_array(
        obj.get("cycle").ok_or_else(|| Error::parse("cycle", "missing field"))?,
        costs.n(),
        "cycle",
    )?;
    let tour = Tour::new(cycle, costs)?;
    if let Some(stored) = obj.get("cost") {
        let stored = stored
            .as_number()
            .map(|v| v.to_string())
            .ok_or_else(|| Error::parse("cost", "expected a number"))?;
        let stored: BigInt = stored
            .parse()
            .map_err(|_| Error::parse("cost", "expected an integer"))?;
        if &stored != tour.cost() {
            return Err(Error::parse(
                "cost",
                format!("stored cost {} does not match recomputed {}", stored, tour.cost()),
            ));
        }
    }
    Ok(tour)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{generate, generate_chains, GenKind};

    #[test]
    fn json_round_trip_otsp() {
        let inst = generate(GenKind::Euclidean, 9, 4, 3).unwrap();
        let doc = Document::Otsp(inst);
        let text = to_json(&doc);
        assert_eq!(parse_document(&text).unwrap(), doc);
    }

    #[test]
    fn text_round_trip_chain() {
        let inst = generate_chains(GenKind::RandomClosure, 8, &[2, 3], 5).unwrap();
        let doc = Document::Chain(inst);
        let text = to_text(&doc);
        assert_eq!(parse_document(&text).unwrap(), doc);
    }

    #[test]
    fn json_round_trip_chain_and_text_round_trip_otsp() {
        let chain = Document::Chain(generate_chains(GenKind::Euclidean, 7, &[1, 2], 9).unwrap());
        assert_eq!(parse_document(&to_json(&chain)).unwrap(), chain);
        let otsp = Document::Otsp(generate(GenKind::RandomClosure, 6, 6, 2).unwrap());
        assert_eq!(parse_document(&to_text(&otsp)).unwrap(), otsp);
    }

    #[test]
    fn duplicate_order_vertex_is_named() {
        let text = r#"{"scale": 0, "costs": [[0,1,1],[1,0,1],[1,1,0]], "order": [0, 2, 2]}"#;
        let err = parse_document(text).unwrap_err();
        assert!(err.to_string().contains("duplicate order vertex 2"), "{}", err);
    }

    #[test]
    fn overlapping_chains_are_rejected() {
        let text = r#"{"costs": [[0,1,1],[1,0,1],[1,1,0]], "chains": [[0,1],[1,2]]}"#;
        let err = parse_document(text).unwrap_err();
        assert!(err.to_string().contains("more than one chain"), "{}", err);
    }

    #[test]
    fn fractional_cost_without_scale_is_rejected() {
        let text = r#"{"costs": [[0,1.5],[1.5,0]], "order": [0,1]}"#;
        let err = parse_document(text).unwrap_err();
        assert!(err.to_string().contains("without a declared scale"), "{}", err);
    }

    #[test]
    fn fractional_costs_scale_exactly() {
        let text = r#"{"scale": 2, "costs": [[0, 1.25], [1.25, 0]], "order": [0, 1]}"#;
        match parse_document(text).unwrap() {
            Document::Otsp(inst) => {
                assert_eq!(inst.costs.at(0, 1), &BigInt::from(125));
                assert_eq!(inst.costs.scale(), 2);
            }
            _ => panic!("expected an ordered instance"),
        }
        let bad = r#"{"scale": 1, "costs": [[0, 1.25], [1.25, 0]], "order": [0, 1]}"#;
        assert!(parse_document(bad).is_err());
    }

    #[test]
    fn text_errors_carry_line_numbers() {
        let text = "DIMENSION: 2\nEDGE_WEIGHT_SECTION\n0 x\nx 0\nORDER_SECTION\n0 1\n";
        let err = parse_document(text).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{}", err);
    }

    #[test]
    fn tour_json_round_trip_checks_cost() {
        let inst = generate(GenKind::Euclidean, 6, 2, 1).unwrap();
        let tour = Tour::new((0..6).collect(), &inst.costs).unwrap();
        let text = tour_to_json(&tour);
        assert_eq!(tour_from_json(&text, &inst.costs).unwrap(), tour);
        let tampered = text.replace(tour.cost().to_string().as_str(), "1");
        assert!(tour_from_json(&tampered, &inst.costs).is_err());
    }
}
