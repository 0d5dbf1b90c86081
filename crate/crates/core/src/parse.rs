//! Parsers for architecture encodings and the JSON space/architecture
//! documents.
//!
//! Three encodings are supported:
//!
//! * **TSS cell strings** — `|op~0|+|op~0|op~1|+|op~0|op~1|op~2|` with ops
//!   from the NATS-Bench topology inventory. Trimmed, otherwise strict.
//! * **DARTS genotypes** — either JSON (`{"normal": [["sep_conv_3x3", 0],
//!   ...], "reduce": [...]}`, flat or nested per node) or the Python-repr
//!   text form `Genotype(normal=[('sep_conv_3x3', 0), ...], ...)`.
//! * **Generic JSON** — a self-contained document carrying the space and the
//!   per-block operation counts; see the schema below.
//!
//! # Generic JSON schema (version 1)
//!
//! ```json
//! {
//!   "schema": 1,
//!   "space": {
//!     "id": "my-space",
//!     "format": "generic_json",
//!     "slots_per_cell": 6,
//!     "opt": [
//!       {"op": "none"},
//!       {"op": "skip"},
//!       {"op": "conv", "k_w": 3, "k_h": 3, "k_c": 1, "dilation": 1, "stride": [1, 1, 0]},
//!       {"op": "pool", "kind": "avg", "o_w": 3, "o_h": 3, "stride": [1, 1, 0]},
//!       {"op": "other", "label": "bn"}
//!     ],
//!     "skeleton": [
//!       {"repeat": 5, "c_out": 16, "f_in": 1024, "f_out": 1024, "cell": "normal"}
//!     ]
//!   },
//!   "arch": {
//!     "blocks": [
//!       {"counts": [{"op": 2, "n": 2}, {"op": 0, "n": 4}]}
//!     ]
//!   }
//! }
//! ```
//!
//! `counts[].op` is an index into `space.opt`; zero counts are omitted. The
//! number of blocks must equal the skeleton's total repeat count. A space
//! file on its own is the same `space` object at the top level (plus the
//! `schema` field). Defaults: `dilation` 1, `stride` `[1, 1, 0]`, `k_c` 1,
//! `cell` `"normal"`, `format` `"generic_json"`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::arch::{
    Architecture, Block, CellKind, KernelSpec, OpKind, PoolKind, PoolSpec, SearchSpaceDescriptor,
    SkeletonStage, SpaceError, StrideSpec,
};
use crate::sed::InvalidArchitecture;
use crate::spaces;

/// Version written to and accepted from JSON documents.
pub const SCHEMA_VERSION: u64 = 1;

pub use crate::arch::EncodingFormat;

/// Parse failures. Syntax errors carry a byte offset into the encoding;
/// schema errors carry a JSON path.
#[derive(Debug, thiserror::Error)]
pub enum ParseError {
    #[error("byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("byte {offset}: unknown operation {token}")]
    UnknownOp { offset: usize, token: String },
    #[error("node {node}: expected {expected} inputs, found {found}")]
    Arity {
        node: usize,
        expected: usize,
        found: usize,
    },
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Invalid(#[from] InvalidArchitecture),
}

fn syntax(offset: usize, message: impl Into<String>) -> ParseError {
    ParseError::Syntax {
        offset,
        message: message.into(),
    }
}

fn schema_err(path: impl Into<String>, message: impl Into<String>) -> ParseError {
    ParseError::Schema {
        path: path.into(),
        message: message.into(),
    }
}

// ---------------------------------------------------------------------------
// TSS cell strings
// ---------------------------------------------------------------------------

/// Parses a NATS-Bench-TSS cell string and expands it over the space's
/// skeleton. The six edge operations are tallied into identical per-cell
/// blocks, one per skeleton repeat.
pub fn parse_tss(
    encoding: &str,
    space: &SearchSpaceDescriptor,
) -> Result<Architecture, ParseError> {
    let counts = tally_tss(encoding)?;
    let arch = expand_uniform(&counts, space, encoding.trim());
    ensure_valid(arch, space)
}

/// Tallies the six edge tokens of a TSS cell string without expanding it.
pub fn tally_tss(encoding: &str) -> Result<BTreeMap<OpKind, u32>, ParseError> {
    let trimmed = encoding.trim();
    let base = encoding.len() - encoding.trim_start().len();
    if trimmed.is_empty() {
        return Err(syntax(0, "empty encoding"));
    }

    let mut counts: BTreeMap<OpKind, u32> = BTreeMap::new();
    let mut edges = 0usize;
    // Node groups are separated by '+'; group g carries g+1 edges.
    let mut cursor = 0usize; // byte offset within trimmed
    for (group_idx, group) in trimmed.split('+').enumerate() {
        if group_idx > 2 {
            return Err(syntax(base + cursor, "more than 3 node groups"));
        }
        let g = group;
        let goff = base + cursor;
        cursor += group.len() + 1; // '+' separator
        if !g.starts_with('|') || !g.ends_with('|') || g.len() < 2 {
            return Err(syntax(goff, "node group must be delimited by '|'"));
        }
        let inner = &g[1..g.len() - 1];
        let mut eoff = goff + 1;
        let mut edge_in_group = 0usize;
        for token in inner.split('|') {
            let toff = eoff;
            eoff += token.len() + 1;
            let (op_name, idx_text) = token
                .split_once('~')
                .ok_or_else(|| syntax(toff, format!("edge {token:?} missing '~index'")))?;
            let idx: usize = idx_text.parse().map_err(|_| {
                syntax(
                    toff + op_name.len() + 1,
                    format!("bad edge index {idx_text:?}"),
                )
            })?;
            if idx != edge_in_group {
                return Err(syntax(
                    toff + op_name.len() + 1,
                    format!("edge index {idx} out of order, expected {edge_in_group}"),
                ));
            }
            let op = spaces::tss_op(op_name).ok_or_else(|| ParseError::UnknownOp {
                offset: toff,
                token: op_name.to_string(),
            })?;
            *counts.entry(op).or_insert(0) += 1;
            edge_in_group += 1;
            edges += 1;
        }
        if edge_in_group != group_idx + 1 {
            return Err(syntax(
                goff,
                format!(
                    "node group {group_idx} has {edge_in_group} edges, expected {}",
                    group_idx + 1
                ),
            ));
        }
    }
    if edges != 6 {
        return Err(syntax(base, format!("cell has {edges} edges, expected 6")));
    }
    Ok(counts)
}

/// Formats a TSS cell string from six edge tokens in canonical order.
pub fn format_tss(ops: &[&str; 6]) -> String {
    format!(
        "|{}~0|+|{}~0|{}~1|+|{}~0|{}~1|{}~2|",
        ops[0], ops[1], ops[2], ops[3], ops[4], ops[5]
    )
}

/// Expands one cell's op counts over every skeleton stage of the space.
fn expand_uniform(
    counts: &BTreeMap<OpKind, u32>,
    space: &SearchSpaceDescriptor,
    encoding: &str,
) -> Architecture {
    let mut blocks = Vec::with_capacity(space.total_blocks() as usize);
    for stage in &space.skeleton {
        for _ in 0..stage.repeat {
            blocks.push(Block::new(
                counts.clone(),
                stage.c_out,
                stage.c_out,
                stage.f_in,
                stage.f_out,
            ));
        }
    }
    Architecture::new(blocks, space.id.clone(), encoding)
}

fn ensure_valid(
    arch: Architecture,
    space: &SearchSpaceDescriptor,
) -> Result<Architecture, ParseError> {
    let violations = crate::arch::validate(&arch, space);
    if violations.is_empty() {
        Ok(arch)
    } else {
        Err(InvalidArchitecture { violations }.into())
    }
}

// ---------------------------------------------------------------------------
// DARTS genotypes
// ---------------------------------------------------------------------------

/// One searched cell as a list of (op token, input node) pairs.
type GenotypeCell = Vec<(String, usize)>;

/// Parses a DARTS genotype (JSON or Python-repr text) and expands it over
/// the space's skeleton: normal stages tile the normal cell, reduce stages
/// the reduce cell. Dilated convolutions are folded onto their effective
/// receptive field.
pub fn parse_darts(
    genotype: &str,
    space: &SearchSpaceDescriptor,
) -> Result<Architecture, ParseError> {
    let (normal, reduce) = read_genotype(genotype)?;
    let expected_pairs = space.slots_per_cell as usize;
    let normal_counts = tally_darts_cell(&normal, expected_pairs, false)?;
    let reduce_counts = tally_darts_cell(&reduce, expected_pairs, true)?;

    let mut blocks = Vec::with_capacity(space.total_blocks() as usize);
    for stage in &space.skeleton {
        let counts = match stage.cell {
            CellKind::Normal => &normal_counts,
            CellKind::Reduce => &reduce_counts,
        };
        let c_in = match stage.cell {
            CellKind::Normal => stage.c_out,
            CellKind::Reduce => stage.c_out / 2,
        };
        for _ in 0..stage.repeat {
            blocks.push(Block::new(
                counts.clone(),
                c_in.max(1),
                stage.c_out,
                stage.f_in,
                stage.f_out,
            ));
        }
    }
    let arch = Architecture::new(blocks, space.id.clone(), genotype.trim());
    ensure_valid(arch, space)
}

fn tally_darts_cell(
    cell: &GenotypeCell,
    expected_pairs: usize,
    reduce: bool,
) -> Result<BTreeMap<OpKind, u32>, ParseError> {
    if cell.len() != expected_pairs || !cell.len().is_multiple_of(2) {
        return Err(ParseError::Arity {
            node: cell.len() / 2,
            expected: expected_pairs,
            found: cell.len(),
        });
    }
    let mut counts: BTreeMap<OpKind, u32> = BTreeMap::new();
    for (i, (token, input)) in cell.iter().enumerate() {
        let node = i / 2;
        // Node k may read from the two cell inputs and nodes 0..k.
        if *input >= node + 2 {
            return Err(ParseError::Arity {
                node,
                expected: node + 2,
                found: *input,
            });
        }
        let op = spaces::darts_op(token, reduce).ok_or_else(|| ParseError::UnknownOp {
            offset: 0,
            token: token.clone(),
        })?;
        *counts.entry(op).or_insert(0) += 1;
    }
    Ok(counts)
}

fn read_genotype(text: &str) -> Result<(GenotypeCell, GenotypeCell), ParseError> {
    let trimmed = text.trim();
    if trimmed.starts_with('{') {
        read_genotype_json(trimmed)
    } else {
        read_genotype_repr(trimmed)
    }
}

fn read_genotype_json(text: &str) -> Result<(GenotypeCell, GenotypeCell), ParseError> {
    let value: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| syntax(byte_offset_of_json_error(&e, text), e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| schema_err("$", "genotype must be a JSON object"))?;
    let normal = read_cell_value(
        obj.get("normal")
            .ok_or_else(|| schema_err("$.normal", "missing field"))?,
        "$.normal",
    )?;
    let reduce = read_cell_value(
        obj.get("reduce")
            .ok_or_else(|| schema_err("$.reduce", "missing field"))?,
        "$.reduce",
    )?;
    Ok((normal, reduce))
}

/// Accepts a cell either as a flat pair list or nested (one pair list per
/// node). A node with anything other than two inputs in the nested form is
/// an arity error.
fn read_cell_value(value: &serde_json::Value, path: &str) -> Result<GenotypeCell, ParseError> {
    let items = value
        .as_array()
        .ok_or_else(|| schema_err(path, "expected an array"))?;
    let nested = items.first().is_some_and(|v| {
        v.as_array()
            .is_some_and(|inner| inner.first().is_some_and(|x| x.is_array()))
    });
    let mut out = Vec::new();
    if nested {
        for (node, group) in items.iter().enumerate() {
            let pairs = group.as_array().ok_or_else(|| {
                schema_err(format!("{path}[{node}]"), "expected an array of pairs")
            })?;
            if pairs.len() != 2 {
                return Err(ParseError::Arity {
                    node,
                    expected: 2,
                    found: pairs.len(),
                });
            }
            for pair in pairs {
                out.push(read_pair(pair, path)?);
            }
        }
    } else {
        for pair in items {
            out.push(read_pair(pair, path)?);
        }
    }
    Ok(out)
}

fn read_pair(value: &serde_json::Value, path: &str) -> Result<(String, usize), ParseError> {
    let pair = value
        .as_array()
        .ok_or_else(|| schema_err(path, "expected [op, input] pairs"))?;
    if pair.len() != 2 {
        return Err(schema_err(
            path,
            format!("pair has {} elements, expected 2", pair.len()),
        ));
    }
    let op = pair[0]
        .as_str()
        .ok_or_else(|| schema_err(path, "op must be a string"))?;
    let input = pair[1]
        .as_u64()
        .ok_or_else(|| schema_err(path, "input node must be a non-negative integer"))?;
    Ok((op.to_string(), input as usize))
}

/// Parses the Python-repr form: `Genotype(normal=[('op', 0), ...],
/// normal_concat=..., reduce=[...], reduce_concat=...)`. Concat lists are
/// ignored; only the edge lists matter for counting.
fn read_genotype_repr(text: &str) -> Result<(GenotypeCell, GenotypeCell), ParseError> {
    let normal = read_repr_list(text, "normal")?;
    let reduce = read_repr_list(text, "reduce")?;
    Ok((normal, reduce))
}

fn read_repr_list(text: &str, field: &str) -> Result<GenotypeCell, ParseError> {
    // Find `field=[` not preceded by an identifier character, so "normal"
    // does not match inside "normal_concat".
    let mut search = 0usize;
    let start = loop {
        let rel = text[search..]
            .find(field)
            .ok_or_else(|| syntax(0, format!("genotype missing {field}= list")))?;
        let at = search + rel;
        let prev_ok = at == 0
            || !text[..at]
                .chars()
                .next_back()
                .is_some_and(|c| c.is_alphanumeric() || c == '_');
        let rest = &text[at + field.len()..];
        if prev_ok && rest.trim_start().starts_with('=') {
            let eq = at + field.len() + (rest.len() - rest.trim_start().len());
            let after_eq = &text[eq + 1..];
            let lb = after_eq.len() - after_eq.trim_start().len();
            if !after_eq.trim_start().starts_with('[') {
                return Err(syntax(
                    eq + 1,
                    format!("{field}= must be followed by a list"),
                ));
            }
            break eq + 1 + lb;
        }
        search = at + field.len();
    };
    let close = matching_bracket(text, start)
        .ok_or_else(|| syntax(start, format!("unterminated {field} list")))?;
    let body = &text[start + 1..close];

    let mut out = Vec::new();
    let mut rest = body;
    let mut offset = start + 1;
    while let Some(open) = rest.find('(') {
        let chunk = &rest[open..];
        let end = chunk
            .find(')')
            .ok_or_else(|| syntax(offset + open, "unterminated tuple"))?;
        let tuple = &chunk[1..end];
        let (op_part, idx_part) = tuple
            .split_once(',')
            .ok_or_else(|| syntax(offset + open, "tuple must be (op, input)"))?;
        let op = op_part
            .trim()
            .trim_matches(|c| c == '\'' || c == '"')
            .to_string();
        let idx: usize = idx_part.trim().parse().map_err(|_| {
            syntax(
                offset + open,
                format!("bad input index {:?}", idx_part.trim()),
            )
        })?;
        out.push((op, idx));
        offset += open + end + 1;
        rest = &chunk[end + 1..];
    }
    if out.is_empty() {
        return Err(syntax(
            start,
            format!("{field} list has no (op, input) tuples"),
        ));
    }
    Ok(out)
}

fn matching_bracket(text: &str, open: usize) -> Option<usize> {
    let bytes = text.as_bytes();
    let mut depth = 0usize;
    for (i, &b) in bytes.iter().enumerate().skip(open) {
        match b {
            b'[' => depth += 1,
            b']' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => {}
        }
    }
    None
}

fn byte_offset_of_json_error(e: &serde_json::Error, text: &str) -> usize {
    let (line, col) = (e.line(), e.column());
    let mut offset = 0usize;
    for (i, l) in text.split('\n').enumerate() {
        if i + 1 == line {
            return offset + col.saturating_sub(1);
        }
        offset += l.len() + 1;
    }
    0
}

// ---------------------------------------------------------------------------
// Generic JSON documents
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct OpJson {
    op: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    k_w: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    k_h: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    k_c: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dilation: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    kind: Option<PoolKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    o_w: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    o_h: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stride: Option<[u32; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct StageJson {
    repeat: u32,
    c_out: u32,
    f_in: u64,
    f_out: u64,
    #[serde(default)]
    cell: CellKind,
}

#[derive(Debug, Serialize, Deserialize)]
struct SpaceJson {
    #[serde(default)]
    schema: Option<u64>,
    id: Option<String>,
    #[serde(default)]
    format: Option<EncodingFormat>,
    slots_per_cell: Option<u32>,
    opt: Option<Vec<OpJson>>,
    skeleton: Option<Vec<StageJson>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CountJson {
    /// Index into the space's `opt` inventory.
    op: usize,
    n: u32,
}

#[derive(Debug, Serialize, Deserialize)]
struct BlockJson {
    counts: Vec<CountJson>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ArchJson {
    blocks: Vec<BlockJson>,
}

#[derive(Debug, Serialize, Deserialize)]
struct GenericDoc {
    #[serde(default)]
    schema: Option<u64>,
    space: Option<SpaceJson>,
    arch: Option<ArchJson>,
}

fn op_from_json(o: &OpJson, path: &str) -> Result<OpKind, ParseError> {
    let stride = o
        .stride
        .map(|[a, b, c]| StrideSpec::new(a, b, c))
        .unwrap_or_else(StrideSpec::unit);
    match o.op.as_str() {
        "none" => Ok(OpKind::None),
        "skip" => Ok(OpKind::Skip),
        "conv" => {
            let k_w = o
                .k_w
                .ok_or_else(|| schema_err(format!("{path}.k_w"), "missing field"))?;
            let k_h = o
                .k_h
                .ok_or_else(|| schema_err(format!("{path}.k_h"), "missing field"))?;
            let k =
                KernelSpec::with_dilation(k_w, k_h, o.k_c.unwrap_or(1), o.dilation.unwrap_or(1));
            Ok(OpKind::Conv(k, stride))
        }
        "pool" => {
            let o_w = o
                .o_w
                .ok_or_else(|| schema_err(format!("{path}.o_w"), "missing field"))?;
            let o_h = o
                .o_h
                .ok_or_else(|| schema_err(format!("{path}.o_h"), "missing field"))?;
            let kind = o
                .kind
                .ok_or_else(|| schema_err(format!("{path}.kind"), "missing field"))?;
            Ok(OpKind::Pool(PoolSpec::new(o_w, o_h, kind), stride))
        }
        "other" => {
            let label = o
                .label
                .clone()
                .ok_or_else(|| schema_err(format!("{path}.label"), "missing field"))?;
            Ok(OpKind::Other(label))
        }
        unknown => Err(schema_err(
            format!("{path}.op"),
            format!("unknown op tag {unknown:?}"),
        )),
    }
}

fn op_to_json(op: &OpKind) -> OpJson {
    let mut o = OpJson {
        op: String::new(),
        k_w: None,
        k_h: None,
        k_c: None,
        dilation: None,
        kind: None,
        o_w: None,
        o_h: None,
        stride: None,
        label: None,
    };
    match op {
        OpKind::None => o.op = "none".into(),
        OpKind::Skip => o.op = "skip".into(),
        OpKind::Conv(k, s) => {
            o.op = "conv".into();
            o.k_w = Some(k.k_w);
            o.k_h = Some(k.k_h);
            o.k_c = Some(k.k_c);
            o.dilation = Some(k.dilation);
            o.stride = Some([s.s_1, s.s_2, s.s_3]);
        }
        OpKind::Pool(p, s) => {
            o.op = "pool".into();
            o.kind = Some(p.kind);
            o.o_w = Some(p.o_w);
            o.o_h = Some(p.o_h);
            o.stride = Some([s.s_1, s.s_2, s.s_3]);
        }
        OpKind::Other(label) => {
            o.op = "other".into();
            o.label = Some(label.clone());
        }
    }
    o
}

fn space_from_json(s: &SpaceJson, path: &str) -> Result<SearchSpaceDescriptor, ParseError> {
    if let Some(v) = s.schema {
        if v != SCHEMA_VERSION {
            return Err(schema_err(
                format!("{path}.schema"),
                format!("unsupported version {v}"),
            ));
        }
    }
    let id =
        s.id.clone()
            .ok_or_else(|| schema_err(format!("{path}.id"), "missing field"))?;
    let slots = s
        .slots_per_cell
        .ok_or_else(|| schema_err(format!("{path}.slots_per_cell"), "missing field"))?;
    let opt_json = s
        .opt
        .as_ref()
        .ok_or_else(|| schema_err(format!("{path}.opt"), "missing field"))?;
    let skeleton_json = s
        .skeleton
        .as_ref()
        .ok_or_else(|| schema_err(format!("{path}.skeleton"), "missing field"))?;

    let mut opt = Vec::with_capacity(opt_json.len());
    for (i, o) in opt_json.iter().enumerate() {
        opt.push(op_from_json(o, &format!("{path}.opt[{i}]"))?);
    }
    let skeleton: Vec<SkeletonStage> = skeleton_json
        .iter()
        .map(|st| SkeletonStage {
            repeat: st.repeat,
            c_out: st.c_out,
            f_in: st.f_in,
            f_out: st.f_out,
            cell: st.cell,
        })
        .collect();
    let family = s.format.unwrap_or(EncodingFormat::GenericJson);
    Ok(SearchSpaceDescriptor::new(
        id, family, opt, slots, skeleton,
    )?)
}

fn space_to_json(space: &SearchSpaceDescriptor) -> SpaceJson {
    SpaceJson {
        schema: Some(SCHEMA_VERSION),
        id: Some(space.id.clone()),
        format: Some(space.family),
        slots_per_cell: Some(space.slots_per_cell),
        opt: Some(space.opt.iter().map(op_to_json).collect()),
        skeleton: Some(
            space
                .skeleton
                .iter()
                .map(|st| StageJson {
                    repeat: st.repeat,
                    c_out: st.c_out,
                    f_in: st.f_in,
                    f_out: st.f_out,
                    cell: st.cell,
                })
                .collect(),
        ),
    }
}

/// Loads a standalone space descriptor from its JSON document.
pub fn parse_space(doc: &str) -> Result<SearchSpaceDescriptor, ParseError> {
    let s: SpaceJson = serde_json::from_str(doc).map_err(|e| schema_err("$", e.to_string()))?;
    space_from_json(&s, "$")
}

/// Serializes a space descriptor to its JSON document.
pub fn serialize_space(space: &SearchSpaceDescriptor) -> String {
    serde_json::to_string_pretty(&space_to_json(space)).expect("space serialization cannot fail")
}

/// Parses a generic document carrying both the space and an architecture.
/// The returned architecture is fully validated.
pub fn parse_generic(doc: &str) -> Result<(SearchSpaceDescriptor, Architecture), ParseError> {
    let parsed: GenericDoc =
        serde_json::from_str(doc).map_err(|e| schema_err("$", e.to_string()))?;
    if let Some(v) = parsed.schema {
        if v != SCHEMA_VERSION {
            return Err(schema_err("$.schema", format!("unsupported version {v}")));
        }
    }
    let space_json = parsed
        .space
        .as_ref()
        .ok_or_else(|| schema_err("$.space", "missing field"))?;
    let space = space_from_json(space_json, "$.space")?;
    let arch_json = parsed
        .arch
        .as_ref()
        .ok_or_else(|| schema_err("$.arch", "missing field"))?;

    let expected_blocks = space.total_blocks() as usize;
    if arch_json.blocks.len() != expected_blocks {
        return Err(schema_err(
            "$.arch.blocks",
            format!(
                "{} blocks, skeleton expands to {expected_blocks}",
                arch_json.blocks.len()
            ),
        ));
    }

    let mut blocks = Vec::with_capacity(expected_blocks);
    let mut stage_iter = space
        .skeleton
        .iter()
        .flat_map(|st| std::iter::repeat_n(st, st.repeat as usize));
    for (bi, bj) in arch_json.blocks.iter().enumerate() {
        let stage = stage_iter.next().expect("stage count checked above");
        let mut counts: BTreeMap<OpKind, u32> = BTreeMap::new();
        for (ci, c) in bj.counts.iter().enumerate() {
            // Out-of-range indices surface as validation violations, the
            // closest analogue of an unknown operation.
            let op = match space.opt.get(c.op) {
                Some(op) => op.clone(),
                None => OpKind::Other(format!("opt[{}] (index out of range)", c.op)),
            };
            if c.n == 0 {
                continue;
            }
            let _ = ci;
            *counts.entry(op).or_insert(0) += c.n;
        }
        blocks.push(Block::new(
            counts,
            stage.c_out,
            stage.c_out,
            stage.f_in,
            stage.f_out,
        ));
        let _ = bi;
    }
    let arch = Architecture::new(blocks, space.id.clone(), doc.trim());
    let arch = ensure_valid(arch, &space)?;
    Ok((space, arch))
}

/// Serializes an architecture (with its space) to the generic JSON format.
/// Zero counts are omitted; `parse_generic` of the output is structurally
/// equal to the input.
pub fn serialize_generic(
    arch: &Architecture,
    space: &SearchSpaceDescriptor,
) -> Result<String, InvalidArchitecture> {
    let violations = crate::arch::validate(arch, space);
    if !violations.is_empty() {
        return Err(InvalidArchitecture { violations });
    }
    let blocks: Vec<BlockJson> = arch
        .blocks
        .iter()
        .map(|b| {
            let mut counts: Vec<CountJson> = b
                .op_counts
                .iter()
                .filter(|(_, &n)| n > 0)
                .map(|(op, &n)| CountJson {
                    op: space
                        .opt
                        .iter()
                        .position(|o| o == op)
                        .expect("validated op"),
                    n,
                })
                .collect();
            counts.sort_by_key(|c| c.op);
            BlockJson { counts }
        })
        .collect();
    let doc = GenericDoc {
        schema: Some(SCHEMA_VERSION),
        space: Some(space_to_json(space)),
        arch: Some(ArchJson { blocks }),
    };
    Ok(serde_json::to_string_pretty(&doc).expect("doc serialization cannot fail"))
}

/// Parses an encoding in the space's native format.
pub fn parse_in_space(
    encoding: &str,
    space: &SearchSpaceDescriptor,
) -> Result<Architecture, ParseError> {
    match space.family {
        EncodingFormat::TssCellString => parse_tss(encoding, space),
        EncodingFormat::DartsGenotype => parse_darts(encoding, space),
        EncodingFormat::GenericJson => {
            let (doc_space, arch) = parse_generic(encoding)?;
            if doc_space.id != space.id {
                return Err(schema_err(
                    "$.space.id",
                    format!(
                        "document space {:?} does not match {:?}",
                        doc_space.id, space.id
                    ),
                ));
            }
            Ok(arch)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::{nats_bench_tss_space, tss_op};

    const WORKED_CELL: &str =
        "|nor_conv_3x3~0|+|nor_conv_3x3~0|skip_connect~1|+|avg_pool_3x3~0|nor_conv_1x1~1|none~2|";

    #[test]
    fn parse_tss_tallies_the_six_edges() {
        let space = nats_bench_tss_space();
        let arch = parse_tss(WORKED_CELL, &space).unwrap();
        assert_eq!(arch.blocks.len(), 15);
        let b = &arch.blocks[0];
        assert_eq!(b.count(&tss_op("nor_conv_3x3").unwrap()), 2);
        assert_eq!(b.count(&tss_op("skip_connect").unwrap()), 1);
        assert_eq!(b.count(&tss_op("avg_pool_3x3").unwrap()), 1);
        assert_eq!(b.count(&tss_op("nor_conv_1x1").unwrap()), 1);
        assert_eq!(b.count(&OpKind::None), 1);
        assert_eq!(b.total_ops(), 6);
        // Stage bookkeeping: first stage 16 channels at 1024 entries.
        assert_eq!((b.c_out, b.f_in, b.f_out), (16, 1024, 1024));
        assert_eq!(arch.blocks[14].c_out, 64);
    }

    #[test]
    fn parse_tss_all_none() {
        let space = nats_bench_tss_space();
        let arch = parse_tss("|none~0|+|none~0|none~1|+|none~0|none~1|none~2|", &space).unwrap();
        let b = &arch.blocks[0];
        assert_eq!(b.count(&OpKind::None), 6);
        assert_eq!(b.op_counts.len(), 1);
    }

    #[test]
    fn parse_tss_unknown_op_names_the_token() {
        let space = nats_bench_tss_space();
        let err =
            parse_tss("|bad_op~0|+|none~0|none~1|+|none~0|none~1|none~2|", &space).unwrap_err();
        match err {
            ParseError::UnknownOp { token, offset } => {
                assert_eq!(token, "bad_op");
                assert_eq!(offset, 1);
            }
            other => panic!("expected UnknownOp, got {other}"),
        }
    }

    #[test]
    fn parse_tss_malformed_carries_offset() {
        let space = nats_bench_tss_space();
        let err = parse_tss("|none~0|+|none~0|none~1|", &space).unwrap_err();
        assert!(matches!(err, ParseError::Syntax { .. }), "{err}");

        let err = parse_tss("none~0", &space).unwrap_err();
        assert!(matches!(err, ParseError::Syntax { offset: 0, .. }), "{err}");

        // Leading whitespace is trimmed, offsets still point into the
        // original string.
        let err =
            parse_tss("  |bad~0|+|none~0|none~1|+|none~0|none~1|none~2|", &space).unwrap_err();
        match err {
            ParseError::UnknownOp { offset, .. } => assert_eq!(offset, 3),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn parse_tss_rejects_out_of_order_indices() {
        let space = nats_bench_tss_space();
        let err = parse_tss("|none~0|+|none~0|none~0|+|none~0|none~1|none~2|", &space).unwrap_err();
        assert!(matches!(err, ParseError::Syntax { .. }));
    }

    #[test]
    fn parse_darts_json_counts_and_folding() {
        let space = crate::spaces::darts_space();
        // 4x sep_conv_3x3, 2x skip_connect, 2x dil_conv_3x3 (folds to 5x5).
        let genotype = r#"{
            "normal": [["sep_conv_3x3",0],["sep_conv_3x3",1],["sep_conv_3x3",0],["skip_connect",1],
                       ["sep_conv_3x3",2],["skip_connect",0],["dil_conv_3x3",3],["dil_conv_3x3",1]],
            "reduce": [["max_pool_3x3",0],["max_pool_3x3",1],["skip_connect",2],["max_pool_3x3",0],
                       ["skip_connect",3],["avg_pool_3x3",1],["skip_connect",4],["max_pool_3x3",0]]
        }"#;
        let arch = parse_darts(genotype, &space).unwrap();
        let normal = &arch.blocks[0];
        let conv3 = crate::spaces::darts_op("sep_conv_3x3", false).unwrap();
        let conv5 = crate::spaces::darts_op("dil_conv_3x3", false).unwrap();
        assert_eq!(normal.count(&conv3), 4);
        assert_eq!(normal.count(&OpKind::Skip), 2);
        assert_eq!(normal.count(&conv5), 2);
        // Reduce block sits at index 6 and uses stride-2 pool ops.
        let reduce = &arch.blocks[6];
        let maxpool_r = crate::spaces::darts_op("max_pool_3x3", true).unwrap();
        assert_eq!(reduce.count(&maxpool_r), 4);
        assert_eq!((reduce.f_in, reduce.f_out), (1024, 256));
    }

    #[test]
    fn parse_darts_repr_form() {
        let space = crate::spaces::darts_space();
        let genotype = "Genotype(normal=[('skip_connect', 0), ('skip_connect', 1), ('skip_connect', 0), ('skip_connect', 1), ('skip_connect', 0), ('skip_connect', 1), ('skip_connect', 0), ('skip_connect', 1)], normal_concat=[2, 3, 4, 5], reduce=[('skip_connect', 0), ('skip_connect', 1), ('skip_connect', 0), ('skip_connect', 1), ('skip_connect', 0), ('skip_connect', 1), ('skip_connect', 0), ('skip_connect', 1)], reduce_concat=[2, 3, 4, 5])";
        let arch = parse_darts(genotype, &space).unwrap();
        assert_eq!(arch.blocks[0].count(&OpKind::Skip), 8);
        assert_eq!(arch.blocks[0].op_counts.len(), 1);
    }

    #[test]
    fn parse_darts_arity_errors() {
        let space = crate::spaces::darts_space();
        // Nested form, node 0 with three inputs.
        let genotype = r#"{
            "normal": [[["skip_connect",0],["skip_connect",1],["skip_connect",0]],
                       [["skip_connect",0],["skip_connect",1]],
                       [["skip_connect",0],["skip_connect",1]],
                       [["skip_connect",0],["skip_connect",1]]],
            "reduce": [["skip_connect",0],["skip_connect",1],["skip_connect",0],["skip_connect",1],
                       ["skip_connect",0],["skip_connect",1],["skip_connect",0],["skip_connect",1]]
        }"#;
        let err = parse_darts(genotype, &space).unwrap_err();
        assert!(
            matches!(
                err,
                ParseError::Arity {
                    node: 0,
                    expected: 2,
                    found: 3
                }
            ),
            "{err}"
        );

        // Input index beyond the node's reachable predecessors.
        let genotype = r#"{
            "normal": [["skip_connect",0],["skip_connect",5],["skip_connect",0],["skip_connect",1],
                       ["skip_connect",0],["skip_connect",1],["skip_connect",0],["skip_connect",1]],
            "reduce": [["skip_connect",0],["skip_connect",1],["skip_connect",0],["skip_connect",1],
                       ["skip_connect",0],["skip_connect",1],["skip_connect",0],["skip_connect",1]]
        }"#;
        let err = parse_darts(genotype, &space).unwrap_err();
        assert!(matches!(err, ParseError::Arity { .. }), "{err}");
    }

    #[test]
    fn generic_minimal_doc_round_trips() {
        let doc = r#"{
            "schema": 1,
            "space": {
                "id": "mini",
                "slots_per_cell": 1,
                "opt": [{"op": "conv", "k_w": 3, "k_h": 3}],
                "skeleton": [{"repeat": 1, "c_out": 16, "f_in": 1024, "f_out": 1024}]
            },
            "arch": {"blocks": [{"counts": [{"op": 0, "n": 1}]}]}
        }"#;
        let (space, arch) = parse_generic(doc).unwrap();
        assert_eq!(arch.blocks.len(), 1);
        assert!(crate::arch::validate(&arch, &space).is_empty());

        let text = serialize_generic(&arch, &space).unwrap();
        let (space2, arch2) = parse_generic(&text).unwrap();
        assert_eq!(space, space2);
        assert!(arch.structurally_equal(&arch2));
    }

    #[test]
    fn generic_missing_skeleton_reports_path() {
        let doc = r#"{
            "schema": 1,
            "space": {"id": "mini", "slots_per_cell": 1, "opt": [{"op": "none"}]},
            "arch": {"blocks": [{"counts": []}]}
        }"#;
        let err = parse_generic(doc).unwrap_err();
        match err {
            ParseError::Schema { path, .. } => assert_eq!(path, "$.space.skeleton"),
            other => panic!("expected schema error, got {other}"),
        }
    }

    #[test]
    fn generic_unknown_op_index_is_a_validation_violation() {
        let doc = r#"{
            "schema": 1,
            "space": {
                "id": "mini",
                "slots_per_cell": 1,
                "opt": [{"op": "none"}],
                "skeleton": [{"repeat": 1, "c_out": 16, "f_in": 1024, "f_out": 1024}]
            },
            "arch": {"blocks": [{"counts": [{"op": 7, "n": 1}]}]}
        }"#;
        let err = parse_generic(doc).unwrap_err();
        match err {
            ParseError::Invalid(inv) => {
                assert!(inv
                    .violations
                    .iter()
                    .any(|v| matches!(v, crate::arch::Violation::UnknownOperation { .. })));
            }
            other => panic!("expected validation failure, got {other}"),
        }
    }

    #[test]
    fn tss_serializes_to_generic_and_back() {
        let space = nats_bench_tss_space();
        let arch = parse_tss(WORKED_CELL, &space).unwrap();
        let doc = serialize_generic(&arch, &space).unwrap();
        let (_, round) = parse_generic(&doc).unwrap();
        assert!(arch.structurally_equal(&round));
    }

    #[test]
    fn space_document_round_trips() {
        let space = nats_bench_tss_space();
        let doc = serialize_space(&space);
        let round = parse_space(&doc).unwrap();
        assert_eq!(space, round);
    }

    #[test]
    fn parse_does_not_panic_on_arbitrary_bytes() {
        let space = nats_bench_tss_space();
        for junk in [
            "",
            "|",
            "||||||",
            "|~|+|~|~|+|~|~|~|",
            "|none~0|+|+|",
            "\u{1F980}~0",
        ] {
            let _ = parse_tss(junk, &space);
            let _ = parse_darts(junk, &crate::spaces::darts_space());
            let _ = parse_generic(junk);
        }
    }
}
