//! JSON instance documents, canonical fixtures and table export.
//!
//! ```json
//! {
//!   "horizon": 1,
//!   "outcomes": [{"id": "u", "prob": "1/2"}, {"id": "d", "prob": "1/2"}],
//!   "filtration": [{"t": 0, "pre": [["u", "d"]], "post": [["u", "d"]]}, ...],
//!   "reward": [{"t": 0, "values": {"u": "1", "d": "1"}}, ...]
//! }
//! ```
//!
//! Rationals are strings in lowest terms (`"3/2"`, `"2"`); decimals are a
//! schema error. Documents written by [`to_json`] list blocks in partition
//! order and values in outcome order, so loading and saving them again is
//! byte-identical.

use std::fmt::Write as _;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::decomposition::MertensDecomposition;
use crate::error::{Error, Result, Slot, ValidationReport, Violation};
use crate::model::Instance;
use crate::rational::Rational;
use crate::reward::RewardFamily;
use crate::snell::ValueSystem;
use crate::space::{Partition, RandomVar, SampleSpace, TwoSlotFiltration};
use crate::stopping::{PredictableTime, StoppingTime};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDoc {
    pub horizon: usize,
    pub outcomes: Vec<OutcomeDoc>,
    pub filtration: Vec<SlotDoc>,
    pub reward: Vec<RewardDoc>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeDoc {
    pub id: String,
    pub prob: Rational,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlotDoc {
    pub t: usize,
    pub pre: Vec<Vec<String>>,
    pub post: Vec<Vec<String>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardDoc {
    pub t: usize,
    pub values: IndexMap<String, Rational>,
}

fn pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => write!(out, "{index}").unwrap(),
            Segment::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => out.push_str(variant),
            Segment::Unknown => out.push('?'),
        }
    }
    if out.is_empty() {
        out.push('/');
    }
    out
}

fn schema(pointer: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Schema { pointer: pointer.into(), message: message.into() }
}

/// Parses a document without validating its mathematics.
pub fn parse_doc(text: &str) -> Result<InstanceDoc> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let ptr = pointer(e.path());
        let inner = e.into_inner();
        // strip serde_json's trailing position, the pointer replaces it
        let msg = inner.to_string();
        let msg = match msg.rfind(" at line ") {
            Some(i) if inner.is_data() => msg[..i].to_string(),
            _ => msg,
        };
        schema(ptr, msg)
    })
}

/// Builds and validates an instance from a parsed document.
pub fn from_doc(doc: &InstanceDoc) -> Result<Instance> {
    let ids: Vec<String> = doc.outcomes.iter().map(|o| o.id.clone()).collect();
    let probs: Vec<Rational> = doc.outcomes.iter().map(|o| o.prob.clone()).collect();
    let space = SampleSpace::new(ids, probs);
    let n = doc.horizon;
    if doc.filtration.len() != n + 1 {
        return Err(schema("/filtration", format!("expected {} entries for horizon {n}, found {}", n + 1, doc.filtration.len())));
    }
    if doc.reward.len() != n + 1 {
        return Err(schema("/reward", format!("expected {} entries for horizon {n}, found {}", n + 1, doc.reward.len())));
    }
    let lookup = |id: &str, ptr: String| space.index_of(id).ok_or_else(|| schema(ptr, format!("unknown outcome {id:?}")));
    let mut pre = Vec::with_capacity(n + 1);
    let mut post = Vec::with_capacity(n + 1);
    let mut report = ValidationReport::default();
    for (i, slot) in doc.filtration.iter().enumerate() {
        if slot.t != i {
            return Err(schema(format!("/filtration/{i}/t"), format!("expected t={i}, found {}", slot.t)));
        }
        for (kind, blocks, out) in [(Slot::Pre, &slot.pre, &mut pre), (Slot::Post, &slot.post, &mut post)] {
            let mut idx = Vec::with_capacity(blocks.len());
            for (b, block) in blocks.iter().enumerate() {
                let mut members = Vec::with_capacity(block.len());
                for (k, id) in block.iter().enumerate() {
                    members.push(lookup(id, format!("/filtration/{i}/{kind}/{b}/{k}"))?);
                }
                idx.push(members);
            }
            match Partition::from_blocks(space.len(), idx) {
                Ok(p) => out.push(p),
                Err(defect) => {
                    // keep going so every broken slot is reported
                    let defect = defect_with_ids(&defect, &space);
                    report.violations.push(Violation::NotAPartition { t: i, slot: kind, defect });
                    out.push(Partition::trivial(space.len()));
                }
            }
        }
    }
    let mut per_time = Vec::with_capacity(n + 1);
    for (i, entry) in doc.reward.iter().enumerate() {
        if entry.t != i {
            return Err(schema(format!("/reward/{i}/t"), format!("expected t={i}, found {}", entry.t)));
        }
        let mut values = vec![None; space.len()];
        for (id, value) in &entry.values {
            let w = lookup(id, format!("/reward/{i}/values/{id}"))?;
            values[w] = Some(value.clone());
        }
        if let Some(w) = values.iter().position(Option::is_none) {
            return Err(schema(format!("/reward/{i}/values"), format!("missing value for outcome {:?}", space.id(w))));
        }
        per_time.push(RandomVar(values.into_iter().map(Option::unwrap).collect()));
    }
    let filt = TwoSlotFiltration::new(pre, post);
    let reward = RewardFamily::new(per_time);
    report.violations.extend(Instance::validate(&space, &filt, &reward).violations);
    report.into_result()?;
    Instance::new(space, filt, reward)
}

fn defect_with_ids(defect: &str, space: &SampleSpace) -> String {
    // `from_blocks` names outcomes by index
    match defect.strip_prefix("outcome ").and_then(|r| r.split_once(' ')) {
        Some((w, rest)) => match w.parse::<usize>() {
            Ok(w) if w < space.len() => format!("outcome {:?} {rest}", space.id(w)),
            _ => defect.to_string(),
        },
        None => defect.to_string(),
    }
}

pub fn from_json(text: &str) -> Result<Instance> {
    from_doc(&parse_doc(text)?)
}

pub fn load(path: impl AsRef<Path>) -> Result<Instance> {
    from_json(&std::fs::read_to_string(path)?)
}

pub fn to_doc(inst: &Instance) -> InstanceDoc {
    let space = inst.space();
    let filt = inst.filtration();
    let blocks = |p: &Partition| p.blocks().iter().map(|b| space.block_ids(b)).collect();
    InstanceDoc {
        horizon: inst.horizon(),
        outcomes: space
            .outcomes()
            .map(|w| OutcomeDoc { id: space.id(w).to_string(), prob: space.prob(w).clone() })
            .collect(),
        filtration: filt
            .times()
            .map(|t| SlotDoc { t, pre: blocks(filt.pre(t)), post: blocks(filt.post(t)) })
            .collect(),
        reward: filt
            .times()
            .map(|t| RewardDoc { t, values: var_map(space, inst.reward().at_time(t)) })
            .collect(),
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_json(inst: &Instance) -> String {
    let mut s = serde_json::to_string_pretty(&to_doc(inst)).expect("document serializes");
    s.push('\n');
    s
}

pub fn save(inst: &Instance, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), to_json(inst).as_bytes())
}

/// Writes through a temporary file in the same directory and renames it
/// into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| Error::Internal("output path has no file name".into()))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// SHA-256 of the canonical document.
pub fn digest(inst: &Instance) -> String {
    hex::encode(Sha256::digest(to_json(inst).as_bytes()))
}

pub fn var_map(space: &SampleSpace, x: &RandomVar) -> IndexMap<String, Rational> {
    space.outcomes().map(|w| (space.id(w).to_string(), x[w].clone())).collect()
}

/// A stopping time given as an outcome → time map; every outcome must be
/// present. Predictability is checked.
pub fn time_from_map(inst: &Instance, map: &IndexMap<String, usize>) -> Result<PredictableTime> {
    let space = inst.space();
    let mut times = vec![None; space.len()];
    for (id, &t) in map {
        let w = space.index_of(id).ok_or_else(|| schema(format!("/{id}"), format!("unknown outcome {id:?}")))?;
        if t > inst.horizon() {
            return Err(schema(format!("/{id}"), format!("time {t} is beyond the horizon {}", inst.horizon())));
        }
        times[w] = Some(t);
    }
    if let Some(w) = times.iter().position(Option::is_none) {
        return Err(schema("/", format!("missing time for outcome {:?}", space.id(w))));
    }
    inst.predictable(StoppingTime(times.into_iter().map(Option::unwrap).collect()))
}

pub fn time_from_json(inst: &Instance, text: &str) -> Result<PredictableTime> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let map: IndexMap<String, usize> =
        serde_path_to_error::deserialize(de).map_err(|e| schema(pointer(e.path()), e.into_inner().to_string()))?;
    time_from_map(inst, &map)
}

/// The three fixtures: `E1` deterministic, `E2` pre-slot coin, `E3` gap.
pub fn canonical(name: &str) -> Result<Instance> {
    let q = |s: &str| s.parse::<Rational>().expect("fixture rational");
    let rv = |vals: &[&str]| RandomVar(vals.iter().map(|s| q(s)).collect());
    match name {
        "E1" => {
            let filt = TwoSlotFiltration::new(vec![Partition::trivial(1); 3], vec![Partition::trivial(1); 3]);
            let reward = RewardFamily::new(vec![rv(&["1"]), rv(&["3"]), rv(&["2"])]);
            Instance::new(SampleSpace::uniform(["w"]), filt, reward)
        }
        "E2" => {
            let filt = TwoSlotFiltration::new(
                vec![Partition::trivial(2), Partition::discrete(2)],
                vec![Partition::trivial(2), Partition::discrete(2)],
            );
            let reward = RewardFamily::new(vec![rv(&["1", "1"]), rv(&["2", "0"])]);
            Instance::new(SampleSpace::uniform(["u", "d"]), filt, reward)
        }
        "E3" => {
            let filt = TwoSlotFiltration::new(
                vec![Partition::trivial(2), Partition::trivial(2), Partition::discrete(2)],
                vec![Partition::trivial(2), Partition::discrete(2), Partition::discrete(2)],
            );
            let reward = RewardFamily::new(vec![rv(&["0", "0"]), rv(&["1", "1"]), rv(&["3", "0"])]);
            Instance::new(SampleSpace::uniform(["u", "d"]), filt, reward)
        }
        _ => Err(Error::UnknownInstance(name.to_string())),
    }
}

/// Per-time tables keyed by name, rows are times.
pub type Tables = IndexMap<String, Vec<IndexMap<String, Rational>>>;

pub fn value_tables(vs: &ValueSystem<'_>) -> Tables {
    let space = vs.instance().space();
    let mut out = Tables::new();
    out.insert("v".into(), vs.v_table().iter().map(|x| var_map(space, x)).collect());
    out.insert("v_plus".into(), vs.v_plus_table().iter().map(|x| var_map(space, x)).collect());
    out
}

/// `M`, `A`, `ΔC` and `C_{t-1}` per time.
pub fn decomposition_tables(d: &MertensDecomposition, space: &SampleSpace) -> Tables {
    let n = d.horizon();
    let rows = |f: &dyn Fn(usize) -> RandomVar| (0..=n).map(|t| var_map(space, &f(t))).collect();
    let mut out = Tables::new();
    out.insert("m".into(), rows(&|t| d.m[t].clone()));
    out.insert("a".into(), rows(&|t| d.a[t].clone()));
    out.insert("c_before".into(), rows(&|t| d.c_before(t).clone()));
    out.insert("delta_c".into(), rows(&|t| d.delta_c(t)));
    out
}

/// One CSV section per table: a `# name` line, the `time,outcome,value`
/// header, then one row per time and outcome.
pub fn tables_to_csv(tables: &Tables) -> String {
    let mut out = String::new();
    for (name, rows) in tables {
        writeln!(out, "# {name}").unwrap();
        out.push_str("time,outcome,value\n");
        for (t, row) in rows.iter().enumerate() {
            for (id, value) in row {
                writeln!(out, "{t},{},{value}", csv_field(id)).unwrap();
            }
        }
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
