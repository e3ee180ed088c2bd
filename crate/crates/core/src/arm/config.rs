//! Line-oriented chain description. See `docs/chain_format.md`.

use std::fmt::Write as _;

use nalgebra::{Quaternion, Translation3, UnitQuaternion, Vector3};

use super::{ChainError, JointSpec, KinematicChain, Transform};

/// Text inputs are rounded; vectors within this of unit norm are normalized.
const TEXT_UNIT_TOL: f64 = 1e-6;

#[derive(Default)]
struct JointFields {
    line: usize,
    name: Option<String>,
    axis: Option<[f64; 3]>,
    translation: Option<[f64; 3]>,
    quaternion: Option<[f64; 4]>,
    lo: Option<f64>,
    hi: Option<f64>,
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Base,
    Joint,
    Tool,
}

fn err(line: usize, msg: impl Into<String>) -> ChainError {
    ChainError::Config { line, msg: msg.into() }
}

fn floats<const N: usize>(line: usize, key: &str, value: &str) -> Result<[f64; N], ChainError> {
    let parts: Vec<&str> = value.split_whitespace().collect();
    if parts.len() != N {
        return Err(err(line, format!("`{key}` expects {N} numbers, got {}", parts.len())));
    }
    let mut out = [0.0; N];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p
            .parse::<f64>()
            .map_err(|_| err(line, format!("`{key}`: `{p}` is not a number")))?;
        if !o.is_finite() {
            return Err(err(line, format!("`{key}`: non-finite value")));
        }
    }
    Ok(out)
}

fn unit_quaternion(line: usize, wxyz: [f64; 4]) -> Result<UnitQuaternion<f64>, ChainError> {
    let q = Quaternion::new(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
    if (q.norm() - 1.0).abs() > TEXT_UNIT_TOL {
        return Err(err(line, "quaternion is not unit norm"));
    }
    Ok(UnitQuaternion::new_normalize(q))
}

fn transform(line: usize, t: [f64; 3], q: [f64; 4]) -> Result<Transform, ChainError> {
    Ok(Transform::from_parts(
        Translation3::new(t[0], t[1], t[2]),
        unit_quaternion(line, q)?,
    ))
}

/// Parses a chain description. Every `[joint]` section must carry all six
/// fields; `[base]` and `[tool]` default to identity.
pub fn parse_chain_config(text: &str) -> Result<KinematicChain, ChainError> {
    let mut section = Section::None;
    let mut base = ([0.0; 3], [1.0, 0.0, 0.0, 0.0], 0);
    let mut tool = ([0.0; 3], [1.0, 0.0, 0.0, 0.0], 0);
    let mut joints: Vec<JointFields> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            section = match name.trim() {
                "base" => {
                    base.2 = line;
                    Section::Base
                }
                "tool" => {
                    tool.2 = line;
                    Section::Tool
                }
                "joint" => {
                    joints.push(JointFields { line, ..Default::default() });
                    Section::Joint
                }
                other => return Err(err(line, format!("unknown section `[{other}]`"))),
            };
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| err(line, "expected `key = value`"))?;
        match section {
            Section::None => return Err(err(line, "key outside of a section")),
            Section::Base | Section::Tool => {
                let target = if section == Section::Base { &mut base } else { &mut tool };
                match key {
                    "translation" => target.0 = floats(line, key, value)?,
                    "quaternion" => target.1 = floats(line, key, value)?,
                    _ => return Err(err(line, format!("unknown key `{key}`"))),
                }
            }
            Section::Joint => {
                let j = joints.last_mut().expect("joint section open");
                match key {
                    "name" => j.name = Some(value.to_string()),
                    "axis" => j.axis = Some(floats(line, key, value)?),
                    "offset_translation" => j.translation = Some(floats(line, key, value)?),
                    "offset_quaternion" => j.quaternion = Some(floats(line, key, value)?),
                    "limit_lo_deg" => j.lo = Some(floats::<1>(line, key, value)?[0]),
                    "limit_hi_deg" => j.hi = Some(floats::<1>(line, key, value)?[0]),
                    _ => return Err(err(line, format!("unknown key `{key}`"))),
                }
            }
        }
    }

    let specs = joints
        .into_iter()
        .map(|j| {
            let missing = |f: &str| err(j.line, format!("joint section is missing `{f}`"));
            let name = j.name.ok_or_else(|| missing("name"))?;
            let axis = j.axis.ok_or_else(|| missing("axis"))?;
            let t = j.translation.ok_or_else(|| missing("offset_translation"))?;
            let q = j.quaternion.ok_or_else(|| missing("offset_quaternion"))?;
            let lo = j.lo.ok_or_else(|| missing("limit_lo_deg"))?;
            let hi = j.hi.ok_or_else(|| missing("limit_hi_deg"))?;
            let axis = Vector3::from(axis);
            if (axis.norm() - 1.0).abs() > TEXT_UNIT_TOL {
                return Err(err(j.line, format!("joint `{name}`: axis is not unit norm")));
            }
            JointSpec::new(
                name,
                axis.normalize(),
                (lo.to_radians(), hi.to_radians()),
                transform(j.line, t, q)?,
            )
        })
        .collect::<Result<Vec<_>, _>>()?;

    KinematicChain::new(
        transform(base.2, base.0, base.1)?,
        specs,
        transform(tool.2, tool.0, tool.1)?,
    )
}

fn write_transform(out: &mut String, key_t: &str, key_q: &str, t: &Transform) {
    let v = t.translation.vector;
    let q = t.rotation.quaternion();
    let _ = writeln!(out, "{key_t} = {} {} {}", v.x, v.y, v.z);
    let _ = writeln!(out, "{key_q} = {} {} {} {}", q.w, q.i, q.j, q.k);
}

/// Serializes a chain in the format read by [`parse_chain_config`].
pub fn write_chain_config(chain: &KinematicChain) -> String {
    let mut out = String::new();
    out.push_str("[base]\n");
    write_transform(&mut out, "translation", "quaternion", chain.base());
    for j in chain.joints() {
        out.push_str("\n[joint]\n");
        let _ = writeln!(out, "name = {}", j.name);
        let a = j.axis;
        let _ = writeln!(out, "axis = {} {} {}", a.x, a.y, a.z);
        write_transform(&mut out, "offset_translation", "offset_quaternion", &j.offset);
        let _ = writeln!(out, "limit_lo_deg = {}", j.limit_lo.to_degrees());
        let _ = writeln!(out, "limit_hi_deg = {}", j.limit_hi.to_degrees());
    }
    out.push_str("\n[tool]\n");
    write_transform(&mut out, "translation", "quaternion", chain.tool());
    out
}
