//! JSON instance schemas (`"schema": "qf-1"`), report serialization, CSV logs
//! and the `QVTX1` binary field format.
//!
//! Validation walks the whole document and collects every issue with a JSON
//! pointer before anything is constructed.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::io;

use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::error::{Error, Result, SchemaIssue};
use crate::linalg::{self, CMatrix};
use crate::moment::{FlowReport, IterRecord};
use crate::quiver::{Path, Quiver, Relation, TwistSpec};
use crate::rep::{SubrepWitness, TwistedRep};
use crate::stability::{FiltrationStep, StabilityParams, Verdict};
use crate::torus::{NewtonRecord, PotentialState, TorusGrid, TorusSystem, WeightField};

pub const SCHEMA_VERSION: &str = "qf-1";
pub const FLOW_CSV_HEADER: &str = "iter,kempf_ness,residual_norm,step,s_norm";
pub const NEWTON_CSV_HEADER: &str = "iter,sup_residual,damping";
pub const QVTX_MAGIC: &[u8; 5] = b"QVTX1";

// ---------------------------------------------------------------------------
// Number formatting

/// C-style `%.17g`.
pub fn format_g17(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0" } else { "0" }.into();
    }
    let e = format!("{x:.16e}");
    let (mant, exp) = e.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..17).contains(&exp) {
        strip_zeros(format!("{:.*}", (16 - exp) as usize, x))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", strip_zeros(mant.to_string()), exp.abs())
    }
}

fn strip_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

struct G17;

impl serde_json::ser::Formatter for G17 {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(format_g17(value).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }
}

/// Deterministic compact JSON: sorted keys, floats as `%.17g`.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> String {
    // Round through `Value` so struct fields come out sorted too.
    let v = serde_json::to_value(value).expect("serializable report");
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, G17);
    v.serialize(&mut ser).expect("in-memory write");
    String::from_utf8(out).expect("utf-8 json")
}

// ---------------------------------------------------------------------------
// Validation helpers

#[derive(Default)]
struct Issues(Vec<SchemaIssue>);

impl Issues {
    fn push(&mut self, pointer: &str, message: impl Into<String>) {
        self.0.push(SchemaIssue {
            pointer: pointer.to_string(),
            message: message.into(),
        });
    }

    fn len(&self) -> usize {
        self.0.len()
    }
}

fn child(ptr: &str, key: &str) -> String {
    format!("{ptr}/{}", key.replace('~', "~0").replace('/', "~1"))
}

fn index(ptr: &str, i: usize) -> String {
    format!("{ptr}/{i}")
}

fn object<'a>(v: &'a Value, ptr: &str, iss: &mut Issues) -> Option<&'a Map<String, Value>> {
    let o = v.as_object();
    if o.is_none() {
        iss.push(ptr, "expected an object");
    }
    o
}

fn array<'a>(v: &'a Value, ptr: &str, iss: &mut Issues) -> Option<&'a Vec<Value>> {
    let a = v.as_array();
    if a.is_none() {
        iss.push(ptr, "expected an array");
    }
    a
}

fn string<'a>(v: &'a Value, ptr: &str, iss: &mut Issues) -> Option<&'a str> {
    let s = v.as_str();
    if s.is_none() {
        iss.push(ptr, "expected a string");
    }
    s
}

fn number(v: &Value, ptr: &str, iss: &mut Issues) -> Option<f64> {
    match v.as_f64() {
        Some(x) if x.is_finite() => Some(x),
        _ => {
            iss.push(ptr, "expected a finite number");
            None
        }
    }
}

fn uint(v: &Value, ptr: &str, iss: &mut Issues) -> Option<u64> {
    let n = v.as_u64();
    if n.is_none() {
        iss.push(ptr, "expected a nonnegative integer");
    }
    n
}

fn int(v: &Value, ptr: &str, iss: &mut Issues) -> Option<i64> {
    let n = v.as_i64();
    if n.is_none() {
        iss.push(ptr, "expected an integer");
    }
    n
}

fn required<'a>(o: &'a Map<String, Value>, key: &str, ptr: &str, iss: &mut Issues) -> Option<&'a Value> {
    let v = o.get(key);
    if v.is_none() {
        iss.push(&child(ptr, key), "missing required field");
    }
    v
}

fn known_keys(o: &Map<String, Value>, allowed: &[&str], ptr: &str, iss: &mut Issues) {
    for k in o.keys() {
        if !allowed.contains(&k.as_str()) {
            iss.push(&child(ptr, k), "unknown field");
        }
    }
}

fn complex(v: &Value, ptr: &str, iss: &mut Issues) -> Option<Complex64> {
    match v.as_array() {
        Some(a) if a.len() == 2 => {
            let re = number(&a[0], &index(ptr, 0), iss);
            let im = number(&a[1], &index(ptr, 1), iss);
            Some(Complex64::new(re?, im?))
        }
        _ => {
            iss.push(ptr, "expected a complex number [re, im]");
            None
        }
    }
}

/// Nested rows of `[re, im]` pairs with a known shape.
fn matrix(v: &Value, rows: usize, cols: usize, ptr: &str, iss: &mut Issues) -> Option<CMatrix> {
    let r = array(v, ptr, iss)?;
    if r.len() != rows {
        iss.push(ptr, format!("expected {rows} rows, found {}", r.len()));
        return None;
    }
    let mut m = CMatrix::zeros(rows, cols);
    let before = iss.len();
    for (i, row) in r.iter().enumerate() {
        let rp = index(ptr, i);
        let Some(row) = array(row, &rp, iss) else { continue };
        if row.len() != cols {
            iss.push(&rp, format!("expected {cols} columns, found {}", row.len()));
            continue;
        }
        for (j, z) in row.iter().enumerate() {
            if let Some(z) = complex(z, &index(&rp, j), iss) {
                m[(i, j)] = z;
            }
        }
    }
    (iss.len() == before).then_some(m)
}

/// `{vertex: value}` covering every vertex exactly once.
fn per_vertex<T>(
    v: &Value,
    q: &Quiver,
    ptr: &str,
    iss: &mut Issues,
    mut f: impl FnMut(&Value, &str, &mut Issues) -> Option<T>,
) -> Option<Vec<T>> {
    let o = object(v, ptr, iss)?;
    let before = iss.len();
    for k in o.keys() {
        if q.vertex_index(k).is_none() {
            iss.push(&child(ptr, k), "unknown vertex");
        }
    }
    let mut out = Vec::with_capacity(q.vertex_count());
    for name in q.vertices() {
        match o.get(name) {
            Some(x) => out.push(f(x, &child(ptr, name), iss)),
            None => {
                iss.push(&child(ptr, name), "missing vertex entry");
                out.push(None);
            }
        }
    }
    if iss.len() != before {
        return None;
    }
    out.into_iter().collect()
}

// ---------------------------------------------------------------------------
// Sections

fn parse_quiver(v: &Value, ptr: &str, iss: &mut Issues) -> Option<(Quiver, TwistSpec)> {
    let o = object(v, ptr, iss)?;
    known_keys(o, &["vertices", "arrows"], ptr, iss);
    let before = iss.len();
    let mut vertices = Vec::new();
    let vp = child(ptr, "vertices");
    if let Some(vs) = required(o, "vertices", ptr, iss).and_then(|x| array(x, &vp, iss)) {
        let mut seen = BTreeSet::new();
        for (i, x) in vs.iter().enumerate() {
            if let Some(s) = string(x, &index(&vp, i), iss) {
                if !seen.insert(s) {
                    iss.push(&index(&vp, i), format!("duplicate vertex {s}"));
                }
                vertices.push(s.to_string());
            }
        }
    }
    let mut arrows = Vec::new();
    let mut twists = Vec::new();
    let ap = child(ptr, "arrows");
    if let Some(list) = required(o, "arrows", ptr, iss).and_then(|x| array(x, &ap, iss)) {
        let mut seen = BTreeSet::new();
        for (i, x) in list.iter().enumerate() {
            let p = index(&ap, i);
            let Some(a) = object(x, &p, iss) else { continue };
            known_keys(a, &["id", "tail", "head", "twist_dim", "twist_weight"], &p, iss);
            let id = required(a, "id", &p, iss).and_then(|x| string(x, &child(&p, "id"), iss));
            if let Some(id) = id {
                if !seen.insert(id) {
                    iss.push(&child(&p, "id"), format!("duplicate arrow {id}"));
                }
            }
            let mut end = |key: &str| {
                let s = required(a, key, &p, iss).and_then(|x| string(x, &child(&p, key), iss))?;
                if !vertices.iter().any(|v| v == s) {
                    iss.push(&child(&p, key), format!("unknown vertex {s}"));
                    return None;
                }
                Some(s.to_string())
            };
            let tail = end("tail");
            let head = end("head");
            let m = match a.get("twist_dim") {
                None => Some(1),
                Some(x) => match uint(x, &child(&p, "twist_dim"), iss) {
                    Some(0) => {
                        iss.push(&child(&p, "twist_dim"), "twist_dim must be at least 1");
                        None
                    }
                    n => n.map(|n| n as usize),
                },
            };
            let weight = match (m, a.get("twist_weight")) {
                (Some(m), None) => Some(linalg::identity(m)),
                (Some(m), Some(w)) => parse_twist_weight(w, m, &child(&p, "twist_weight"), iss),
                (None, _) => None,
            };
            if let (Some(id), Some(t), Some(h), Some(w)) = (id, tail, head, weight) {
                arrows.push((id.to_string(), t, h));
                twists.push(w);
            }
        }
    }
    if iss.len() != before {
        return None;
    }
    let q = Quiver::new(&vertices, &arrows)
        .map_err(|e| iss.push(ptr, e.to_string()))
        .ok()?;
    let t = TwistSpec::new(&q, twists)
        .map_err(|e| iss.push(ptr, e.to_string()))
        .ok()?;
    Some((q, t))
}

fn parse_twist_weight(v: &Value, m: usize, ptr: &str, iss: &mut Issues) -> Option<CMatrix> {
    let list = array(v, ptr, iss)?;
    if list.len() != m * m {
        iss.push(ptr, format!("expected {} row-major entries", m * m));
        return None;
    }
    let before = iss.len();
    let mut w = CMatrix::zeros(m, m);
    for (k, z) in list.iter().enumerate() {
        if let Some(z) = complex(z, &index(ptr, k), iss) {
            w[(k / m, k % m)] = z;
        }
    }
    if iss.len() != before {
        return None;
    }
    if linalg::frob_norm(&(&w - w.adjoint())) > 1e-12 * linalg::frob_norm(&w).max(1.0) {
        iss.push(ptr, "twist weight is not Hermitian");
        return None;
    }
    match linalg::HermEigen::new(&w) {
        Ok(e) if e.values[0] > 0.0 => Some(w),
        _ => {
            iss.push(ptr, "twist weight is not positive definite");
            None
        }
    }
}

fn parse_relations(v: &Value, q: &Quiver, ptr: &str, iss: &mut Issues) -> Option<Vec<Relation>> {
    let list = array(v, ptr, iss)?;
    let before = iss.len();
    let mut out = Vec::new();
    for (i, r) in list.iter().enumerate() {
        let rp = index(ptr, i);
        let Some(ro) = object(r, &rp, iss) else { continue };
        known_keys(ro, &["terms"], &rp, iss);
        let tp = child(&rp, "terms");
        let Some(terms) = required(ro, "terms", &rp, iss).and_then(|x| array(x, &tp, iss)) else {
            continue;
        };
        let mut parsed = Vec::new();
        for (j, t) in terms.iter().enumerate() {
            let p = index(&tp, j);
            let Some(to) = object(t, &p, iss) else { continue };
            known_keys(to, &["coeff", "path", "vertex"], &p, iss);
            let coeff = required(to, "coeff", &p, iss).and_then(|x| complex(x, &child(&p, "coeff"), iss));
            let pp = child(&p, "path");
            let Some(names) = required(to, "path", &p, iss).and_then(|x| array(x, &pp, iss)) else {
                continue;
            };
            let mut arrows = Vec::new();
            for (k, n) in names.iter().enumerate() {
                if let Some(n) = string(n, &index(&pp, k), iss) {
                    match q.arrow_index(n) {
                        Some(a) => arrows.push(a),
                        None => iss.push(&index(&pp, k), format!("unknown arrow {n}")),
                    }
                }
            }
            if arrows.len() != names.len() {
                continue;
            }
            let path = if arrows.is_empty() {
                let vp = child(&p, "vertex");
                let Some(vname) = required(to, "vertex", &p, iss).and_then(|x| string(x, &vp, iss)) else {
                    continue;
                };
                match q.vertex_index(vname) {
                    Some(v) => Path::trivial(v),
                    None => {
                        iss.push(&vp, format!("unknown vertex {vname}"));
                        continue;
                    }
                }
            } else {
                match Path::new(q, arrows) {
                    Ok(path) => path,
                    Err(e) => {
                        iss.push(&pp, e.to_string());
                        continue;
                    }
                }
            };
            if let Some(c) = coeff {
                parsed.push((c, path));
            }
        }
        if parsed.len() == terms.len() {
            match Relation::new(parsed) {
                Ok(r) => out.push(r),
                Err(e) => iss.push(&tp, e.to_string()),
            }
        }
    }
    (iss.len() == before).then_some(out)
}

fn parse_rep(v: &Value, q: &Quiver, twist: &TwistSpec, ptr: &str, iss: &mut Issues) -> Option<TwistedRep> {
    let o = object(v, ptr, iss)?;
    known_keys(o, &["dims", "arrows"], ptr, iss);
    let dp = child(ptr, "dims");
    let dims = required(o, "dims", ptr, iss)
        .and_then(|d| per_vertex(d, q, &dp, iss, |x, p, iss| uint(x, p, iss).map(|n| n as usize)));
    let ap = child(ptr, "arrows");
    let arrows = required(o, "arrows", ptr, iss).and_then(|x| object(x, &ap, iss));
    let (dims, arrows) = (dims?, arrows?);
    let before = iss.len();
    for k in arrows.keys() {
        if q.arrow_index(k).is_none() {
            iss.push(&child(&ap, k), "unknown arrow");
        }
    }
    let mut slices = Vec::new();
    for (a, ar) in q.arrows().iter().enumerate() {
        let p = child(&ap, &ar.name);
        let Some(list) = arrows.get(&ar.name) else {
            iss.push(&p, "missing arrow entry");
            continue;
        };
        let Some(list) = array(list, &p, iss) else { continue };
        let m = twist.multiplicity(a);
        if list.len() != m {
            iss.push(&p, format!("expected {m} slice matrices, found {}", list.len()));
            continue;
        }
        let sl: Vec<Option<CMatrix>> = list
            .iter()
            .enumerate()
            .map(|(k, x)| matrix(x, dims[ar.head], dims[ar.tail], &index(&p, k), iss))
            .collect();
        if let Some(sl) = sl.into_iter().collect::<Option<Vec<_>>>() {
            slices.push(sl);
        }
    }
    if iss.len() != before {
        return None;
    }
    TwistedRep::new(q.clone(), twist.clone(), dims, slices)
        .map_err(|e| iss.push(ptr, e.to_string()))
        .ok()
}

fn parse_params(v: &Value, q: &Quiver, ptr: &str, iss: &mut Issues) -> Option<StabilityParams> {
    let o = object(v, ptr, iss)?;
    known_keys(o, &["sigma", "tau"], ptr, iss);
    let sp = child(ptr, "sigma");
    let sigma = required(o, "sigma", ptr, iss).and_then(|x| {
        per_vertex(x, q, &sp, iss, |x, p, iss| {
            let s = number(x, p, iss)?;
            if s <= 0.0 {
                iss.push(p, "sigma must be positive");
                return None;
            }
            Some(s)
        })
    });
    let tp = child(ptr, "tau");
    let tau = required(o, "tau", ptr, iss).and_then(|x| per_vertex(x, q, &tp, iss, number));
    Some(StabilityParams {
        sigma: sigma?,
        tau: tau?,
    })
}

fn parse_weight(v: &Value, ptr: &str, iss: &mut Issues) -> Option<WeightField> {
    let o = object(v, ptr, iss)?;
    let kind = required(o, "kind", ptr, iss).and_then(|x| string(x, &child(ptr, "kind"), iss))?;
    let nonneg = |x: f64, p: &str, iss: &mut Issues| {
        if x < 0.0 {
            iss.push(p, "must be nonnegative");
            None
        } else {
            Some(x)
        }
    };
    match kind {
        "constant" => {
            known_keys(o, &["kind", "value"], ptr, iss);
            let p = child(ptr, "value");
            let value = required(o, "value", ptr, iss).and_then(|x| number(x, &p, iss))?;
            Some(WeightField::Constant {
                value: nonneg(value, &p, iss)?,
            })
        }
        "bump" => {
            known_keys(o, &["kind", "params"], ptr, iss);
            let pp = child(ptr, "params");
            let po = required(o, "params", ptr, iss).and_then(|x| object(x, &pp, iss))?;
            known_keys(po, &["base", "amplitude", "kappa", "x0", "y0"], &pp, iss);
            let mut get = |k: &str| required(po, k, &pp, iss).and_then(|x| number(x, &child(&pp, k), iss));
            let (base, amplitude, kappa, x0, y0) = (get("base"), get("amplitude"), get("kappa"), get("x0"), get("y0"));
            let base = nonneg(base?, &child(&pp, "base"), iss)?;
            let amplitude = nonneg(amplitude?, &child(&pp, "amplitude"), iss)?;
            Some(WeightField::Bump {
                base,
                amplitude,
                kappa: kappa?,
                x0: x0?,
                y0: y0?,
            })
        }
        other => {
            iss.push(&child(ptr, "kind"), format!("unknown weight kind {other}"));
            None
        }
    }
}

fn parse_system(
    v: &Value,
    q: &Quiver,
    params: Option<&StabilityParams>,
    ptr: &str,
    iss: &mut Issues,
) -> Option<(TorusSystem, Vec<WeightField>)> {
    let o = object(v, ptr, iss)?;
    known_keys(o, &["degrees", "weights", "N"], ptr, iss);
    let dp = child(ptr, "degrees");
    let degrees = required(o, "degrees", ptr, iss).and_then(|x| per_vertex(x, q, &dp, iss, int));
    let np = child(ptr, "N");
    let n = required(o, "N", ptr, iss)
        .and_then(|x| uint(x, &np, iss))
        .and_then(|n| {
            let n = n as usize;
            if n < 2 || !n.is_power_of_two() {
                iss.push(&np, "N must be a power of two >= 2");
                return None;
            }
            Some(n)
        });
    let wp = child(ptr, "weights");
    let weights = required(o, "weights", ptr, iss).and_then(|x| object(x, &wp, iss));
    let mut fields = Vec::new();
    if let Some(w) = weights {
        for k in w.keys() {
            if q.arrow_index(k).is_none() {
                iss.push(&child(&wp, k), "unknown arrow");
            }
        }
        for ar in q.arrows() {
            match w.get(&ar.name) {
                Some(x) => fields.push(parse_weight(x, &child(&wp, &ar.name), iss)),
                None => {
                    iss.push(&child(&wp, &ar.name), "missing arrow entry");
                    fields.push(None);
                }
            }
        }
    }
    let fields: Vec<WeightField> = fields.into_iter().collect::<Option<_>>()?;
    let (degrees, n, params) = (degrees?, n?, params?);
    if fields.len() != q.arrow_count() {
        return None;
    }
    match TorusSystem::from_fields(q.clone(), degrees, &fields, params.clone(), n) {
        Ok(s) => Some((s, fields)),
        Err(e) => {
            iss.push(ptr, format!("{}: {e}", e.code()));
            None
        }
    }
}

fn parse_higgs(
    v: &Value,
    q: &Quiver,
    grid: &TorusGrid,
    ptr: &str,
    iss: &mut Issues,
) -> Option<Vec<Option<Vec<Complex64>>>> {
    let o = object(v, ptr, iss)?;
    let before = iss.len();
    let mut out = vec![None; q.arrow_count()];
    for (k, x) in o {
        let p = child(ptr, k);
        let Some(a) = q.arrow_index(k) else {
            iss.push(&p, "unknown arrow");
            continue;
        };
        let Some(fo) = object(x, &p, iss) else { continue };
        let Some(kind) = required(fo, "kind", &p, iss).and_then(|x| string(x, &child(&p, "kind"), iss)) else {
            continue;
        };
        out[a] = match kind {
            "constant" => {
                known_keys(fo, &["kind", "value"], &p, iss);
                required(fo, "value", &p, iss)
                    .and_then(|x| complex(x, &child(&p, "value"), iss))
                    .map(|z| vec![z; grid.len()])
            }
            "mode" => {
                known_keys(fo, &["kind", "amplitude", "p", "q"], &p, iss);
                let amp = required(fo, "amplitude", &p, iss).and_then(|x| complex(x, &child(&p, "amplitude"), iss));
                let kp = required(fo, "p", &p, iss).and_then(|x| int(x, &child(&p, "p"), iss));
                let kq = required(fo, "q", &p, iss).and_then(|x| int(x, &child(&p, "q"), iss));
                match (amp, kp, kq) {
                    (Some(amp), Some(kp), Some(kq)) => Some(
                        (0..grid.len())
                            .map(|i| {
                                let (x, y) = grid.coords(i);
                                amp * Complex64::from_polar(1.0, 2.0 * PI * (kp as f64 * x + kq as f64 * y))
                            })
                            .collect(),
                    ),
                    _ => None,
                }
            }
            "samples" => {
                known_keys(fo, &["kind", "values"], &p, iss);
                let vp = child(&p, "values");
                required(fo, "values", &p, iss)
                    .and_then(|x| array(x, &vp, iss))
                    .and_then(|vals| {
                        if vals.len() != grid.len() {
                            iss.push(&vp, format!("expected {} samples", grid.len()));
                            return None;
                        }
                        vals.iter()
                            .enumerate()
                            .map(|(i, z)| complex(z, &index(&vp, i), iss))
                            .collect()
                    })
            }
            other => {
                iss.push(&child(&p, "kind"), format!("unknown field kind {other}"));
                None
            }
        };
    }
    (iss.len() == before).then_some(out)
}

// ---------------------------------------------------------------------------
// Bundles

/// Solver options carried inside an instance document.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BundleOptions {
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub seed: Option<u64>,
    pub init_scale: Option<f64>,
}

fn parse_options(v: &Value, ptr: &str, iss: &mut Issues) -> BundleOptions {
    let mut out = BundleOptions::default();
    let Some(o) = object(v, ptr, iss) else { return out };
    known_keys(o, &["tol", "max_iter", "seed", "init_scale"], ptr, iss);
    if let Some(x) = o.get("tol") {
        out.tol = number(x, &child(ptr, "tol"), iss);
    }
    if let Some(x) = o.get("max_iter") {
        out.max_iter = uint(x, &child(ptr, "max_iter"), iss).map(|n| n as usize);
    }
    if let Some(x) = o.get("seed") {
        out.seed = uint(x, &child(ptr, "seed"), iss);
    }
    if let Some(x) = o.get("init_scale") {
        out.init_scale = number(x, &child(ptr, "init_scale"), iss);
    }
    out
}

/// A validated instance document.
#[derive(Debug, Clone)]
pub struct InstanceBundle {
    pub quiver: Quiver,
    pub twist: TwistSpec,
    pub relations: Vec<Relation>,
    pub rep: Option<TwistedRep>,
    pub params: Option<StabilityParams>,
    pub system: Option<TorusSystem>,
    pub weight_fields: Vec<WeightField>,
    /// Higgs fields per arrow for the energy identity; `None` means `√w_a`.
    pub higgs: Option<Vec<Option<Vec<Complex64>>>>,
    pub options: BundleOptions,
}

pub const BUNDLE_SECTIONS: &[&str] = &["quiver", "relations", "rep", "params", "system", "higgs", "options"];

/// Parses JSON text; syntax errors become a schema issue at the root.
pub fn parse_document(text: &str) -> Result<Value> {
    serde_json::from_str(text).map_err(|e| Error::Schema {
        issues: vec![SchemaIssue {
            pointer: String::new(),
            message: format!("invalid JSON: {e}"),
        }],
    })
}

/// Places a standalone section document (`rep.json`, `params.json`, ...)
/// into a bundle under `section`.
pub fn merge_section(bundle: &mut Value, section: &str, mut doc: Value) {
    if let Some(o) = doc.as_object_mut() {
        o.remove("schema");
    }
    if !bundle.is_object() {
        *bundle = Value::Object(Map::new());
    }
    bundle.as_object_mut().expect("object").insert(section.to_string(), doc);
}

pub fn load_bundle(doc: &Value) -> Result<InstanceBundle> {
    let mut iss = Issues::default();
    let fail = |iss: Issues| Error::Schema { issues: iss.0 };
    let Some(o) = object(doc, "", &mut iss) else {
        return Err(fail(iss));
    };
    let mut allowed = BUNDLE_SECTIONS.to_vec();
    allowed.push("schema");
    known_keys(o, &allowed, "", &mut iss);
    if let Some(s) = o.get("schema") {
        if s.as_str() != Some(SCHEMA_VERSION) {
            iss.push("/schema", format!("unsupported schema, expected \"{SCHEMA_VERSION}\""));
        }
    }
    let qt = required(o, "quiver", "", &mut iss).and_then(|q| parse_quiver(q, "/quiver", &mut iss));
    let options = o
        .get("options")
        .map(|x| parse_options(x, "/options", &mut iss))
        .unwrap_or_default();
    let Some((quiver, twist)) = qt else {
        return Err(fail(iss));
    };
    let relations = o
        .get("relations")
        .and_then(|x| parse_relations(x, &quiver, "/relations", &mut iss))
        .unwrap_or_default();
    let rep = o
        .get("rep")
        .and_then(|x| parse_rep(x, &quiver, &twist, "/rep", &mut iss));
    let params = o
        .get("params")
        .and_then(|x| parse_params(x, &quiver, "/params", &mut iss));
    let mut system = None;
    let mut weight_fields = Vec::new();
    if let Some(x) = o.get("system") {
        if !o.contains_key("params") {
            iss.push("/params", "a torus system requires params");
        }
        if let Some((s, f)) = parse_system(x, &quiver, params.as_ref(), "/system", &mut iss) {
            system = Some(s);
            weight_fields = f;
        }
    }
    let higgs = match (o.get("higgs"), &system) {
        (None, _) => None,
        (Some(x), Some(s)) => parse_higgs(x, &quiver, &s.grid, "/higgs", &mut iss),
        (Some(_), None) => {
            iss.push("/higgs", "higgs fields require a torus system");
            None
        }
    };
    if iss.len() > 0 {
        return Err(fail(iss));
    }
    Ok(InstanceBundle {
        quiver,
        twist,
        relations,
        rep,
        params,
        system,
        weight_fields,
        higgs,
        options,
    })
}

// ---------------------------------------------------------------------------
// Writers

pub fn complex_json(z: Complex64) -> Value {
    json!([z.re, z.im])
}

pub fn matrix_json(m: &CMatrix) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array((0..m.ncols()).map(|j| complex_json(m[(i, j)])).collect()))
            .collect(),
    )
}

fn vertex_map<T>(q: &Quiver, items: &[T], f: impl Fn(&T) -> Value) -> Value {
    Value::Object(q.vertices().iter().zip(items).map(|(v, x)| (v.clone(), f(x))).collect())
}

pub fn quiver_json(q: &Quiver, twist: &TwistSpec) -> Value {
    let arrows: Vec<Value> = q
        .arrows()
        .iter()
        .enumerate()
        .map(|(a, ar)| {
            let mut o = json!({
                "id": ar.name,
                "tail": q.vertices()[ar.tail],
                "head": q.vertices()[ar.head],
                "twist_dim": twist.multiplicity(a),
            });
            let w = &twist.weights[a];
            if *w != linalg::identity(w.nrows()) {
                let entries: Vec<Value> = (0..w.nrows())
                    .flat_map(|i| (0..w.ncols()).map(move |j| (i, j)))
                    .map(|(i, j)| complex_json(w[(i, j)]))
                    .collect();
                o["twist_weight"] = Value::Array(entries);
            }
            o
        })
        .collect();
    json!({ "vertices": q.vertices(), "arrows": arrows })
}

pub fn rep_json(rep: &TwistedRep) -> Value {
    let q = rep.quiver();
    let arrows: Map<String, Value> = q
        .arrows()
        .iter()
        .enumerate()
        .map(|(a, ar)| {
            (
                ar.name.clone(),
                Value::Array(rep.slices(a).iter().map(matrix_json).collect()),
            )
        })
        .collect();
    json!({
        "dims": vertex_map(q, rep.dims(), |n| json!(n)),
        "arrows": arrows,
    })
}

pub fn params_json(q: &Quiver, p: &StabilityParams) -> Value {
    json!({
        "sigma": vertex_map(q, &p.sigma, |x| json!(x)),
        "tau": vertex_map(q, &p.tau, |x| json!(x)),
    })
}

pub fn relations_json(q: &Quiver, rels: &[Relation]) -> Value {
    Value::Array(
        rels.iter()
            .map(|r| {
                let terms: Vec<Value> = r
                    .terms
                    .iter()
                    .map(|(c, p)| {
                        let names: Vec<&str> = p.arrows().iter().map(|&a| q.arrow(a).name.as_str()).collect();
                        let mut t = json!({ "coeff": complex_json(*c), "path": names });
                        if p.is_trivial() {
                            t["vertex"] = json!(q.vertices()[p.source()]);
                        }
                        t
                    })
                    .collect();
                json!({ "terms": terms })
            })
            .collect(),
    )
}

pub fn weight_json(w: &WeightField) -> Value {
    match *w {
        WeightField::Constant { value } => json!({ "kind": "constant", "value": value }),
        WeightField::Bump {
            base,
            amplitude,
            kappa,
            x0,
            y0,
        } => json!({
            "kind": "bump",
            "params": { "base": base, "amplitude": amplitude, "kappa": kappa, "x0": x0, "y0": y0 },
        }),
    }
}

pub fn system_json(system: &TorusSystem, fields: &[WeightField]) -> Value {
    let q = &system.quiver;
    let weights: Map<String, Value> = q
        .arrows()
        .iter()
        .zip(fields)
        .map(|(ar, w)| (ar.name.clone(), weight_json(w)))
        .collect();
    json!({
        "degrees": vertex_map(q, &system.degrees, |d| json!(d)),
        "weights": weights,
        "N": system.grid.n(),
    })
}

pub fn witness_json(q: &Quiver, w: &SubrepWitness) -> Value {
    json!({
        "dims": vertex_map(q, &w.dims(), |n| json!(n)),
        "basis": vertex_map(q, &w.bases, matrix_json),
    })
}

pub fn verdict_json(q: &Quiver, v: &Verdict) -> Value {
    json!({
        "verdict": v.tag,
        "source": v.source,
        "rep_slope": v.rep_slope,
        "candidates": v.candidates,
        "witness": v.witness.as_ref().map(|(w, slope)| {
            let mut o = witness_json(q, w);
            o["slope"] = json!(slope);
            o
        }),
    })
}

pub fn filtration_json(q: &Quiver, steps: &[FiltrationStep]) -> Value {
    Value::Array(
        steps
            .iter()
            .map(|s| {
                let mut o = witness_json(q, &s.witness);
                o["slope"] = json!(s.slope);
                o["boundary"] = json!(s.boundary);
                o["leakage"] = json!(s.leakage);
                o
            })
            .collect(),
    )
}

/// Flow report; the iteration log goes to CSV instead.
pub fn flow_report_json(q: &Quiver, report: &FlowReport) -> Result<Value> {
    let h = report.final_metric.metric()?;
    Ok(json!({
        "status": report.status,
        "residual_norm": report.residual_norm,
        "iterations": report.iterations,
        "newton_step": report.newton_step,
        "metric": vertex_map(q, &h, matrix_json),
        "log_metric": vertex_map(q, &report.final_metric.s, matrix_json),
        "limit_direction": report
            .limit_direction
            .as_ref()
            .map(|u| vertex_map(q, u, matrix_json)),
    }))
}

pub fn flow_csv(log: &[IterRecord]) -> String {
    let mut out = format!("{FLOW_CSV_HEADER}\n");
    for r in log {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.iter,
            format_g17(r.kempf_ness),
            format_g17(r.residual_norm),
            format_g17(r.step),
            format_g17(r.s_norm)
        ));
    }
    out
}

pub fn newton_csv(history: &[NewtonRecord]) -> String {
    let mut out = format!("{NEWTON_CSV_HEADER}\n");
    for r in history {
        out.push_str(&format!(
            "{},{},{}\n",
            r.iter,
            format_g17(r.sup_residual),
            format_g17(r.damping)
        ));
    }
    out
}

/// `QVTX1`: magic, `u32` LE `N`, `u32` LE vertex count, then each vertex
/// field as `N²` row-major `f64` LE, vertices sorted by name.
pub fn write_qvtx(system: &TorusSystem, state: &PotentialState) -> Vec<u8> {
    let q = &system.quiver;
    let mut order: Vec<usize> = (0..q.vertex_count()).collect();
    order.sort_by(|&a, &b| q.vertices()[a].cmp(&q.vertices()[b]));
    let mut out = Vec::with_capacity(13 + 8 * system.grid.len() * order.len());
    out.extend_from_slice(QVTX_MAGIC);
    out.extend_from_slice(&(system.grid.n() as u32).to_le_bytes());
    out.extend_from_slice(&(order.len() as u32).to_le_bytes());
    for v in order {
        for x in &state.u[v] {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

/// Inverse of [`write_qvtx`]: `(N, fields in sorted vertex order)`.
pub fn read_qvtx(bytes: &[u8]) -> Result<(usize, Vec<Vec<f64>>)> {
    let bad = |m: &str| Error::Io(io::Error::new(io::ErrorKind::InvalidData, m.to_string()));
    if bytes.len() < 13 || &bytes[..5] != QVTX_MAGIC {
        return Err(bad("not a QVTX1 file"));
    }
    let n = u32::from_le_bytes(bytes[5..9].try_into().expect("4 bytes")) as usize;
    let nv = u32::from_le_bytes(bytes[9..13].try_into().expect("4 bytes")) as usize;
    let body = &bytes[13..];
    if body.len() != 8 * n * n * nv {
        return Err(bad("QVTX1 payload length does not match header"));
    }
    let values: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let fields = if n == 0 {
        vec![Vec::new(); nv]
    } else {
        values.chunks(n * n).map(<[f64]>::to_vec).collect()
    };
    Ok((n, fields))
}
