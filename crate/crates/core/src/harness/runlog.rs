//! Per-tick run log and its CSV form.
//!
//! The file starts with `# key=value` metadata lines, then a header row and
//! one row per control tick. Floats are written in Rust's shortest
//! round-trip form, so a parsed log reproduces the in-memory values bit for
//! bit. Undefined values (θ without a usable force, contact point without
//! contact) are written as `NaN`.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::HarnessError;
use crate::rot3::Vec3;

#[derive(Clone, Debug, PartialEq)]
pub struct RunMetadata {
    pub scenario: String,
    pub config_hash: String,
    pub seed: u64,
    pub control_rate: f64,
    pub physics_rate: f64,
    /// Coulomb coefficient of the surface; `None` for approach-only runs
    pub friction: Option<f64>,
    pub dof: usize,
    pub version: String,
}

impl RunMetadata {
    fn to_pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("scenario", self.scenario.clone()),
            ("config_hash", self.config_hash.clone()),
            ("seed", self.seed.to_string()),
            ("control_rate", self.control_rate.to_string()),
            ("physics_rate", self.physics_rate.to_string()),
            (
                "friction",
                self.friction.map_or_else(|| "none".into(), |m| m.to_string()),
            ),
            ("dof", self.dof.to_string()),
            ("version", self.version.clone()),
        ]
    }

    fn from_pairs(map: &BTreeMap<String, String>) -> Result<Self, HarnessError> {
        let get = |k: &str| {
            map.get(k)
                .cloned()
                .ok_or_else(|| HarnessError::MalformedLog(format!("missing metadata '{k}'")))
        };
        let num = |k: &str| -> Result<f64, HarnessError> {
            get(k)?
                .parse()
                .map_err(|_| HarnessError::MalformedLog(format!("metadata '{k}' is not a number")))
        };
        let friction = match get("friction")?.as_str() {
            "none" => None,
            s => Some(
                s.parse()
                    .map_err(|_| HarnessError::MalformedLog("metadata 'friction' is not a number".into()))?,
            ),
        };
        Ok(Self {
            scenario: get("scenario")?,
            config_hash: get("config_hash")?,
            seed: get("seed")?
                .parse()
                .map_err(|_| HarnessError::MalformedLog("metadata 'seed' is not an integer".into()))?,
            control_rate: num("control_rate")?,
            physics_rate: num("physics_rate")?,
            friction,
            dof: get("dof")?
                .parse()
                .map_err(|_| HarnessError::MalformedLog("metadata 'dof' is not an integer".into()))?,
            version: get("version")?,
        })
    }
}

/// One control tick.
#[derive(Clone, Debug, PartialEq)]
pub struct TickRecord {
    pub tick: usize,
    /// `tick / control_rate`, seconds
    pub time: f64,
    /// estimated pseudo-force in {C}; zero when the estimate is inactive
    pub f: Vec3,
    /// `None` when no usable force was measured
    pub theta: Option<f64>,
    pub p: f64,
    pub y: u8,
    pub q: Vec<f64>,
    pub tau_motion: Vec<f64>,
    pub tau_task: Vec<f64>,
    pub tau_cmd: Vec<f64>,
    pub tau_applied: Vec<f64>,
    pub saturated: bool,
    /// the tactile estimate crossed the activation threshold
    pub active: bool,
    // ground truth
    pub in_contact: bool,
    /// N
    pub normal_force: f64,
    /// N
    pub tangential_force: f64,
    pub slip: bool,
    /// force the finger exerts on the body, {W}, N
    pub f_ext: Vec3,
    /// true contact point in {E}; NaN without contact
    pub contact_point: Vec3,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunLog {
    pub meta: RunMetadata,
    pub rows: Vec<TickRecord>,
}

fn vec_cols(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}{i}"))
}

/// Column names in file order for a chain with `dof` joints.
pub fn header(dof: usize) -> Vec<String> {
    let mut h: Vec<String> = ["tick", "time", "f_x", "f_y", "f_z", "theta", "p", "y"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for prefix in ["q", "tau_motion", "tau_task", "tau_cmd", "tau_applied"] {
        h.extend(vec_cols(prefix, dof));
    }
    h.extend(
        [
            "saturated",
            "active",
            "in_contact",
            "normal_force",
            "tangential_force",
            "slip",
            "f_ext_x",
            "f_ext_y",
            "f_ext_z",
            "contact_x",
            "contact_y",
            "contact_z",
        ]
        .iter()
        .map(|s| s.to_string()),
    );
    h
}

fn flag(b: bool) -> String {
    u8::from(b).to_string()
}

impl TickRecord {
    fn to_fields(&self) -> Vec<String> {
        let mut out = vec![
            self.tick.to_string(),
            self.time.to_string(),
            self.f.x.to_string(),
            self.f.y.to_string(),
            self.f.z.to_string(),
            self.theta.unwrap_or(f64::NAN).to_string(),
            self.p.to_string(),
            self.y.to_string(),
        ];
        for v in [
            &self.q,
            &self.tau_motion,
            &self.tau_task,
            &self.tau_cmd,
            &self.tau_applied,
        ] {
            out.extend(v.iter().map(|x| x.to_string()));
        }
        out.extend([
            flag(self.saturated),
            flag(self.active),
            flag(self.in_contact),
            self.normal_force.to_string(),
            self.tangential_force.to_string(),
            flag(self.slip),
        ]);
        out.extend(self.f_ext.iter().map(|x| x.to_string()));
        out.extend(self.contact_point.iter().map(|x| x.to_string()));
        out
    }

    fn from_fields(rec: &csv::StringRecord, dof: usize, line: usize) -> Result<Self, HarnessError> {
        let bad =
            |col: usize, what: &str| HarnessError::MalformedLog(format!("line {line}, column {}: {what}", col + 1));
        let expected = header(dof).len();
        if rec.len() != expected {
            return Err(HarnessError::MalformedLog(format!(
                "line {line}: {} fields, expected {expected}",
                rec.len()
            )));
        }
        let f = |i: usize| -> Result<f64, HarnessError> { rec[i].parse().map_err(|_| bad(i, "not a number")) };
        let b = |i: usize| -> Result<bool, HarnessError> {
            match &rec[i] {
                "0" => Ok(false),
                "1" => Ok(true),
                _ => Err(bad(i, "expected 0 or 1")),
            }
        };
        let block = |start: usize| -> Result<Vec<f64>, HarnessError> { (start..start + dof).map(f).collect() };
        let theta = f(5)?;
        let y = match &rec[7] {
            "0" => 0,
            "1" => 1,
            _ => return Err(bad(7, "expected 0 or 1")),
        };
        let base = 8 + 5 * dof;
        Ok(Self {
            tick: rec[0].parse().map_err(|_| bad(0, "not a tick index"))?,
            time: f(1)?,
            f: Vec3::new(f(2)?, f(3)?, f(4)?),
            theta: (!theta.is_nan()).then_some(theta),
            p: f(6)?,
            y,
            q: block(8)?,
            tau_motion: block(8 + dof)?,
            tau_task: block(8 + 2 * dof)?,
            tau_cmd: block(8 + 3 * dof)?,
            tau_applied: block(8 + 4 * dof)?,
            saturated: b(base)?,
            active: b(base + 1)?,
            in_contact: b(base + 2)?,
            normal_force: f(base + 3)?,
            tangential_force: f(base + 4)?,
            slip: b(base + 5)?,
            f_ext: Vec3::new(f(base + 6)?, f(base + 7)?, f(base + 8)?),
            contact_point: Vec3::new(f(base + 9)?, f(base + 10)?, f(base + 11)?),
        })
    }
}

impl RunLog {
    pub fn write<W: Write>(&self, mut out: W) -> Result<(), HarnessError> {
        let io = |e| HarnessError::io("<run log>", e);
        for (k, v) in self.meta.to_pairs() {
            writeln!(out, "# {k}={v}").map_err(io)?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(header(self.meta.dof))?;
        for row in &self.rows {
            w.write_record(row.to_fields())?;
        }
        w.flush().map_err(io)?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }

    pub fn save(&self, path: &Path) -> Result<(), HarnessError> {
        let file = std::fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
        self.write(std::io::BufWriter::new(file))
    }

    pub fn read<R: BufRead>(mut input: R) -> Result<Self, HarnessError> {
        let mut meta = BTreeMap::new();
        let mut line = String::new();
        let mut body = String::new();
        let mut lineno = 0;
        loop {
            line.clear();
            let n = input
                .read_line(&mut line)
                .map_err(|e| HarnessError::io("<run log>", e))?;
            if n == 0 {
                break;
            }
            lineno += 1;
            if let Some(rest) = line.strip_prefix('#') {
                let (k, v) = rest
                    .trim()
                    .split_once('=')
                    .ok_or_else(|| HarnessError::MalformedLog(format!("line {lineno}: bad metadata line")))?;
                meta.insert(k.trim().to_string(), v.trim().to_string());
            } else {
                body.push_str(&line);
                input
                    .read_to_string(&mut body)
                    .map_err(|e| HarnessError::io("<run log>", e))?;
                break;
            }
        }
        let meta = RunMetadata::from_pairs(&meta)?;
        let mut r = csv::Reader::from_reader(body.as_bytes());
        let hdr = r.headers()?.clone();
        let expected = header(meta.dof);
        if hdr.iter().ne(expected.iter().map(String::as_str)) {
            return Err(HarnessError::MalformedLog(
                "header does not match the documented column order".into(),
            ));
        }
        let mut rows = Vec::new();
        for (i, rec) in r.records().enumerate() {
            rows.push(TickRecord::from_fields(&rec?, meta.dof, lineno + 1 + i)?);
        }
        Ok(Self { meta, rows })
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let file = std::fs::File::open(path).map_err(|e| HarnessError::io(path, e))?;
        Self::read(std::io::BufReader::new(file))
    }
}
