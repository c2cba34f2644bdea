//! INI-style run configuration: `key = value` lines under `[section]`
//! headers, `#` comments.
//!
//! ```text
//! [market]
//! v = 0.025
//! n = 1
//! ...
//! [anchors]
//! served0 = 7500
//! price0 = 37000
//! [dynamics]
//! mode = capacity
//! horizon = 10
//! dt = 0.01
//! [io]
//! out = traj.csv
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::calibration::AnchorConditions;
use crate::dynamics::{ScenarioConfig, DEFAULT_DT, DEFAULT_HORIZON};
use crate::equilibrium::SlopeMode;
use crate::error::{Error, Result};
use crate::model::{ModelParams, PARAM_NAMES};

const SECTIONS: [&str; 4] = ["market", "anchors", "dynamics", "io"];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IoPaths {
    pub out: Option<PathBuf>,
    pub fig2: Option<PathBuf>,
    pub fig3: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Market constants; `F0`/`g0` hold 1 when they are left to the anchors.
    pub params: ModelParams<f64>,
    pub anchors: Option<AnchorConditions<f64>>,
    pub mode: SlopeMode,
    pub horizon: f64,
    pub dt: f64,
    pub io: IoPaths,
}

struct Entry {
    value: String,
    line: usize,
}

type Sections = BTreeMap<String, BTreeMap<String, Entry>>;

fn at(origin: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::DataAt {
        path: origin.to_string(),
        line: line as u64,
        msg: msg.into(),
    }
}

fn parse_sections(text: &str, origin: &str) -> Result<Sections> {
    let mut sections = Sections::new();
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(name) = body.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            let name = name.trim().to_string();
            if !SECTIONS.contains(&name.as_str()) {
                return Err(at(origin, line, format!("unknown section [{name}]")));
            }
            sections.entry(name.clone()).or_default();
            current = Some(name);
            continue;
        }
        let (key, value) = body
            .split_once('=')
            .ok_or_else(|| at(origin, line, format!("expected `key = value`, got `{body}`")))?;
        let section = current
            .as_ref()
            .ok_or_else(|| at(origin, line, "key outside of any [section]"))?;
        let key = key.trim().to_string();
        let entries = sections.get_mut(section).expect("section registered");
        if entries.contains_key(&key) {
            return Err(at(origin, line, format!("duplicate key `{key}` in [{section}]")));
        }
        entries.insert(
            key,
            Entry {
                value: value.trim().to_string(),
                line,
            },
        );
    }
    Ok(sections)
}

fn number(origin: &str, section: &str, key: &str, e: &Entry) -> Result<f64> {
    e.value
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| at(origin, e.line, format!("[{section}] {key}: `{}` is not a number", e.value)))
}

impl RunConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut sections = parse_sections(text, origin)?;
        let empty = BTreeMap::new();

        let market = sections.remove("market").unwrap_or_default();
        for (key, e) in &market {
            if !PARAM_NAMES.contains(&key.as_str()) && key != "f0" {
                return Err(at(origin, e.line, format!("unknown market key `{key}`")));
            }
        }
        let anchors_sec = sections.remove("anchors");
        let anchors = match &anchors_sec {
            None => None,
            Some(sec) => {
                let get = |k: &str| {
                    sec.get(k)
                        .ok_or_else(|| Error::Data(format!("{origin}: [anchors] is missing `{k}`")))
                        .and_then(|e| number(origin, "anchors", k, e))
                };
                if let Some((k, e)) = sec.iter().find(|(k, _)| !["served0", "price0"].contains(&k.as_str())) {
                    return Err(at(origin, e.line, format!("unknown anchors key `{k}`")));
                }
                Some(AnchorConditions {
                    served0: get("served0")?,
                    price0: get("price0")?,
                })
            }
        };

        let mut params = ModelParams {
            f0: 1.0,
            g0: 1.0,
            ..ModelParams::german_baseline()
        };
        for name in PARAM_NAMES {
            let entry = market.get(name).or_else(|| if name == "F0" { market.get("f0") } else { None });
            match entry {
                Some(e) => params.set(name, number(origin, "market", name, e)?)?,
                None if anchors.is_some() && (name == "F0" || name == "g0") => {}
                None => {
                    return Err(Error::Data(format!("{origin}: [market] is missing `{name}`")));
                }
            }
        }

        let dynamics = sections.get("dynamics").unwrap_or(&empty);
        let mut mode = SlopeMode::CapacityBalance;
        let mut horizon = DEFAULT_HORIZON;
        let mut dt = DEFAULT_DT;
        for (key, e) in dynamics {
            match key.as_str() {
                "mode" => mode = e.value.parse().map_err(|err: Error| at(origin, e.line, err.to_string()))?,
                "horizon" => horizon = number(origin, "dynamics", key, e)?,
                "dt" => dt = number(origin, "dynamics", key, e)?,
                _ => return Err(at(origin, e.line, format!("unknown dynamics key `{key}`"))),
            }
        }

        let io_sec = sections.get("io").unwrap_or(&empty);
        let mut io = IoPaths::default();
        for (key, e) in io_sec {
            let slot = match key.as_str() {
                "out" => &mut io.out,
                "fig2" => &mut io.fig2,
                "fig3" => &mut io.fig3,
                _ => return Err(at(origin, e.line, format!("unknown io key `{key}`"))),
            };
            *slot = Some(PathBuf::from(&e.value));
        }

        let cfg = RunConfig {
            params,
            anchors,
            mode,
            horizon,
            dt,
            io,
        };
        cfg.scenario().validate()?;
        cfg.scenario().effective_params()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn scenario(&self) -> ScenarioConfig<f64> {
        ScenarioConfig {
            params: self.params,
            mode: self.mode,
            horizon: self.horizon,
            dt: self.dt,
            anchors: self.anchors,
        }
    }

    /// Serializes the configuration; `parse(to_ini())` gives back `self`.
    pub fn to_ini(&self) -> String {
        let mut s = String::from("[market]\n");
        for name in PARAM_NAMES {
            if self.anchors.is_some() && (name == "F0" || name == "g0") {
                continue;
            }
            let _ = writeln!(s, "{name} = {}", self.params.get(name).expect("known name"));
        }
        if let Some(a) = &self.anchors {
            let _ = write!(s, "\n[anchors]\nserved0 = {}\nprice0 = {}\n", a.served0, a.price0);
        }
        let _ = write!(
            s,
            "\n[dynamics]\nmode = {}\nhorizon = {}\ndt = {}\n",
            self.mode, self.horizon, self.dt
        );
        let paths = [("out", &self.io.out), ("fig2", &self.io.fig2), ("fig3", &self.io.fig3)];
        if paths.iter().any(|(_, p)| p.is_some()) {
            s.push_str("\n[io]\n");
            for (k, p) in paths {
                if let Some(p) = p {
                    let _ = writeln!(s, "{k} = {}", p.display());
                }
            }
        }
        s
    }
}
