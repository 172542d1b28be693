use crate::handover::{HandoverParams, World};
use crate::mounting::{Fixture, MountParams};
use crate::pick::{PickConfig, PickParams};
use crate::segmentation::SegParams;
use crate::sim::{BinDims, DloSpec, GenParams, HeldParams, JawGeometry, SensorNoise, Workspace};
use crate::tracking::TrackParams;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("config error at `{path}`: {msg}")]
pub struct ConfigError {
    /// Dotted path of the offending field; empty for the whole document.
    pub path: String,
    pub msg: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, msg: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            msg: msg.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    BinPicking,
    Tracking,
    Handover,
    FullPipeline,
}

/// Scene generation knobs shared by all experiment kinds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub spec: DloSpec,
    pub n_dlos: usize,
    pub bin: BinDims,
    pub gen: GenParams,
    pub held: HeldParams,
    /// Camera pixel pitch over the bin, meters.
    pub pitch: f64,
}

/// One JSON document describing an experiment. Loading starts from the
/// defaults of the document's `kind`, so a file only lists what it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    /// Bins for bin picking, scenes for tracking, seeds per
    /// (shape, L_g) cell for handover. Ignored by the full pipeline.
    pub trials: usize,
    pub scene: SceneConfig,
    pub noise: SensorNoise,
    pub seg: SegParams,
    pub pick: PickParams,
    pub jaws: JawGeometry,
    pub workspace: Workspace,
    pub track: TrackParams,
    pub handover: HandoverParams,
    /// Held DLO shapes swept by the handover experiment.
    pub configs: usize,
    pub l_g_values: Vec<f64>,
    /// First-arm in-hand offsets are drawn across the DLO in this range, meters.
    pub offset_range: f64,
    /// Keep-out sphere around the first arm's TCP during handover, meters.
    pub keepout_radius: f64,
    pub mount: MountParams,
    pub fixtures: Vec<Fixture>,
    pub world: World,
}

impl ExperimentConfig {
    pub fn for_kind(kind: ExperimentKind) -> Self {
        let base = Self {
            kind,
            seed: 0,
            trials: 5,
            scene: SceneConfig {
                spec: DloSpec::hv_cable(),
                n_dlos: 31,
                bin: BinDims::default(),
                gen: GenParams::default(),
                held: HeldParams::default(),
                pitch: 0.001,
            },
            noise: SensorNoise::default(),
            seg: SegParams::default(),
            pick: PickParams::default(),
            jaws: JawGeometry::picking(),
            workspace: Workspace::default(),
            track: TrackParams::for_diameter(DloSpec::power_cable().diameter),
            handover: HandoverParams::default(),
            configs: 4,
            l_g_values: (8..=15).map(|c| c as f64 / 100.0).collect(),
            offset_range: 0.0045,
            keepout_radius: 0.04,
            mount: MountParams::default(),
            fixtures: Fixture::default_rig(),
            world: World::default(),
        };
        match kind {
            ExperimentKind::BinPicking => base,
            ExperimentKind::Tracking => Self {
                trials: 100,
                ..base
            },
            ExperimentKind::Handover => Self { trials: 50, ..base },
            ExperimentKind::FullPipeline => {
                let mut c = base;
                c.trials = 1;
                c.scene.spec = DloSpec::power_cable();
                c.scene.n_dlos = 18;
                c.scene.held.spec = DloSpec::power_cable();
                c.pick.r = 0.9;
                c.seg.t_merge = 0.3;
                c.seg.a_threshold = 4000;
                c.handover.l_g = 0.10;
                c
            }
        }
    }

    /// Parse a document, layering it over the defaults of its kind and then
    /// applying `key=value` overrides with dotted keys.
    pub fn from_json(doc: &str, overrides: &[(String, String)]) -> Result<Self, ConfigError> {
        let user: Value =
            serde_json::from_str(doc).map_err(|e| ConfigError::new("", e.to_string()))?;
        Self::from_value(user, overrides)
    }

    pub fn from_value(user: Value, overrides: &[(String, String)]) -> Result<Self, ConfigError> {
        if !user.is_object() {
            return Err(ConfigError::new("", "expected a JSON object"));
        }
        let mut user = user;
        // `kind` may itself be overridden, so settle it first.
        for (k, v) in overrides.iter().filter(|(k, _)| k == "kind") {
            set_path(&mut user, k, v)?;
        }
        let kind = match user.get("kind") {
            Some(k) => serde_json::from_value::<ExperimentKind>(k.clone())
                .map_err(|e| ConfigError::new("kind", e.to_string()))?,
            None => return Err(ConfigError::new("kind", "missing")),
        };
        let mut merged = serde_json::to_value(Self::for_kind(kind)).expect("config serializes");
        merge(&mut merged, &user, "")?;
        for (k, v) in overrides {
            set_path(&mut merged, k, v)?;
        }
        let cfg: Self = serde_json::from_value(merged.clone()).map_err(|e| locate(&merged, e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_overrides(&self, overrides: &[(String, String)]) -> Result<Self, ConfigError> {
        Self::from_value(
            serde_json::to_value(self).expect("config serializes"),
            overrides,
        )
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.scene.spec.validate().map_err(at("scene.spec"))?;
        self.scene
            .held
            .spec
            .validate()
            .map_err(at("scene.held.spec"))?;
        if !(0.0..=1.0).contains(&self.scene.held.grasp_ratio) {
            return Err(ConfigError::new(
                "scene.held.grasp_ratio",
                "must lie in [0, 1]",
            ));
        }
        if self.scene.pitch <= 0.0 || self.scene.held.pitch <= 0.0 {
            return Err(ConfigError::new("scene.pitch", "must be positive"));
        }
        if self.kind != ExperimentKind::Handover
            && self.kind != ExperimentKind::Tracking
            && self.scene.n_dlos == 0
        {
            return Err(ConfigError::new(
                "scene.n_dlos",
                "at least one DLO is required",
            ));
        }
        self.noise.validate().map_err(at("noise"))?;
        self.seg.validate().map_err(at("seg"))?;
        self.pick.validate().map_err(at("pick"))?;
        self.track.validate().map_err(at("track"))?;
        self.handover.validate().map_err(at("handover"))?;
        self.mount.validate().map_err(at("mount"))?;
        self.world.validate().map_err(at("world"))?;
        let mounted = if self.kind == ExperimentKind::FullPipeline {
            self.scene.spec
        } else {
            self.scene.held.spec
        };
        for (i, f) in self.fixtures.iter().enumerate() {
            f.validate(mounted.diameter)
                .map_err(at(format!("fixtures.{i}")))?;
        }
        if let Some(i) = self
            .l_g_values
            .iter()
            .position(|l| !(l.is_finite() && *l > 0.0))
        {
            return Err(ConfigError::new(
                format!("l_g_values.{i}"),
                "must be positive",
            ));
        }
        if !(self.offset_range >= 0.0 && self.offset_range.is_finite()) {
            return Err(ConfigError::new("offset_range", "must be non-negative"));
        }
        if !(self.keepout_radius >= 0.0 && self.keepout_radius.is_finite()) {
            return Err(ConfigError::new("keepout_radius", "must be non-negative"));
        }
        Ok(())
    }

    pub fn pick_config(&self) -> PickConfig {
        PickConfig {
            seg: self.seg,
            pick: self.pick,
            noise: self.noise,
            pitch: self.scene.pitch,
            jaws: self.jaws,
            workspace: self.workspace,
        }
    }
}

fn at<E: std::fmt::Display>(path: impl Into<String>) -> impl FnOnce(E) -> ConfigError {
    let path = path.into();
    move |e| ConfigError::new(path, e.to_string())
}

fn merge(base: &mut Value, user: &Value, path: &str) -> Result<(), ConfigError> {
    match (base, user) {
        (Value::Object(b), Value::Object(u)) => {
            for (k, v) in u {
                let sub = join(path, k);
                match b.get_mut(k) {
                    Some(slot) => merge(slot, v, &sub)?,
                    None => return Err(ConfigError::new(sub, "unknown field")),
                }
            }
            Ok(())
        }
        (slot, v) => {
            *slot = v.clone();
            Ok(())
        }
    }
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

/// Set the leaf at a dotted path. The value is read as JSON when it parses
/// and as a bare string otherwise, so `pick.r=0.99` and `kind=handover`
/// both work. Numeric segments index arrays.
pub fn set_path(root: &mut Value, key: &str, raw: &str) -> Result<(), ConfigError> {
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cur = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let here = parts[..=i].join(".");
        let next = match cur {
            Value::Object(m) => {
                if !m.contains_key(*part) && (i + 1 < parts.len() || here != "kind") {
                    return Err(ConfigError::new(here, "unknown field"));
                }
                m.entry(part.to_string()).or_insert(Value::Null)
            }
            Value::Array(a) => {
                let idx: usize = part
                    .parse()
                    .map_err(|_| ConfigError::new(&here, "expected an array index"))?;
                let len = a.len();
                a.get_mut(idx).ok_or_else(|| {
                    ConfigError::new(&here, format!("index out of range (len {len})"))
                })?
            }
            _ => return Err(ConfigError::new(here, "not a container")),
        };
        cur = next;
    }
    *cur = value;
    Ok(())
}

/// Field path for a deserialization error: the first leaf that fails to
/// deserialize when placed alone into the defaults of the same kind.
fn locate(doc: &Value, e: serde_json::Error) -> ConfigError {
    let msg = e.to_string();
    let kind = doc
        .get("kind")
        .and_then(|k| serde_json::from_value(k.clone()).ok())
        .unwrap_or(ExperimentKind::BinPicking);
    let base = serde_json::to_value(ExperimentConfig::for_kind(kind)).expect("config serializes");
    let fails = |path: &str, v: &Value| {
        let mut tv = base.clone();
        set_path(&mut tv, path, &v.to_string()).is_ok()
            && serde_json::from_value::<ExperimentConfig>(tv).is_err()
    };
    let mut stack = vec![(String::new(), doc)];
    while let Some((path, v)) = stack.pop() {
        match v {
            Value::Object(m) => {
                for (k, sub) in m.iter().rev() {
                    stack.push((join(&path, k), sub));
                }
            }
            Value::Array(a) if !a.iter().all(Value::is_number) => {
                for (i, sub) in a.iter().enumerate().rev() {
                    stack.push((join(&path, &i.to_string()), sub));
                }
            }
            _ if fails(&path, v) => return ConfigError::new(path, msg),
            _ => {}
        }
    }
    ConfigError::new("", msg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_defaults_are_layered() {
        let cfg =
            ExperimentConfig::from_json(r#"{"kind": "full-pipeline", "seed": 7}"#, &[]).unwrap();
        assert_eq!(cfg.scene.n_dlos, 18);
        assert_eq!(cfg.seg.a_threshold, 4000);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.pick.r, 0.9);
    }

    #[test]
    fn dotted_overrides() {
        let o = vec![
            ("pick.r".to_string(), "0.99".to_string()),
            ("fixtures.1.tolerance".to_string(), "0.002".to_string()),
        ];
        let cfg = ExperimentConfig::from_json(r#"{"kind": "full-pipeline"}"#, &o).unwrap();
        assert_eq!(cfg.pick.r, 0.99);
        assert_eq!(cfg.fixtures[1].tolerance, 0.002);
        let cfg = ExperimentConfig::from_json(
            r#"{"kind": "tracking"}"#,
            &[("kind".into(), "handover".into())],
        )
        .unwrap();
        assert_eq!(cfg.kind, ExperimentKind::Handover);
        assert_eq!(cfg.trials, 50);
    }

    #[test]
    fn errors_carry_the_field_path() {
        let e =
            ExperimentConfig::from_json(r#"{"kind": "bin-picking", "pick": {"bogus": 1}}"#, &[])
                .unwrap_err();
        assert_eq!(e.path, "pick.bogus");
        let e =
            ExperimentConfig::from_json(r#"{"kind": "bin-picking", "pick": {"r": "high"}}"#, &[])
                .unwrap_err();
        assert_eq!(e.path, "pick.r");
        let e = ExperimentConfig::from_json(
            r#"{"kind": "bin-picking"}"#,
            &[("seg.t_merge".into(), "1.5".into())],
        )
        .unwrap_err();
        assert_eq!(e.path, "seg");
        let e = ExperimentConfig::from_json(
            r#"{"kind": "bin-picking"}"#,
            &[("noise.nope".into(), "1".into())],
        )
        .unwrap_err();
        assert_eq!(e.path, "noise.nope");
        let e = ExperimentConfig::from_json(r#"{"seed": 1}"#, &[]).unwrap_err();
        assert_eq!(e.path, "kind");
    }
}
