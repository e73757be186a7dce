use std::str::FromStr;

use super::scene::SceneOptions;
use super::GenError;
use crate::episode::TaskType;

#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    /// Sampling weights in [`TaskType::ALL`] order.
    pub type_proportions: [f64; 5],
    pub area_threshold: f64,
    pub shrink_factor: f64,
    pub seed: u64,
    pub scene: SceneOptions,
    pub scene_words: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            type_proportions: [0.3, 0.2, 0.2, 0.1, 0.2],
            area_threshold: 1e-4,
            shrink_factor: 0.5,
            seed: 0,
            scene: SceneOptions::default(),
            scene_words: 60,
        }
    }
}

fn type_key(t: TaskType) -> String {
    format!("p_{}", t.name().replace('-', "_"))
}

impl GenConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn proportion(&self, t: TaskType) -> f64 {
        self.type_proportions[TaskType::ALL.iter().position(|x| *x == t).unwrap()]
    }

    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |m: String| Err(GenError::Config(m));
        if self.type_proportions.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return bad("type proportions must be non-negative".into());
        }
        let sum: f64 = self.type_proportions.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return bad(format!("type proportions sum to {sum}, expected 1"));
        }
        if !(self.area_threshold > 0.0 && self.area_threshold < 1.0) {
            return bad(format!("area_threshold must lie in (0, 1), got {}", self.area_threshold));
        }
        if !(self.shrink_factor > 0.0 && self.shrink_factor < 1.0) {
            return bad(format!("shrink_factor must lie in (0, 1), got {}", self.shrink_factor));
        }
        if self.scene.width == 0 || self.scene.height == 0 || self.scene.max_scale == 0 || self.scene_words == 0 {
            return bad("scene dimensions, max_scale and scene_words must be positive".into());
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T, String> {
            v.parse().map_err(|_| format!("'{key}' expects a number, got '{v}'"))
        }
        if let Some(i) = TaskType::ALL.iter().position(|t| type_key(*t) == key) {
            self.type_proportions[i] = num(key, value)?;
            return Ok(());
        }
        match key {
            "area_threshold" => self.area_threshold = num(key, value)?,
            "shrink_factor" => self.shrink_factor = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "canvas_width" => self.scene.width = num(key, value)?,
            "canvas_height" => self.scene.height = num(key, value)?,
            "max_scale" => self.scene.max_scale = num(key, value)?,
            "scene_words" => self.scene_words = num(key, value)?,
            _ => return Err(format!("unknown key '{key}'")),
        }
        Ok(())
    }

    /// Applies `key=value` lines (with `#` comments) on top of `self`.
    pub fn merge_str(mut self, text: &str) -> Result<Self, GenError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |m: String| GenError::Config(format!("line {}: {m}", i + 1));
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key=value, found '{line}'")))?;
            self.set(k.trim(), v.trim()).map_err(err)?;
        }
        self.validate()?;
        Ok(self)
    }

    pub fn to_kv_string(&self) -> String {
        let mut out = String::new();
        for (t, p) in TaskType::ALL.iter().zip(self.type_proportions) {
            out += &format!("{}={p}\n", type_key(*t));
        }
        out += &format!(
            "area_threshold={}\nshrink_factor={}\nseed={}\ncanvas_width={}\ncanvas_height={}\nmax_scale={}\nscene_words={}\n",
            self.area_threshold,
            self.shrink_factor,
            self.seed,
            self.scene.width,
            self.scene.height,
            self.scene.max_scale,
            self.scene_words
        );
        out
    }
}

impl FromStr for GenConfig {
    type Err = GenError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GenConfig::default().merge_str(s)
    }
}
