use std::collections::BTreeMap;

/// One pressure target: cavity `cavity` reaches `pa` pascals at `time_s`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Keyframe {
    pub time_s: f64,
    pub cavity: String,
    pub pa: f64,
}

/// Piecewise-linear pressure program per cavity. Every cavity starts from
/// 0 Pa at `t = 0` unless it has its own keyframe there, and holds its last
/// value after its final keyframe.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PressureSchedule {
    pub keyframes: Vec<Keyframe>,
    /// Time between solver samples when the schedule is played back.
    #[serde(default = "default_dt")]
    pub sample_dt_s: f64,
}

fn default_dt() -> f64 {
    0.1
}

impl PressureSchedule {
    pub fn new(keyframes: Vec<Keyframe>, sample_dt_s: f64) -> Self {
        Self { keyframes, sample_dt_s }
    }

    pub fn validate(&self, cavities: &[&str]) -> Result<(), String> {
        if !(self.sample_dt_s > 0.0) {
            return Err("sample_dt_s must be positive".into());
        }
        for k in &self.keyframes {
            if !(k.time_s >= 0.0 && k.time_s.is_finite()) || !k.pa.is_finite() {
                return Err(format!("bad keyframe {k:?}"));
            }
            if !cavities.contains(&k.cavity.as_str()) {
                return Err(format!("unknown cavity `{}`", k.cavity));
            }
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.keyframes.iter().map(|k| k.time_s).fold(0.0, f64::max)
    }

    pub fn cavities(&self) -> Vec<&str> {
        let mut names: Vec<&str> = self.keyframes.iter().map(|k| k.cavity.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        names
    }

    /// Target pressure of every scheduled cavity at time `t`.
    pub fn pressures_at(&self, t: f64) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        for name in self.cavities() {
            let mut pts: Vec<(f64, f64)> = self
                .keyframes
                .iter()
                .filter(|k| k.cavity == name)
                .map(|k| (k.time_s, k.pa))
                .collect();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            if pts[0].0 > 0.0 {
                pts.insert(0, (0.0, 0.0));
            }
            let value = match pts.iter().position(|p| p.0 > t) {
                None => pts.last().expect("non-empty").1,
                Some(0) => pts[0].1,
                Some(k) => {
                    let ((t0, p0), (t1, p1)) = (pts[k - 1], pts[k]);
                    p0 + (p1 - p0) * (t - t0) / (t1 - t0)
                }
            };
            out.insert(name.to_owned(), value);
        }
        out
    }

    /// Playback instants `0, dt, 2dt, …` up to and including the duration.
    pub fn sample_times(&self) -> Vec<f64> {
        let n = (self.duration() / self.sample_dt_s - 1e-9).ceil().max(0.0) as usize;
        (0..=n)
            .map(|k| (k as f64 * self.sample_dt_s).min(self.duration()))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kf(t: f64, c: &str, pa: f64) -> Keyframe {
        Keyframe {
            time_s: t,
            cavity: c.into(),
            pa,
        }
    }

    #[test]
    fn interpolates_and_holds() {
        let s = PressureSchedule::new(vec![kf(1.0, "a", 1000.0), kf(3.0, "a", 0.0), kf(0.0, "b", 50.0)], 0.5);
        let p = s.pressures_at(0.5);
        assert_eq!(p["a"], 500.0);
        assert_eq!(p["b"], 50.0);
        assert_eq!(s.pressures_at(2.0)["a"], 500.0);
        assert_eq!(s.pressures_at(10.0)["a"], 0.0);
        assert_eq!(s.duration(), 3.0);
        assert_eq!(s.sample_times(), vec![0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0]);
        assert!(s.validate(&["a", "b"]).is_ok());
        assert!(s.validate(&["a"]).is_err());
    }
}
