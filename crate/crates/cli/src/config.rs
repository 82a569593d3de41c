//! key=value job configuration: file first, then `--set` and flag overrides.

use std::collections::BTreeMap;
use std::path::PathBuf;

use henon_core::C64;

use crate::CliError;

/// Every accepted key with its default.
const KEYS: &[(&str, &str)] = &[
    ("c", "-3,0"),
    ("a", "0.001,0"),
    ("R", "0.1"),
    ("tol", "1e-15"),
    ("green_tol", "1e-14"),
    ("max_iter", "200"),
    // grid slice: "real" is Re x by Re y, "x" is the x-plane at y = fixed, "y" the y-plane at x = fixed
    ("plane", "real"),
    ("window", "-3,3,-3,3"),
    ("resolution", "64,64"),
    ("fixed", "0,0"),
    ("green_sign", "plus"),
    ("pgm_scale", "auto"),
    ("output_dir", "."),
    ("output_stem", ""),
    ("threads", "0"),
    ("seed", "1"),
    ("samples", "0"),
    ("k_max", "3"),
    ("n_max", "8"),
    ("sphere_window", "3"),
    ("census_depth", "2"),
    ("cone_c_override", ""),
    ("suites", ""),
    ("trace_step", "0.05"),
    ("trace_max_samples", "20000"),
    ("trace_box", "8,8"),
];

#[derive(Clone, Debug, PartialEq)]
pub struct JobConfig {
    values: BTreeMap<String, String>,
}

impl Default for JobConfig {
    fn default() -> Self {
        Self {
            values: KEYS
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }
}

fn bad(key: &str, value: &str, what: &str) -> CliError {
    CliError::Config(format!("{key} = '{value}': expected {what}"))
}

impl JobConfig {
    /// Parses a UTF-8 key=value file; `#` starts a comment.
    pub fn parse_file_text(text: &str) -> Result<Self, CliError> {
        let mut cfg = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", i + 1)))?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match self.values.get_mut(key) {
            Some(slot) => {
                *slot = value.to_string();
                Ok(())
            }
            None => Err(CliError::Config(format!("unknown config key '{key}'"))),
        }
    }

    pub fn set_pair(&mut self, kv: &str) -> Result<(), CliError> {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--set '{kv}': expected key=value")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values
            .get(key)
            .map(String::as_str)
            .expect("key listed in KEYS")
    }

    pub fn f64(&self, key: &str) -> Result<f64, CliError> {
        let v = self.raw(key);
        v.parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| bad(key, v, "a finite number"))
    }

    pub fn usize(&self, key: &str) -> Result<usize, CliError> {
        let v = self.raw(key);
        v.parse().map_err(|_| bad(key, v, "a non-negative integer"))
    }

    pub fn u64(&self, key: &str) -> Result<u64, CliError> {
        let v = self.raw(key);
        v.parse().map_err(|_| bad(key, v, "a non-negative integer"))
    }

    pub fn opt_f64(&self, key: &str) -> Result<Option<f64>, CliError> {
        if self.raw(key).is_empty() {
            Ok(None)
        } else {
            self.f64(key).map(Some)
        }
    }

    pub fn list_f64(&self, key: &str, n: usize) -> Result<Vec<f64>, CliError> {
        let v = self.raw(key);
        let xs: Vec<f64> = v
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad(key, v, &format!("{n} comma-separated numbers")))?;
        if xs.len() != n || xs.iter().any(|x| !x.is_finite()) {
            return Err(bad(key, v, &format!("{n} comma-separated numbers")));
        }
        Ok(xs)
    }

    /// Complex numbers are "re,im" pairs.
    pub fn complex(&self, key: &str) -> Result<C64, CliError> {
        let v = self.list_f64(key, 2)?;
        Ok(C64::new(v[0], v[1]))
    }

    pub fn resolution(&self) -> Result<(usize, usize), CliError> {
        let v = self.raw("resolution");
        let parts: Vec<usize> = v
            .split(',')
            .map(|s| s.trim().parse())
            .collect::<Result<_, _>>()
            .map_err(|_| bad("resolution", v, "nx,ny"))?;
        match parts[..] {
            [nx, ny] if nx >= 1 && ny >= 1 && nx * ny <= 1 << 24 => Ok((nx, ny)),
            _ => Err(bad("resolution", v, "nx,ny with 1 <= nx*ny <= 2^24")),
        }
    }

    pub fn output_path(&self, stem: &str, ext: &str) -> PathBuf {
        let s = match self.raw("output_stem") {
            "" => stem,
            s => s,
        };
        PathBuf::from(self.raw("output_dir")).join(format!("{s}.{ext}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_file_and_overrides() {
        let mut c =
            JobConfig::parse_file_text("# job\na = 0.01, 0.5  # comment\n\nR=0.2\n").unwrap();
        assert_eq!(c.complex("a").unwrap(), C64::new(0.01, 0.5));
        assert_eq!(c.f64("R").unwrap(), 0.2);
        c.set_pair("R=0.3").unwrap();
        assert_eq!(c.f64("R").unwrap(), 0.3);
        assert_eq!(c.resolution().unwrap(), (64, 64));
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        assert!(matches!(
            JobConfig::parse_file_text("colour = red"),
            Err(CliError::Config(_))
        ));
        assert!(matches!(
            JobConfig::parse_file_text("just words"),
            Err(CliError::Config(_))
        ));
        let c = JobConfig::parse_file_text("a = 1").unwrap();
        assert!(c.complex("a").is_err());
        let c = JobConfig::parse_file_text("resolution = 0,4").unwrap();
        assert!(c.resolution().is_err());
    }
}
