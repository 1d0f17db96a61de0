//! Run configuration: command-line flags over an optional `key=value` file
//! over built-in defaults.

use std::path::{Path, PathBuf};

use limitset_core::kv::KvDoc;
use limitset_core::{choose_c0, ConstructionParams, Error, Result};

/// Flags shared by every subcommand; `None` means not given.
#[derive(Debug, Clone, Default, PartialEq, clap::Args)]
pub struct CommonArgs {
    /// Key=value file supplying defaults for any flag.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Target bound on 1/sqrt(c0 - 1) and q(-1).
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub delta: Option<f64>,
    /// Parameter file written by `construct`.
    #[arg(long, global = true)]
    pub params: Option<PathBuf>,
    #[arg(long = "quad-tol", global = true)]
    pub quad_tol: Option<f64>,
    #[arg(long = "rel-tol", global = true)]
    pub rel_tol: Option<f64>,
    #[arg(long = "abs-tol", global = true)]
    pub abs_tol: Option<f64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Number of u-periods integrated.
    #[arg(long, global = true)]
    pub periods: Option<usize>,
}

/// Accepted range for every tolerance.
pub const TOL_RANGE: (f64, f64) = (1e-15, 1e-3);

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: ConstructionParams,
    pub out: PathBuf,
    pub seed: u64,
    seed_given: bool,
    pub periods: usize,
    file: KvDoc,
}

fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Parse(format!("config value for `{key}` is not valid: {v}")))
}

const KNOWN_KEYS: [&str; 11] = [
    "delta", "params", "quad_tol", "rel_tol", "abs_tol", "out", "seed", "periods", "z1", "z2", "n",
];

impl RunConfig {
    pub fn resolve(args: &CommonArgs) -> Result<Self> {
        let file = match &args.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
                KvDoc::parse(&text)?
            }
            None => KvDoc::new(),
        };
        if let Some(k) = file.keys().find(|k| !KNOWN_KEYS.contains(k)) {
            return Err(Error::Parse(format!("unknown config key `{k}`")));
        }
        let get = |key: &str| file.get(key);

        let params_path = args.params.clone().or_else(|| get("params").map(PathBuf::from));
        let mut params = match params_path {
            Some(path) => load_params(&path)?,
            None => {
                let delta = match args.delta {
                    Some(d) => d,
                    None => get("delta").map(|v| parse("delta", v)).transpose()?.unwrap_or(1.0),
                };
                choose_c0(delta)?
            }
        };
        let tol = |flag: Option<f64>, key: &str, current: f64| -> Result<f64> {
            let v = match flag {
                Some(v) => v,
                None => get(key).map(|v| parse(key, v)).transpose()?.unwrap_or(current),
            };
            if !(v >= TOL_RANGE.0 && v <= TOL_RANGE.1) {
                return Err(Error::InvalidParameter(format!(
                    "{key} = {v} outside [{:e}, {:e}]",
                    TOL_RANGE.0, TOL_RANGE.1
                )));
            }
            Ok(v)
        };
        params.quad_tol = tol(args.quad_tol, "quad_tol", params.quad_tol)?;
        params.ode_rel_tol = tol(args.rel_tol, "rel_tol", params.ode_rel_tol)?;
        params.ode_abs_tol = tol(args.abs_tol, "abs_tol", params.ode_abs_tol)?;
        params.validate()?;

        let out = args
            .out
            .clone()
            .or_else(|| get("out").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"));
        let seed_given = args.seed.is_some() || get("seed").is_some();
        let seed = match args.seed {
            Some(s) => s,
            None => get("seed").map(|v| parse("seed", v)).transpose()?.unwrap_or(0),
        };
        let periods = match args.periods {
            Some(p) => p,
            None => get("periods").map(|v| parse("periods", v)).transpose()?.unwrap_or(4),
        };
        if periods < 2 {
            return Err(Error::InvalidParameter(format!("periods must be >= 2, got {periods}")));
        }
        Ok(Self {
            params,
            out,
            seed,
            seed_given,
            periods,
            file,
        })
    }

    /// A subcommand value: the flag if given, else the config file, else `default`.
    pub fn value<T: std::str::FromStr>(&self, flag: Option<T>, key: &str, default: Option<T>) -> Result<T> {
        if let Some(v) = flag {
            return Ok(v);
        }
        if let Some(v) = self.file.get(key) {
            return parse(key, v);
        }
        default.ok_or_else(|| Error::InvalidParameter(format!("missing required value `{key}`")))
    }

    /// Whether a seed was set explicitly rather than defaulted.
    pub fn has_seed(&self) -> bool {
        self.seed_given
    }

    pub fn ensure_out(&self) -> Result<&Path> {
        std::fs::create_dir_all(&self.out).map_err(|e| Error::Io(format!("{}: {e}", self.out.display())))?;
        Ok(&self.out)
    }
}

pub fn load_params(path: &Path) -> Result<ConstructionParams> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    ConstructionParams::from_kv(&KvDoc::parse(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn config_file(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn defaults() {
        let c = RunConfig::resolve(&CommonArgs::default()).unwrap();
        assert_eq!(c.params.k, 1);
        assert_eq!(c.seed, 0);
        assert_eq!(c.periods, 4);
        assert_eq!(c.out, PathBuf::from("out"));
    }

    #[test]
    fn flags_override_file() {
        let f = config_file("# run\nseed = 5\nrel_tol = 1e-8\nperiods = 3\nz1 = 0.25\n");
        let args = CommonArgs {
            config: Some(f.path().to_path_buf()),
            seed: Some(9),
            ..Default::default()
        };
        let c = RunConfig::resolve(&args).unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.params.ode_rel_tol, 1e-8);
        assert_eq!(c.periods, 3);
        assert_eq!(c.value::<f64>(None, "z1", None).unwrap(), 0.25);
        assert_eq!(c.value(Some(0.5), "z1", None).unwrap(), 0.5);
        assert!(c.value::<f64>(None, "z2", None).is_err());
    }

    #[test]
    fn tolerance_sanity() {
        let args = CommonArgs {
            quad_tol: Some(1e30),
            ..Default::default()
        };
        assert!(matches!(RunConfig::resolve(&args), Err(Error::InvalidParameter(_))));
        let args = CommonArgs {
            abs_tol: Some(0.0),
            ..Default::default()
        };
        assert!(RunConfig::resolve(&args).is_err());
    }

    #[test]
    fn unknown_key_is_rejected() {
        let f = config_file("sede = 1\n");
        let args = CommonArgs {
            config: Some(f.path().to_path_buf()),
            ..Default::default()
        };
        assert!(matches!(RunConfig::resolve(&args), Err(Error::Parse(_))));
    }

    #[test]
    fn delta_from_file() {
        let f = config_file("delta = 0.001\n");
        let args = CommonArgs {
            config: Some(f.path().to_path_buf()),
            ..Default::default()
        };
        let c = RunConfig::resolve(&args).unwrap();
        assert!(c.params.k > 1 && c.params.rho < 1e-3);
    }
}
