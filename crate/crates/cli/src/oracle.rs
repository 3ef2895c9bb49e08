//! Controller oracles: built-in catalog, constants, CSV tables and external
//! processes speaking line-delimited JSON.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::{Arc, Mutex};

use crate::config::{parse_num, ControllerSpec};
use crate::error::CliError;

type PureFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Names accepted by `{"kind": "builtin"}`.
pub const BUILTIN_CONTROLLERS: [&str; 3] = ["pendulum-tanh", "linear-half", "zero"];

fn builtin(name: &str, m: usize) -> Option<PureFn> {
    match name {
        // -tanh of the coordinate sum in every control channel
        "pendulum-tanh" => Some(Arc::new(move |x: &[f64]| vec![-x.iter().sum::<f64>().tanh(); m])),
        "linear-half" => Some(Arc::new(move |x: &[f64]| vec![-0.5 * x[0]; m])),
        "zero" => Some(Arc::new(move |_: &[f64]| vec![0.0; m])),
        _ => None,
    }
}

/// Grid lookup keyed by coordinates rounded to `1e-9`.
struct Table {
    n: usize,
    rows: HashMap<Vec<i64>, Vec<f64>>,
}

fn table_key(x: &[f64]) -> Vec<i64> {
    x.iter().map(|v| (v * 1e9).round() as i64).collect()
}

impl Table {
    fn load(path: &Path, n: usize, m: usize) -> Result<Self, CliError> {
        let mut reader = csv::Reader::from_path(path)
            .map_err(|e| CliError::Config(format!("controller table {}: {e}", path.display())))?;
        let mut rows = HashMap::new();
        for (line, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| CliError::Config(format!("controller table row {}: {e}", line + 2)))?;
            if rec.len() != n + m {
                return Err(CliError::Config(format!(
                    "controller table row {} has {} columns, expected {}",
                    line + 2,
                    rec.len(),
                    n + m
                )));
            }
            let vals = rec
                .iter()
                .map(parse_num)
                .collect::<Result<Vec<f64>, _>>()
                .map_err(|e| CliError::Config(format!("controller table row {}: {e}", line + 2)))?;
            rows.insert(table_key(&vals[..n]), vals[n..].to_vec());
        }
        Ok(Table { n, rows })
    }

    fn get(&self, x: &[f64]) -> Result<Vec<f64>, String> {
        if x.len() != self.n {
            return Err(format!("table expects {} coordinates, got {}", self.n, x.len()));
        }
        self.rows
            .get(&table_key(x))
            .cloned()
            .ok_or_else(|| format!("no table row for {x:?}"))
    }
}

struct Subprocess {
    child: Child,
    stdin: Option<ChildStdin>,
    stdout: BufReader<ChildStdout>,
}

impl Subprocess {
    fn spawn(argv: &[String], dir: &Path) -> Result<Self, CliError> {
        let (prog, args) = argv
            .split_first()
            .ok_or_else(|| CliError::Config("controller command is empty".into()))?;
        let mut cmd = Command::new(prog);
        if !dir.as_os_str().is_empty() {
            cmd.current_dir(dir);
        }
        let mut child = cmd
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| CliError::Config(format!("cannot start {prog:?}: {e}")))?;
        let stdin = child.stdin.take();
        let stdout = BufReader::new(child.stdout.take().expect("stdout is piped"));
        Ok(Subprocess { child, stdin, stdout })
    }

    fn batch(&mut self, points: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, String> {
        let request = serde_json::to_string(points).map_err(|e| e.to_string())?;
        let stdin = self.stdin.as_mut().ok_or("controller stdin closed")?;
        writeln!(stdin, "{request}")
            .and_then(|_| stdin.flush())
            .map_err(|e| format!("write to controller: {e}"))?;
        let mut line = String::new();
        let read = self
            .stdout
            .read_line(&mut line)
            .map_err(|e| format!("read from controller: {e}"))?;
        if read == 0 {
            return Err("controller exited before replying".into());
        }
        let reply: Vec<Vec<f64>> =
            serde_json::from_str(line.trim()).map_err(|e| format!("controller reply is not a JSON matrix: {e}"))?;
        if reply.len() != points.len() {
            return Err(format!("controller returned {} rows for {} points", reply.len(), points.len()));
        }
        Ok(reply)
    }
}

impl Drop for Subprocess {
    fn drop(&mut self) {
        // closing stdin is the shutdown signal
        drop(self.stdin.take());
        let _ = self.child.wait();
    }
}

enum Source {
    Pure(PureFn),
    Table(Table),
    Process(Mutex<Subprocess>),
}

/// A controller `x -> u` with `m` outputs.
///
/// Failures inside closed-loop integration cannot be returned through the
/// integrator, so the first one is recorded and a NaN control is returned;
/// callers check [`Controller::take_error`] afterwards.
pub struct Controller {
    source: Source,
    m: usize,
    label: String,
    error: Mutex<Option<String>>,
}

impl Controller {
    pub fn from_spec(spec: &ControllerSpec, n: usize, m: usize, base: &Path) -> Result<Self, CliError> {
        let (source, label) = match spec {
            ControllerSpec::Builtin { name } => {
                let f = builtin(name, m).ok_or_else(|| {
                    CliError::Config(format!("unknown builtin controller {name:?}; known: {BUILTIN_CONTROLLERS:?}"))
                })?;
                (Source::Pure(f), format!("builtin:{name}"))
            }
            ControllerSpec::Constant { value } => {
                if value.len() != m {
                    return Err(CliError::Config(format!(
                        "constant controller has {} entries, expected {m}",
                        value.len()
                    )));
                }
                let v: Vec<f64> = value.iter().map(|x| x.0).collect();
                (Source::Pure(Arc::new(move |_: &[f64]| v.clone())), "constant".into())
            }
            ControllerSpec::Csv { path } => {
                let p = base.join(path);
                (Source::Table(Table::load(&p, n, m)?), format!("csv:{}", path.display()))
            }
            ControllerSpec::Command { argv } => (
                Source::Process(Mutex::new(Subprocess::spawn(argv, base)?)),
                format!("command:{}", argv.join(" ")),
            ),
        };
        Ok(Controller {
            source,
            m,
            label,
            error: Mutex::new(None),
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    fn check(&self, rows: Vec<Vec<f64>>, points: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, String> {
        for (x, u) in points.iter().zip(&rows) {
            if u.len() != self.m {
                return Err(format!("controller returned {} values at {x:?}, expected {}", u.len(), self.m));
            }
            if u.iter().any(|v| !v.is_finite()) {
                return Err(format!("controller returned non-finite values {u:?} at {x:?}"));
            }
        }
        Ok(rows)
    }

    /// Evaluates a batch of points; one round trip for subprocess oracles.
    pub fn eval_batch(&self, points: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, String> {
        let rows = match &self.source {
            Source::Pure(f) => points.iter().map(|x| f(x)).collect(),
            Source::Table(t) => points.iter().map(|x| t.get(x)).collect::<Result<_, _>>()?,
            Source::Process(p) => p.lock().expect("oracle lock").batch(points)?,
        };
        self.check(rows, points)
    }

    /// Single-point evaluation that records failures instead of returning them.
    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        match self.eval_batch(&[x.to_vec()]) {
            Ok(mut rows) => rows.pop().expect("one row"),
            Err(e) => {
                let mut slot = self.error.lock().expect("error lock");
                slot.get_or_insert(e);
                vec![f64::NAN; self.m]
            }
        }
    }

    pub fn take_error(&self) -> Option<String> {
        self.error.lock().expect("error lock").take()
    }

    /// Returns `Err` if any single-point evaluation failed so far.
    pub fn ensure_ok(&self) -> Result<(), CliError> {
        match self.take_error() {
            Some(e) => Err(CliError::Numerical(format!("controller {}: {e}", self.label))),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Num;

    #[test]
    fn builtins_and_constant() {
        let c = Controller::from_spec(
            &ControllerSpec::Builtin {
                name: "pendulum-tanh".into(),
            },
            2,
            1,
            Path::new("."),
        )
        .unwrap();
        assert_eq!(c.eval(&[0.2, 0.3]), vec![-(0.5f64).tanh()]);
        let k = Controller::from_spec(
            &ControllerSpec::Constant {
                value: vec![Num(1.5), Num(-2.0)],
            },
            3,
            2,
            Path::new("."),
        )
        .unwrap();
        assert_eq!(k.eval_batch(&[vec![0.0; 3], vec![1.0; 3]]).unwrap(), vec![vec![1.5, -2.0]; 2]);
        assert!(Controller::from_spec(&ControllerSpec::Builtin { name: "x".into() }, 1, 1, Path::new(".")).is_err());
    }

    #[test]
    fn csv_lookup_and_miss() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        std::fs::write(&p, "x0,u0\n0.0,1.0\n0x1p-1,2.5\n").unwrap();
        let c = Controller::from_spec(&ControllerSpec::Csv { path: "t.csv".into() }, 1, 1, dir.path()).unwrap();
        assert_eq!(c.eval_batch(&[vec![0.5], vec![0.0]]).unwrap(), vec![vec![2.5], vec![1.0]]);
        assert!(c.eval(&[0.25])[0].is_nan());
        assert!(c.ensure_ok().is_err());
        assert!(c.ensure_ok().is_ok());
    }
}
