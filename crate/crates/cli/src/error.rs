use std::path::PathBuf;

use thiserror::Error;

/// Failures surfaced by the command-line front end.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{key}: {message}")]
    Config { key: String, message: String },

    #[error("run `{run}`: {source}")]
    Solver {
        run: String,
        #[source]
        source: crossdiff::Error,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn solver(run: impl Into<String>, source: crossdiff::Error) -> Self {
        CliError::Solver {
            run: run.into(),
            source,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for bad input, 3 for failures while running.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Solver { .. } | CliError::Io { .. } => 3,
        }
    }

    pub fn key(&self) -> Option<&str> {
        match self {
            CliError::Config { key, .. } => Some(key),
            _ => None,
        }
    }

    /// Single-line form for stderr: `error kind=<kind> key=<key> msg="<text>"`.
    pub fn machine_line(&self) -> String {
        let (kind, key) = match self {
            CliError::Config { key, .. } => ("config", key.as_str()),
            CliError::Solver { run, .. } => ("solver", run.as_str()),
            CliError::Io { .. } => ("io", "-"),
        };
        let msg = self
            .to_string()
            .replace('\\', "\\\\")
            .replace('"', "\\\"")
            .replace('\n', " ");
        format!("error kind={kind} key={key} msg=\"{msg}\"")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_and_machine_line() {
        let e = CliError::config("solver.tau", "too \"big\"");
        assert_eq!(e.exit_code(), 2);
        assert_eq!(
            e.machine_line(),
            r#"error kind=config key=solver.tau msg="solver.tau: too \"big\"""#
        );
        let s = CliError::solver("exp3", crossdiff::Error::MeshMismatch);
        assert_eq!(s.exit_code(), 3);
        assert!(s.machine_line().starts_with("error kind=solver key=exp3 "));
    }
}
