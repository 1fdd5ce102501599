use serde::Serialize;

/// Failure of a run, with its exit status.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CliError {
    Parse { message: String, line: usize, column: usize },
    Precondition { field: String, message: String },
    DegenerateVariance { message: String },
    Runtime { message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } => 2,
            CliError::Precondition { .. } => 3,
            CliError::DegenerateVariance { .. } => 4,
            CliError::Runtime { .. } => 1,
        }
    }

    pub fn runtime(err: impl std::fmt::Display) -> Self {
        CliError::Runtime {
            message: err.to_string(),
        }
    }

    /// One-line JSON record for stderr.
    pub fn record(&self) -> String {
        let mut value = serde_json::to_value(self).unwrap_or_default();
        if let Some(obj) = value.as_object_mut() {
            obj.insert("exit_code".into(), self.exit_code().into());
        }
        serde_json::json!({ "error": value }).to_string()
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Parse { message, .. } => write!(f, "parse error: {message}"),
            CliError::Precondition { field, message } => write!(f, "invalid {field}: {message}"),
            CliError::DegenerateVariance { message } => write!(f, "degenerate variance: {message}"),
            CliError::Runtime { message } => write!(f, "{message}"),
        }
    }
}

/// Classify a library error raised while running a task.
impl From<weakdep::Error> for CliError {
    fn from(err: weakdep::Error) -> Self {
        use weakdep::Error as E;
        match err {
            E::DegenerateVariance { .. } => CliError::DegenerateVariance { message: err.to_string() },
            E::Io(_) | E::Csv(_) | E::Json(_) | E::IdentityResidual { .. } => CliError::runtime(err),
            _ => CliError::Precondition {
                field: "task".into(),
                message: err.to_string(),
            },
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::runtime(err)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(err: serde_json::Error) -> Self {
        CliError::runtime(err)
    }
}
