use serde_json::json;

#[derive(Debug)]
pub enum CliError {
    Core(repeater_core::Error),
    Io {
        path: String,
        message: String,
    },
    Parse {
        origin: String,
        path: String,
        message: String,
    },
    Usage(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.kind(),
            CliError::Io { .. } => "io",
            CliError::Parse { .. } => "parse",
            CliError::Usage(_) => "usage",
        }
    }

    pub fn message(&self) -> String {
        match self {
            CliError::Core(e) => e.to_string(),
            CliError::Io { path, message } => format!("{path}: {message}"),
            CliError::Parse { origin, path, message } if path.is_empty() || path == "." => {
                format!("{origin}: {message}")
            }
            CliError::Parse { origin, path, message } => format!("{origin}: at `{path}`: {message}"),
            CliError::Usage(m) => m.clone(),
        }
    }

    /// `{"error": {"kind", "message"}}`, plus the field path for parse errors.
    pub fn to_json(&self) -> String {
        let mut body = json!({ "kind": self.kind(), "message": self.message() });
        if let CliError::Parse { path, .. } = self {
            body["path"] = json!(path);
        }
        json!({ "error": body }).to_string()
    }
}

impl From<repeater_core::Error> for CliError {
    fn from(e: repeater_core::Error) -> Self {
        CliError::Core(e)
    }
}
