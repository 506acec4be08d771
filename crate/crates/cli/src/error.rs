use serde_json::{json, Value};

/// A failure with its process exit code and machine-readable diagnostic.
#[derive(Debug, Clone)]
pub struct CliError {
    pub code: &'static str,
    pub message: String,
    pub exit: i32,
    pub context: Value,
}

pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_ASSUMPTION: i32 = 4;

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        CliError { code: "validation", message: message.into(), exit: EXIT_VALIDATION, context: json!({}) }
    }

    pub fn io(message: impl Into<String>) -> Self {
        CliError { code: "io", message: message.into(), exit: EXIT_VALIDATION, context: json!({}) }
    }

    pub fn with_context(mut self, key: &str, value: impl Into<Value>) -> Self {
        if let Value::Object(map) = &mut self.context {
            map.insert(key.to_string(), value.into());
        }
        self
    }

    pub fn diagnostic(&self) -> Value {
        json!({ "code": self.code, "message": self.message, "context": self.context })
    }
}

impl From<segmarket::Error> for CliError {
    fn from(e: segmarket::Error) -> Self {
        use segmarket::Error as E;
        let exit = match e {
            E::Domain(_) | E::InvalidArgument(_) | E::Size(_) | E::Unsupported(_) => EXIT_VALIDATION,
            E::Assumption(_) => EXIT_ASSUMPTION,
            E::Infeasible(_) | E::Solver(_) | E::CertificateFailed { .. } => EXIT_SOLVER,
        };
        CliError { code: e.code(), message: e.to_string(), exit, context: json!({}) }
    }
}
