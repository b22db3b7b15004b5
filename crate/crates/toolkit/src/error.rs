use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = ToolError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum ToolError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Undecodable or unsupported image data. `origin` is a path or a field name.
    #[error("{origin}: {message}")]
    Format { origin: String, message: String },

    /// Invalid recipe document; `field` is a dotted path such as `foreground.tone[2]`.
    #[error("recipe field {field}: {message}")]
    Recipe { field: String, message: String },

    #[error("frame {index} ({}): {source}", path.display())]
    Frame {
        index: usize,
        path: PathBuf,
        #[source]
        source: Box<ToolError>,
    },

    #[error(transparent)]
    Core(#[from] attnshift_core::Error),
}

impl ToolError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ToolError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(origin: impl Into<String>, message: impl Into<String>) -> Self {
        ToolError::Format {
            origin: origin.into(),
            message: message.into(),
        }
    }
}
