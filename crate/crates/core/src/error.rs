use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(
        "dimension mismatch: expected {expected_width}x{expected_height}, got {width}x{height}"
    )]
    Dimensions {
        expected_width: usize,
        expected_height: usize,
        width: usize,
        height: usize,
    },

    #[error("length mismatch: expected {expected}, got {actual}")]
    Length { expected: usize, actual: usize },

    #[error("{}: {source}", path.display())]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {message}", path.display())]
    File { path: PathBuf, message: String },
}

impl Error {
    /// Attaches a file path to errors that do not already name one.
    pub fn at_path(self, path: impl Into<PathBuf>) -> Self {
        match self {
            Error::Image { .. } | Error::Io { .. } | Error::File { .. } => self,
            other => Error::File {
                path: path.into(),
                message: other.to_string(),
            },
        }
    }
}

pub(crate) fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::Length { expected, actual })
    }
}
