use std::io;
use std::path::{Path, PathBuf};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] affectfuse_core::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    /// Unreadable or inconsistent input files.
    #[error("data error: {0}")]
    Data(String),
    /// Bad arguments or configuration values.
    #[error("invalid argument: {0}")]
    Usage(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub fn io(path: impl AsRef<Path>, source: io::Error) -> Self {
        Error::Io { path: path.as_ref().to_path_buf(), source }
    }

    /// Process exit status: 1 validation, 2 structural or data, 3 internal.
    pub fn exit_code(&self) -> u8 {
        use affectfuse_core::Error as Core;
        match self {
            Error::Core(Core::Validation(_)) | Error::Usage(_) => 1,
            Error::Core(_) | Error::Io { .. } | Error::Data(_) => 2,
            Error::Internal(_) => 3,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        let v = Error::from(affectfuse_core::Error::Validation("x".into()));
        let s = Error::from(affectfuse_core::Error::Structural("x".into()));
        let m = Error::from(affectfuse_core::Error::UnknownChannel("Cz".into()));
        assert_eq!(v.exit_code(), 1);
        assert_eq!(s.exit_code(), 2);
        assert_eq!(m.exit_code(), 2);
        assert_eq!(Error::io("a", io::ErrorKind::NotFound.into()).exit_code(), 2);
        assert_eq!(Error::Usage("x".into()).exit_code(), 1);
        assert_eq!(Error::Internal("x".into()).exit_code(), 3);
    }
}
