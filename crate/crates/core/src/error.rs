use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("image too small: {0}")]
    TooSmall(String),
    #[error("no registrable content")]
    NoRegistrableContent,
    #[error("frame {index}: {source}")]
    Frame {
        index: usize,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
    #[error("enhancer failed: {0}")]
    Enhancer(String),
}

impl Error {
    pub fn at_frame(self, index: usize) -> Self {
        Error::Frame { index, source: alloc::boxed::Box::new(self) }
    }
}
