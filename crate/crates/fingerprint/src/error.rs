use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("image-too-small: {width}x{height} cannot hold one {block}px block")]
    ImageTooSmall {
        width: usize,
        height: usize,
        block: usize,
    },
    #[error("unusable-image: ridge frequency failed in {failed} of {total} blocks")]
    UnusableImage { failed: usize, total: usize },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("invalid image: {0}")]
    Image(String),
    #[error("image decode: {0}")]
    Decode(#[from] image::ImageError),
    #[error(transparent)]
    Template(#[from] biokey_core::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
