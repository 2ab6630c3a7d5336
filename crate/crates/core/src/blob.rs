//! Content-addressed image storage: one file per distinct byte string,
//! named by its SHA-256.

use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::backend::{GeneratedImage, ImageRef, MediaType};
use crate::ids::sha256_hex;

#[derive(Debug, Error)]
pub enum BlobError {
    #[error("blob {0} not found")]
    NotFound(String),
    #[error("invalid content address `{0}`")]
    InvalidAddress(String),
    #[error("blob io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct BlobStore {
    root: PathBuf,
}

impl BlobStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, BlobError> {
        let root = root.into();
        std::fs::create_dir_all(&root)?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Stores `bytes` and returns their content address. Storing identical
    /// bytes again is a no-op.
    pub fn put(&self, bytes: &[u8]) -> Result<String, BlobError> {
        let address = sha256_hex(bytes);
        let path = self.root.join(&address);
        if !path.exists() {
            let tmp = self.root.join(format!(".{address}.tmp"));
            let mut file = std::fs::File::create(&tmp)?;
            file.write_all(bytes)?;
            file.sync_data()?;
            std::fs::rename(&tmp, &path)?;
        }
        Ok(address)
    }

    pub fn put_image(&self, image: &GeneratedImage) -> Result<ImageRef, BlobError> {
        Ok(ImageRef {
            content_address: self.put(&image.bytes)?,
            media_type: image.media_type,
            width: image.width,
            height: image.height,
        })
    }

    pub fn get(&self, address: &str) -> Result<Vec<u8>, BlobError> {
        let path = self.path_of(address)?;
        std::fs::read(&path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => BlobError::NotFound(address.to_string()),
            _ => BlobError::Io(e),
        })
    }

    pub fn contains(&self, address: &str) -> bool {
        self.path_of(address).is_ok_and(|p| p.is_file())
    }

    /// Reads a blob and sniffs its media type.
    pub fn get_image(&self, address: &str) -> Result<(Vec<u8>, Option<MediaType>), BlobError> {
        let bytes = self.get(address)?;
        let media = MediaType::sniff(&bytes);
        Ok((bytes, media))
    }

    pub fn addresses(&self) -> Result<Vec<String>, BlobError> {
        let mut out = Vec::new();
        for entry in std::fs::read_dir(&self.root)? {
            let name = entry?.file_name().to_string_lossy().into_owned();
            if is_address(&name) {
                out.push(name);
            }
        }
        out.sort();
        Ok(out)
    }

    fn path_of(&self, address: &str) -> Result<PathBuf, BlobError> {
        if !is_address(address) {
            return Err(BlobError::InvalidAddress(address.to_string()));
        }
        Ok(self.root.join(address))
    }
}

fn is_address(s: &str) -> bool {
    s.len() == 64 && s.bytes().all(|b| b.is_ascii_hexdigit() && !b.is_ascii_uppercase())
}
