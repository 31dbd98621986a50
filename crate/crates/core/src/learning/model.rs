use std::collections::BTreeMap;
use std::path::Path;

use crate::archive::{read_metadata, sidecar_path, write_metadata, Archive};
use crate::error::Result;

use super::tensor::{mse_loss, Grads, Tensor};

/// A network trained on normalized `(input, target)` vectors with a mean
/// squared error loss.
pub trait Model: Clone + Send + Sync {
    fn params(&self) -> Vec<&Tensor>;
    fn params_mut(&mut self) -> Vec<&mut Tensor>;

    /// Names matching [`Model::params`], used as archive block names.
    fn param_names(&self) -> Vec<String>;

    fn forward(&self, x: &[f64]) -> Vec<f64>;

    /// Loss for one sample; adds its parameter gradients into `grads`.
    fn loss_grad(&self, x: &[f64], y: &[f64], grads: &mut Grads) -> f64;

    fn loss(&self, x: &[f64], y: &[f64]) -> f64 {
        mse_loss(&self.forward(x), y).0
    }

    fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    fn metadata(&self) -> BTreeMap<String, String>;

    fn from_parts(meta: &BTreeMap<String, String>, archive: &Archive) -> Result<Self>;

    fn kind(&self) -> &'static str;

    fn to_archive(&self) -> Archive {
        let mut a = Archive::new(self.kind());
        for (name, t) in self.param_names().into_iter().zip(self.params()) {
            a.push(name, t);
        }
        a
    }

    /// Writes the binary checkpoint and its `.meta` sidecar.
    fn save(&self, path: &Path) -> Result<()> {
        self.to_archive().save(path)?;
        write_metadata(&sidecar_path(path), &self.metadata())
    }

    fn load(path: &Path) -> Result<Self> {
        let meta = read_metadata(&sidecar_path(path))?;
        Self::from_parts(&meta, &Archive::load(path)?)
    }
}

/// Copies every named block of `archive` into the model, checking shapes.
pub(crate) fn fill_from_archive<M: Model>(model: &mut M, archive: &Archive) -> Result<()> {
    if archive.kind != model.kind() {
        return Err(crate::Error::Config(format!("checkpoint holds a {} model, expected {}", archive.kind, model.kind())));
    }
    let names = model.param_names();
    for (name, p) in names.iter().zip(model.params_mut()) {
        let t = archive.get(name)?;
        t.check_shape(&p.shape, name)?;
        p.data.clone_from(&t.data);
    }
    Ok(())
}
