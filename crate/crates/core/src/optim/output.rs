use rand::Rng;

use crate::rng::Stream;
use crate::{Error, Result};

/// Uniform draw from a nonempty list of iterates.
pub fn select_output<R: Rng + ?Sized>(iterates: &[Vec<f64>], rng: &mut R) -> Result<Vec<f64>> {
    if iterates.is_empty() {
        return Err(Error::Config("cannot select an output from an empty trace".into()));
    }
    Ok(iterates[rng.random_range(0..iterates.len())].clone())
}

/// Streaming uniform choice over every iterate pushed, without storing them.
#[derive(Debug)]
pub struct Reservoir {
    chosen: Option<Vec<f64>>,
    seen: u64,
    rng: Stream,
}

impl Reservoir {
    pub fn new(rng: Stream) -> Self {
        Self { chosen: None, seen: 0, rng }
    }

    pub fn push(&mut self, x: &[f64]) {
        self.seen += 1;
        if self.rng.random_range(0..self.seen) == 0 {
            self.chosen = Some(x.to_vec());
        }
    }

    pub fn seen(&self) -> u64 {
        self.seen
    }

    pub fn chosen(&self) -> Option<&[f64]> {
        self.chosen.as_deref()
    }
}
