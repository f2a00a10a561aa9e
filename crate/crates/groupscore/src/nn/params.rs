//! Named parameter tensors backed by one flat `f64` buffer.
//!
//! The flat layout keeps the optimizer and checkpoint code trivial: both work
//! on a single contiguous array, with named views layered on top.

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha20Rng;

/// Handle to one named tensor inside a [`ParamSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) u32);

#[derive(Debug, Clone, PartialEq)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    pub len: usize,
}

impl TensorSpec {
    pub fn rows(&self) -> usize {
        self.shape.first().copied().unwrap_or(1)
    }

    pub fn cols(&self) -> usize {
        self.shape.get(1).copied().unwrap_or(1)
    }
}

/// How a tensor is initialized on registration.
#[derive(Debug, Clone, Copy)]
pub enum Init {
    Zero,
    /// Uniform in `[-1/sqrt(fan_in), +1/sqrt(fan_in)]`.
    UniformFanIn(usize),
}

#[derive(Debug, Clone, Default)]
pub struct ParamSet {
    specs: Vec<TensorSpec>,
    by_name: HashMap<String, ParamId>,
    data: Vec<f64>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, shape: &[usize], init: Init, rng: &mut ChaCha20Rng) -> ParamId {
        assert!(
            !self.by_name.contains_key(name),
            "duplicate parameter `{name}`"
        );
        let len: usize = shape.iter().product();
        assert!(len > 0, "empty parameter `{name}`");
        let offset = self.data.len();
        match init {
            Init::Zero => self.data.extend(std::iter::repeat_n(0.0, len)),
            Init::UniformFanIn(fan_in) => {
                let r = 1.0 / (fan_in.max(1) as f64).sqrt();
                self.data
                    .extend((0..len).map(|_| rng.random::<f64>() * 2.0 * r - r));
            }
        }
        let id = ParamId(self.specs.len() as u32);
        self.specs.push(TensorSpec {
            name: name.to_owned(),
            shape: shape.to_vec(),
            offset,
            len,
        });
        self.by_name.insert(name.to_owned(), id);
        id
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn spec(&self, id: ParamId) -> &TensorSpec {
        &self.specs[id.0 as usize]
    }

    pub fn specs(&self) -> &[TensorSpec] {
        &self.specs
    }

    pub fn tensor_count(&self) -> usize {
        self.specs.len()
    }

    /// Total number of scalar parameters.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn values(&self, id: ParamId) -> &[f64] {
        let spec = &self.specs[id.0 as usize];
        &self.data[spec.offset..spec.offset + spec.len]
    }

    pub fn values_mut(&mut self, id: ParamId) -> &mut [f64] {
        let spec = &self.specs[id.0 as usize];
        &mut self.data[spec.offset..spec.offset + spec.len]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Copy values from `src` for every tensor whose name and shape match.
    /// Returns how many tensors were copied.
    pub fn copy_matching(&mut self, src: &ParamSet) -> usize {
        let mut copied = 0;
        for spec in src.specs.clone() {
            if let Some(id) = self.id(&spec.name) {
                if self.spec(id).shape == spec.shape {
                    self.values_mut(id)
                        .copy_from_slice(&src.data[spec.offset..spec.offset + spec.len]);
                    copied += 1;
                }
            }
        }
        copied
    }

    /// Name of the tensor containing flat index `flat`, for error reporting.
    pub fn name_of_flat_index(&self, flat: usize) -> &str {
        self.specs
            .iter()
            .find(|s| flat >= s.offset && flat < s.offset + s.len)
            .map(|s| s.name.as_str())
            .unwrap_or("<unknown>")
    }
}

/// Gradient buffer with the same flat layout as a [`ParamSet`].
#[derive(Debug, Clone)]
pub struct Grads {
    data: Vec<f64>,
}

impl Grads {
    pub fn zeros_like(params: &ParamSet) -> Self {
        Grads {
            data: vec![0.0; params.len()],
        }
    }

    pub fn zero(&mut self) {
        self.data.fill(0.0);
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn slice(&self, params: &ParamSet, id: ParamId) -> &[f64] {
        let spec = params.spec(id);
        &self.data[spec.offset..spec.offset + spec.len]
    }

    pub fn slice_mut(&mut self, params: &ParamSet, id: ParamId) -> &mut [f64] {
        let spec = params.spec(id);
        &mut self.data[spec.offset..spec.offset + spec.len]
    }

    pub fn add_assign(&mut self, other: &Grads) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.data {
            *v *= factor;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn fan_in_init_is_bounded_and_seeded() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let mut params = ParamSet::new();
        let id = params.add("w", &[10, 16], Init::UniformFanIn(16), &mut rng);
        let bound = 1.0 / 4.0;
        assert!(params.values(id).iter().all(|v| v.abs() <= bound));

        let mut rng2 = ChaCha20Rng::seed_from_u64(7);
        let mut params2 = ParamSet::new();
        let id2 = params2.add("w", &[10, 16], Init::UniformFanIn(16), &mut rng2);
        assert_eq!(params.values(id), params2.values(id2));
    }

    #[test]
    fn copy_matching_copies_only_shape_compatible_tensors() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let mut a = ParamSet::new();
        a.add("shared", &[2, 2], Init::UniformFanIn(2), &mut rng);
        a.add("only_a", &[3], Init::UniformFanIn(3), &mut rng);

        let mut b = ParamSet::new();
        b.add("shared", &[2, 2], Init::Zero, &mut rng);
        b.add("only_b", &[4], Init::Zero, &mut rng);

        let copied = b.copy_matching(&a);
        assert_eq!(copied, 1);
        assert_eq!(b.values(b.id("shared").unwrap()), a.values(a.id("shared").unwrap()));
    }

    #[test]
    fn flat_index_maps_back_to_tensor_name() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let mut params = ParamSet::new();
        params.add("first", &[3], Init::Zero, &mut rng);
        params.add("second", &[2], Init::Zero, &mut rng);
        assert_eq!(params.name_of_flat_index(0), "first");
        assert_eq!(params.name_of_flat_index(4), "second");
    }
}
