//! Dense NCHW tensors.

use ivus_core::PolarImage;
use ndarray::Array2;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: [usize; 4],
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: [usize; 4], data: Vec<f64>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), data.len(), "tensor data does not match shape {shape:?}");
        Self { shape, data }
    }

    pub fn zeros(shape: [usize; 4]) -> Self {
        Self { shape, data: vec![0.0; shape.iter().product()] }
    }

    pub fn filled(shape: [usize; 4], v: f64) -> Self {
        Self { shape, data: vec![v; shape.iter().product()] }
    }

    pub fn shape(&self) -> [usize; 4] {
        self.shape
    }

    pub fn n(&self) -> usize {
        self.shape[0]
    }

    pub fn item_len(&self) -> usize {
        self.shape[1] * self.shape[2] * self.shape[3]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn item(&self, i: usize) -> &[f64] {
        let l = self.item_len();
        &self.data[i * l..(i + 1) * l]
    }

    pub fn item_mut(&mut self, i: usize) -> &mut [f64] {
        let l = self.item_len();
        &mut self.data[i * l..(i + 1) * l]
    }

    pub fn reshape(mut self, shape: [usize; 4]) -> Self {
        assert_eq!(shape.iter().product::<usize>(), self.data.len());
        self.shape = shape;
        self
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { shape: self.shape, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn add_assign(&mut self, other: &Tensor) {
        assert_eq!(self.shape, other.shape);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Stacks tensors with identical item shapes along the batch axis.
    pub fn concat(parts: &[&Tensor]) -> Self {
        let first = parts[0].shape;
        let mut data = Vec::with_capacity(parts.iter().map(|p| p.data.len()).sum());
        let mut n = 0;
        for p in parts {
            assert_eq!(p.shape[1..], first[1..], "concat item shapes differ");
            data.extend_from_slice(&p.data);
            n += p.shape[0];
        }
        Self { shape: [n, first[1], first[2], first[3]], data }
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.item_len());
        for &i in indices {
            data.extend_from_slice(self.item(i));
        }
        Self { shape: [indices.len(), self.shape[1], self.shape[2], self.shape[3]], data }
    }

    pub fn slice_batch(&self, start: usize, end: usize) -> Self {
        let l = self.item_len();
        Self { shape: [end - start, self.shape[1], self.shape[2], self.shape[3]], data: self.data[start * l..end * l].to_vec() }
    }

    /// Single-channel batch from polar images of one size.
    pub fn from_images(images: &[&PolarImage]) -> Self {
        let (h, w) = images[0].data().dim();
        let mut data = Vec::with_capacity(images.len() * h * w);
        for img in images {
            assert_eq!(img.data().dim(), (h, w), "batch images differ in size");
            data.extend(img.data().iter().copied());
        }
        Self { shape: [images.len(), 1, h, w], data }
    }

    pub fn to_image(&self, i: usize) -> PolarImage {
        let [_, c, h, w] = self.shape;
        assert_eq!(c, 1, "only single-channel tensors convert to images");
        PolarImage::new(Array2::from_shape_vec((h, w), self.item(i).to_vec()).expect("item is h*w")).expect("non-empty image")
    }
}

/// Compact single-channel image collection used as training corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageSet {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl ImageSet {
    pub fn new(height: usize, width: usize) -> Self {
        Self { height, width, data: Vec::new() }
    }

    pub fn from_images<'a>(images: impl IntoIterator<Item = &'a PolarImage>) -> Option<Self> {
        let mut set: Option<ImageSet> = None;
        for img in images {
            let (h, w) = img.data().dim();
            let s = set.get_or_insert_with(|| ImageSet::new(h, w));
            s.push(img);
        }
        set
    }

    pub fn push(&mut self, img: &PolarImage) {
        assert_eq!(img.data().dim(), (self.height, self.width), "image size differs from set");
        self.data.extend(img.data().iter().map(|&v| v as f32));
    }

    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.height * self.width).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn batch(&self, indices: &[usize]) -> Tensor {
        let l = self.height * self.width;
        let mut data = Vec::with_capacity(indices.len() * l);
        for &i in indices {
            data.extend(self.data[i * l..(i + 1) * l].iter().map(|&v| v as f64));
        }
        Tensor::new([indices.len(), 1, self.height, self.width], data)
    }

    pub fn raw(&self) -> &[f32] {
        &self.data
    }
}
