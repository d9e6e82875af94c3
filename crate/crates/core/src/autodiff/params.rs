use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

/// A named, contiguous block of a [`ParamVector`].
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub name: String,
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
    /// False for state such as batch-norm running statistics.
    pub learnable: bool,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> core::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Flat parameter storage with an immutable segment layout.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamVector {
    pub values: Vec<f64>,
    layout: Vec<Segment>,
}

impl ParamVector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a zero-filled segment and returns its offset.
    pub fn push_segment(&mut self, name: &str, rows: usize, cols: usize, learnable: bool) -> usize {
        let offset = self.values.len();
        self.layout.push(Segment { name: name.into(), offset, rows, cols, learnable });
        self.values.extend(core::iter::repeat_n(0.0, rows * cols));
        offset
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn layout(&self) -> &[Segment] {
        &self.layout
    }

    pub fn segment(&self, name: &str) -> Option<&Segment> {
        self.layout.iter().find(|s| s.name == name)
    }

    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.segment(name).map(|s| &self.values[s.range()])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let r = self.segment(name)?.range();
        Some(&mut self.values[r])
    }

    pub fn learnable_mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.values.len()];
        for s in &self.layout {
            if s.learnable {
                m[s.range()].iter_mut().for_each(|b| *b = true);
            }
        }
        m
    }

    pub fn learnable_count(&self) -> usize {
        self.layout.iter().filter(|s| s.learnable).map(Segment::len).sum()
    }

    /// Same layout as `self`, checked segment by segment.
    pub fn same_layout(&self, other: &ParamVector) -> bool {
        self.layout == other.layout
    }
}
