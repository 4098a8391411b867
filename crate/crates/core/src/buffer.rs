//! Bounded FIFO sample buffer with probabilistic (subsampled) ingestion.
//!
//! Between channel soundings most features repeat, so online samples are
//! admitted with a configurable acceptance probability — by default the
//! inverse of the sounding period in TTIs.

use std::collections::VecDeque;
use std::fmt::Write as _;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::neural::FeatureVector;

/// One training example: the features presented at selection time (with the
/// transmitted MCS in the MCS slot), the ACK outcome, and the TTI it came
/// from.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: FeatureVector,
    pub ack: bool,
    pub tti: u64,
}

impl Sample {
    pub fn new(features: FeatureVector, ack: bool, tti: u64) -> Self {
        Sample { features, ack, tti }
    }
}

/// FIFO buffer of at most `capacity` samples; pushing into a full buffer
/// evicts the oldest element.
#[derive(Debug, Clone)]
pub struct SampleBuffer {
    items: VecDeque<Sample>,
    capacity: usize,
    inserts: u64,
}

impl SampleBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "buffer capacity must be at least 1");
        SampleBuffer {
            items: VecDeque::with_capacity(capacity),
            capacity,
            inserts: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.items.len() == self.capacity
    }

    /// Total number of samples ever inserted.
    pub fn inserts(&self) -> u64 {
        self.inserts
    }

    /// Appends as newest; evicts the oldest element when full.
    pub fn push(&mut self, sample: Sample) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(sample);
        self.inserts += 1;
    }

    /// Pushes with probability `rate`; returns whether the sample was kept.
    pub fn maybe_push(&mut self, sample: Sample, rate: f64, rng: &mut ChaCha8Rng) -> bool {
        assert!(rate > 0.0 && rate <= 1.0, "subsample rate must be in (0,1]");
        if rate >= 1.0 || rng.gen::<f64>() < rate {
            self.push(sample);
            true
        } else {
            false
        }
    }

    /// Oldest-to-newest iteration.
    pub fn iter(&self) -> impl Iterator<Item = &Sample> {
        self.items.iter()
    }

    /// Element by position, 0 = oldest.
    pub fn get(&self, idx: usize) -> &Sample {
        &self.items[idx]
    }

    /// Heap bytes attributable to the buffer at capacity: the ring itself
    /// plus the per-sample feature storage.
    pub fn memory_bytes(&self) -> usize {
        let feature_dim = self
            .items
            .front()
            .map(|s| s.features.values().len())
            .unwrap_or(0);
        self.capacity * (std::mem::size_of::<Sample>() + feature_dim * std::mem::size_of::<f64>())
    }

    /// Debug dump, one row per sample: `tti,mcs,ack,<features...>`.
    pub fn dump_csv(&self) -> String {
        let mut out = String::from("tti,mcs,ack,features\n");
        for s in self.iter() {
            let _ = write!(out, "{},{},{}", s.tti, s.features.mcs(), u8::from(s.ack));
            for v in s.features.values() {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn s(tag: u64) -> Sample {
        Sample::new(FeatureVector::new(vec![tag as f64, 1.0]), tag % 2 == 0, tag)
    }

    #[test]
    fn fifo_eviction_order() {
        let mut b = SampleBuffer::new(2);
        b.push(s(1));
        b.push(s(2));
        b.push(s(3));
        let ttis: Vec<u64> = b.iter().map(|x| x.tti).collect();
        assert_eq!(ttis, vec![2, 3]);
    }

    #[test]
    fn capacity_one() {
        let mut b = SampleBuffer::new(1);
        b.push(s(1));
        b.push(s(2));
        assert_eq!(b.len(), 1);
        assert_eq!(b.get(0).tti, 2);
    }

    #[test]
    fn order_preserved_below_capacity() {
        let mut b = SampleBuffer::new(10);
        for i in 0..5 {
            b.push(s(i));
        }
        assert_eq!(b.len(), 5);
        let ttis: Vec<u64> = b.iter().map(|x| x.tti).collect();
        assert_eq!(ttis, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn rate_one_always_accepts() {
        let mut b = SampleBuffer::new(8);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for i in 0..8 {
            assert!(b.maybe_push(s(i), 1.0, &mut rng));
        }
        assert_eq!(b.len(), 8);
    }

    #[test]
    fn acceptance_fraction_near_rate() {
        let mut b = SampleBuffer::new(4);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let offers = 100_000;
        let mut accepted = 0u64;
        for i in 0..offers {
            if b.maybe_push(s(i), 0.2, &mut rng) {
                accepted += 1;
            }
        }
        let frac = accepted as f64 / offers as f64;
        assert!((frac - 0.2).abs() < 0.01, "acceptance fraction {frac}");
    }

    #[test]
    fn matches_naive_reference_model() {
        // Reference: a plain Vec truncated from the front, fed by the same
        // rng stream.
        let mut b = SampleBuffer::new(16);
        let mut reference: Vec<u64> = Vec::new();
        let mut rng_a = ChaCha8Rng::seed_from_u64(5);
        let mut rng_b = ChaCha8Rng::seed_from_u64(5);
        let mut driver = ChaCha8Rng::seed_from_u64(6);
        for i in 0..10_000u64 {
            if driver.gen::<f64>() < 0.5 {
                b.push(s(i));
                reference.push(i);
            } else {
                b.maybe_push(s(i), 0.3, &mut rng_a);
                if rng_b.gen::<f64>() < 0.3 {
                    reference.push(i);
                }
            }
            if reference.len() > 16 {
                let excess = reference.len() - 16;
                reference.drain(..excess);
            }
            assert!(b.len() <= 16);
        }
        let got: Vec<u64> = b.iter().map(|x| x.tti).collect();
        assert_eq!(got, reference);
    }

    #[test]
    fn memory_accounting_linear_in_capacity() {
        let mut sizes = Vec::new();
        for cap in [100, 200, 400] {
            let mut b = SampleBuffer::new(cap);
            b.push(s(0));
            sizes.push(b.memory_bytes());
        }
        assert_eq!(sizes[1] - sizes[0], sizes[0] - 0);
        assert_eq!(sizes[2], 2 * sizes[1]);
    }

    #[test]
    fn csv_dump_has_one_row_per_sample() {
        let mut b = SampleBuffer::new(4);
        b.push(Sample::new(FeatureVector::new(vec![1.5, 7.0]), true, 3));
        b.push(Sample::new(FeatureVector::new(vec![2.5, 9.0]), false, 4));
        let csv = b.dump_csv();
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.lines().nth(1).unwrap().starts_with("3,7,1,1.5,7"));
    }
}
