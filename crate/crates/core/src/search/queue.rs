use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use crate::types::Trajectory;

struct Entry<T> {
    reward: f64,
    seq: u64,
    item: T,
}

// Higher reward ranks higher; among equal rewards the earlier insertion wins.
impl<T> Ord for Entry<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.reward
            .total_cmp(&other.reward)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

impl<T> PartialOrd for Entry<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T> PartialEq for Entry<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<T> Eq for Entry<T> {}

/// Keeps the `capacity` highest-reward items seen so far.
pub struct TopKQueue<T> {
    capacity: usize,
    heap: BinaryHeap<Reverse<Entry<T>>>,
    next_seq: u64,
}

pub type TrajectoryQueue = TopKQueue<Trajectory>;

impl<T> TopKQueue<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "queue capacity must be at least 1");
        Self {
            capacity,
            heap: BinaryHeap::with_capacity(capacity + 1),
            next_seq: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Inserts an item and returns whatever fell out of the queue (possibly
    /// the item itself).
    pub fn push(&mut self, reward: f64, item: T) -> Option<T> {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Reverse(Entry { reward, seq, item }));
        if self.heap.len() > self.capacity {
            self.pop_min()
        } else {
            None
        }
    }

    pub fn pop_min(&mut self) -> Option<T> {
        self.heap.pop().map(|Reverse(e)| e.item)
    }

    pub fn min_reward(&self) -> Option<f64> {
        self.heap.peek().map(|Reverse(e)| e.reward)
    }

    /// Contents from highest to lowest reward.
    pub fn into_sorted_desc(self) -> Vec<T> {
        let mut entries: Vec<Entry<T>> = self.heap.into_iter().map(|Reverse(e)| e).collect();
        entries.sort_by(|a, b| b.cmp(a));
        entries.into_iter().map(|e| e.item).collect()
    }
}

impl TopKQueue<Trajectory> {
    pub fn push_trajectory(&mut self, trajectory: Trajectory) -> Option<Trajectory> {
        self.push(trajectory.total_reward, trajectory)
    }
}
