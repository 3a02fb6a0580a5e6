use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Dequeue key: smaller `(primary, secondary)` first, then insertion order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Priority {
    pub primary: f64,
    pub secondary: f64,
}

impl Priority {
    pub fn new(primary: f64, secondary: f64) -> Self {
        Priority { primary, secondary }
    }

    fn cmp_key(&self, other: &Self) -> Ordering {
        self.primary
            .total_cmp(&other.primary)
            .then(self.secondary.total_cmp(&other.secondary))
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct QueueEntry {
    pub priority: Priority,
    pub seq: u64,
    pub node: u32,
}

impl PartialEq for QueueEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for QueueEntry {}

impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for QueueEntry {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .priority
            .cmp_key(&self.priority)
            .then(other.seq.cmp(&self.seq))
    }
}

/// Min-priority queue with FIFO tie-breaking.
#[derive(Debug, Default)]
pub(crate) struct NodeQueue {
    heap: BinaryHeap<QueueEntry>,
    next_seq: u64,
}

impl NodeQueue {
    pub fn push(&mut self, node: u32, priority: Priority) {
        self.heap.push(QueueEntry {
            priority,
            seq: self.next_seq,
            node,
        });
        self.next_seq += 1;
    }

    pub fn pop(&mut self) -> Option<QueueEntry> {
        self.heap.pop()
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }
}
