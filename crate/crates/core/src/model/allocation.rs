use serde::{Deserialize, Serialize};

use super::ModelError;

/// Largest supported `M · N`; allocations are packed into a `u128`.
pub const MAX_ASSIGNMENTS: usize = 128;

/// Binary `M × N` allocation matrix, packed row-major: entry `(m, n)` is bit
/// `m · N + n`. The packed value doubles as the allocation's hash key and
/// the tie-breaker wherever "smaller allocation hash" is needed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Allocation {
    tasks: usize,
    robots: usize,
    bits: u128,
}

impl Allocation {
    pub fn empty(tasks: usize, robots: usize) -> Self {
        assert!(tasks * robots <= MAX_ASSIGNMENTS, "allocation too large");
        Allocation { tasks, robots, bits: 0 }
    }

    pub fn full(tasks: usize, robots: usize) -> Self {
        let mut a = Self::empty(tasks, robots);
        a.bits = mask(tasks * robots);
        a
    }

    pub fn from_bits(tasks: usize, robots: usize, bits: u128) -> Result<Self, ModelError> {
        let size = tasks * robots;
        if size > MAX_ASSIGNMENTS {
            return Err(ModelError::TooManyAssignments(size));
        }
        if bits & !mask(size) != 0 {
            return Err(ModelError::InvalidInput(format!("bit pattern {bits:#x} has bits beyond {size} assignments")));
        }
        Ok(Allocation { tasks, robots, bits })
    }

    /// Builds an allocation from 0/1 rows.
    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Result<Self, ModelError> {
        let robots = rows.first().map_or(0, |r| r.as_ref().len());
        let tasks = rows.len();
        if tasks * robots > MAX_ASSIGNMENTS {
            return Err(ModelError::TooManyAssignments(tasks * robots));
        }
        let mut a = Self::empty(tasks, robots);
        for (m, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != robots {
                return Err(ModelError::DimensionMismatch {
                    what: "allocation row",
                    expected: robots,
                    found: row.len(),
                });
            }
            for (n, &v) in row.iter().enumerate() {
                match v {
                    0 => {}
                    1 => a.set(m, n, true),
                    other => return Err(ModelError::InvalidInput(format!("allocation entry {other} is not binary"))),
                }
            }
        }
        Ok(a)
    }

    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        (0..self.tasks)
            .map(|m| (0..self.robots).map(|n| self.get(m, n) as u8).collect())
            .collect()
    }

    pub fn tasks(&self) -> usize {
        self.tasks
    }

    pub fn robots(&self) -> usize {
        self.robots
    }

    /// Packed row-major bit pattern.
    pub fn key(&self) -> u128 {
        self.bits
    }

    pub fn get(&self, task: usize, robot: usize) -> bool {
        debug_assert!(task < self.tasks && robot < self.robots);
        self.bits >> (task * self.robots + robot) & 1 == 1
    }

    pub fn set(&mut self, task: usize, robot: usize, value: bool) {
        debug_assert!(task < self.tasks && robot < self.robots);
        let bit = 1u128 << (task * self.robots + robot);
        if value {
            self.bits |= bit;
        } else {
            self.bits &= !bit;
        }
    }

    pub fn popcount(&self) -> usize {
        self.bits.count_ones() as usize
    }

    /// Assignments removed relative to the all-ones root.
    pub fn depth(&self) -> usize {
        self.tasks * self.robots - self.popcount()
    }

    /// Robots assigned to `task`, ascending.
    pub fn coalition(&self, task: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.robots).filter(move |&n| self.get(task, n))
    }

    /// Tasks that `robot` is assigned to, ascending.
    pub fn tasks_of(&self, robot: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.tasks).filter(move |&m| self.get(m, robot))
    }

    /// True when tasks `i` and `j` share at least one robot.
    pub fn shares_robot(&self, i: usize, j: usize) -> bool {
        let row = mask(self.robots);
        let ri = (self.bits >> (i * self.robots)) & row;
        let rj = (self.bits >> (j * self.robots)) & row;
        ri & rj != 0
    }

    /// Robots assigned to both `i` and `j`.
    pub fn shared_robots(&self, i: usize, j: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.robots).filter(move |&n| self.get(i, n) && self.get(j, n))
    }

    /// One child per set bit, that bit cleared, in ascending bit order.
    pub fn successors(&self) -> impl Iterator<Item = Allocation> + '_ {
        let mut rest = self.bits;
        std::iter::from_fn(move || {
            if rest == 0 {
                return None;
            }
            let low = rest & rest.wrapping_neg();
            rest &= !low;
            Some(Allocation {
                bits: self.bits & !low,
                ..*self
            })
        })
    }
}

fn mask(bits: usize) -> u128 {
    if bits >= 128 {
        u128::MAX
    } else {
        (1u128 << bits) - 1
    }
}

/// Serialized as its 0/1 rows.
impl Serialize for Allocation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Allocation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rows = Vec::<Vec<u8>>::deserialize(d)?;
        Allocation::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}
