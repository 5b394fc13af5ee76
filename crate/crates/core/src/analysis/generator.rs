//! Seeded random instances for the bound experiments.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::learning::{LinearQualityMap, QualityMap};
use crate::model::{Allocation, Cell, DomainSpec, ModelError, ProblemDomain, Robot, Task, TaskNetwork, WorldMap, DEFAULT_ALPHA};
use crate::motion::TravelTable;
use crate::scheduler::schedule_allocation;

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub width: usize,
    pub height: usize,
    pub obstacle_fraction: f64,
    pub robots: (usize, usize),
    pub tasks: (usize, usize),
    pub traits: (usize, usize),
    pub max_assignments: usize,
    pub precedence_prob: f64,
    pub mutex_prob: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            width: 12,
            height: 12,
            obstacle_fraction: 0.1,
            robots: (3, 5),
            tasks: (2, 4),
            traits: (2, 3),
            max_assignments: 20,
            precedence_prob: 0.2,
            mutex_prob: 0.2,
        }
    }
}

fn largest_component(world: &WorldMap) -> Vec<Cell> {
    let (w, h) = (world.width(), world.height());
    let mut seen = vec![false; w * h];
    let mut best: Vec<Cell> = Vec::new();
    for start in 0..w * h {
        let c = Cell::new(start % w, start / w);
        if seen[start] || !world.is_free(c) {
            continue;
        }
        seen[start] = true;
        let mut comp = vec![c];
        let mut queue = VecDeque::from([c]);
        while let Some(cur) = queue.pop_front() {
            for n in crate::motion::neighbors(cur, world) {
                let i = n.row * w + n.col;
                if !seen[i] {
                    seen[i] = true;
                    comp.push(n);
                    queue.push_back(n);
                }
            }
        }
        if comp.len() > best.len() {
            best = comp;
        }
    }
    best
}

/// Random instance with an unset budget (`C_max = C_worst`), plus the
/// makespan of the null allocation.
fn base_instance(seed: u64, cfg: &GeneratorConfig) -> Result<(ProblemDomain, f64, ChaCha8Rng), ModelError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, m) = loop {
        let n = rng.gen_range(cfg.robots.0..=cfg.robots.1);
        let m = rng.gen_range(cfg.tasks.0..=cfg.tasks.1);
        if n * m <= cfg.max_assignments {
            break (n, m);
        }
    };
    let u = rng.gen_range(cfg.traits.0..=cfg.traits.1);

    let blocked: Vec<Cell> = (0..cfg.width * cfg.height)
        .filter(|_| rng.gen_bool(cfg.obstacle_fraction))
        .map(|i| Cell::new(i % cfg.width, i / cfg.width))
        .collect();
    let world = WorldMap::with_blocked(cfg.width, cfg.height, 1.0, blocked)?;
    let free = largest_component(&world);
    if free.is_empty() {
        return Err(ModelError::InvalidInput("generated map has no free cells".into()));
    }
    let pick = |rng: &mut ChaCha8Rng| *free.choose(rng).expect("non-empty");

    let robots: Vec<Robot> = (0..n)
        .map(|_| Robot {
            traits: (0..u).map(|_| rng.gen::<f64>()).collect(),
            start: pick(&mut rng),
            speed: rng.gen_range(0.5..2.0),
        })
        .collect();
    let tasks: Vec<Task> = (0..m)
        .map(|_| {
            let start_site = pick(&mut rng);
            let end_site = if rng.gen_bool(0.5) { start_site } else { pick(&mut rng) };
            Task {
                duration: rng.gen_range(1.0..5.0),
                start_site,
                end_site,
            }
        })
        .collect();
    let mut precedence = Vec::new();
    let mut mutex = Vec::new();
    for i in 0..m {
        for j in i + 1..m {
            if rng.gen_bool(cfg.precedence_prob) {
                precedence.push((i, j));
            } else if rng.gen_bool(cfg.mutex_prob) {
                mutex.push((i, j));
            }
        }
    }
    let team: Vec<f64> = (0..u).map(|k| robots.iter().map(|r| r.traits[k]).sum()).collect();
    let quality_maps = (0..m)
        .map(|_| {
            let w: Vec<f64> = (0..u).map(|_| rng.gen::<f64>()).collect();
            let full: f64 = w.iter().zip(&team).map(|(a, b)| a * b).sum();
            let normalizer = (full * rng.gen_range(0.8..1.6)).max(1e-6);
            LinearQualityMap::new(w, normalizer).map(QualityMap::Linear).map_err(|e| ModelError::InvalidInput(e.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let domain = ProblemDomain::new(DomainSpec {
        network: TaskNetwork { tasks, precedence, mutex },
        robots,
        quality_maps,
        world,
        time_budget: 1.0,
        alpha: DEFAULT_ALPHA,
        big_m: None,
    })?;
    let null = Allocation::empty(m, n);
    let c_null = schedule_allocation(&domain, &null, &TravelTable::euclidean(&domain)).makespan();
    let domain = domain.with_time_budget(domain.worst_makespan())?;
    Ok((domain, c_null, rng))
}

/// Feasible instance with `C_max` uniform between the null allocation's
/// makespan (the smallest any allocation can achieve) and `C_worst`.
pub fn generate_instance(seed: u64, cfg: &GeneratorConfig) -> Result<ProblemDomain, ModelError> {
    let (domain, c_null, mut rng) = base_instance(seed, cfg)?;
    let c_worst = domain.worst_makespan();
    let budget = if c_worst > c_null { rng.gen_range(c_null..=c_worst) } else { c_worst };
    domain.with_time_budget(budget)
}

/// Instance whose budget is below the null allocation's makespan, so no
/// allocation fits.
pub fn generate_infeasible_instance(seed: u64, cfg: &GeneratorConfig) -> Result<ProblemDomain, ModelError> {
    let (domain, c_null, mut rng) = base_instance(seed, cfg)?;
    domain.with_time_budget(c_null * rng.gen_range(0.3..0.95))
}
