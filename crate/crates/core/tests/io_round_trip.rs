use std::path::Path;

use qitags_core::analysis::{generate_instance, GeneratorConfig};
use qitags_core::io::{document_from_domain, parse_instance, read_instance, write_instance, SolutionDocument};
use qitags_core::motion::PathCache;
use qitags_core::search::{qitags_solve_with, SearchConfig};

#[test]
fn generated_instances_survive_a_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for seed in 0..20 {
        let domain = generate_instance(seed, &GeneratorConfig::default()).unwrap();
        let doc = document_from_domain(&domain, Some(seed)).unwrap();
        let path = dir.path().join(format!("i{seed}.json"));
        write_instance(&path, &doc).unwrap();
        let loaded = read_instance(&path).unwrap();
        assert_eq!(loaded.seed, Some(seed));
        let d = &loaded.domain;
        assert_eq!(document_from_domain(d, loaded.seed).unwrap(), doc);
        assert_eq!(d.robots(), domain.robots());
        assert_eq!(d.tasks(), domain.tasks());
        assert_eq!(d.world(), domain.world());
        assert_eq!(d.time_budget().to_bits(), domain.time_budget().to_bits());
        assert_eq!(d.worst_makespan().to_bits(), domain.worst_makespan().to_bits());
        assert_eq!(d.big_m().to_bits(), domain.big_m().to_bits());
        assert_eq!(d.user_mutex_pairs(), domain.user_mutex_pairs());
    }
}

#[test]
fn solution_output_is_bit_reproducible() {
    let domain = generate_instance(42, &GeneratorConfig::default()).unwrap();
    let text = serde_json::to_string(&document_from_domain(&domain, None).unwrap()).unwrap();
    let render = || {
        let d = parse_instance(&text, Path::new(".")).unwrap().domain;
        let r = qitags_solve_with(&d, &SearchConfig::default(), &PathCache::new()).unwrap();
        serde_json::to_string(&SolutionDocument::new(&d, r.outcome.solution(), &r.stats)).unwrap()
    };
    assert_eq!(render(), render());
}
