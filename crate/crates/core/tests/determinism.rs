use catalytic_ou::exec::{map_replicas, map_replicas_seq, try_map_replicas};
use catalytic_ou::rng;
use rand::Rng;

fn draw(seed: u64, r: usize) -> Vec<f64> {
    let mut g = rng::stream(seed, "determinism", r as u64);
    (0..50).map(|_| g.random::<f64>()).collect()
}

#[test]
fn parallel_and_sequential_fan_out_agree() {
    let par = map_replicas(64, |r| draw(5, r));
    let seq = map_replicas_seq(64, |r| draw(5, r));
    assert_eq!(par, seq);
}

#[cfg(feature = "parallel")]
#[test]
fn thread_count_does_not_change_results() {
    let run = |threads| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| map_replicas(64, |r| draw(9, r)))
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn first_error_by_index_wins() {
    let r: Result<Vec<usize>, usize> = try_map_replicas(20, |i| if i % 7 == 6 { Err(i) } else { Ok(i) });
    assert_eq!(r, Err(6));
}

#[test]
fn child_seeds_differ_by_tag_and_index() {
    let a = rng::child_seed(1, "a", 0);
    assert_eq!(a, rng::child_seed(1, "a", 0));
    assert_ne!(a, rng::child_seed(1, "b", 0));
    assert_ne!(a, rng::child_seed(1, "a", 1));
    assert_ne!(a, rng::child_seed(2, "a", 0));
}
