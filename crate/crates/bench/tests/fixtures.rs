use wifi_load_bench::stationary_stream;

#[test]
fn stream_has_fixed_population_and_length() {
    let s = stationary_stream(25, 300, 4);
    assert_eq!(s.len(), 300);
    assert!(s.iter().all(|x| x.n_true == 25));
    assert!(s.iter().enumerate().all(|(i, x)| x.t == i));
}

#[test]
fn stream_depends_only_on_the_seed() {
    assert_eq!(stationary_stream(10, 200, 3), stationary_stream(10, 200, 3));
    assert_ne!(stationary_stream(10, 200, 3), stationary_stream(10, 200, 4));
}
