use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent generator for `(seed, stream, counter)`. Streams index
/// particles or rollouts; the counter indexes iterations, so draws do not
/// depend on scheduling order.
pub fn stream_rng(seed: u64, stream: u64, counter: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.set_word_pos((counter as u128) << 48);
    rng
}
