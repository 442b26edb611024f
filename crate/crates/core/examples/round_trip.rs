//! Construct a code, push one frame through BPSK/AWGN, decode it serially,
//! then decode the same frame distributed over four ranks and show the
//! results agree.
//!
//! Run with: cargo run --release --example round_trip

use ldpc_mp::channel::{awgn, bpsk_modulate, channel_llr, ChannelParams};
use ldpc_mp::codec::{decode_sum_product, encode, LdpcCode};
use ldpc_mp::gf2::CodeParams;
use ldpc_mp::mprt::mailbox::run_threads;
use ldpc_mp::mprt::{Comm, WorldOptions};
use ldpc_mp::stream::stream_decode;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = CodeParams::new(1032, 12, 6)?;
    let code = LdpcCode::construct(params, 7)?;
    let graph = code.graph();
    println!(
        "code: n={}, k={}, design rate {:.3}, realized rate {:.3}",
        code.n(),
        code.k(),
        params.design_rate(),
        code.realized_rate()
    );

    let mut rng = ChaCha12Rng::seed_from_u64(99);
    let message: Vec<u8> = (0..code.k()).map(|_| rng.random_range(0..2u8)).collect();
    let codeword = encode(&message, &code.generator)?;

    let chan = ChannelParams::new(0.7, 2024)?;
    let received = awgn(&bpsk_modulate(&codeword), &chan);
    let llrs = channel_llr(&received, &chan);
    let flipped = received
        .iter()
        .zip(&codeword)
        .filter(|(y, &b)| (y.is_sign_positive()) != (b == 1))
        .count();
    println!("channel: sigma {}, {} of {} hard bits flipped", chan.sigma(), flipped, code.n());

    let serial = decode_sum_product(&graph, &llrs, 10);
    let errors = serial.bits.iter().zip(&codeword).filter(|(a, b)| a != b).count();
    println!(
        "serial decode: {} bit errors, syndrome zero: {}, iterations: {}",
        errors, serial.syndrome_zero, serial.iterations_run
    );

    let results = run_threads(4, WorldOptions::default(), |comm| {
        let input = (comm.rank() == 0).then_some(&llrs);
        stream_decode(input, &graph, 10, comm).unwrap()
    });
    let distributed = results[0].as_ref().expect("root result");
    println!(
        "stream decode over 4 ranks: identical to serial: {}",
        distributed == &serial
    );
    Ok(())
}
