// The Four-Room gridworld: load the layout file, draw a task and walk a few
// random steps, printing what happens.
//
// `cargo run --example four_room`

use rand::Rng;
use sftcop::gridworld::{reset, sample_task, step, GridLayout};
use sftcop::rng::stream;

pub fn run_example() -> sftcop::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/layouts/four_room.toml");
    let layout = GridLayout::load(path)?;
    println!("{}", layout.render(Some(layout.start())));

    let mut rng = stream(&[7]);
    let task = sample_task(&mut rng, &layout, -5e-6, 0.95, "demo")?;
    println!("reward weights {:?}", task.reward_weights());
    println!("utility weights {:?}", task.cost_weights());

    let mut s = reset(&layout, &task);
    let (mut reward, mut utility) = (0.0, 0.0);
    for t in 0..200 {
        let a = rng.random_range(0..4);
        let tr = step(&s, a, &layout, &task, &mut rng)?;
        reward += tr.r;
        utility += tr.c;
        if !tr.events.is_empty() {
            println!("step {t}: {:?} at {:?}", tr.events, tr.s_next.position(&layout));
        }
        if tr.done {
            break;
        }
        s = tr.s_next;
    }
    println!("random walk: reward {reward:.3}, utility {utility:.3}");
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
