//! Applying punishment keys: order does not matter and a key undoes itself.

use mediated_gossip::cipher::{apply, retrievable, Bits, Key, KeySet, Origin, Payload};
use mediated_gossip::config::{EventId, NodeId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let keys: Vec<Key> = (1..=3)
        .map(|o| Key { owner: NodeId(o), stage: 1, bits: rng.gen() })
        .collect();
    let event = Payload::plain(Bits::random(32, &mut rng), Origin::Genuine { stage: 1, id: EventId(7) });

    let abc = keys.iter().fold(event.clone(), |p, k| apply(k, &p, 32).unwrap());
    let cba = keys.iter().rev().fold(event.clone(), |p, k| apply(k, &p, 32).unwrap());
    println!("a.b.c == c.b.a: {}", abc == cba);
    println!("key parity after three keys: {:?}", abc.meta.key_parity.owners().collect::<Vec<_>>());

    let twice = apply(&keys[0], &apply(&keys[0], &event, 32).unwrap(), 32).unwrap();
    println!("same key twice restores the event: {}", twice == event);

    // Node 2 knows every key but its own, so anything under key 2 stays hidden from it.
    let known = KeySet::all_but(4, NodeId(2));
    let under_1 = apply(&keys[0], &event, 32).unwrap();
    let under_2 = apply(&keys[1], &event, 32).unwrap();
    println!("node 2 reads a payload under key 1: {}", retrievable(&under_1.meta, known, NodeId(2)));
    println!("node 2 reads a payload under key 2: {}", retrievable(&under_2.meta, known, NodeId(2)));
}
