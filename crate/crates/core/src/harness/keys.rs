use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::consensus::{NodeId, QdsService, Route, SignerMaterial};
use crate::qds::establish_key_bundle;

/// Key bundles derived from the scenario seed.
///
/// Every QDS instance gets its own ChaCha stream keyed by
/// `(seed, route, forwarder, verifier, attempt)`, so a resend draws fresh
/// keys without shifting any other instance's keys. Each forwarder turn is
/// provisioned with one bundle per verifier plus `reserve` spares; running
/// out aborts the run.
#[derive(Debug, Clone)]
pub struct SeededKeys {
    seed: u64,
    p: usize,
    reserve: usize,
    remaining: usize,
}

impl SeededKeys {
    pub fn new(seed: u64, p: usize, reserve: usize) -> Self {
        Self { seed, p, reserve, remaining: 0 }
    }

    fn stream(&self, stream: &str, route: &Route, forwarder: NodeId, verifier: NodeId, attempt: usize) -> ChaCha8Rng {
        let mut hasher = Sha256::new();
        hasher.update(b"qba-instance");
        hasher.update(self.seed.to_le_bytes());
        hasher.update(route.to_string().as_bytes());
        hasher.update([0]);
        hasher.update((forwarder.0 as u64).to_le_bytes());
        hasher.update((verifier.0 as u64).to_le_bytes());
        hasher.update((attempt as u64).to_le_bytes());
        hasher.update(stream.as_bytes());
        ChaCha8Rng::from_seed(hasher.finalize().into())
    }
}

impl QdsService for SeededKeys {
    fn begin_turn(&mut self, _route: &Route, _forwarder: NodeId, scheduled: usize) {
        self.remaining = scheduled + self.reserve;
    }

    fn bundle(&mut self, route: &Route, forwarder: NodeId, verifier: NodeId, attempt: usize) -> Option<SignerMaterial> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let mut key_rng = self.stream("keys", route, forwarder, verifier, attempt);
        let keys = establish_key_bundle(self.p, &mut key_rng).expect("p validated at load");
        let signing_rng = self.stream("sign", route, forwarder, verifier, attempt);
        Some(SignerMaterial { keys, signing_rng })
    }
}
