use std::num::NonZeroUsize;

use lru::LruCache;
use std::sync::Mutex;

use super::CoalitionGame;
use crate::error::Result;

/// Bitset of coalition members.
pub(crate) type CoalitionKey = Vec<u64>;

pub(crate) fn key_words(players: usize) -> usize {
    players.div_ceil(64).max(1)
}

/// Memoizes coalition values behind an LRU of bounded capacity.
///
/// Values are pure functions of the coalition, so a hit returns exactly what a
/// miss would have computed.
pub(crate) struct CachedGame<'g, G: CoalitionGame> {
    game: &'g G,
    cache: Option<Mutex<LruCache<(u64, CoalitionKey), Vec<f64>>>>,
    fingerprint: u64,
}

impl<'g, G: CoalitionGame> CachedGame<'g, G> {
    pub(crate) fn new(game: &'g G, capacity: usize) -> Self {
        Self {
            game,
            cache: NonZeroUsize::new(capacity).map(|c| Mutex::new(LruCache::new(c))),
            fingerprint: game.fingerprint(),
        }
    }

    /// `coalition` sorted, non-empty; `key` its bitset.
    pub(crate) fn value(&self, coalition: &[usize], key: &CoalitionKey) -> Result<Vec<f64>> {
        let Some(cache) = &self.cache else {
            return self.game.value(coalition);
        };
        let k = (self.fingerprint, key.clone());
        if let Some(v) = cache.lock().expect("cache poisoned").get(&k) {
            return Ok(v.clone());
        }
        let v = self.game.value(coalition)?;
        cache.lock().expect("cache poisoned").put(k, v.clone());
        Ok(v)
    }
}
