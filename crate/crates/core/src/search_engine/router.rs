//! Hash-modulo shard routing.

pub const FNV_OFFSET_BASIS: u64 = 14_695_981_039_346_656_037;
pub const FNV_PRIME: u64 = 1_099_511_628_211;

/// 64-bit FNV-1a.
pub fn fnv1a_64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET_BASIS, |hash, &b| {
        (hash ^ u64::from(b)).wrapping_mul(FNV_PRIME)
    })
}

/// Maps a routing key to `fnv1a_64(utf8(key)) mod num_shards`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShardRouter {
    num_shards: u32,
}

impl ShardRouter {
    /// `None` when `num_shards` is 0.
    pub fn new(num_shards: u32) -> Option<Self> {
        (num_shards >= 1).then_some(Self { num_shards })
    }

    pub fn num_shards(&self) -> u32 {
        self.num_shards
    }

    pub fn route(&self, key: &str) -> u32 {
        (fnv1a_64(key.as_bytes()) % u64::from(self.num_shards)) as u32
    }
}
