//! Cantor pairing and its inverse.

/// `⟨x, y⟩ = (x + y)(x + y + 1)/2 + y`. Monotone in both arguments, with
/// `⟨x, y⟩ ≥ x`.
pub fn pair(x: u64, y: u64) -> u64 {
    let t = x + y;
    t * (t + 1) / 2 + y
}

pub fn unpair(z: u64) -> (u64, u64) {
    let mut t = (((8 * z as u128 + 1) as f64).sqrt() as u64).saturating_sub(1) / 2;
    while (t + 1) * (t + 2) / 2 <= z {
        t += 1;
    }
    while t * (t + 1) / 2 > z {
        t -= 1;
    }
    let y = z - t * (t + 1) / 2;
    (t - y, y)
}

/// `⟨e, v, m⟩ = ⟨⟨e, v⟩, m⟩`.
pub fn triple(e: u64, v: u64, m: u64) -> u64 {
    pair(pair(e, v), m)
}
