use super::VehicleMac;

/// Bits arriving during TTI `tti` at a constant `rate_kbps` (bits/ms),
/// i.e. over `(tti, tti + 1]` ms. Cumulative arrivals are
/// `floor(rate · t)`, so fractional rates never lose bits.
pub fn arrivals_in_tti(rate_kbps: f64, tti: u64) -> u64 {
    let total = |t: u64| (rate_kbps * t as f64).floor() as u64;
    total(tti + 1) - total(tti)
}

/// Adds `dt_ms` milliseconds of constant-rate traffic starting at
/// `start_ms` to every buffer.
pub fn arrive_traffic(macs: &mut [VehicleMac], rate_kbps: f64, start_ms: u64, dt_ms: u64) {
    let total = |t: u64| (rate_kbps * t as f64).floor() as u64;
    let bits = total(start_ms + dt_ms) - total(start_ms);
    for m in macs {
        m.buffer_bits += bits;
        m.arrived_bits += bits;
    }
}
