/// Round-robin stream parser for one OFDM symbol of coded bits. Consecutive
/// blocks of `max(1, n_bpscs / 2)` bits go to successive spatial streams.
pub fn stream_parse(bits: &[u8], n_ss: usize, n_bpscs: usize) -> Vec<Vec<u8>> {
    let s = (n_bpscs / 2).max(1);
    let mut out = vec![Vec::with_capacity(bits.len() / n_ss); n_ss];
    for (k, &b) in bits.iter().enumerate() {
        out[(k / s) % n_ss].push(b);
    }
    out
}

/// Inverse of [`stream_parse`] on LLRs: interleave per-stream values back
/// into one coded-bit sequence, appended to `out`.
pub fn stream_deparse_into(streams: &[&[f64]], n_bpscs: usize, out: &mut Vec<f64>) {
    let s = (n_bpscs / 2).max(1);
    let n_ss = streams.len();
    let total: usize = streams.iter().map(|x| x.len()).sum();
    for k in 0..total {
        let block = k / s;
        let stream = block % n_ss;
        let pos = s * (block / n_ss) + k % s;
        out.push(streams[stream][pos]);
    }
}
