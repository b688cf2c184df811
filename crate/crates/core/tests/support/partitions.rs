//! Brute-force partition helpers shared by test targets.

/// Every set partition of `0..n` as a restricted growth string.
pub fn all_partitions(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut z = vec![0usize; n];
    fn rec(i: usize, max: usize, z: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i == z.len() {
            out.push(z.clone());
            return;
        }
        for c in 0..=max + 1 {
            z[i] = c;
            rec(i + 1, max.max(c), z, out);
        }
    }
    if n == 0 {
        return vec![vec![]];
    }
    rec(1, 0, &mut z, &mut out);
    out
}

/// ARI from the four pair counts, straight from the definition.
pub fn pair_count_ari(a: &[usize], b: &[usize]) -> f64 {
    let (mut ss, mut sd, mut ds, mut dd) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            match (a[i] == a[j], b[i] == b[j]) {
                (true, true) => ss += 1.0,
                (true, false) => sd += 1.0,
                (false, true) => ds += 1.0,
                (false, false) => dd += 1.0,
            }
        }
    }
    let denom: f64 = (ss + sd) * (sd + dd) + (ss + ds) * (ds + dd);
    if denom == 0.0 {
        1.0
    } else {
        2.0 * (ss * dd - sd * ds) / denom
    }
}
