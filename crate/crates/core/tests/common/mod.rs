//! Brute-force references used by the integration tests.
#![allow(dead_code)]

/// Direct tally of (bin, arm) pulls and successes by scanning every event
/// once per cell.
pub fn nested_tally(
    arms: &[usize],
    rewards: &[u8],
    bins: &[u32],
    bin_count: usize,
    k: usize,
) -> (Vec<Vec<u64>>, Vec<Vec<u64>>) {
    let mut pulls = vec![vec![0; k]; bin_count];
    let mut wins = vec![vec![0; k]; bin_count];
    for b in 0..bin_count {
        for a in 0..k {
            for e in 0..arms.len() {
                if bins[e] as usize == b && arms[e] == a {
                    pulls[b][a] += 1;
                    wins[b][a] += rewards[e] as u64;
                }
            }
        }
    }
    (pulls, wins)
}

fn rate(s: u64, n: u64) -> Option<f64> {
    if n == 0 {
        None
    } else {
        Some(s as f64 / n as f64)
    }
}

fn argmax(rates: &[Option<f64>]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for i in 0..rates.len() {
        if let Some(r) = rates[i] {
            match best {
                Some(b) if rates[b].unwrap() >= r => {}
                _ => best = Some(i),
            }
        }
    }
    best
}

/// Sum over bins of (N_b/N)(P_{b,w_b} − offset), where offset is the
/// global winner's overall rate (`per_bin = false`) or its rate in bin b.
pub fn oracle_hie(pulls: &[Vec<u64>], wins: &[Vec<u64>], per_bin: bool) -> f64 {
    let k = pulls[0].len();
    let n: u64 = pulls.iter().flatten().sum();
    let global: Vec<Option<f64>> =
        (0..k).map(|i| rate(wins.iter().map(|r| r[i]).sum(), pulls.iter().map(|r| r[i]).sum())).collect();
    let w_star = argmax(&global).unwrap();
    let mut total = 0.0;
    for b in 0..pulls.len() {
        let n_b: u64 = pulls[b].iter().sum();
        if n_b == 0 {
            continue;
        }
        let rates: Vec<Option<f64>> = (0..k).map(|i| rate(wins[b][i], pulls[b][i])).collect();
        let w_b = argmax(&rates).unwrap();
        let offset = if per_bin { rates[w_star].unwrap() } else { global[w_star].unwrap() };
        total += (n_b as f64 / n as f64) * (rates[w_b].unwrap() - offset);
    }
    total
}

/// KL over the two outcomes v ∈ {0, 1}, probabilities clamped to [δ, 1−δ].
fn kl(p1: f64, q1: f64, delta: f64) -> f64 {
    let p1 = p1.max(delta).min(1.0 - delta);
    let q1 = q1.max(delta).min(1.0 - delta);
    let mut d = 0.0;
    for v in 0..2 {
        let (p, q) = if v == 1 { (p1, q1) } else { (1.0 - p1, 1.0 - q1) };
        d += p * (p / q).ln();
    }
    d
}

fn divergence(pulls: &[u64], wins: &[u64], delta: f64) -> f64 {
    let total: u64 = pulls.iter().sum();
    let mut d = 0.0;
    for i in 0..pulls.len() {
        for j in 0..pulls.len() {
            if pulls[i] == 0 || pulls[j] == 0 {
                continue;
            }
            let w = (pulls[i] * pulls[j]) as f64 / (total * total) as f64;
            d += w * kl(wins[i] as f64 / pulls[i] as f64, wins[j] as f64 / pulls[j] as f64, delta);
        }
    }
    d
}

pub fn oracle_hdd(pulls: &[Vec<u64>], wins: &[Vec<u64>], delta: f64) -> f64 {
    let k = pulls[0].len();
    let n: u64 = pulls.iter().flatten().sum();
    let arm_pulls: Vec<u64> = (0..k).map(|i| pulls.iter().map(|r| r[i]).sum()).collect();
    let arm_wins: Vec<u64> = (0..k).map(|i| wins.iter().map(|r| r[i]).sum()).collect();
    let mut contextual = 0.0;
    for b in 0..pulls.len() {
        let n_b: u64 = pulls[b].iter().sum();
        if n_b > 0 {
            contextual += (n_b as f64 / n as f64) * divergence(&pulls[b], &wins[b], delta);
        }
    }
    contextual - divergence(&arm_pulls, &arm_wins, delta)
}
