//! Gated recurrent cell: forward rollout with caching and backpropagation
//! through time. Gradients accumulate into a `ModelParams`-shaped buffer.

use super::ModelParams;

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// out += M v, with M row-major `rows x cols`.
fn matvec_add(m: &[f64], rows: usize, cols: usize, v: &[f64], out: &mut [f64]) {
    for i in 0..rows {
        let row = &m[i * cols..(i + 1) * cols];
        let mut acc = 0.0;
        for (a, b) in row.iter().zip(v) {
            acc += a * b;
        }
        out[i] += acc;
    }
}

/// out += M^T v.
fn matvec_t_add(m: &[f64], rows: usize, cols: usize, v: &[f64], out: &mut [f64]) {
    for i in 0..rows {
        let row = &m[i * cols..(i + 1) * cols];
        let vi = v[i];
        for (o, a) in out.iter_mut().zip(row) {
            *o += vi * a;
        }
    }
}

/// G += a b^T.
fn outer_add(g: &mut [f64], a: &[f64], b: &[f64]) {
    for (i, &ai) in a.iter().enumerate() {
        let row = &mut g[i * b.len()..(i + 1) * b.len()];
        for (gi, &bj) in row.iter_mut().zip(b) {
            *gi += ai * bj;
        }
    }
}

pub(crate) struct StepCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    pub n: Vec<f64>,
    pub h: Vec<f64>,
}

/// One uninterrupted rollout from a zero hidden state.
pub(crate) struct ChainCache {
    /// Absolute 0-based step index of the chain's first input.
    pub start: usize,
    pub steps: Vec<StepCache>,
}

/// Forward pass over one record's (padded) input sequence.
pub(crate) struct RecordCache {
    pub chains: Vec<ChainCache>,
    /// Hidden state emitted for each absolute step `0..T`.
    pub hidden: Vec<Vec<f64>>,
}

fn cell_forward(p: &ModelParams, x: &[f64], h_prev: &[f64]) -> StepCache {
    let hs = p.hidden_size;
    let is = p.input_size;
    let mut az = p.bz.clone();
    let mut ar = p.br.clone();
    matvec_add(&p.wz, hs, is, x, &mut az);
    matvec_add(&p.uz, hs, hs, h_prev, &mut az);
    matvec_add(&p.wr, hs, is, x, &mut ar);
    matvec_add(&p.ur, hs, hs, h_prev, &mut ar);
    let z: Vec<f64> = az.iter().map(|&v| sigmoid(v)).collect();
    let r: Vec<f64> = ar.iter().map(|&v| sigmoid(v)).collect();

    let rh: Vec<f64> = r.iter().zip(h_prev).map(|(a, b)| a * b).collect();
    let mut an = p.bn.clone();
    matvec_add(&p.wn, hs, is, x, &mut an);
    matvec_add(&p.un, hs, hs, &rh, &mut an);
    let n: Vec<f64> = an.iter().map(|&v| v.tanh()).collect();

    let h: Vec<f64> = z
        .iter()
        .zip(&n)
        .zip(h_prev)
        .map(|((&zi, &ni), &hi)| (1.0 - zi) * ni + zi * hi)
        .collect();

    StepCache {
        x: x.to_vec(),
        h_prev: h_prev.to_vec(),
        z,
        r,
        n,
        h,
    }
}

/// Rolls the cell over `inputs`, restarting from a zero state so that the
/// hidden state for step `t` only sees the last `window` inputs. A window
/// covering the whole sequence degenerates to a single shared rollout.
pub(crate) fn run_chains(p: &ModelParams, inputs: &[Vec<f64>], window: usize) -> RecordCache {
    let t_len = inputs.len();
    let hs = p.hidden_size;
    let mut hidden = vec![Vec::new(); t_len];
    let mut chains = Vec::new();

    if window >= t_len {
        let mut steps = Vec::with_capacity(t_len);
        let mut h = vec![0.0; hs];
        for x in inputs {
            let step = cell_forward(p, x, &h);
            h = step.h.clone();
            steps.push(step);
        }
        for (t, step) in steps.iter().enumerate() {
            hidden[t] = step.h.clone();
        }
        chains.push(ChainCache { start: 0, steps });
    } else {
        for t in 0..t_len {
            let start = (t + 1).saturating_sub(window);
            let mut steps = Vec::with_capacity(t - start + 1);
            let mut h = vec![0.0; hs];
            for x in &inputs[start..=t] {
                let step = cell_forward(p, x, &h);
                h = step.h.clone();
                steps.push(step);
            }
            hidden[t] = steps.last().unwrap().h.clone();
            chains.push(ChainCache { start, steps });
        }
    }

    RecordCache { chains, hidden }
}

/// Backpropagates `d_hidden[t]` (gradient of the loss w.r.t. the hidden
/// state emitted at absolute step `t`) through every chain, accumulating
/// parameter gradients into `grads`.
pub(crate) fn backward_chains(
    p: &ModelParams,
    cache: &RecordCache,
    d_hidden: &[Vec<f64>],
    grads: &mut ModelParams,
) {
    let hs = p.hidden_size;
    let single_chain = cache.chains.len() == 1;

    for chain in &cache.chains {
        let mut dh = vec![0.0; hs];
        for (k, step) in chain.steps.iter().enumerate().rev() {
            let abs_step = chain.start + k;
            let emitted = if single_chain {
                true
            } else {
                k == chain.steps.len() - 1
            };
            if emitted && !d_hidden[abs_step].is_empty() {
                for (a, b) in dh.iter_mut().zip(&d_hidden[abs_step]) {
                    *a += b;
                }
            }

            // h = (1-z) n + z h_prev
            let mut dz = vec![0.0; hs];
            let mut dn = vec![0.0; hs];
            let mut dh_prev = vec![0.0; hs];
            for i in 0..hs {
                dz[i] = dh[i] * (step.h_prev[i] - step.n[i]);
                dn[i] = dh[i] * (1.0 - step.z[i]);
                dh_prev[i] = dh[i] * step.z[i];
            }

            // pre-activations
            let dan: Vec<f64> = dn
                .iter()
                .zip(&step.n)
                .map(|(&d, &ni)| d * (1.0 - ni * ni))
                .collect();
            let daz: Vec<f64> = dz
                .iter()
                .zip(&step.z)
                .map(|(&d, &zi)| d * zi * (1.0 - zi))
                .collect();

            // an = Wn x + Un (r . h_prev) + bn
            let mut drh = vec![0.0; hs];
            matvec_t_add(&p.un, hs, hs, &dan, &mut drh);
            let dr: Vec<f64> = drh.iter().zip(&step.h_prev).map(|(a, b)| a * b).collect();
            for i in 0..hs {
                dh_prev[i] += drh[i] * step.r[i];
            }
            let dar: Vec<f64> = dr
                .iter()
                .zip(&step.r)
                .map(|(&d, &ri)| d * ri * (1.0 - ri))
                .collect();

            let rh: Vec<f64> = step.r.iter().zip(&step.h_prev).map(|(a, b)| a * b).collect();
            outer_add(&mut grads.wz, &daz, &step.x);
            outer_add(&mut grads.wr, &dar, &step.x);
            outer_add(&mut grads.wn, &dan, &step.x);
            outer_add(&mut grads.uz, &daz, &step.h_prev);
            outer_add(&mut grads.ur, &dar, &step.h_prev);
            outer_add(&mut grads.un, &dan, &rh);
            for i in 0..hs {
                grads.bz[i] += daz[i];
                grads.br[i] += dar[i];
                grads.bn[i] += dan[i];
            }

            matvec_t_add(&p.uz, hs, hs, &daz, &mut dh_prev);
            matvec_t_add(&p.ur, hs, hs, &dar, &mut dh_prev);
            dh = dh_prev;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_params_keep_hidden_at_zero() {
        let p = ModelParams::zeros(3, 4, 1);
        let inputs = vec![vec![1.0, -2.0, 0.5]; 5];
        let cache = run_chains(&p, &inputs, usize::MAX);
        for h in &cache.hidden {
            assert!(h.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn full_window_equals_windowed_when_window_covers_all() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let p = ModelParams::init(2, 3, 1, &mut rng);
        let inputs: Vec<Vec<f64>> = (0..4).map(|t| vec![t as f64 * 0.1, -0.2]).collect();
        let a = run_chains(&p, &inputs, usize::MAX);
        let b = run_chains(&p, &inputs, 4);
        for (x, y) in a.hidden.iter().zip(&b.hidden) {
            for (u, v) in x.iter().zip(y) {
                assert!((u - v).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn short_window_forgets_early_inputs() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let p = ModelParams::init(1, 3, 1, &mut rng);
        // Two sequences differing only at step 0; window 2 hidden at step 3
        // must agree.
        let a: Vec<Vec<f64>> = vec![vec![5.0], vec![0.1], vec![0.2], vec![0.3]];
        let b: Vec<Vec<f64>> = vec![vec![-5.0], vec![0.1], vec![0.2], vec![0.3]];
        let ca = run_chains(&p, &a, 2);
        let cb = run_chains(&p, &b, 2);
        for (u, v) in ca.hidden[3].iter().zip(&cb.hidden[3]) {
            assert!((u - v).abs() < 1e-15);
        }
        assert!(ca.hidden[1]
            .iter()
            .zip(&cb.hidden[1])
            .any(|(u, v)| (u - v).abs() > 1e-9));
    }
}
