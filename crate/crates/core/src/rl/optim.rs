use crate::diff::Tensor;
use crate::error::{Error, Result};

/// Adam with bias correction.
#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64, sizes: &[usize]) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn for_params(lr: f64, params: &[&Tensor]) -> Self {
        let sizes: Vec<usize> = params.iter().map(|p| p.len()).collect();
        Adam::new(lr, &sizes)
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One update; parameters with `trainable[i] == false` are left alone.
    pub fn step(&mut self, params: Vec<&mut Tensor>, grads: &[Vec<f64>], trainable: &[bool]) {
        assert_eq!(params.len(), self.m.len(), "parameter count changed");
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (i, p) in params.into_iter().enumerate() {
            if !trainable.get(i).copied().unwrap_or(true) {
                continue;
            }
            let (m, v, g) = (&mut self.m[i], &mut self.v[i], &grads[i]);
            for (((w, g), m), v) in p
                .data_mut()
                .iter_mut()
                .zip(g)
                .zip(m.iter_mut())
                .zip(v.iter_mut())
            {
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *w -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }

    /// Moments followed by the step counter: `[m0, v0, m1, v1, ..., [t]]`.
    pub fn export(&self) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(2 * self.m.len() + 1);
        for (m, v) in self.m.iter().zip(&self.v) {
            out.push(m.clone());
            out.push(v.clone());
        }
        out.push(vec![self.t as f64]);
        out
    }

    pub fn import(&mut self, mut parts: Vec<Vec<f64>>) -> Result<()> {
        if parts.len() != 2 * self.m.len() + 1 {
            return Err(Error::input(
                "optimizer state has the wrong number of arrays",
            ));
        }
        let t = parts.pop().expect("checked length");
        if t.len() != 1 {
            return Err(Error::input(
                "optimizer step counter must be a single value",
            ));
        }
        for (i, pair) in parts.chunks_exact(2).enumerate() {
            if pair[0].len() != self.m[i].len() || pair[1].len() != self.v[i].len() {
                return Err(Error::input("optimizer moment has the wrong length"));
            }
        }
        for (i, pair) in parts.chunks_exact(2).enumerate() {
            self.m[i].copy_from_slice(&pair[0]);
            self.v[i].copy_from_slice(&pair[1]);
        }
        self.t = t[0] as u64;
        Ok(())
    }
}

/// Moves each target toward its online parameter: `t ← (1 − rate)·t + rate·p`.
/// `rate = 1` copies exactly and `rate = 0` leaves targets untouched.
pub fn polyak_update(targets: Vec<&mut Tensor>, online: Vec<&Tensor>, rate: f64) {
    assert_eq!(targets.len(), online.len());
    if rate == 0.0 {
        return;
    }
    for (t, p) in targets.into_iter().zip(online) {
        if rate == 1.0 {
            t.data_mut().copy_from_slice(p.data());
            continue;
        }
        for (t, p) in t.data_mut().iter_mut().zip(p.data()) {
            *t = (1.0 - rate) * *t + rate * p;
        }
    }
}
