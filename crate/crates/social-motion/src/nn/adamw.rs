//! Decoupled-weight-decay Adam with linear warmup.

use super::{Param, VisitParams};

#[derive(Debug, Clone, Copy)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub warmup_steps: usize,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig {
            lr: 2e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
            warmup_steps: 20,
        }
    }
}

#[derive(Debug, Clone)]
struct Moment {
    m: Vec<f64>,
    v: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct AdamW {
    pub cfg: AdamWConfig,
    step: usize,
    moments: Vec<Moment>,
}

impl AdamW {
    pub fn new(cfg: AdamWConfig) -> AdamW {
        AdamW { cfg, step: 0, moments: Vec::new() }
    }

    pub fn step_count(&self) -> usize {
        self.step
    }

    /// One update over every parameter of `model`; gradients are consumed
    /// (zeroed) afterwards. Moment slots bind to visitation order.
    pub fn step(&mut self, model: &mut dyn VisitParams) {
        self.step += 1;
        let t = self.step as f64;
        let warm = if self.cfg.warmup_steps > 0 {
            (self.step as f64 / self.cfg.warmup_steps as f64).min(1.0)
        } else {
            1.0
        };
        let lr = self.cfg.lr * warm;
        let (b1, b2, eps, wd) = (self.cfg.beta1, self.cfg.beta2, self.cfg.eps, self.cfg.weight_decay);
        let bias1 = 1.0 - b1.powf(t);
        let bias2 = 1.0 - b2.powf(t);

        let mut index = 0;
        let moments = &mut self.moments;
        model.visit_params(&mut |_, p: &mut Param| {
            if moments.len() <= index {
                moments.push(Moment { m: vec![0.0; p.len()], v: vec![0.0; p.len()] });
            }
            let slot = &mut moments[index];
            assert_eq!(slot.m.len(), p.len(), "parameter layout changed mid-training");
            for i in 0..p.len() {
                let g = p.g[i];
                slot.m[i] = b1 * slot.m[i] + (1.0 - b1) * g;
                slot.v[i] = b2 * slot.v[i] + (1.0 - b2) * g * g;
                let mhat = slot.m[i] / bias1;
                let vhat = slot.v[i] / bias2;
                p.w[i] -= lr * (mhat / (vhat.sqrt() + eps) + wd * p.w[i]);
                p.g[i] = 0.0;
            }
            index += 1;
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Quadratic {
        p: Param,
    }

    impl VisitParams for Quadratic {
        fn visit_params(&mut self, f: &mut dyn FnMut(&str, &mut Param)) {
            f("p", &mut self.p);
        }
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut model = Quadratic { p: Param { w: vec![3.0, -2.0], g: vec![0.0; 2] } };
        let mut opt = AdamW::new(AdamWConfig {
            lr: 0.05,
            weight_decay: 0.0,
            warmup_steps: 0,
            ..Default::default()
        });
        for _ in 0..500 {
            for i in 0..2 {
                model.p.g[i] = 2.0 * model.p.w[i];
            }
            opt.step(&mut model);
        }
        assert!(model.p.w.iter().all(|v| v.abs() < 1e-3), "{:?}", model.p.w);
    }

    #[test]
    fn warmup_scales_the_first_steps() {
        let mut a = Quadratic { p: Param { w: vec![1.0], g: vec![1.0] } };
        let mut opt = AdamW::new(AdamWConfig {
            lr: 0.1,
            weight_decay: 0.0,
            warmup_steps: 10,
            ..Default::default()
        });
        opt.step(&mut a);
        // First step uses lr/10; plain Adam would move by ~lr.
        let moved = (1.0 - a.p.w[0]).abs();
        assert!(moved < 0.011, "moved {moved}");
    }
}
