use std::collections::VecDeque;

/// Binomial coefficients up to a fixed order.
#[derive(Clone, Debug)]
struct Binomial {
    rows: Vec<Vec<f64>>,
}

impl Binomial {
    fn new(max: usize) -> Self {
        let mut rows = vec![vec![1.0]];
        for m in 1..=max {
            let prev = &rows[m - 1];
            let mut row = vec![1.0; m + 1];
            for k in 1..m {
                row[k] = prev[k - 1] + prev[k];
            }
            rows.push(row);
        }
        Binomial { rows }
    }
}

/// Exact power sums `P_m = sum_j x_j^m` and their time integrals, kept in
/// step with the network by closed-form updates.
#[derive(Clone, Debug)]
pub struct PowerSums {
    pub sums: Vec<f64>,
    pub integrals: Vec<f64>,
    binom: Binomial,
    scratch: Vec<f64>,
}

impl PowerSums {
    fn new(potentials: &[f64], degree: usize) -> Self {
        let mut sums = vec![0.0; degree + 1];
        for &x in potentials {
            let mut p = 1.0;
            for s in sums.iter_mut() {
                *s += p;
                p *= x;
            }
        }
        PowerSums {
            sums,
            integrals: vec![0.0; degree + 1],
            binom: Binomial::new(degree),
            scratch: vec![0.0; degree + 1],
        }
    }

    pub fn degree(&self) -> usize {
        self.sums.len() - 1
    }

    fn decay(&mut self, alpha: f64, dt: f64) {
        self.integrals[0] += self.sums[0] * dt;
        for m in 1..self.sums.len() {
            let z = -alpha * m as f64 * dt;
            self.integrals[m] += self.sums[m] * (-z.exp_m1()) / (alpha * m as f64);
            self.sums[m] *= z.exp();
        }
    }

    /// Neuron at `x` resets to 0; the other `n - 1` gain `kick`.
    fn spike(&mut self, x: f64, kick: f64) {
        let deg = self.degree();
        // others[k] = sum over the other neurons of x_i^k
        let mut xp = 1.0;
        for k in 0..=deg {
            self.scratch[k] = self.sums[k] - xp;
            xp *= x;
        }
        for m in 1..=deg {
            let row = &self.binom.rows[m];
            let mut acc = 0.0;
            let mut kp = 1.0;
            for k in (0..=m).rev() {
                acc += row[k] * kp * self.scratch[k];
                kp *= kick;
            }
            self.sums[m] = acc.max(0.0);
        }
    }
}

/// The finite network in the affine representation `x_i = A y_i + B`.
///
/// Decay and the global kick touch only `A` and `B`; a spike rewrites one
/// entry. The running maximum lives in a deque sorted by decreasing `y`:
/// a reset neuron always sits at the current minimum, so it goes to the back.
#[derive(Clone, Debug)]
pub struct Network {
    alpha: f64,
    kick: f64,
    scale: f64,
    offset: f64,
    y: Vec<f64>,
    version: Vec<u32>,
    order: VecDeque<(f64, u32, u32)>,
    pub powers: PowerSums,
}

const RENORMALIZE_BELOW: f64 = 1e-6;

impl Network {
    pub fn new(alpha: f64, h: f64, potentials: Vec<f64>, power_degree: usize) -> Self {
        let n = potentials.len();
        let powers = PowerSums::new(&potentials, power_degree);
        let mut idx: Vec<u32> = (0..n as u32).collect();
        idx.sort_by(|&a, &b| potentials[b as usize].total_cmp(&potentials[a as usize]));
        let order = idx.iter().map(|&i| (potentials[i as usize], i, 0)).collect();
        Network {
            alpha,
            kick: h / n as f64,
            scale: 1.0,
            offset: 0.0,
            y: potentials,
            version: vec![0; n],
            order,
            powers,
        }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn kick(&self) -> f64 {
        self.kick
    }

    #[inline]
    pub fn potential(&self, i: usize) -> f64 {
        (self.scale * self.y[i] + self.offset).max(0.0)
    }

    pub fn potentials(&self) -> Vec<f64> {
        (0..self.y.len()).map(|i| self.potential(i)).collect()
    }

    /// Potentials sorted increasingly: the empirical measure.
    pub fn empirical_measure(&self) -> Vec<f64> {
        let mut v = self.potentials();
        v.sort_by(f64::total_cmp);
        v
    }

    /// `sum_j f(x_j)` by direct summation.
    pub fn total_rate(&self, f: impl Fn(f64) -> f64) -> f64 {
        (0..self.y.len()).map(|i| f(self.potential(i))).sum()
    }

    pub fn max_potential(&mut self) -> f64 {
        while let Some(&(_, i, v)) = self.order.front() {
            if self.version[i as usize] == v {
                break;
            }
            self.order.pop_front();
        }
        match self.order.front() {
            Some(&(y, _, _)) => (self.scale * y + self.offset).max(0.0),
            None => 0.0,
        }
    }

    /// Lets every potential decay for `dt`.
    pub fn advance(&mut self, dt: f64) {
        if dt <= 0.0 {
            return;
        }
        let d = (-self.alpha * dt).exp();
        self.scale *= d;
        self.offset *= d;
        self.powers.decay(self.alpha, dt);
        if self.scale < RENORMALIZE_BELOW {
            self.renormalize();
        }
    }

    fn renormalize(&mut self) {
        let (a, b) = (self.scale, self.offset);
        for y in self.y.iter_mut() {
            *y = a * *y + b;
        }
        for e in self.order.iter_mut() {
            e.0 = a * e.0 + b;
        }
        self.scale = 1.0;
        self.offset = 0.0;
    }

    /// Neuron `i` spikes: it resets to 0 and everybody else gains `h / N`.
    /// Returns the pre-spike potential.
    pub fn spike(&mut self, i: usize) -> f64 {
        let x = self.potential(i);
        self.powers.spike(x, self.kick);
        self.offset += self.kick;
        self.y[i] = -self.offset / self.scale;
        self.version[i] = self.version[i].wrapping_add(1);
        self.order.push_back((self.y[i], i as u32, self.version[i]));
        if self.order.len() > 4 * self.y.len() + 16 {
            let version = &self.version;
            self.order.retain(|&(_, j, v)| version[j as usize] == v);
        }
        x
    }
}
