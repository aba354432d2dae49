use num_complex::Complex64;

/// Polynomially graded coordinate stretching `s(d) = 1 + i σ(d) / ω`,
/// `σ(d) = σ_max (d / L)^p`, where `d` is the depth into a layer of thickness `L`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pml {
    pub cells: usize,
    pub order: f64,
    pub sigma_max: f64,
    pub omega: f64,
    /// Node count per side of the grid the layer belongs to.
    pub n: usize,
    pub h: f64,
}

impl Pml {
    /// Layer tuned for a nominal normal-incidence reflection `reflection` of waves
    /// travelling at `speed`.
    pub fn new(
        cells: usize,
        order: f64,
        reflection: f64,
        speed: f64,
        omega: f64,
        n: usize,
        h: f64,
    ) -> Self {
        let thickness = cells as f64 * h;
        let sigma_max = if cells == 0 {
            0.0
        } else {
            (order + 1.0) * speed * (1.0 / reflection).ln() / (2.0 * thickness)
        };
        Pml {
            cells,
            order,
            sigma_max,
            omega,
            n,
            h,
        }
    }

    /// Depth into the layer, in node units, of fractional node index `t`.
    fn depth(&self, t: f64) -> f64 {
        let lo = self.cells as f64;
        let hi = (self.n - 1 - self.cells) as f64;
        (lo - t).max(t - hi).max(0.0)
    }

    /// Stretch factor at fractional node index `t` along either axis.
    pub fn stretch(&self, t: f64) -> Complex64 {
        if self.cells == 0 {
            return Complex64::new(1.0, 0.0);
        }
        let ratio = self.depth(t) / self.cells as f64;
        Complex64::new(1.0, self.sigma_max * ratio.powf(self.order) / self.omega)
    }
}
