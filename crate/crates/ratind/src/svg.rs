//! Minimal SVG plotting: the (t_hat, u_hat) graph as a polyline with axes.
//! Jumps show up as vertical segments because consecutive tau nodes can share
//! a t_hat value while u_hat moves.

use std::fmt::Write as _;

use crate::reparam::ParametrizedPath;

const W: f64 = 640.0;
const H: f64 = 480.0;
const MARGIN: f64 = 40.0;

pub fn render_time_graph(p: &ParametrizedPath) -> String {
    let xs: Vec<f64> = p.t_hat.clone();
    let ys: Vec<f64> = p.u_hat.iter().map(|u| u.0[0]).collect();
    let (x_lo, x_hi) = span(&xs);
    let (y_lo, y_hi) = span(&ys);
    let sx = |x: f64| MARGIN + (x - x_lo) / (x_hi - x_lo) * (W - 2.0 * MARGIN);
    let sy = |y: f64| H - MARGIN - (y - y_lo) / (y_hi - y_lo) * (H - 2.0 * MARGIN);

    let mut pts = String::new();
    for (x, y) in xs.iter().zip(&ys) {
        let _ = write!(pts, "{:.2},{:.2} ", sx(*x), sy(*y));
    }
    let mut out = String::new();
    let _ = write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n"
    );
    // axes
    let _ = write!(
        out,
        "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n<line x1=\"{m}\" y1=\"{t}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\n",
        m = MARGIN,
        b = H - MARGIN,
        r = W - MARGIN,
        t = MARGIN
    );
    let _ = write!(
        out,
        "<text x=\"{}\" y=\"{}\" font-size=\"12\">t_hat</text>\n<text x=\"8\" y=\"{}\" font-size=\"12\">u_hat</text>\n",
        W - MARGIN,
        H - MARGIN / 2.0,
        MARGIN
    );
    let _ = write!(
        out,
        "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"{}\"/>\n</svg>\n",
        pts.trim_end()
    );
    out
}

fn span(vals: &[f64]) -> (f64, f64) {
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo > 1e-12 {
        (lo, hi)
    } else {
        (lo - 0.5, lo + 0.5)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::PotentialSpec;
    use crate::model::{ForcingSpec, ProblemSpec, SpaceGeometry, StateVector};
    use crate::noise::{sample_wiener, NoiseSpec};
    use crate::reparam::rescale_path;
    use crate::viscous::simulate_path;

    #[test]
    fn renders_well_formed_svg() {
        let spec = ProblemSpec {
            geometry: SpaceGeometry::unit(1),
            potential: PotentialSpec::quadratic_identity(1),
            noise: NoiseSpec::off(1),
            forcing: ForcingSpec::Ramp { rate: vec![2.0] },
            u0: StateVector::zeros(1),
            horizon: 1.0,
            epsilon: 1e-2,
            dt: 1e-3,
            n_paths: 1,
            seed: 0,
        };
        let wiener = sample_wiener(&spec, 0);
        let path = simulate_path(&spec, 0).unwrap();
        let param = rescale_path(&path, &wiener, 5e-4, &spec).unwrap();
        let svg = render_time_graph(&param);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("polyline"));
    }
}
