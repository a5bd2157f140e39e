use rand::seq::index::sample;
use rand::Rng;

use super::params::ParamStore;

/// Denominator floor for [`relative_error`].
pub const ABS_FLOOR: f64 = 1e-6;

/// |a − n| / max(|a|, |n|, 1e-6).
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(ABS_FLOOR)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoordCheck {
    pub coord: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub coords: Vec<CoordCheck>,
}

/// Compares the gradients currently held in `params` against central
/// differences of `loss` on `n_coords` randomly chosen flat coordinates
/// (all of them when `n_coords` exceeds the parameter count).
pub fn finite_diff_check<F, R>(
    mut loss: F,
    params: &ParamStore,
    n_coords: usize,
    h: f64,
    rng: &mut R,
) -> GradCheckReport
where
    F: FnMut(&ParamStore) -> f64,
    R: Rng + ?Sized,
{
    let total = params.numel();
    let picks: Vec<usize> = if n_coords >= total {
        (0..total).collect()
    } else {
        let mut v = sample(rng, total, n_coords).into_vec();
        v.sort_unstable();
        v
    };

    let mut probe = params.clone();
    let mut coords = Vec::with_capacity(picks.len());
    for coord in picks {
        let (id, offset) = params.locate(coord).expect("coordinate in range");
        let original = params.get(id).value[offset];
        let analytic = params.get(id).grad[offset];

        probe.get_mut(id).value[offset] = original + h;
        let plus = loss(&probe);
        probe.get_mut(id).value[offset] = original - h;
        let minus = loss(&probe);
        probe.get_mut(id).value[offset] = original;

        let numeric = (plus - minus) / (2.0 * h);
        coords.push(CoordCheck {
            coord,
            analytic,
            numeric,
            rel_error: relative_error(analytic, numeric),
        });
    }
    let max_rel_error = coords.iter().map(|c| c.rel_error).fold(0.0, f64::max);
    GradCheckReport {
        max_rel_error,
        coords,
    }
}
