//! Per-gap eigenvalue counts with the bounds
//! `n_G + 1 − n_∂G ≤ D_G ≤ n_G + 1`, valid in classically allowed gaps.

use crate::error::{Error, Result};
use crate::evans::{evans_roots_in_gap, evans_scan, semi_infinite_cutoff, EvansRoot, DEFAULT_GRID_N, DEFAULT_ROOT_TOL};
use crate::floquet::{gaps_through, rdef_components, GapInterval, RdefComponents, DEFAULT_EDGE_TOL, DEFAULT_SCAN_STEP};
use crate::oracle::{gap_count_oracle_auto, OracleCount, OracleParams};
use crate::potential::PotentialSpec;
use rayon::prelude::*;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CountParams {
    pub scan_step: f64,
    pub edge_tol: f64,
    pub grid_n: usize,
    pub root_tol: f64,
    /// Run the box oracle as well.
    pub oracle: Option<OracleParams>,
}

impl Default for CountParams {
    fn default() -> Self {
        CountParams {
            scan_step: DEFAULT_SCAN_STEP,
            edge_tol: DEFAULT_EDGE_TOL,
            grid_n: DEFAULT_GRID_N,
            root_tol: DEFAULT_ROOT_TOL,
            oracle: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountReport {
    pub gap: GapInterval,
    /// Components of `R_def` meeting the open gap.
    pub n_g: usize,
    /// Gap edges lying in `R_def`.
    pub n_boundary: usize,
    pub lower_bound: i64,
    pub upper_bound: i64,
    /// Whether the bounds apply (the gap is classically allowed).
    pub bounds_verified: bool,
    pub evans_count: usize,
    pub evans_roots: Vec<EvansRoot>,
    pub oracle_count: Option<usize>,
    pub oracle: Option<OracleCount>,
    pub exact_certified: bool,
    pub classically_allowed: bool,
    pub rdef: RdefComponents,
}

/// `R_def` near the gap, its interior components and boundary hits.
fn rdef_in_gap(spec: &PotentialSpec, gap: &GapInterval, params: &CountParams) -> Result<(RdefComponents, usize, usize)> {
    let pad = 1e-3 * (1.0 + gap.e_hi.abs());
    let lo = if gap.is_semi_infinite() {
        semi_infinite_cutoff(spec, gap)
    } else {
        gap.e_lo - pad
    };
    let all = rdef_components(spec, lo, gap.e_hi + pad, params.scan_step, params.edge_tol)?;
    // a component within edge_tol of an edge lies on the boundary, not in G
    let tol = params.edge_tol;
    let inside: Vec<[f64; 2]> = all.meeting_open(gap.e_lo + tol, gap.e_hi - tol).copied().collect();
    let mut n_boundary = usize::from(all.touches(gap.e_hi, params.edge_tol));
    if !gap.is_semi_infinite() {
        n_boundary += usize::from(all.touches(gap.e_lo, params.edge_tol));
    }
    let n_g = if gap.is_semi_infinite() {
        // R_def contains everything below the defect spectrum, which is one
        // component reaching −∞
        inside.len().max(1)
    } else {
        inside.len()
    };
    Ok((RdefComponents { components: inside }, n_g, n_boundary))
}

/// Count for one gap. A count outside the bounds in a classically allowed
/// gap is an error carrying the scan for inspection.
pub fn count_gap(spec: &PotentialSpec, gap: &GapInterval, params: &CountParams) -> Result<CountReport> {
    let (rdef, n_g, n_boundary) = rdef_in_gap(spec, gap, params)?;
    let lower_bound = n_g as i64 + 1 - n_boundary as i64;
    let upper_bound = n_g as i64 + 1;
    let classically_allowed = gap.e_lo > spec.defect_range().1;
    let roots = evans_roots_in_gap(spec, gap, params.grid_n, params.root_tol)?;
    let evans_count = roots.len();
    if classically_allowed && !(lower_bound..=upper_bound).contains(&(evans_count as i64)) {
        let scan = evans_scan(spec, gap, params.grid_n)?;
        let dump = serde_json::json!({ "gap": gap, "scan": scan, "rdef": rdef }).to_string();
        return Err(Error::CountOutsideBounds {
            gap: gap.index,
            evans: evans_count,
            lower: lower_bound,
            upper: upper_bound,
            dump,
        });
    }
    let oracle = params.oracle.as_ref().map(|p| gap_count_oracle_auto(spec, gap, p)).transpose()?;
    Ok(CountReport {
        gap: gap.clone(),
        n_g,
        n_boundary,
        lower_bound,
        upper_bound,
        bounds_verified: classically_allowed,
        evans_count,
        evans_roots: roots,
        oracle_count: oracle.as_ref().map(|o| o.count),
        oracle,
        exact_certified: classically_allowed && (n_boundary == 0 || spec.defect_is_constant()),
        classically_allowed,
        rdef,
    })
}

/// Reports for every nonempty gap with index in `j_lo..=j_hi`.
pub fn count_range(spec: &PotentialSpec, j_lo: usize, j_hi: usize, params: &CountParams) -> Result<Vec<CountReport>> {
    let gaps: Vec<GapInterval> = gaps_through(spec, j_hi, params.scan_step, params.edge_tol)?
        .into_iter()
        .filter(|g| g.index >= j_lo && g.index <= j_hi)
        .collect();
    gaps.par_iter().map(|g| count_gap(spec, g, params)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::floquet::gap;
    use crate::potential::{golden_mean, Piece};
    use std::f64::consts::PI;

    fn kp(qd: f64) -> PotentialSpec {
        PotentialSpec::kronig_penney(40.0, golden_mean(), qd).unwrap()
    }

    #[test]
    fn constant_defect_generic_gap() {
        // q_def = 5: the points 5 + π² m² avoid G_6
        let spec = kp(5.0);
        let g = gap(&spec, 6, 0.5, 1e-8).unwrap().unwrap();
        let r = count_gap(&spec, &g, &CountParams::default()).unwrap();
        assert_eq!((r.n_g, r.n_boundary), (0, 0));
        assert_eq!((r.lower_bound, r.upper_bound), (1, 1));
        assert_eq!(r.evans_count, 1);
        assert!(r.exact_certified);
    }

    #[test]
    fn exceptional_gap_of_the_example() {
        let spec = kp(22.0 * PI * PI / (5f64.sqrt() * golden_mean()));
        let g = gap(&spec, 4, 0.5, 1e-8).unwrap().unwrap();
        let r = count_gap(&spec, &g, &CountParams::default()).unwrap();
        assert_eq!((r.lower_bound, r.upper_bound), (2, 2));
        assert_eq!(r.evans_count, 2);
    }

    #[test]
    fn boundary_point_loosens_lower_bound() {
        // constant defect whose second R_def point c + 4π² sits on the upper
        // edge of G_4
        let spec = kp(0.0);
        let g = gap(&spec, 4, 0.5, 1e-8).unwrap().unwrap();
        let c = g.e_hi - 4.0 * PI * PI;
        let shifted = kp(c);
        let r = count_gap(&shifted, &g, &CountParams { edge_tol: 1e-6, ..Default::default() }).unwrap();
        assert_eq!((r.n_g, r.n_boundary), (0, 1));
        assert_eq!((r.lower_bound, r.upper_bound), (0, 1));
        assert!(r.classically_allowed);
        assert!(r.exact_certified, "constant defects stay exact");
        assert_eq!(r.evans_count, 1);

        let stepped = shifted
            .with_defect(vec![Piece::constant(0.0, 0.5, c - 1.0), Piece::constant(0.5, 1.0, c + 1.0)])
            .unwrap();
        let r = count_gap(&stepped, &g, &CountParams::default()).unwrap();
        assert!(r.lower_bound <= r.evans_count as i64 && r.evans_count as i64 <= r.upper_bound);
    }

    #[test]
    fn zero_potential_has_no_finite_gaps() {
        let spec = PotentialSpec::free(1.0).unwrap();
        let reports = count_range(&spec, 1, 5, &CountParams::default()).unwrap();
        assert!(reports.is_empty());
    }

    #[test]
    fn reports_are_reproducible() {
        let spec = kp(5.0);
        let a = count_range(&spec, 1, 6, &CountParams::default()).unwrap();
        let b = count_range(&spec, 1, 6, &CountParams::default()).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert!(a.iter().all(|r| r.evans_count == 1 || !r.classically_allowed || r.n_g > 0));
    }
}
