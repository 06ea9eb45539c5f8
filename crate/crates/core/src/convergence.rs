//! Spatial convergence study: fixed-step marches on successively halved grids,
//! errors measured against the finest grid at the coarse nodes.

use crate::error::{invalid, Result};
use crate::grid::Grid;
use crate::model::MarketParams;
use crate::solver::{march, SolveReport, SolverConfig};

/// Errors of one refinement level against the reference grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelError {
    pub h: f64,
    pub asset_error: f64,
    pub delta_error: f64,
    /// `log2(e_{2h} / e_h)`, absent on the coarsest level.
    pub asset_order: Option<f64>,
    pub delta_order: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ConvergenceStudy {
    /// The finest `h`, used as reference.
    pub reference_h: f64,
    pub levels: Vec<LevelError>,
    pub average_asset_order: f64,
    pub average_delta_order: f64,
    pub reports: Vec<SolveReport>,
}

/// Requires `h_list` strictly decreasing with every successive ratio 2.
pub fn validate_h_list(h_list: &[f64]) -> Result<()> {
    if h_list.len() < 3 {
        return Err(invalid("h", "need at least three grid sizes"));
    }
    for pair in h_list.windows(2) {
        if !(pair[1] < pair[0]) {
            return Err(invalid(
                "h",
                format!("list must be strictly decreasing: {h_list:?}"),
            ));
        }
        if ((pair[0] / pair[1]) - 2.0).abs() > 1e-9 {
            return Err(invalid(
                "h",
                format!("successive ratio must be 2: {h_list:?}"),
            ));
        }
    }
    Ok(())
}

/// Runs one march per `h` (concurrently) and measures the `U` and `W` errors
/// on the coarse nodes against the finest grid, which serves as reference.
pub fn run_study(
    params: &MarketParams,
    x_max: f64,
    h_list: &[f64],
    config: &SolverConfig,
) -> Result<ConvergenceStudy> {
    validate_h_list(h_list)?;
    let grids = h_list
        .iter()
        .map(|&h| Grid::new(x_max, h))
        .collect::<Result<Vec<_>>>()?;
    let reports: Vec<Result<SolveReport>> = std::thread::scope(|scope| {
        let handles: Vec<_> = grids
            .iter()
            .map(|g| scope.spawn(move || march(params, g, config)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("march thread panicked"))
            .collect()
    });
    let reports = reports.into_iter().collect::<Result<Vec<_>>>()?;

    let reference = reports.last().expect("non-empty list");
    let ref_m = reference.grid.intervals();
    let mut levels = Vec::new();
    for report in &reports[..reports.len() - 1] {
        let m = report.grid.intervals();
        let stride = ref_m / m;
        let mut asset_error: f64 = 0.0;
        let mut delta_error: f64 = 0.0;
        for i in 0..=m {
            let coarse = report.final_state.node_values(i);
            let fine = reference.final_state.node_values(i * stride);
            asset_error = asset_error.max((coarse.u - fine.u).abs());
            delta_error = delta_error.max((coarse.w - fine.w).abs());
        }
        levels.push(LevelError {
            h: report.grid.h(),
            asset_error,
            delta_error,
            asset_order: None,
            delta_order: None,
        });
    }
    for j in 1..levels.len() {
        let (prev, cur) = (levels[j - 1], levels[j]);
        levels[j].asset_order = Some((prev.asset_error / cur.asset_error).log2());
        levels[j].delta_order = Some((prev.delta_error / cur.delta_error).log2());
    }
    let average = |f: fn(&LevelError) -> Option<f64>| {
        let orders: Vec<f64> = levels.iter().filter_map(f).collect();
        orders.iter().sum::<f64>() / orders.len() as f64
    };
    Ok(ConvergenceStudy {
        reference_h: *h_list.last().unwrap(),
        average_asset_order: average(|l| l.asset_order),
        average_delta_order: average(|l| l.delta_order),
        levels,
        reports,
    })
}
