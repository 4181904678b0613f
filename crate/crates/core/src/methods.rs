//! One entry point for every selector, so that front ends and experiments
//! can sweep over methods by name.

use std::fmt;
use std::str::FromStr;

use crate::admm::{self, AdmmProblem, Normalization, Penalty, SolverConfig, TraceRecord};
use crate::error::{Error, Result};
use crate::estimation::{aopt_objective, SensorSet};
use crate::greedy::{greedy_select, GreedyConfig, NoiseMode};
use crate::oracle::exhaustive_best;
use crate::rom_noise::{NoiseModel, ReducedOrderModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    GreedyWn,
    GreedyCn,
    AdmmWn,
    AdmmCn,
    /// ADMM on the correlated-noise problem without row normalization.
    AdmmCnWoNorm,
    Oracle,
}

impl Method {
    pub const ALL: [Method; 6] =
        [Method::GreedyWn, Method::GreedyCn, Method::AdmmWn, Method::AdmmCn, Method::AdmmCnWoNorm, Method::Oracle];

    pub fn name(self) -> &'static str {
        match self {
            Method::GreedyWn => "greedy-wn",
            Method::GreedyCn => "greedy-cn",
            Method::AdmmWn => "admm-wn",
            Method::AdmmCn => "admm-cn",
            Method::AdmmCnWoNorm => "admm-cn-wo-norm",
            Method::Oracle => "oracle",
        }
    }

    pub fn is_admm(self) -> bool {
        matches!(self, Method::AdmmWn | Method::AdmmCn | Method::AdmmCnWoNorm)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone)]
pub struct MethodOutcome {
    pub method: Method,
    /// Ascending row indices.
    pub sensors: SensorSet,
    /// A-optimality value of `sensors` under the correlated noise model,
    /// whatever model the method itself used to choose them.
    pub objective: f64,
    /// Solver iterations; 0 for non-iterative methods.
    pub iterations: usize,
    /// False only for an ADMM run that hit `max_iters`.
    pub converged: bool,
    /// ADMM iteration trace; empty for other methods.
    pub trace: Vec<TraceRecord>,
}

/// Runs `method` with budget `p`. `solver` only affects the ADMM methods.
pub fn run_method(
    method: Method,
    rom: &ReducedOrderModel,
    noise: &NoiseModel,
    p: usize,
    solver: &SolverConfig,
) -> Result<MethodOutcome> {
    let penalty = Penalty::GroupL0 { p };
    let greedy = |mode| greedy_select(rom, noise, &GreedyConfig { noise_mode: mode, p });
    let (sensors, iterations, converged, trace) = match method {
        Method::GreedyWn => (greedy(NoiseMode::White)?.sensors, 0, true, Vec::new()),
        Method::GreedyCn => (greedy(NoiseMode::Correlated)?.sensors, 0, true, Vec::new()),
        Method::Oracle => (exhaustive_best(rom, noise, p)?.0, 0, true, Vec::new()),
        Method::AdmmWn | Method::AdmmCn | Method::AdmmCnWoNorm => {
            let problem = match method {
                Method::AdmmWn => AdmmProblem::white(rom, penalty)?,
                Method::AdmmCn => AdmmProblem::build(rom, noise, penalty, Normalization::NoiseWeighted)?,
                _ => AdmmProblem::build(rom, noise, penalty, Normalization::Raw)?,
            };
            let out = admm::solve(&problem, solver, None)?;
            (out.sensors, out.state.iter, out.converged, out.state.trace)
        }
    };
    let sensors = sensors.sorted();
    let objective = aopt_objective(rom, noise, &sensors)?;
    Ok(MethodOutcome { method, sensors, objective, iterations, converged, trace })
}
