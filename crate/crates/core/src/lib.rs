//! Calibration of vanilla and one-touch barrier quotes to continuous
//! martingale models.
//!
//! Quotes are calibrated by solving a linear program over families of
//! piecewise-linear convex functions. A feasible program yields a
//! [`Decomposition`] from which joint laws of terminal price and running
//! maximum, barrier exotic prices and robust bounds are read off. An
//! infeasible program yields an [`ArbitrageCertificate`].

// `!(x > 0.0)` guards are deliberate: they reject NaN along with the range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arbitrage;
pub mod convex_fn;
pub mod decomposition;
pub mod error;
pub mod joint_law;
pub mod lp;
pub mod market_data;
pub mod numfmt;
pub mod pricing;
pub mod synthetic;

pub use arbitrage::{
    certify, extract_certificate, verify_arbitrage, ArbitrageCertificate, Lambda, Verification,
};
pub use convex_fn::{check_call_price_function, DiscreteMeasure, PLConvex};
pub use decomposition::{
    assemble_frak_c, build_lp, build_lp_with_levels, calibrate, check_conditions,
    check_single_maturity, multi_to_single, single_to_multi, Calibration, CalibrationConfig,
    CalibrationLp, Decomposition, Functional, Instrument, ObjectiveSpec, Quantity, QuotePin, Side,
    SolveMeta,
};
pub use error::Error;
pub use joint_law::{
    band_pmf, joint_pmfs, joint_tail_above, joint_tail_below, rogers_check, state_vol, JointPmf,
    RogersReport,
};
pub use lp::{LpBuilder, LpProblem, LpSolution, LpTolerances};
pub use market_data::{
    build_grid, parse_quotes, validate, BarrierQuote, CallQuote, Grid, MarketQuotes,
    MaturityQuotes, Severity, ValidationReport, Violation,
};
pub use pricing::{
    evaluate_payoff, price_bound, robust_barrier_bounds, up_and_out_call, up_and_out_put,
    BandSelector, BoundResult, DualPrice, PayoffPiece, PayoffSpec,
};
