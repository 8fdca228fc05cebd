//! C ABI for the pricing engine.
//!
//! Handles are opaque pointers owned by this library; every `*_new`
//! (or `*_build`) has a matching `*_free`. Functions return `TM_OK` or an
//! error code; `tm_last_error_message` describes the most recent failure
//! on the calling thread. The header mirroring this surface lives in
//! `include/taskmarket.h` and is maintained by hand.
//!
//! Thread safety: handles are immutable after construction and may be
//! shared across threads; the builder and the error message are not
//! synchronized and must stay on one thread.

// Validation deliberately writes `!(x > 0.0)` so that NaN fails the check
// along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::ptr;

use taskmarket::bertrand::{
    iterate_to_equilibrium, nash_equilibrium, AgentDemand, DuopolyParams, UpdateSchedule,
};
use taskmarket::contract::{interval_stats, IntervalStats};
use taskmarket::error::MarketError;
use taskmarket::histogram::{cosine_similarity, CompletionHistogram};
use taskmarket::pricing::{price_linear, PricingConstants};
use taskmarket::taskgraph::{price_fine_grained_dp, NodeOption, TaskGraph, TaskNode};
use taskmarket::utility::DemandCurve;

pub const TM_OK: i32 = 0;
pub const TM_ERR_NULL_POINTER: i32 = 1;
pub const TM_ERR_INVALID: i32 = 2;
pub const TM_ERR_UTF8: i32 = 3;
pub const TM_ERR_DIMENSION: i32 = 4;
pub const TM_ERR_EMPTY: i32 = 5;
pub const TM_ERR_CYCLE: i32 = 6;
pub const TM_ERR_CAP_EXCEEDED: i32 = 7;
pub const TM_ERR_ZERO_VECTOR: i32 = 8;
pub const TM_ERR_NO_CONVERGENCE: i32 = 9;
pub const TM_ERR_UNKNOWN_ID: i32 = 10;
pub const TM_ERR_OUT_OF_RANGE: i32 = 11;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<Vec<u8>>) {
    let cstring = CString::new(message).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(cstring));
}

fn code_of(err: &MarketError) -> i32 {
    match err {
        MarketError::Invalid(_) => TM_ERR_INVALID,
        MarketError::Dimension { .. } => TM_ERR_DIMENSION,
        MarketError::Empty(_) => TM_ERR_EMPTY,
        MarketError::Cycle { .. } => TM_ERR_CYCLE,
        MarketError::CapExceeded { .. } => TM_ERR_CAP_EXCEEDED,
        MarketError::ZeroVector => TM_ERR_ZERO_VECTOR,
        MarketError::NoConvergence { .. } => TM_ERR_NO_CONVERGENCE,
        MarketError::UnknownId(_) => TM_ERR_UNKNOWN_ID,
    }
}

fn fail(err: MarketError) -> i32 {
    let code = code_of(&err);
    set_error(err.to_string());
    code
}

fn fail_null(what: &str) -> i32 {
    set_error(format!("null pointer: {what}"));
    TM_ERR_NULL_POINTER
}

/// Most recent error message on this thread, or null. The returned string
/// is owned by the caller; release it with `tm_string_free`.
#[no_mangle]
pub extern "C" fn tm_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|slot| match &*slot.borrow() {
        Some(msg) => msg.clone().into_raw(),
        None => ptr::null_mut(),
    })
}

/// Frees strings returned by this library.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn tm_string_free(s: *mut c_char) {
    if !s.is_null() {
        unsafe {
            drop(CString::from_raw(s));
        }
    }
}

// ---------------------------------------------------------------------------
// Histograms

pub struct TmHistogram(CompletionHistogram);

/// Builds a histogram of point masses. `times` and `masses` must hold
/// `len` entries; masses must be nonnegative and sum to one.
///
/// # Safety
/// `times` and `masses` must be valid for `len` reads; `out` must be valid
/// for a write.
#[no_mangle]
pub unsafe extern "C" fn tm_histogram_from_points(
    times: *const f64,
    masses: *const f64,
    len: usize,
    out: *mut *mut TmHistogram,
) -> i32 {
    if times.is_null() || masses.is_null() || out.is_null() {
        return fail_null("tm_histogram_from_points");
    }
    let times = unsafe { std::slice::from_raw_parts(times, len) };
    let masses = unsafe { std::slice::from_raw_parts(masses, len) };
    let points: Vec<(f64, f64)> = times.iter().copied().zip(masses.iter().copied()).collect();
    match CompletionHistogram::from_points(&points) {
        Ok(h) => {
            unsafe { *out = Box::into_raw(Box::new(TmHistogram(h))) };
            TM_OK
        }
        Err(e) => fail(e),
    }
}

/// Materializes a Gaussian estimate onto a grid of `grid_step` minutes,
/// truncated at zero.
///
/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn tm_histogram_gaussian(
    mean: f64,
    std_dev: f64,
    grid_step: f64,
    out: *mut *mut TmHistogram,
) -> i32 {
    if out.is_null() {
        return fail_null("tm_histogram_gaussian");
    }
    match CompletionHistogram::gaussian(mean, std_dev, grid_step) {
        Ok(h) => {
            unsafe { *out = Box::into_raw(Box::new(TmHistogram(h))) };
            TM_OK
        }
        Err(e) => fail(e),
    }
}

/// Mean completion time of the histogram.
///
/// # Safety
/// `hist` must be a live handle; `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn tm_histogram_mean(hist: *const TmHistogram, out: *mut f64) -> i32 {
    if hist.is_null() || out.is_null() {
        return fail_null("tm_histogram_mean");
    }
    unsafe { *out = (*hist).0.mean() };
    TM_OK
}

/// Cosine similarity of two histograms on the default comparison grid.
///
/// # Safety
/// Both handles must be live; `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn tm_histogram_cosine_similarity(
    a: *const TmHistogram,
    b: *const TmHistogram,
    out: *mut f64,
) -> i32 {
    if a.is_null() || b.is_null() || out.is_null() {
        return fail_null("tm_histogram_cosine_similarity");
    }
    match cosine_similarity(unsafe { &(*a).0 }, unsafe { &(*b).0 }) {
        Ok(v) => {
            unsafe { *out = v };
            TM_OK
        }
        Err(e) => fail(e),
    }
}

/// # Safety
/// `hist` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn tm_histogram_free(hist: *mut TmHistogram) {
    if !hist.is_null() {
        unsafe { drop(Box::from_raw(hist)) };
    }
}

// ---------------------------------------------------------------------------
// Interval statistics

pub struct TmStats {
    stats: IntervalStats,
    targets: Vec<f64>,
}

/// Splits a histogram along target times. `interior_targets` holds the
/// finite targets strictly between 0 and infinity, ascending; the implied
/// full list is `0, t_1, ..., t_k, inf`, giving `k + 1` intervals.
///
/// # Safety
/// `hist` must be live, `interior_targets` valid for `n_interior` reads,
/// and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn tm_interval_stats(
    hist: *const TmHistogram,
    rate: f64,
    interior_targets: *const f64,
    n_interior: usize,
    out: *mut *mut TmStats,
) -> i32 {
    if hist.is_null() || out.is_null() || (interior_targets.is_null() && n_interior > 0) {
        return fail_null("tm_interval_stats");
    }
    let interior = if n_interior == 0 {
        &[][..]
    } else {
        unsafe { std::slice::from_raw_parts(interior_targets, n_interior) }
    };
    let mut targets = Vec::with_capacity(n_interior + 2);
    targets.push(0.0);
    targets.extend_from_slice(interior);
    targets.push(f64::INFINITY);
    match interval_stats(unsafe { &(*hist).0 }, rate, &targets) {
        Ok(stats) => {
            unsafe { *out = Box::into_raw(Box::new(TmStats { stats, targets })) };
            TM_OK
        }
        Err(e) => fail(e),
    }
}

/// Number of intervals.
///
/// # Safety
/// `stats` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn tm_stats_len(stats: *const TmStats) -> usize {
    if stats.is_null() {
        return 0;
    }
    unsafe { (*stats).stats.len() }
}

/// Reads one interval's probability, expected time, and expected cost.
///
/// # Safety
/// `stats` must be live; out pointers must each be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn tm_stats_interval(
    stats: *const TmStats,
    index: usize,
    prob: *mut f64,
    expected_time: *mut f64,
    expected_cost: *mut f64,
) -> i32 {
    if stats.is_null() || prob.is_null() || expected_time.is_null() || expected_cost.is_null() {
        return fail_null("tm_stats_interval");
    }
    let s = unsafe { &(*stats).stats };
    if index >= s.len() {
        set_error(format!("interval index {index} out of range"));
        return TM_ERR_OUT_OF_RANGE;
    }
    unsafe {
        *prob = s.probs[index];
        *expected_time = s.expected_times[index];
        *expected_cost = s.expected_costs[index];
    }
    TM_OK
}

/// # Safety
/// `stats` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn tm_stats_free(stats: *mut TmStats) {
    if !stats.is_null() {
        unsafe { drop(Box::from_raw(stats)) };
    }
}

// ---------------------------------------------------------------------------
// Pricing

/// A priced contract, flattened for C consumers. `markup` is the uniform
/// amount added to every interval's expected cost.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TmPricingOutcome {
    pub markup: f64,
    pub expected_profit: f64,
    pub expected_demand: f64,
    pub overall_profit: f64,
    pub consumer_utility: f64,
}

/// Optimal prices for the linear utility `-time_slope*t - price_slope*p`
/// and demand `max(0, intercept + slope * utility)`.
///
/// # Safety
/// `stats` must be live; `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn tm_price_linear(
    stats: *const TmStats,
    time_slope: f64,
    price_slope: f64,
    demand_intercept: f64,
    demand_slope: f64,
    epsilon: f64,
    out: *mut TmPricingOutcome,
) -> i32 {
    if stats.is_null() || out.is_null() {
        return fail_null("tm_price_linear");
    }
    let handle = unsafe { &*stats };
    let demand = match DemandCurve::new(demand_intercept, demand_slope) {
        Ok(d) => d,
        Err(e) => return fail(e),
    };
    let consts = match PricingConstants::new(epsilon) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    match price_linear(
        &handle.stats,
        &handle.targets,
        time_slope,
        price_slope,
        &demand,
        &consts,
    ) {
        Ok(outcome) => {
            let markup = outcome.prices.eval_interval(0, handle.stats.expected_times[0])
                - handle.stats.expected_costs[0];
            unsafe {
                *out = TmPricingOutcome {
                    markup,
                    expected_profit: outcome.expected_profit,
                    expected_demand: outcome.expected_demand,
                    overall_profit: outcome.overall_profit,
                    consumer_utility: outcome.consumer_utility,
                };
            }
            TM_OK
        }
        Err(e) => fail(e),
    }
}

// ---------------------------------------------------------------------------
// Duopoly

/// Closed-form duopoly equilibrium for demands
/// `gamma_i - alpha_i * own + beta_i * rival`.
///
/// # Safety
/// `mu1` and `mu2` must each be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn tm_bertrand_nash(
    gamma1: f64,
    alpha1: f64,
    beta1: f64,
    gamma2: f64,
    alpha2: f64,
    beta2: f64,
    mu1: *mut f64,
    mu2: *mut f64,
) -> i32 {
    if mu1.is_null() || mu2.is_null() {
        return fail_null("tm_bertrand_nash");
    }
    let params = match DuopolyParams::new([
        AgentDemand { intercept: gamma1, own_slope: alpha1, cross_slope: beta1 },
        AgentDemand { intercept: gamma2, own_slope: alpha2, cross_slope: beta2 },
    ]) {
        Ok(p) => p,
        Err(e) => return fail(e),
    };
    match nash_equilibrium(&params) {
        Ok((a, b)) => {
            unsafe {
                *mu1 = a;
                *mu2 = b;
            }
            TM_OK
        }
        Err(e) => fail(e),
    }
}

/// Synchronized best-response iteration to within `tol` of the
/// equilibrium; writes the final prices and the step count.
///
/// # Safety
/// `mu1`, `mu2`, and `steps` must each be valid for a write.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn tm_bertrand_iterate(
    gamma1: f64,
    alpha1: f64,
    beta1: f64,
    gamma2: f64,
    alpha2: f64,
    beta2: f64,
    init1: f64,
    init2: f64,
    tol: f64,
    max_steps: u64,
    mu1: *mut f64,
    mu2: *mut f64,
    steps: *mut u64,
) -> i32 {
    if mu1.is_null() || mu2.is_null() || steps.is_null() {
        return fail_null("tm_bertrand_iterate");
    }
    let params = match DuopolyParams::new([
        AgentDemand { intercept: gamma1, own_slope: alpha1, cross_slope: beta1 },
        AgentDemand { intercept: gamma2, own_slope: alpha2, cross_slope: beta2 },
    ]) {
        Ok(p) => p,
        Err(e) => return fail(e),
    };
    match iterate_to_equilibrium(
        &params,
        &UpdateSchedule::synchronized(),
        (init1, init2),
        tol,
        max_steps,
    ) {
        Ok(((a, b), n)) => {
            unsafe {
                *mu1 = a;
                *mu2 = b;
                *steps = n;
            }
            TM_OK
        }
        Err(e) => fail(e),
    }
}

// ---------------------------------------------------------------------------
// Task graphs

#[derive(Default)]
pub struct TmGraphBuilder {
    nodes: Vec<TaskNode>,
    edges: Vec<(String, String)>,
}

pub struct TmGraph(TaskGraph);

/// Starts building a task graph.
#[no_mangle]
pub extern "C" fn tm_graph_builder_new() -> *mut TmGraphBuilder {
    Box::into_raw(Box::new(TmGraphBuilder::default()))
}

unsafe fn read_cstr<'a>(s: *const c_char, what: &str) -> Result<&'a str, i32> {
    if s.is_null() {
        return Err(fail_null(what));
    }
    unsafe { CStr::from_ptr(s) }.to_str().map_err(|_| {
        set_error(format!("{what}: invalid utf-8"));
        TM_ERR_UTF8
    })
}

/// Adds a subtask with `n_options` deterministic `(time, cost)` options.
///
/// # Safety
/// `builder` must be live, `id` a NUL-terminated string, and `times` and
/// `costs` valid for `n_options` reads.
#[no_mangle]
pub unsafe extern "C" fn tm_graph_builder_add_node(
    builder: *mut TmGraphBuilder,
    id: *const c_char,
    times: *const f64,
    costs: *const f64,
    n_options: usize,
) -> i32 {
    if builder.is_null() || times.is_null() || costs.is_null() {
        return fail_null("tm_graph_builder_add_node");
    }
    let id = match unsafe { read_cstr(id, "tm_graph_builder_add_node") } {
        Ok(s) => s,
        Err(code) => return code,
    };
    let times = unsafe { std::slice::from_raw_parts(times, n_options) };
    let costs = unsafe { std::slice::from_raw_parts(costs, n_options) };
    let options: Vec<NodeOption> = times
        .iter()
        .zip(costs)
        .map(|(&time, &cost)| NodeOption { time, cost })
        .collect();
    unsafe { &mut *builder }.nodes.push(TaskNode::new(id, options));
    TM_OK
}

/// Adds a producer-to-consumer edge by node ids.
///
/// # Safety
/// `builder` must be live; `from` and `to` must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn tm_graph_builder_add_edge(
    builder: *mut TmGraphBuilder,
    from: *const c_char,
    to: *const c_char,
) -> i32 {
    if builder.is_null() {
        return fail_null("tm_graph_builder_add_edge");
    }
    let from = match unsafe { read_cstr(from, "tm_graph_builder_add_edge") } {
        Ok(s) => s.to_string(),
        Err(code) => return code,
    };
    let to = match unsafe { read_cstr(to, "tm_graph_builder_add_edge") } {
        Ok(s) => s.to_string(),
        Err(code) => return code,
    };
    unsafe { &mut *builder }.edges.push((from, to));
    TM_OK
}

/// Validates the graph and consumes the builder. On success the builder
/// pointer is dead and `out` owns the graph; on failure the builder stays
/// alive for inspection or reuse.
///
/// # Safety
/// `builder` must come from `tm_graph_builder_new`; `out` must be valid
/// for a write.
#[no_mangle]
pub unsafe extern "C" fn tm_graph_builder_build(
    builder: *mut TmGraphBuilder,
    out: *mut *mut TmGraph,
) -> i32 {
    if builder.is_null() || out.is_null() {
        return fail_null("tm_graph_builder_build");
    }
    let b = unsafe { &mut *builder };
    match TaskGraph::new(b.nodes.clone(), &b.edges) {
        Ok(graph) => {
            unsafe {
                drop(Box::from_raw(builder));
                *out = Box::into_raw(Box::new(TmGraph(graph)));
            }
            TM_OK
        }
        Err(e) => fail(e),
    }
}

/// # Safety
/// `builder` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn tm_graph_builder_free(builder: *mut TmGraphBuilder) {
    if !builder.is_null() {
        unsafe { drop(Box::from_raw(builder)) };
    }
}

/// Number of nodes in the graph.
///
/// # Safety
/// `graph` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn tm_graph_len(graph: *const TmGraph) -> usize {
    if graph.is_null() {
        return 0;
    }
    unsafe { (*graph).0.len() }
}

/// Prices the graph with the dynamic program under the linear closed-form
/// profit induced by the given utility and demand parameters. Writes the
/// chosen option index per node (in insertion order) into `choices`.
///
/// # Safety
/// `graph` must be live; `choices` must be valid for `tm_graph_len` writes;
/// the scalar out pointers must each be valid for a write.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn tm_graph_price_dp(
    graph: *const TmGraph,
    time_slope: f64,
    price_slope: f64,
    demand_intercept: f64,
    demand_slope: f64,
    granularity: f64,
    choices: *mut usize,
    total_time: *mut f64,
    total_cost: *mut f64,
    profit: *mut f64,
) -> i32 {
    if graph.is_null()
        || choices.is_null()
        || total_time.is_null()
        || total_cost.is_null()
        || profit.is_null()
    {
        return fail_null("tm_graph_price_dp");
    }
    let g = unsafe { &(*graph).0 };
    let beta_m = demand_slope * price_slope;
    if !(beta_m > 0.0) || !(demand_intercept > 0.0) || time_slope < 0.0 {
        set_error("profit parameters must describe positive, price-sensitive demand");
        return TM_ERR_INVALID;
    }
    let profit_fn = move |t: f64, c: f64| {
        let slack = demand_intercept - demand_slope * time_slope * t - beta_m * c;
        if slack > 0.0 {
            slack * slack / (4.0 * beta_m)
        } else {
            0.0
        }
    };
    match price_fine_grained_dp(g, profit_fn, granularity) {
        Ok(assignment) => {
            let out = unsafe { std::slice::from_raw_parts_mut(choices, g.len()) };
            out.copy_from_slice(&assignment.choices);
            unsafe {
                *total_time = assignment.total_time;
                *total_cost = assignment.total_cost;
                *profit = assignment.profit;
            }
            TM_OK
        }
        Err(e) => fail(e),
    }
}

/// # Safety
/// `graph` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn tm_graph_free(graph: *mut TmGraph) {
    if !graph.is_null() {
        unsafe { drop(Box::from_raw(graph)) };
    }
}
