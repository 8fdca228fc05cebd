//! Compiles and runs a small C program against include/taskmarket.h and
//! the built static library, verifying the handwritten header matches the
//! ABI. Skips silently when no C compiler is on PATH.

use std::path::PathBuf;
use std::process::Command;

const C_PROGRAM: &str = r#"
#include <assert.h>
#include <math.h>
#include <stdio.h>
#include "taskmarket.h"

int main(void) {
  /* histogram -> stats -> closed-form pricing */
  double times[1] = {0.5};
  double masses[1] = {1.0};
  TmHistogram *hist = NULL;
  assert(tm_histogram_from_points(times, masses, 1, &hist) == TM_OK);

  TmStats *stats = NULL;
  assert(tm_interval_stats(hist, 0.2, NULL, 0, &stats) == TM_OK);
  assert(tm_stats_len(stats) == 1);

  TmPricingOutcome outcome;
  assert(tm_price_linear(stats, 1.0, 1.0, 100.0, 50.0, 1e-6, &outcome) == TM_OK);
  assert(fabs(outcome.overall_profit - 24.5) < 1e-9);

  tm_stats_free(stats);
  tm_histogram_free(hist);

  /* duopoly equilibrium */
  double mu1 = 0.0, mu2 = 0.0;
  assert(tm_bertrand_nash(10.0, 2.0, 1.0, 10.0, 2.0, 1.0, &mu1, &mu2) == TM_OK);
  assert(fabs(mu1 - 10.0 / 3.0) < 1e-12);

  /* graph pricing */
  TmGraphBuilder *builder = tm_graph_builder_new();
  double t_select[1] = {5.0}, c_select[1] = {1.0};
  double t_agg[2] = {2.0, 5.0}, c_agg[2] = {4.0, 2.0};
  double t_join[1] = {1.0}, c_join[1] = {1.0};
  assert(tm_graph_builder_add_node(builder, "select", t_select, c_select, 1) == TM_OK);
  assert(tm_graph_builder_add_node(builder, "aggregate", t_agg, c_agg, 2) == TM_OK);
  assert(tm_graph_builder_add_node(builder, "join", t_join, c_join, 1) == TM_OK);
  assert(tm_graph_builder_add_edge(builder, "select", "join") == TM_OK);
  assert(tm_graph_builder_add_edge(builder, "aggregate", "join") == TM_OK);
  TmGraph *graph = NULL;
  assert(tm_graph_builder_build(builder, &graph) == TM_OK);
  assert(tm_graph_len(graph) == 3);

  size_t choices[3];
  double total_time, total_cost, profit;
  assert(tm_graph_price_dp(graph, 1.0, 1.0, 100.0, 1.0, 1.0, choices,
                           &total_time, &total_cost, &profit) == TM_OK);
  assert(total_time == 6.0);
  assert(total_cost == 4.0);
  assert(choices[1] == 1);
  tm_graph_free(graph);

  /* error reporting */
  double bad_mass[1] = {0.5};
  TmHistogram *bad = NULL;
  assert(tm_histogram_from_points(times, bad_mass, 1, &bad) == TM_ERR_INVALID);
  char *msg = tm_last_error_message();
  assert(msg != NULL);
  tm_string_free(msg);

  printf("c smoke ok\n");
  return 0;
}
"#;

fn find_compiler() -> Option<&'static str> {
    ["cc", "gcc", "clang"].into_iter().find(|cc| {
        Command::new(cc).arg("--version").output().map(|o| o.status.success()).unwrap_or(false)
    })
}

#[test]
fn header_matches_abi() {
    let Some(cc) = find_compiler() else {
        eprintln!("no C compiler found; skipping header check");
        return;
    };
    // The static library sits next to the test binary under `deps/`, or
    // one level up after a plain build.
    let exe_dir: PathBuf = std::env::current_exe().unwrap().parent().unwrap().to_path_buf();
    let lib = [exe_dir.join("libtaskmarket_ffi.a"), exe_dir.parent().unwrap().join("libtaskmarket_ffi.a")]
        .into_iter()
        .find(|p| p.exists())
        .expect("static library not built");
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");

    let work = std::env::temp_dir().join("taskmarket-c-smoke");
    std::fs::create_dir_all(&work).unwrap();
    let source = work.join("smoke.c");
    std::fs::write(&source, C_PROGRAM).unwrap();
    let exe = work.join("smoke");

    let compile = Command::new(cc)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(&include)
        .arg(&source)
        .arg(&lib)
        .arg("-lpthread")
        .arg("-ldl")
        .arg("-lm")
        .arg("-o")
        .arg(&exe)
        .output()
        .expect("run compiler");
    assert!(
        compile.status.success(),
        "compilation failed:\n{}",
        String::from_utf8_lossy(&compile.stderr)
    );

    let run = Command::new(&exe).output().expect("run smoke binary");
    assert!(run.status.success(), "smoke binary failed: {}", String::from_utf8_lossy(&run.stderr));
    assert!(String::from_utf8_lossy(&run.stdout).contains("c smoke ok"));
}
