#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "config.hpp"
#include "sweep.hpp"
#include "track.hpp"

namespace gcrl::harness {

struct Paths {
    std::filesystem::path conf_dir = "conf";
    std::filesystem::path track_root = "mlruns";
};

struct RunResult {
    double success_rate = 0.0;
    std::string run_id;
    std::filesystem::path run_dir;
};

// Resolves the full configuration for one run: `algorithm=` and `env=` tokens
// select the components, layered defaults are merged, then the remaining
// directives apply left to right. The resolved tree carries top-level keys
// env, seed, experiment_name, record_stream and the algorithm subtree.
config::ConfigTree resolve_config(const std::filesystem::path& conf_dir,
                                  const std::vector<std::string>& override_tokens);

// One tracked training run from a resolved config. Trains, logs metrics,
// stores the checkpoint and (when record_stream) the NDJSON frame stream
// under the run's artifacts.
RunResult run_training(const config::ConfigTree& resolved,
                       const std::filesystem::path& track_root);

RunResult cmd_run(const Paths& paths, const std::vector<std::string>& override_tokens);

// Full study: the study file supplies the sweep keys (and optionally env /
// algorithm); trials launch cmd_run in-process. Journal and report land under
// <track_root>/sweeps/<study_name>/.
sweep::StudyReport cmd_sweep(const Paths& paths,
                             const std::filesystem::path& study_file,
                             const std::vector<std::string>& override_tokens);

// Smoke protocol: every algorithm x environment combination runs the pinned
// short budget (conf/test/smoke.yaml) with a live channel attached. Returns 0
// when every combination passes; writes one report line each.
int smoke_test(const Paths& paths, std::ostream& report);

// Performance gate: trains the pinned perf config (conf/test/perf.yaml) on
// seeds {0,1,2}; passes when the median final success rate meets the pinned
// threshold. Extra override tokens allow sabotage runs in tests.
int perf_test(const Paths& paths, const std::vector<std::string>& extra_overrides,
              std::ostream& report);

std::vector<std::string> algorithm_names(const std::filesystem::path& conf_dir);

}  // namespace gcrl::harness
