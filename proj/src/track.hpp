#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "config.hpp"
#include "errors.hpp"

namespace gcrl::track {

struct MetricPoint {
    std::string name;
    double value = 0.0;
    std::int64_t step = 0;
    std::int64_t timestamp_ms = 0;
};

std::int64_t now_ms();

// One tracked run inside a FileStore-convention layout:
//   <root>/<experiment_id>/<run_id>/{meta.yaml, metrics/, params/, artifacts/}
// Metric files hold one "<timestamp> <value> <step>" line per point and are
// flushed per line so live readers never see a torn line.
class Run {
public:
    Run(std::filesystem::path dir, std::string experiment_id, std::string run_id);

    void log_metric(const MetricPoint& point);
    void log_artifact_text(const std::string& name, const std::string& content);
    void end(const std::string& status = "FINISHED");

    bool active() const { return active_; }
    const std::string& run_id() const { return run_id_; }
    const std::string& experiment_id() const { return experiment_id_; }
    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path dir_;
    std::string experiment_id_;
    std::string run_id_;
    bool active_ = true;
    std::map<std::string, std::ofstream> metric_files_;
    std::map<std::string, std::int64_t> last_step_;
};

// Creates the experiment (by name) and run directories, writes meta.yaml,
// one file per flattened config key under params/, and the full resolved
// config as artifacts/config.yaml.
std::unique_ptr<Run> start_run(const std::filesystem::path& root,
                               const std::string& experiment_name,
                               const config::ConfigTree& resolved_config,
                               std::mt19937_64& rng);

// Reads a metric history back. Tolerates a trailing partial line from an
// in-progress writer.
std::vector<MetricPoint> read_history(const std::filesystem::path& root,
                                      const std::string& run_id,
                                      const std::string& metric_name);

// Locates a run directory by run_id anywhere under the root.
std::filesystem::path find_run_dir(const std::filesystem::path& root,
                                   const std::string& run_id);

}  // namespace gcrl::track
