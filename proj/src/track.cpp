#include "track.hpp"

#include <chrono>
#include <cstdio>
#include <sstream>

namespace gcrl::track {

namespace fs = std::filesystem;

std::int64_t now_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

namespace {

std::string random_hex(std::mt19937_64& rng, std::size_t n_bytes) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(n_bytes * 2);
    std::uniform_int_distribution<int> byte(0, 255);
    for (std::size_t i = 0; i < n_bytes; ++i) {
        const int b = byte(rng);
        out += digits[b >> 4];
        out += digits[b & 15];
    }
    return out;
}

void write_text_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << content;
}

// Experiment ids are consecutive integers; the name lives in the experiment
// meta.yaml, as in the MLflow FileStore convention.
std::string ensure_experiment(const fs::path& root, const std::string& name) {
    std::error_code ec;
    fs::create_directories(root, ec);
    if (ec || !fs::is_directory(root)) {
        throw IoError("tracking root " + root.string() + " is not writable");
    }
    std::int64_t max_id = -1;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (!entry.is_directory()) continue;
        const std::string dirname = entry.path().filename().string();
        char* end = nullptr;
        const long long id = std::strtoll(dirname.c_str(), &end, 10);
        if (end != dirname.c_str() + dirname.size()) continue;
        max_id = std::max<std::int64_t>(max_id, id);
        const fs::path meta = entry.path() / "meta.yaml";
        if (!fs::exists(meta)) continue;
        config::ConfigTree tree = config::load_config_file(meta);
        if (tree.contains("name") && tree["name"] == name) return dirname;
    }
    const std::string exp_id = std::to_string(max_id + 1);
    const fs::path exp_dir = root / exp_id;
    fs::create_directories(exp_dir);
    config::ConfigTree meta = config::ConfigTree::object();
    meta["artifact_location"] = exp_dir.string();
    meta["experiment_id"] = exp_id;
    meta["lifecycle_stage"] = "active";
    meta["name"] = name;
    write_text_file(exp_dir / "meta.yaml", config::serialize_config(meta));
    return exp_id;
}

void write_run_meta(const fs::path& run_dir, const std::string& exp_id,
                    const std::string& run_id, std::int64_t start_time,
                    std::int64_t end_time, const std::string& status) {
    config::ConfigTree meta = config::ConfigTree::object();
    meta["artifact_uri"] = (run_dir / "artifacts").string();
    if (end_time >= 0) meta["end_time"] = end_time;
    meta["experiment_id"] = exp_id;
    meta["lifecycle_stage"] = "active";
    meta["run_id"] = run_id;
    meta["start_time"] = start_time;
    meta["status"] = status;
    write_text_file(run_dir / "meta.yaml", config::serialize_config(meta));
}

}  // namespace

Run::Run(fs::path dir, std::string experiment_id, std::string run_id)
    : dir_(std::move(dir)),
      experiment_id_(std::move(experiment_id)),
      run_id_(std::move(run_id)) {}

void Run::log_metric(const MetricPoint& point) {
    if (!active_) throw StateError("log_metric on an ended run");
    auto it = metric_files_.find(point.name);
    if (it == metric_files_.end()) {
        std::ofstream file(dir_ / "metrics" / point.name, std::ios::app);
        if (!file) throw IoError("cannot open metric file for " + point.name);
        it = metric_files_.emplace(point.name, std::move(file)).first;
        last_step_.emplace(point.name, point.step);
    } else if (point.step < last_step_[point.name]) {
        throw StateError("metric '" + point.name + "' logged with decreasing step");
    }
    last_step_[point.name] = point.step;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", point.value);
    it->second << point.timestamp_ms << ' ' << buf << ' ' << point.step << '\n';
    it->second.flush();
    if (!it->second) throw IoError("write failed for metric " + point.name);
}

void Run::log_artifact_text(const std::string& name, const std::string& content) {
    if (!active_) throw StateError("log_artifact_text on an ended run");
    write_text_file(dir_ / "artifacts" / name, content);
}

void Run::end(const std::string& status) {
    if (!active_) return;
    active_ = false;
    metric_files_.clear();
    config::ConfigTree meta = config::load_config_file(dir_ / "meta.yaml");
    write_run_meta(dir_, experiment_id_, run_id_, meta["start_time"].get<std::int64_t>(),
                   now_ms(), status);
}

std::unique_ptr<Run> start_run(const fs::path& root, const std::string& experiment_name,
                               const config::ConfigTree& resolved_config,
                               std::mt19937_64& rng) {
    const std::string exp_id = ensure_experiment(root, experiment_name);
    std::string run_id = random_hex(rng, 16);
    fs::path run_dir = root / exp_id / run_id;
    while (fs::exists(run_dir)) {
        run_id = random_hex(rng, 16);
        run_dir = root / exp_id / run_id;
    }
    fs::create_directories(run_dir / "metrics");
    fs::create_directories(run_dir / "params");
    fs::create_directories(run_dir / "artifacts");
    write_run_meta(run_dir, exp_id, run_id, now_ms(), -1, "RUNNING");
    for (const auto& [key, value] : config::flatten(resolved_config)) {
        write_text_file(run_dir / "params" / key, value);
    }
    write_text_file(run_dir / "artifacts" / "config.yaml",
                    config::serialize_config(resolved_config));
    return std::make_unique<Run>(run_dir, exp_id, run_id);
}

fs::path find_run_dir(const fs::path& root, const std::string& run_id) {
    if (fs::is_directory(root)) {
        for (const auto& exp : fs::directory_iterator(root)) {
            if (!exp.is_directory()) continue;
            const fs::path candidate = exp.path() / run_id;
            if (fs::is_directory(candidate)) return candidate;
        }
    }
    throw IoError("run '" + run_id + "' not found under " + root.string());
}

std::vector<MetricPoint> read_history(const fs::path& root, const std::string& run_id,
                                      const std::string& metric_name) {
    const fs::path file = find_run_dir(root, run_id) / "metrics" / metric_name;
    std::vector<MetricPoint> points;
    std::ifstream in(file);
    if (!in) return points;
    std::string line;
    while (std::getline(in, line)) {
        // A live writer may leave a trailing partial line; lines that do not
        // parse as three fields are skipped.
        std::istringstream ls(line);
        MetricPoint p;
        p.name = metric_name;
        if (ls >> p.timestamp_ms >> p.value >> p.step) {
            points.push_back(p);
        }
    }
    return points;
}

}  // namespace gcrl::track
