#pragma once

#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "env.hpp"
#include "errors.hpp"

namespace gcrl::livemetrics {

// One step of the training run: the environment's render state paired with
// the user-defined metric values produced at exactly that step.
struct SyncFrame {
    std::int64_t step = 0;
    std::int64_t episode = 0;
    env::RenderFrame env_frame;
    std::map<std::string, double> metrics;

    bool operator==(const SyncFrame& other) const = default;
};

enum class DropPolicy {
    Block,      // emit refuses (throws StateError) when full; lossless recording
    DropOldest  // live viewing: discard the oldest unconsumed frame
};

// Bounded single-producer/single-consumer frame queue. Steps must strictly
// increase along a stream.
class MetricChannel {
public:
    explicit MetricChannel(std::size_t capacity, DropPolicy policy = DropPolicy::DropOldest)
        : capacity_(capacity), policy_(policy) {}

    void emit(SyncFrame frame);
    std::optional<SyncFrame> try_pop();
    std::size_t size() const { return queue_.size(); }

private:
    std::size_t capacity_;
    DropPolicy policy_;
    std::deque<SyncFrame> queue_;
    std::int64_t last_step_ = -1;
    bool any_emitted_ = false;
};

// NDJSON encoding: one frame per line, keys in fixed order
// {step, episode, env_frame, metrics}; every line parses on its own.
std::string serialize_frame(const SyncFrame& frame);
SyncFrame parse_frame(const std::string& line);
std::string serialize_stream(const std::vector<SyncFrame>& frames);
std::vector<SyncFrame> deserialize_stream(const std::string& ndjson);

// Append-only NDJSON stream file, flushed per line for live tailing.
class StreamWriter {
public:
    explicit StreamWriter(const std::filesystem::path& path);
    void write(const SyncFrame& frame);

private:
    std::ofstream out_;
};

std::vector<SyncFrame> read_stream_file(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Terminal dashboard

struct DashboardOptions {
    std::vector<std::string> metric_names;  // empty = all metrics in the stream
    std::size_t window = 200;               // sparkline width in steps
    double refresh_hz = 10.0;
    std::size_t grid_width = 25;
    std::size_t grid_height = 13;
};

// Character-grid drawing of the arena: A agent, B block, G goal, X fallen
// block, dots elsewhere.
std::vector<std::string> render_env_grid(const env::RenderFrame& frame,
                                         std::size_t width, std::size_t height);

std::string sparkline(const std::vector<double>& values, std::size_t width);

// Full side-by-side buffer for one frame given the metric history window.
// Pure function so tests can capture and compare render output.
std::string render_dashboard(const SyncFrame& frame,
                             const std::map<std::string, std::vector<double>>& history,
                             const DashboardOptions& opts);

// Replays a recorded stream to `out`, one rendered buffer per frame. Throws
// ConfigError naming the available metrics when a requested one is unknown.
void replay_stream(const std::vector<SyncFrame>& frames, const DashboardOptions& opts,
                   std::ostream& out, bool clear_between_frames = false,
                   double speed_hz = 0.0);

// Tails a stream file, rendering new frames as they appear. `keep_going` is
// polled between reads; returns the number of frames rendered.
std::size_t follow_stream(const std::filesystem::path& path, const DashboardOptions& opts,
                          std::ostream& out, const std::function<bool()>& keep_going);

}  // namespace gcrl::livemetrics
