#include "livemetrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace gcrl::livemetrics {

using nlohmann::json;

void MetricChannel::emit(SyncFrame frame) {
    if (any_emitted_ && frame.step <= last_step_) {
        throw StateError("emit: frame step " + std::to_string(frame.step) +
                         " is not greater than last step " + std::to_string(last_step_));
    }
    if (queue_.size() >= capacity_) {
        if (policy_ == DropPolicy::Block) {
            throw StateError("emit: channel full (block policy)");
        }
        queue_.pop_front();
    }
    last_step_ = frame.step;
    any_emitted_ = true;
    queue_.push_back(std::move(frame));
}

std::optional<SyncFrame> MetricChannel::try_pop() {
    if (queue_.empty()) return std::nullopt;
    SyncFrame f = std::move(queue_.front());
    queue_.pop_front();
    return f;
}

std::string serialize_frame(const SyncFrame& frame) {
    // nlohmann objects keep keys sorted, which gives the stable order
    // {env_frame, episode, metrics, step}, diffable across runs.
    json j;
    j["step"] = frame.step;
    j["episode"] = frame.episode;
    j["env_frame"] = {{"agent", frame.env_frame.agent},
                      {"block", frame.env_frame.block},
                      {"goal", frame.env_frame.goal},
                      {"fallen", frame.env_frame.block_fallen}};
    j["metrics"] = frame.metrics;
    return j.dump();
}

SyncFrame parse_frame(const std::string& line) {
    try {
        json j = json::parse(line);
        SyncFrame f;
        f.step = j.at("step").get<std::int64_t>();
        f.episode = j.at("episode").get<std::int64_t>();
        const json& e = j.at("env_frame");
        f.env_frame.agent = e.at("agent").get<std::vector<double>>();
        f.env_frame.block = e.at("block").get<std::vector<double>>();
        f.env_frame.goal = e.at("goal").get<std::vector<double>>();
        f.env_frame.block_fallen = e.at("fallen").get<bool>();
        f.metrics = j.at("metrics").get<std::map<std::string, double>>();
        return f;
    } catch (const json::exception& e) {
        throw InputError(std::string("bad stream line: ") + e.what());
    }
}

std::string serialize_stream(const std::vector<SyncFrame>& frames) {
    std::string out;
    for (const auto& f : frames) {
        out += serialize_frame(f);
        out += '\n';
    }
    return out;
}

std::vector<SyncFrame> deserialize_stream(const std::string& ndjson) {
    std::vector<SyncFrame> frames;
    std::istringstream in(ndjson);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) frames.push_back(parse_frame(line));
    }
    return frames;
}

StreamWriter::StreamWriter(const std::filesystem::path& path)
    : out_(path, std::ios::app) {
    if (!out_) throw IoError("cannot open stream file " + path.string());
}

void StreamWriter::write(const SyncFrame& frame) {
    out_ << serialize_frame(frame) << '\n';
    out_.flush();
    if (!out_) throw IoError("stream write failed");
}

std::vector<SyncFrame> read_stream_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open stream file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return deserialize_stream(buf.str());
}

// ---------------------------------------------------------------------------
// Rendering

namespace {

constexpr double kArenaLo = -1.0;
constexpr double kArenaHi = 1.0;

void place(std::vector<std::string>& grid, const std::vector<double>& pos, char glyph) {
    if (pos.size() < 2) return;
    const std::size_t h = grid.size();
    const std::size_t w = grid[0].size();
    const double fx = (std::clamp(pos[0], kArenaLo, kArenaHi) - kArenaLo) / (kArenaHi - kArenaLo);
    const double fy = (std::clamp(pos[1], kArenaLo, kArenaHi) - kArenaLo) / (kArenaHi - kArenaLo);
    const std::size_t col = std::min<std::size_t>(w - 1, static_cast<std::size_t>(fx * w));
    // Row 0 is the top of the arena.
    const std::size_t row = std::min<std::size_t>(h - 1, static_cast<std::size_t>((1.0 - fy) * h));
    grid[row][col] = glyph;
}

}  // namespace

std::vector<std::string> render_env_grid(const env::RenderFrame& frame,
                                         std::size_t width, std::size_t height) {
    std::vector<std::string> grid(height, std::string(width, '.'));
    place(grid, frame.goal, 'G');
    if (!frame.block.empty()) {
        place(grid, frame.block, frame.block_fallen ? 'X' : 'B');
    }
    place(grid, frame.agent, 'A');
    return grid;
}

std::string sparkline(const std::vector<double>& values, std::size_t width) {
    static const char* levels[] = {"▁", "▂", "▃", "▄",
                                   "▅", "▆", "▇", "█"};
    if (values.empty()) return std::string(width, ' ');
    const std::size_t n = std::min(values.size(), width);
    const auto first = values.end() - static_cast<std::ptrdiff_t>(n);
    const double lo = *std::min_element(first, values.end());
    const double hi = *std::max_element(first, values.end());
    std::string out;
    for (auto it = first; it != values.end(); ++it) {
        int level = 0;
        if (hi > lo) {
            level = static_cast<int>((*it - lo) / (hi - lo) * 7.0 + 0.5);
            level = std::clamp(level, 0, 7);
        }
        out += levels[level];
    }
    return out;
}

std::string render_dashboard(const SyncFrame& frame,
                             const std::map<std::string, std::vector<double>>& history,
                             const DashboardOptions& opts) {
    std::vector<std::string> grid =
        render_env_grid(frame.env_frame, opts.grid_width, opts.grid_height);
    std::vector<std::string> right;
    right.push_back("step " + std::to_string(frame.step) + "  episode " +
                    std::to_string(frame.episode));
    std::vector<std::string> names = opts.metric_names;
    if (names.empty()) {
        for (const auto& [name, value] : frame.metrics) names.push_back(name);
    }
    for (const auto& name : names) {
        auto vit = frame.metrics.find(name);
        if (vit == frame.metrics.end()) {
            std::string msg = "unknown metric '" + name + "'; available:";
            for (const auto& [n, v] : frame.metrics) msg += " " + n;
            throw ConfigError(msg);
        }
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%-22s %12.6g", name.c_str(), vit->second);
        right.push_back(buf);
        auto hit = history.find(name);
        right.push_back("  " + sparkline(hit == history.end() ? std::vector<double>{}
                                                              : hit->second,
                                         opts.window));
    }
    std::string out;
    const std::size_t rows = std::max(grid.size(), right.size());
    for (std::size_t r = 0; r < rows; ++r) {
        std::string left = r < grid.size() ? grid[r] : std::string(opts.grid_width, ' ');
        out += left;
        out += "  ";
        if (r < right.size()) out += right[r];
        out += '\n';
    }
    return out;
}

void replay_stream(const std::vector<SyncFrame>& frames, const DashboardOptions& opts,
                   std::ostream& out, bool clear_between_frames, double speed_hz) {
    std::map<std::string, std::vector<double>> history;
    for (const auto& frame : frames) {
        for (const auto& [name, value] : frame.metrics) {
            auto& h = history[name];
            h.push_back(value);
            if (h.size() > opts.window) h.erase(h.begin());
        }
        if (clear_between_frames) out << "\033[2J\033[H";
        out << render_dashboard(frame, history, opts);
        if (!clear_between_frames) out << '\n';
        if (speed_hz > 0.0) {
            std::this_thread::sleep_for(
                std::chrono::duration<double>(1.0 / speed_hz));
        }
    }
}

std::size_t follow_stream(const std::filesystem::path& path, const DashboardOptions& opts,
                          std::ostream& out, const std::function<bool()>& keep_going) {
    std::map<std::string, std::vector<double>> history;
    std::size_t rendered = 0;
    std::string pending;  // bytes read but not yet terminated by '\n'
    std::uint64_t offset = 0;
    while (keep_going()) {
        bool got = false;
        std::ifstream in(path, std::ios::binary);
        if (in) {
            in.seekg(static_cast<std::streamoff>(offset));
            std::stringstream chunk;
            chunk << in.rdbuf();
            std::string data = chunk.str();
            offset += data.size();
            pending += data;
            std::size_t start = 0;
            for (std::size_t nl = pending.find('\n', start); nl != std::string::npos;
                 nl = pending.find('\n', start)) {
                const std::string line = pending.substr(start, nl - start);
                start = nl + 1;
                if (line.empty()) continue;
                SyncFrame frame = parse_frame(line);
                for (const auto& [name, value] : frame.metrics) {
                    auto& h = history[name];
                    h.push_back(value);
                    if (h.size() > opts.window) h.erase(h.begin());
                }
                out << "\033[2J\033[H" << render_dashboard(frame, history, opts);
                ++rendered;
                got = true;
            }
            pending.erase(0, start);
        }
        if (!got) {
            std::this_thread::sleep_for(std::chrono::duration<double>(
                1.0 / std::max(opts.refresh_hz, 1.0)));
        }
    }
    return rendered;
}

}  // namespace gcrl::livemetrics
