// gcrl command-line tool. Links only the C API of libgcrl.
//
//   gcrl run [key=value ...]
//   gcrl sweep <study.yaml> [key=value ...]
//   gcrl view --replay <stream.ndjson> | --follow <run_dir> [--metrics a,b]
//   gcrl test smoke | gcrl test perf [key=value ...]
//
// Exit codes follow gcrl_status: 0 ok, 2 config error, 3 numeric error,
// 4 IO error, 5 usage error, 6 test gate failed.

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>
#include <vector>

#include "gcrl/gcrl.h"

namespace {

void usage(FILE* out) {
    std::fprintf(out,
                 "usage: gcrl [--conf-dir DIR] <command> ...\n"
                 "\n"
                 "commands:\n"
                 "  run [key=value ...]            train one tracked run\n"
                 "  sweep FILE [key=value ...]     run a hyperparameter study\n"
                 "  view --replay FILE             replay a recorded stream\n"
                 "  view --follow RUN_DIR          live-tail a run's stream\n"
                 "       [--metrics a,b] [--speed HZ] [--refresh HZ] [--batch]\n"
                 "  test smoke                     smoke-test all combinations\n"
                 "  test perf [key=value ...]      performance regression gate\n"
                 "\n"
                 "overrides: key=value replaces an existing config key,\n"
                 "           ++key=value adds a new one (e.g. "
                 "++algorithm.weight_critic_var=0.75)\n"
                 "environment: GCRL_TRACK_ROOT overrides the tracking root "
                 "(default ./mlruns)\n");
}

int report(gcrl_status status) {
    if (status != GCRL_OK) {
        std::fprintf(stderr, "gcrl: %s\n", gcrl_last_error());
    }
    return static_cast<int>(status);
}

std::vector<const char*> as_argv(const std::vector<std::string>& tokens) {
    std::vector<const char*> out;
    for (const auto& t : tokens) out.push_back(t.c_str());
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    std::string conf_dir = "conf";
    const char* env_root = std::getenv("GCRL_TRACK_ROOT");
    std::string track_root = env_root && *env_root ? env_root : "mlruns";

    std::vector<std::string> args(argv + 1, argv + argc);
    std::size_t i = 0;
    while (i < args.size() && args[i].rfind("--", 0) == 0) {
        if (args[i] == "--conf-dir" && i + 1 < args.size()) {
            conf_dir = args[i + 1];
            i += 2;
        } else if (args[i] == "--help" || args[i] == "-h") {
            usage(stdout);
            return 0;
        } else {
            std::fprintf(stderr, "gcrl: unknown option %s\n", args[i].c_str());
            return static_cast<int>(GCRL_ERR_USAGE);
        }
    }
    if (i >= args.size()) {
        usage(stderr);
        return static_cast<int>(GCRL_ERR_USAGE);
    }
    const std::string verb = args[i++];
    std::vector<std::string> rest(args.begin() + static_cast<std::ptrdiff_t>(i),
                                  args.end());

    if (verb == "run") {
        const auto tokens = as_argv(rest);
        return report(gcrl_run(conf_dir.c_str(), track_root.c_str(),
                               static_cast<int>(tokens.size()), tokens.data(),
                               nullptr));
    }
    if (verb == "sweep") {
        if (rest.empty()) {
            std::fprintf(stderr, "gcrl: sweep needs a study file\n");
            return static_cast<int>(GCRL_ERR_USAGE);
        }
        const std::string study = rest.front();
        std::vector<std::string> overrides(rest.begin() + 1, rest.end());
        const auto tokens = as_argv(overrides);
        return report(gcrl_sweep(conf_dir.c_str(), track_root.c_str(), study.c_str(),
                                 static_cast<int>(tokens.size()), tokens.data()));
    }
    if (verb == "view") {
        std::string replay_file, follow_dir, metrics;
        double speed = 0.0, refresh = 10.0;
        bool batch = false;
        for (std::size_t k = 0; k < rest.size(); ++k) {
            const std::string& a = rest[k];
            auto next = [&]() -> std::string {
                if (k + 1 >= rest.size()) {
                    std::fprintf(stderr, "gcrl: %s needs a value\n", a.c_str());
                    std::exit(static_cast<int>(GCRL_ERR_USAGE));
                }
                return rest[++k];
            };
            if (a == "--replay") replay_file = next();
            else if (a == "--follow") follow_dir = next();
            else if (a == "--metrics") metrics = next();
            else if (a == "--speed") speed = std::atof(next().c_str());
            else if (a == "--refresh") refresh = std::atof(next().c_str());
            else if (a == "--batch") batch = true;
            else {
                std::fprintf(stderr, "gcrl: unknown view option %s\n", a.c_str());
                return static_cast<int>(GCRL_ERR_USAGE);
            }
        }
        if (!replay_file.empty()) {
            return report(gcrl_view_replay(replay_file.c_str(), metrics.c_str(), speed,
                                           batch ? 0 : 1));
        }
        if (!follow_dir.empty()) {
            return report(gcrl_view_follow(follow_dir.c_str(), metrics.c_str(), refresh));
        }
        std::fprintf(stderr, "gcrl: view needs --replay or --follow\n");
        return static_cast<int>(GCRL_ERR_USAGE);
    }
    if (verb == "test") {
        if (rest.empty()) {
            std::fprintf(stderr, "gcrl: test needs 'smoke' or 'perf'\n");
            return static_cast<int>(GCRL_ERR_USAGE);
        }
        const std::string kind = rest.front();
        std::vector<std::string> overrides(rest.begin() + 1, rest.end());
        if (kind == "smoke") {
            return report(gcrl_test_smoke(conf_dir.c_str(), track_root.c_str()));
        }
        if (kind == "perf") {
            const auto tokens = as_argv(overrides);
            return report(gcrl_test_perf(conf_dir.c_str(), track_root.c_str(),
                                         static_cast<int>(tokens.size()),
                                         tokens.data()));
        }
        std::fprintf(stderr, "gcrl: unknown test '%s'\n", kind.c_str());
        return static_cast<int>(GCRL_ERR_USAGE);
    }
    std::fprintf(stderr, "gcrl: unknown command '%s'\n", verb.c_str());
    usage(stderr);
    return static_cast<int>(GCRL_ERR_USAGE);
}
