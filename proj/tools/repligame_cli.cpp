#include <cstdio>
#include <exception>
#include <fstream>
#include <iterator>
#include <string>

#include "repligame/runner.hpp"

namespace {

int usage() {
    std::fputs(
        "usage: repligame run <config-path>\n"
        "\n"
        "Runs the experiment selected inside the configuration file and writes\n"
        "report.csv, quarter-time snapshot tables, and run.json under the\n"
        "configured output_path. REPLIGAME_THREADS bounds the sweep worker pool.\n",
        stderr);
    return 1;
}

} // namespace

int main(int argc, char** argv) {
    if (argc != 3 || std::string(argv[1]) != "run") return usage();
    try {
        std::ifstream in(argv[2], std::ios::binary);
        if (!in) {
            std::fprintf(stderr, "error: cannot read %s\n", argv[2]);
            return 1;
        }
        const std::string text{std::istreambuf_iterator<char>(in),
                               std::istreambuf_iterator<char>()};
        const auto cfg = repligame::parse_config(text);
        return repligame::run_experiment(cfg);
    } catch (const repligame::StabilityViolation& e) {
        std::fprintf(stderr, "stability violation: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
