#include <cstdio>
#include <cstring>

#include "floqrd/verify.hpp"

int main(int argc, char** argv) {
    bool slow_only = false;
    floqrd::CheckOptions opts;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--slow-only") == 0) slow_only = true;
        if (std::strcmp(argv[i], "--seed") == 0 && i + 1 < argc)
            opts.seed = static_cast<unsigned>(std::atoi(argv[++i]));
    }

    int failures = 0;
    for (const auto& check : floqrd::acceptance_checks()) {
        if (check.slow != slow_only) continue;
        const auto res = floqrd::run_check(check, opts);
        std::printf("[%s] %-20s (%s, %.1fs): %s\n", res.pass ? "PASS" : "FAIL",
                    check.name.c_str(), check.module.c_str(), res.seconds,
                    res.detail.c_str());
        std::fflush(stdout);
        if (!res.pass) ++failures;
    }
    return failures == 0 ? 0 : 1;
}
