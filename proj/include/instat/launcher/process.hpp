#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <sys/types.h>
#include <vector>

namespace instat::launcher {

struct ExitEvent {
    pid_t pid = -1;
    int exit_code = 0; // exit status, or 128+signal for signal deaths
};

// fork/exec wrapper with non-blocking reaping.
class ProcessRunner {
public:
    // argv[0] is the executable path; extra_env entries are "KEY=VALUE".
    pid_t spawn(const std::vector<std::string>& argv,
                const std::vector<std::string>& extra_env = {});

    void kill(pid_t pid, int sig) const;

    // Collect every child that has exited since the last call.
    std::vector<ExitEvent> reap();

    // Wait (bounded) for one specific child to exit; reaps it.
    std::optional<int> wait_for(pid_t pid, int timeout_ms);

    static bool alive(pid_t pid);

    // Absolute path of the running executable (/proc/self/exe).
    static std::string self_exe();
};

} // namespace instat::launcher
