#include "instat/launcher/process.hpp"

#include <cerrno>
#include <chrono>
#include <csignal>
#include <cstring>
#include <sys/wait.h>
#include <thread>
#include <unistd.h>

#include "instat/error.hpp"

namespace instat::launcher {

extern "C" char** environ;

pid_t ProcessRunner::spawn(const std::vector<std::string>& argv,
                           const std::vector<std::string>& extra_env) {
    std::vector<char*> cargv;
    cargv.reserve(argv.size() + 1);
    for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
    cargv.push_back(nullptr);

    std::vector<std::string> env_store;
    for (char** e = environ; *e != nullptr; ++e) env_store.emplace_back(*e);
    env_store.insert(env_store.end(), extra_env.begin(), extra_env.end());
    std::vector<char*> cenv;
    cenv.reserve(env_store.size() + 1);
    for (auto& e : env_store) cenv.push_back(e.data());
    cenv.push_back(nullptr);

    const pid_t pid = ::fork();
    if (pid < 0) throw IoError(std::string("fork: ") + std::strerror(errno));
    if (pid == 0) {
        ::execve(cargv[0], cargv.data(), cenv.data());
        _exit(127);
    }
    return pid;
}

void ProcessRunner::kill(pid_t pid, int sig) const {
    if (pid > 0) ::kill(pid, sig);
}

std::vector<ExitEvent> ProcessRunner::reap() {
    std::vector<ExitEvent> out;
    for (;;) {
        int status = 0;
        const pid_t pid = ::waitpid(-1, &status, WNOHANG);
        if (pid <= 0) break;
        ExitEvent ev;
        ev.pid = pid;
        if (WIFEXITED(status)) {
            ev.exit_code = WEXITSTATUS(status);
        } else if (WIFSIGNALED(status)) {
            ev.exit_code = 128 + WTERMSIG(status);
        } else {
            continue;
        }
        out.push_back(ev);
    }
    return out;
}

std::optional<int> ProcessRunner::wait_for(pid_t pid, int timeout_ms) {
    const auto deadline =
        std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
    for (;;) {
        int status = 0;
        const pid_t got = ::waitpid(pid, &status, WNOHANG);
        if (got == pid) {
            if (WIFEXITED(status)) return WEXITSTATUS(status);
            if (WIFSIGNALED(status)) return 128 + WTERMSIG(status);
            return 0;
        }
        if (got < 0 && errno == ECHILD) return std::nullopt;
        if (std::chrono::steady_clock::now() >= deadline) return std::nullopt;
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
}

bool ProcessRunner::alive(pid_t pid) { return pid > 0 && ::kill(pid, 0) == 0; }

std::string ProcessRunner::self_exe() {
    char buf[4096];
    const ssize_t n = ::readlink("/proc/self/exe", buf, sizeof buf - 1);
    if (n <= 0) throw IoError("cannot resolve /proc/self/exe");
    buf[n] = '\0';
    return buf;
}

} // namespace instat::launcher
