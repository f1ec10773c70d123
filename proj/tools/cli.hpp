#pragma once

// Command implementations behind the spinphase executable. Kept separate from
// argument parsing so the tests can drive them directly.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "spinphase/entropy.hpp"

namespace spinphase::cli {

/// Bad flag values or an unreadable state file; the message names the flag or line.
class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

enum class ChannelKind { Dephasing, Damping };

struct BlochInit {
    Eigen::Vector3d tau;
};
struct FileInit {
    std::filesystem::path path;
};
struct RandomInit {
    std::uint64_t seed = 0;
    double coherence = 0.0;
};
using InitialState = std::variant<std::monostate, BlochInit, FileInit, RandomInit>;

struct RunConfig {
    ChannelKind channel = ChannelKind::Dephasing;
    int two_j = 1;
    InitialState init;

    double lambda = 1.0;
    std::optional<double> gamma;
    std::optional<double> nbar;
    std::optional<double> tau_bar_z;
    std::optional<double> gamma_bar;

    double t_max = 10.0;
    int n_steps = 1000;
    int every = 10;
    int n_theta = 64;
    int n_phi = 64;
    bool deterministic = false;

    // sweep-coherence
    int points = 21;
    double tau_z = 0.0;
    std::optional<double> cmax;
    std::uint64_t seed = 1;
};

/// Bath implied by the damping flags. Accepts (gamma, nbar), (gamma_bar,
/// tau_bar_z) or (gamma, tau_bar_z < 0); defaults are gamma = 1, nbar = 0.5.
BathParams resolve_bath(const RunConfig& cfg);

ChannelSpec make_channel(const RunConfig& cfg);

/// Plain-text state: "dim d", then d rows of d tokens "re+imj".
DensityMatrix read_state_file(const std::filesystem::path& path);
DensityMatrix parse_state(const std::string& text, const std::string& origin);

/// Parses "a+bj", "a-bj", "a", "bj".
Complex parse_complex(const std::string& token);

struct CsvTable {
    std::vector<std::string> comments;
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
    Warnings warnings;
};

/// '#' comment lines, header, rows in %.17e (nan as "nan"), then a trailing
/// comment block listing warnings.
std::string render_csv(const CsvTable& table);
void write_file(const std::filesystem::path& path, const std::string& text);

CsvTable run_evolve(const RunConfig& cfg);
CsvTable run_sweep(const RunConfig& cfg);

struct NamedTable {
    std::string file_name;
    CsvTable table;
};

/// Figure data with the parameters fixed in code. id in 1..4.
std::vector<NamedTable> run_fig(int id);

enum class Command { Fig, Evolve, SweepCoherence };

struct Invocation {
    Command command = Command::Evolve;
    RunConfig config;
    int fig_id = 0;
    std::filesystem::path out; // empty: stdout (evolve, sweep)
    bool help = false;
    std::string help_text;
};

/// Arguments exclude the program name. Throws ConfigError naming the flag.
Invocation parse_command_line(const std::vector<std::string>& args);

/// Range checks on a parsed config; messages name the flag.
void validate(const RunConfig& cfg);

/// Executes the invocation and returns the process exit code.
int run(const Invocation& inv);

/// SPINPHASE_THREADS if set and positive, otherwise the hardware concurrency.
int worker_count();

/// Calls body(i) for i in [0, n) on up to worker_count() threads. Callers write
/// results by index, so output order never depends on scheduling. The first
/// exception by index is rethrown.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
    const std::size_t workers = std::min<std::size_t>(std::max(worker_count(), 1), n);
    std::vector<std::exception_ptr> errors(n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            try {
                body(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++) {
                    try {
                        body(i);
                    } catch (...) {
                        errors[i] = std::current_exception();
                    }
                }
            });
        }
        for (auto& t : pool) t.join();
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
}

} // namespace spinphase::cli
