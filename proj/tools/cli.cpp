#include "cli.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include <CLI11.hpp>

namespace spinphase::cli {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17e", v);
    return buf;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

bool parse_double(std::string_view s, double& out) {
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    if (s.empty()) return false;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

double parse_number_flag(const std::string& text, const char* flag) {
    double v = 0.0;
    if (!parse_double(trim(text), v))
        throw ConfigError(std::string(flag) + ": expected a number, got '" + text + "'");
    return v;
}

int parse_two_j(const std::string& text) {
    const std::string s = trim(text);
    int value = 0;
    const auto slash = s.find('/');
    const std::string head = slash == std::string::npos ? s : s.substr(0, slash);
    const auto [ptr, ec] = std::from_chars(head.data(), head.data() + head.size(), value);
    const bool head_ok = ec == std::errc() && ptr == head.data() + head.size();
    if (slash == std::string::npos) {
        if (head_ok && value >= 1) return 2 * value;
    } else if (head_ok && s.substr(slash + 1) == "2" && value >= 1) {
        return value;
    }
    throw ConfigError("--j: expected a positive spin like 1/2, 1 or 3/2, got '" + text + "'");
}

std::string spin_label(int two_j) {
    return two_j % 2 == 0 ? std::to_string(two_j / 2) : std::to_string(two_j) + "/2";
}

Eigen::Vector3d parse_bloch(const std::string& text) {
    std::vector<double> parts;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) parts.push_back(parse_number_flag(item, "--bloch"));
    if (parts.size() != 3)
        throw ConfigError("--bloch: expected three comma-separated components X,Y,Z, got '" +
                          text + "'");
    return {parts[0], parts[1], parts[2]};
}

std::pair<int, int> parse_grid(const std::string& text) {
    const std::string s = trim(text);
    const auto x = s.find('x');
    int a = 0, b = 0;
    if (x != std::string::npos) {
        const auto [p1, e1] = std::from_chars(s.data(), s.data() + x, a);
        const auto [p2, e2] = std::from_chars(s.data() + x + 1, s.data() + s.size(), b);
        if (e1 == std::errc() && p1 == s.data() + x && e2 == std::errc() &&
            p2 == s.data() + s.size())
            return {a, b};
    }
    throw ConfigError("--grid: expected NTHETAxNPHI such as 128x128, got '" + text + "'");
}

void require_nonnegative(std::optional<double> v, const char* flag) {
    if (v && !(std::isfinite(*v) && *v >= 0.0))
        throw ConfigError(std::string(flag) + ": must be finite and >= 0");
}

Reduction reduction_of(const RunConfig& cfg) {
    return cfg.deterministic ? Reduction::Pairwise : Reduction::Sequential;
}

double time_scale(const RunConfig& cfg) {
    return cfg.channel == ChannelKind::Dephasing ? cfg.lambda : resolve_bath(cfg).gamma_bar;
}

DensityMatrix equilibrium_state(const RunConfig& cfg) {
    const SpinJ j(cfg.two_j);
    if (cfg.channel == ChannelKind::Dephasing) return maximally_mixed(j.dim());
    return amplitude_damping_steady_state(j, resolve_bath(cfg));
}

std::vector<std::string> config_comments(const std::string& command, const RunConfig& cfg) {
    std::vector<std::string> c;
    c.push_back("spinphase " + command);
    c.push_back(std::string("channel=") +
                (cfg.channel == ChannelKind::Dephasing ? "dephasing" : "damping"));
    c.push_back("j=" + spin_label(cfg.two_j));
    std::visit(
        [&](const auto& init) {
            using T = std::decay_t<decltype(init)>;
            if constexpr (std::is_same_v<T, BlochInit>)
                c.push_back("initial=bloch " + format_number(init.tau.x()) + "," +
                            format_number(init.tau.y()) + "," + format_number(init.tau.z()));
            else if constexpr (std::is_same_v<T, FileInit>)
                c.push_back("initial=file " + init.path.string());
            else if constexpr (std::is_same_v<T, RandomInit>)
                c.push_back("initial=random seed=" + std::to_string(init.seed) +
                            " coherence=" + format_number(init.coherence));
        },
        cfg.init);
    if (cfg.channel == ChannelKind::Dephasing) {
        c.push_back("lambda=" + format_number(cfg.lambda));
        c.push_back("time_unit=lambda_t");
    } else {
        const BathParams b = resolve_bath(cfg);
        c.push_back("gamma=" + format_number(b.gamma));
        c.push_back("nbar=" + format_number(b.nbar));
        c.push_back("gamma_bar=" + format_number(b.gamma_bar));
        c.push_back("tau_bar_z=" + format_number(b.tau_bar_z));
        c.push_back("time_unit=gamma_bar_t");
    }
    if (command == "evolve") {
        c.push_back("tmax=" + format_number(cfg.t_max));
        c.push_back("steps=" + std::to_string(cfg.n_steps));
        c.push_back("every=" + std::to_string(cfg.every));
        c.push_back("dt=" + format_number(cfg.t_max / cfg.n_steps));
    } else if (command == "sweep-coherence") {
        c.push_back("points=" + std::to_string(cfg.points));
        if (cfg.two_j == 1) c.push_back("tau_z=" + format_number(cfg.tau_z));
        else c.push_back("seed=" + std::to_string(cfg.seed));
    }
    c.push_back("grid=" + std::to_string(cfg.n_theta) + "x" + std::to_string(cfg.n_phi) +
                " nodes=" + std::to_string(cfg.n_theta * cfg.n_phi));
    c.push_back(std::string("reduction=") + (cfg.deterministic ? "pairwise" : "sequential"));
    return c;
}

void append_warnings(Warnings& dst, const Warnings& src, const std::string& where) {
    for (const Warning& w : src) dst.push_back({w.kind, where + ": " + w.message, w.magnitude});
}

// Quantities shared by evolve rows and figure rows for one state.
struct StateRates {
    double s_vn = kNan;
    double s_q = kNan;
    double c_l1 = kNan;
    double sigma_quad = kNan;
    double sigma_closed = kNan;
    double sigma_vn = kNan;
    double phi_dot = kNan;
    Warnings warnings;
};

struct RateContext {
    RunConfig cfg;
    ChannelSpec spec;
    DensityMatrix rho_eq;
    std::shared_ptr<const CoherentBasis> basis; // null: per-state aligned grid (qubit only)
};

RateContext make_context(const RunConfig& cfg, bool aligned) {
    std::shared_ptr<const CoherentBasis> basis;
    if (!aligned)
        basis = std::make_shared<const CoherentBasis>(
            SpinJ(cfg.two_j), std::make_shared<const SphereGrid>(cfg.n_theta, cfg.n_phi));
    return {cfg, make_channel(cfg), equilibrium_state(cfg), std::move(basis)};
}

HusimiField field_for(const RateContext& ctx, const DensityMatrix& rho) {
    if (ctx.basis) return husimi_field(rho, *ctx.basis);
    // Put the antipode of the Bloch vector, where a pure state's Q vanishes, on a grid pole.
    const Eigen::Vector3d tau = rho_to_bloch(rho).vec();
    const Eigen::Vector3d axis = tau.norm() > 0.0 ? Eigen::Vector3d(-tau) : Eigen::Vector3d::UnitZ();
    return husimi_field(rho, std::make_shared<const SphereGrid>(ctx.cfg.n_theta, ctx.cfg.n_phi, axis));
}

StateRates state_rates(const RateContext& ctx, const DensityMatrix& rho) {
    const RunConfig& cfg = ctx.cfg;
    const Reduction mode = reduction_of(cfg);
    StateRates r;
    r.s_vn = von_neumann_entropy(rho);
    r.c_l1 = l1_coherence(rho);
    const HusimiField field = field_for(ctx, rho);
    r.s_q = wehrl_entropy(field, mode);

    const EpReport quad = cfg.channel == ChannelKind::Dephasing
                              ? ep_rate_dephasing_quad(field, cfg.lambda, mode)
                              : ep_rate_damping_quad(field, resolve_bath(cfg), mode);
    r.sigma_quad = quad.sigma_dot;
    r.phi_dot = quad.phi_dot;
    r.warnings = quad.warnings;

    if (cfg.two_j == 1) {
        const BlochVector tau = rho_to_bloch(rho);
        r.sigma_closed = cfg.channel == ChannelKind::Dephasing
                             ? ep_qubit_dephasing_closed(tau, cfg.lambda)
                             : ep_qubit_damping_closed(tau, resolve_bath(cfg));
    }
    try {
        r.sigma_vn = ep_vn_general(rho, ctx.spec, ctx.rho_eq).sigma_dot;
    } catch (const SupportError&) {
    } catch (const PurityDivergence&) {
    } catch (const TemperatureDivergence&) {
    }
    return r;
}

DensityMatrix initial_state(const RunConfig& cfg) {
    const SpinJ j(cfg.two_j);
    return std::visit(
        [&](const auto& init) -> DensityMatrix {
            using T = std::decay_t<decltype(init)>;
            if constexpr (std::is_same_v<T, std::monostate>) {
                throw ConfigError("initial state: one of --bloch, --state or --seed with "
                                  "--coherence is required");
            } else if constexpr (std::is_same_v<T, BlochInit>) {
                if (cfg.two_j != 1) throw ConfigError("--bloch: only valid with --j 1/2");
                try {
                    return bloch_to_rho(BlochVector(init.tau));
                } catch (const BlochNormError& e) {
                    throw ConfigError(std::string("--bloch: ") + e.what());
                }
            } else if constexpr (std::is_same_v<T, FileInit>) {
                DensityMatrix rho = read_state_file(init.path);
                if (rho.dim() != j.dim())
                    throw ConfigError("--state: " + init.path.string() + " has dim " +
                                      std::to_string(rho.dim()) + " but --j " +
                                      spin_label(cfg.two_j) + " needs " +
                                      std::to_string(j.dim()));
                return rho;
            } else {
                try {
                    return random_state_with_coherence(j.dim(), init.coherence, init.seed);
                } catch (const UnreachableCoherence& e) {
                    throw ConfigError(std::string("--coherence: ") + e.what());
                }
            }
        },
        cfg.init);
}

// Column layout of the state part of evolve rows.
std::vector<std::string> state_columns(int two_j) {
    if (two_j == 1) return {"tau_x", "tau_y", "tau_z"};
    std::vector<std::string> cols;
    const int d = two_j + 1;
    for (int r = 0; r < d; ++r) {
        cols.push_back("rho_" + std::to_string(r) + std::to_string(r));
        for (int c = r + 1; c < d; ++c) {
            cols.push_back("re_rho_" + std::to_string(r) + std::to_string(c));
            cols.push_back("im_rho_" + std::to_string(r) + std::to_string(c));
        }
    }
    return cols;
}

void push_state_values(std::vector<double>& row, const DensityMatrix& rho) {
    if (rho.dim() == 2) {
        const Eigen::Vector3d tau = rho_to_bloch(rho).vec();
        row.insert(row.end(), {tau.x(), tau.y(), tau.z()});
        return;
    }
    for (Eigen::Index r = 0; r < rho.dim(); ++r) {
        row.push_back(rho(r, r).real());
        for (Eigen::Index c = r + 1; c < rho.dim(); ++c) {
            row.push_back(rho(r, c).real());
            row.push_back(rho(r, c).imag());
        }
    }
}

// Evolve rows without metadata; the figure commands prepend their own columns.
CsvTable evolve_table(const RunConfig& cfg, const DensityMatrix& rho0) {
    const RateContext ctx = make_context(cfg, false);
    const Trajectory traj = evolve(ctx.spec, rho0, cfg.t_max, cfg.n_steps, cfg.every);
    const double scale = time_scale(cfg);

    CsvTable table;
    table.header = {"t", "scaled_t"};
    for (auto& c : state_columns(cfg.two_j)) table.header.push_back(c);
    for (const char* c : {"S_vN", "S_Q", "C_l1", "sigma_quad", "sigma_closed", "sigma_vn",
                          "phi_dot", "warnings"})
        table.header.push_back(c);

    const std::size_t n = traj.states.size();
    std::vector<StateRates> rates(n);
    parallel_for(n, [&](std::size_t i) { rates[i] = state_rates(ctx, traj.states[i]); });

    append_warnings(table.warnings, traj.warnings, "trajectory");
    for (std::size_t i = 0; i < n; ++i) {
        const StateRates& r = rates[i];
        std::vector<double> row{traj.times[i], scale * traj.times[i]};
        push_state_values(row, traj.states[i]);
        row.insert(row.end(), {r.s_vn, r.s_q, r.c_l1, r.sigma_quad, r.sigma_closed, r.sigma_vn,
                               r.phi_dot, static_cast<double>(r.warnings.size())});
        table.rows.push_back(std::move(row));
        append_warnings(table.warnings, r.warnings, "row " + std::to_string(i));
    }
    return table;
}

Eigen::Vector3d raw_bloch(const DensityMatrix& rho) {
    const Complex c = rho(1, 0);
    return {2.0 * c.real(), 2.0 * c.imag(), (rho(0, 0) - rho(1, 1)).real()};
}

NamedTable fig1() {
    // Closed run: H = (w0/2) sigma_x from |0>. Damped run: Davies map with
    // L- = sigma_-, L+ = sigma_+ in the eigenbasis of H = (w0/2) sigma_z, so the
    // state relaxes to the thermal point (0, 0, tau_bar_z). The driven run keeps
    // H = (w0/2) sigma_x under the same jump operators.
    const double omega0 = 1.0, gamma = 0.1, nbar = 0.5;
    const BathParams bath = BathParams::from_occupation(gamma, nbar);
    const double beta = std::log((nbar + 1.0) / nbar) / omega0;
    const double t_max = 20.0 / bath.gamma_bar;
    const int steps = 10000, stride = 50;

    const SpinJ half(1);
    const SpinOperators ops = make_spin_operators(half);
    Eigen::VectorXcd up = Eigen::VectorXcd::Zero(2);
    up(0) = 1.0;
    const DensityMatrix rho0 = pure_state(up);

    const ChannelSpec closed = ChannelSpec::unitary(omega0 * ops.jx);
    Davies thermal{{LindbladPair::with_detailed_balance(ops.jminus, bath.loss_rate(), omega0, beta)},
                   beta};
    const ChannelSpec damped(omega0 * ops.jz, thermal);
    const ChannelSpec driven(omega0 * ops.jx,
                             Davies{{LindbladPair{ops.jminus, bath.loss_rate(), bath.gain_rate(), omega0}},
                                    std::nullopt});

    std::vector<Trajectory> runs(3);
    const ChannelSpec* specs[] = {&closed, &damped, &driven};
    parallel_for(3, [&](std::size_t k) { runs[k] = evolve(*specs[k], rho0, t_max, steps, stride); });

    NamedTable out{"fig1.csv", {}};
    CsvTable& t = out.table;
    t.comments = {"spinphase fig 1",
                  "closed: H=(w0/2)sigma_x, unitary, initial |0>",
                  "damped: H=(w0/2)sigma_z, Davies L-=sigma_-, L+=sigma_+, initial |0>",
                  "driven: H=(w0/2)sigma_x, same jump operators and rates, initial |0>",
                  "w0=" + format_number(omega0),
                  "gamma=" + format_number(gamma) + " nbar=" + format_number(nbar) +
                      " gamma_bar=" + format_number(bath.gamma_bar) +
                      " tau_bar_z=" + format_number(bath.tau_bar_z),
                  "tmax=" + format_number(t_max) + " steps=" + std::to_string(steps) +
                      " every=" + std::to_string(stride)};
    t.header = {"t",        "gamma_bar_t", "closed_x", "closed_y", "closed_z", "closed_norm",
                "damped_x", "damped_y",    "damped_z", "driven_x", "driven_y", "driven_z"};
    for (std::size_t i = 0; i < runs[0].times.size(); ++i) {
        const Eigen::Vector3d c = raw_bloch(runs[0].states[i]);
        const Eigen::Vector3d d = raw_bloch(runs[1].states[i]);
        const Eigen::Vector3d v = raw_bloch(runs[2].states[i]);
        t.rows.push_back({runs[0].times[i], bath.gamma_bar * runs[0].times[i], c.x(), c.y(), c.z(),
                          c.norm(), d.x(), d.y(), d.z(), v.x(), v.y(), v.z()});
    }
    const char* names[] = {"closed", "damped", "driven"};
    for (int k = 0; k < 3; ++k) append_warnings(t.warnings, runs[k].warnings, names[k]);
    return out;
}

RunConfig fig2_config(ChannelKind channel) {
    RunConfig cfg;
    cfg.channel = channel;
    cfg.two_j = 1;
    cfg.lambda = 1.0;
    if (channel == ChannelKind::Damping) {
        cfg.gamma_bar = 1.0;
        cfg.tau_bar_z = 0.0;
    }
    cfg.tau_z = 0.0;
    cfg.cmax = 2.0;
    cfg.points = 101;
    cfg.n_theta = cfg.n_phi = 128;
    cfg.deterministic = true;
    return cfg;
}

// Legend coherences for the qubit time traces, figure convention 2 (tau_x^2 + tau_y^2).
constexpr double kFig3Coherences[] = {0.2, 0.6, 1.0, 1.4, 1.8};

NamedTable fig3_panel(ChannelKind channel) {
    RunConfig cfg;
    cfg.channel = channel;
    cfg.two_j = 1;
    cfg.lambda = 1.0;
    if (channel == ChannelKind::Damping) {
        cfg.gamma = 1.0;
        cfg.nbar = 0.5;
    }
    cfg.n_theta = cfg.n_phi = 128;
    cfg.deterministic = true;
    const RateContext ctx = make_context(cfg, false);
    const double scale = time_scale(cfg);
    const BathParams bath = channel == ChannelKind::Damping ? resolve_bath(cfg) : BathParams{};
    constexpr int kRows = 101;
    constexpr double kScaledTMax = 5.0;

    std::vector<std::pair<double, Eigen::Vector3d>> starts;
    for (double c : kFig3Coherences) {
        const double perp = std::sqrt(0.5 * c);
        const double z = channel == ChannelKind::Dephasing ? std::sqrt(0.9 - perp * perp) : 0.1;
        starts.push_back({c, Eigen::Vector3d(perp, 0.0, z)});
    }

    const std::size_t n = starts.size() * kRows;
    std::vector<std::vector<double>> rows(n);
    std::vector<Warnings> warns(n);
    parallel_for(n, [&](std::size_t idx) {
        const auto& [c, tau0] = starts[idx / kRows];
        const double t = kScaledTMax * static_cast<double>(idx % kRows) / (kRows - 1) / scale;
        const BlochVector tau = channel == ChannelKind::Dephasing
                                    ? qubit_dephasing_bloch(BlochVector(tau0), cfg.lambda, t)
                                    : qubit_damping_bloch(BlochVector(tau0), bath, t);
        const StateRates r = state_rates(ctx, bloch_to_rho(tau));
        rows[idx] = {c,       t,       scale * t,          tau.x(),     tau.y(),
                     tau.z(), r.s_q,   r.sigma_closed,     r.sigma_quad, r.sigma_vn,
                     static_cast<double>(r.warnings.size())};
        warns[idx] = r.warnings;
    });

    NamedTable out{channel == ChannelKind::Dephasing ? "fig3a.csv" : "fig3b.csv", {}};
    CsvTable& t = out.table;
    t.comments = config_comments("fig 3", cfg);
    t.comments.insert(t.comments.begin() + 1,
                      channel == ChannelKind::Dephasing
                          ? "initial: tau=(sqrt(C/2),0,tau_z) with |tau|^2=0.9"
                          : "initial: tau=(sqrt(C/2),0,0.1)");
    t.comments.insert(t.comments.begin() + 2, "dynamics: analytic Bloch propagator");
    t.comments.push_back("scaled_tmax=" + format_number(kScaledTMax) + " rows_per_curve=" +
                         std::to_string(kRows));
    t.header = {"coherence", "t", "scaled_t", "tau_x", "tau_y", "tau_z", "S_Q", "sigma_closed",
                "sigma_quad", "sigma_vn", "warnings"};
    t.rows = std::move(rows);
    for (std::size_t i = 0; i < n; ++i) append_warnings(t.warnings, warns[i], "row " + std::to_string(i));
    return out;
}

// Legend l1 coherences of the qutrit traces. All share one seed, hence one
// population vector and off-diagonal direction scaled to each target.
constexpr double kFig4Coherences[] = {0.25, 0.5, 0.75, 1.0};
constexpr std::uint64_t kFig4Seed = 12;
constexpr double kFig4ScaledTMax = 5.0;

NamedTable fig4_panel(ChannelKind channel) {
    RunConfig cfg;
    cfg.channel = channel;
    cfg.two_j = 2;
    cfg.lambda = 1.0;
    if (channel == ChannelKind::Damping) {
        cfg.gamma = 1.0;
        cfg.nbar = 0.5;
    }
    cfg.n_theta = cfg.n_phi = 128;
    cfg.deterministic = true;
    cfg.t_max = kFig4ScaledTMax / time_scale(cfg);
    cfg.n_steps = 1000;
    cfg.every = 10;

    NamedTable out{channel == ChannelKind::Dephasing ? "fig4a.csv" : "fig4b.csv", {}};
    CsvTable& t = out.table;
    for (double c : kFig4Coherences) {
        cfg.init = RandomInit{kFig4Seed, c};
        CsvTable part = evolve_table(cfg, initial_state(cfg));
        if (t.header.empty()) {
            t.comments = config_comments("fig 4", cfg);
            t.comments.erase(std::remove_if(t.comments.begin(), t.comments.end(),
                                            [](const std::string& s) {
                                                return s.rfind("initial=", 0) == 0;
                                            }),
                             t.comments.end());
            t.comments.insert(t.comments.begin() + 1,
                              "initial: random states with l1 coherence C, seed=" +
                                  std::to_string(kFig4Seed));
            t.header = part.header;
            t.header.insert(t.header.begin(), "coherence");
        }
        for (auto& row : part.rows) {
            row.insert(row.begin(), c);
            t.rows.push_back(std::move(row));
        }
        for (const Warning& w : part.warnings)
            t.warnings.push_back({w.kind, "C=" + format_number(c) + " " + w.message, w.magnitude});
    }
    return out;
}

} // namespace

// ---------------------------------------------------------------------------

BathParams resolve_bath(const RunConfig& cfg) {
    require_nonnegative(cfg.gamma, "--gamma");
    require_nonnegative(cfg.nbar, "--nbar");
    require_nonnegative(cfg.gamma_bar, "--gamma-bar");
    if (cfg.tau_bar_z && !(*cfg.tau_bar_z >= -1.0 && *cfg.tau_bar_z <= 0.0))
        throw ConfigError("--tau-bar-z: must lie in [-1, 0]");

    if (cfg.tau_bar_z) {
        if (cfg.nbar) throw ConfigError("--nbar: conflicts with --tau-bar-z");
        if (cfg.gamma && cfg.gamma_bar) throw ConfigError("--gamma: conflicts with --gamma-bar");
        if (cfg.gamma) {
            if (*cfg.tau_bar_z == 0.0)
                throw ConfigError("--tau-bar-z: 0 needs --gamma-bar, since gamma vanishes there");
            return BathParams::from_magnetisation(*cfg.gamma / -*cfg.tau_bar_z, *cfg.tau_bar_z);
        }
        return BathParams::from_magnetisation(cfg.gamma_bar.value_or(1.0), *cfg.tau_bar_z);
    }
    const double nbar = cfg.nbar.value_or(0.5);
    if (cfg.gamma_bar) {
        if (cfg.gamma) throw ConfigError("--gamma: conflicts with --gamma-bar");
        return BathParams::from_magnetisation(*cfg.gamma_bar, -1.0 / (2.0 * nbar + 1.0));
    }
    return BathParams::from_occupation(cfg.gamma.value_or(1.0), nbar);
}

ChannelSpec make_channel(const RunConfig& cfg) {
    const SpinJ j(cfg.two_j);
    if (cfg.channel == ChannelKind::Dephasing) return ChannelSpec::dephasing(j, cfg.lambda);
    return ChannelSpec::amplitude_damping(j, resolve_bath(cfg));
}

void validate(const RunConfig& cfg) {
    if (cfg.two_j < 1) throw ConfigError("--j: must be >= 1/2");
    if (!(std::isfinite(cfg.lambda) && cfg.lambda >= 0.0))
        throw ConfigError("--lambda: must be finite and >= 0");
    if (cfg.channel == ChannelKind::Damping) resolve_bath(cfg);
    if (!(std::isfinite(cfg.t_max) && cfg.t_max > 0.0)) throw ConfigError("--tmax: must be > 0");
    if (cfg.n_steps < 1) throw ConfigError("--steps: must be >= 1");
    if (cfg.every < 1) throw ConfigError("--every: must be >= 1");
    if (cfg.n_theta < 2 || cfg.n_phi < 3)
        throw ConfigError("--grid: needs at least 2 polar and 3 azimuthal nodes");
    if (cfg.points < 2) throw ConfigError("--points: must be >= 2");
    if (!(cfg.tau_z >= -1.0 && cfg.tau_z <= 1.0)) throw ConfigError("--tau-z: must lie in [-1, 1]");
    if (cfg.cmax && !(std::isfinite(*cfg.cmax) && *cfg.cmax >= 0.0))
        throw ConfigError("--cmax: must be finite and >= 0");
    if (const auto* r = std::get_if<RandomInit>(&cfg.init))
        if (!(std::isfinite(r->coherence) && r->coherence >= 0.0))
            throw ConfigError("--coherence: must be finite and >= 0");
}

Complex parse_complex(const std::string& token) {
    const std::string s = trim(token);
    auto fail = [&]() -> Complex {
        throw ConfigError("bad complex entry '" + token + "', expected re+imj");
    };
    if (s.empty()) return fail();
    const char last = s.back();
    if (last != 'j' && last != 'i') {
        double re = 0.0;
        if (!parse_double(s, re)) return fail();
        return {re, 0.0};
    }
    const std::string body = s.substr(0, s.size() - 1);
    // Split at the last sign that is not part of an exponent.
    std::size_t split = std::string::npos;
    for (std::size_t k = body.size(); k-- > 1;) {
        if ((body[k] == '+' || body[k] == '-') && body[k - 1] != 'e' && body[k - 1] != 'E') {
            split = k;
            break;
        }
    }
    const std::string re_part = split == std::string::npos ? "" : body.substr(0, split);
    std::string im_part = split == std::string::npos ? body : body.substr(split);
    if (im_part.empty() || im_part == "+") im_part = "1";
    if (im_part == "-") im_part = "-1";
    double re = 0.0, im = 0.0;
    if (!re_part.empty() && !parse_double(re_part, re)) return fail();
    if (!parse_double(im_part, im)) return fail();
    return {re, im};
}

DensityMatrix parse_state(const std::string& text, const std::string& origin) {
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    long dim = -1;
    int row = 0;
    Operator m;
    auto where = [&] { return origin + ":" + std::to_string(line_no); };
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        std::istringstream words(t);
        if (dim < 0) {
            std::string key;
            words >> key >> dim;
            std::string extra;
            if (key != "dim" || words.fail() || (words >> extra) || dim < 2)
                throw ConfigError(where() + ": expected 'dim d' with d >= 2");
            m = Operator::Zero(dim, dim);
            continue;
        }
        if (row >= dim) throw ConfigError(where() + ": more than " + std::to_string(dim) + " rows");
        std::vector<std::string> tokens;
        for (std::string w; words >> w;) tokens.push_back(w);
        if (static_cast<long>(tokens.size()) != dim)
            throw ConfigError(where() + ": expected " + std::to_string(dim) + " entries, got " +
                              std::to_string(tokens.size()));
        for (long c = 0; c < dim; ++c) {
            try {
                m(row, c) = parse_complex(tokens[c]);
            } catch (const ConfigError& e) {
                throw ConfigError(where() + ": " + e.what());
            }
        }
        ++row;
    }
    if (dim < 0) throw ConfigError(origin + ": missing 'dim d' header");
    if (row < dim)
        throw ConfigError(origin + ": expected " + std::to_string(dim) + " rows, got " +
                          std::to_string(row));
    try {
        return DensityMatrix(std::move(m));
    } catch (const Error& e) {
        throw ConfigError(origin + ": " + e.what());
    }
}

DensityMatrix read_state_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("--state: cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_state(buf.str(), path.string());
}

std::string render_csv(const CsvTable& table) {
    std::string out;
    for (const auto& c : table.comments) out += "# " + c + "\n";
    for (std::size_t k = 0; k < table.header.size(); ++k)
        out += (k ? "," : "") + table.header[k];
    out += "\n";
    for (const auto& row : table.rows) {
        for (std::size_t k = 0; k < row.size(); ++k) {
            if (k) out += ',';
            out += format_number(row[k]);
        }
        out += "\n";
    }
    out += "# warnings: " + std::to_string(table.warnings.size()) + "\n";
    for (const Warning& w : table.warnings) {
        const char* kind = w.kind == Warning::Kind::Positivity ? "positivity" : "q_floor";
        out += std::string("# ") + kind + " magnitude=" + format_number(w.magnitude) + " " +
               w.message + "\n";
    }
    return out;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << text;
    out.flush();
    if (!out) throw IoError("failed writing " + path.string());
}

CsvTable run_evolve(const RunConfig& cfg) {
    validate(cfg);
    CsvTable table = evolve_table(cfg, initial_state(cfg));
    table.comments = config_comments("evolve", cfg);
    return table;
}

CsvTable run_sweep(const RunConfig& cfg) {
    validate(cfg);
    if (!std::holds_alternative<std::monostate>(cfg.init))
        throw ConfigError("sweep-coherence: the initial state is generated by the sweep; drop "
                          "--bloch, --state and --coherence");
    const bool qubit = cfg.two_j == 1;
    const double c_limit = 2.0 * (1.0 - cfg.tau_z * cfg.tau_z);
    const double cmax = cfg.cmax.value_or(qubit ? c_limit : 1.0);
    if (qubit && cmax > c_limit * (1.0 + 1e-12))
        throw ConfigError("--cmax: exceeds 2(1 - tau_z^2) = " + format_number(c_limit));

    const RateContext ctx = make_context(cfg, qubit);
    const BathParams bath = cfg.channel == ChannelKind::Damping ? resolve_bath(cfg) : BathParams{};
    const std::size_t n = static_cast<std::size_t>(cfg.points);
    std::vector<std::vector<double>> rows(n);
    std::vector<Warnings> warns(n);
    parallel_for(n, [&](std::size_t i) {
        const double c = cmax * static_cast<double>(i) / static_cast<double>(n - 1);
        if (qubit) {
            const double perp = std::min(std::sqrt(0.5 * c), std::sqrt(1.0 - cfg.tau_z * cfg.tau_z));
            const BlochVector tau(perp, 0.0, cfg.tau_z);
            const DensityMatrix rho = bloch_to_rho(tau);
            StateRates r = state_rates(ctx, rho);
            // Qubit vN entries use the closed forms, which stay exact at tau_bar_z = 0.
            try {
                r.sigma_vn = cfg.channel == ChannelKind::Dephasing
                                 ? ep_vn_qubit_dephasing(tau, cfg.lambda)
                                 : ep_vn_qubit_damping(tau, bath);
            } catch (const PurityDivergence&) {
                r.sigma_vn = kNan;
            } catch (const TemperatureDivergence&) {
                r.sigma_vn = kNan;
            }
            rows[i] = {figure_coherence_qubit(tau), r.c_l1, r.sigma_quad, r.sigma_closed,
                       r.sigma_vn, r.phi_dot, static_cast<double>(r.warnings.size())};
            warns[i] = std::move(r.warnings);
        } else {
            DensityMatrix rho = maximally_mixed(SpinJ(cfg.two_j).dim());
            try {
                rho = random_state_with_coherence(SpinJ(cfg.two_j).dim(), c, cfg.seed);
            } catch (const UnreachableCoherence& e) {
                throw ConfigError(std::string("--cmax: ") + e.what());
            }
            StateRates r = state_rates(ctx, rho);
            rows[i] = {kNan, r.c_l1, r.sigma_quad, kNan, r.sigma_vn, r.phi_dot,
                       static_cast<double>(r.warnings.size())};
            warns[i] = std::move(r.warnings);
        }
    });

    CsvTable table;
    table.comments = config_comments("sweep-coherence", cfg);
    table.comments.push_back("cmax=" + format_number(cmax));
    table.comments.push_back(qubit ? "grid_axis=antipode of the Bloch vector"
                                   : "grid_axis=z");
    table.header = {"C_fig", "C_l1", "sigma_wehrl", "sigma_closed", "sigma_vn", "phi_dot",
                    "warnings"};
    table.rows = std::move(rows);
    for (std::size_t i = 0; i < n; ++i)
        append_warnings(table.warnings, warns[i], "row " + std::to_string(i));
    return table;
}

std::vector<NamedTable> run_fig(int id) {
    switch (id) {
    case 1:
        return {fig1()};
    case 2: {
        std::vector<NamedTable> out;
        for (ChannelKind k : {ChannelKind::Dephasing, ChannelKind::Damping}) {
            CsvTable t = run_sweep(fig2_config(k));
            t.comments.front() = "spinphase fig 2";
            out.push_back({k == ChannelKind::Dephasing ? "fig2a.csv" : "fig2b.csv", std::move(t)});
        }
        return out;
    }
    case 3:
        return {fig3_panel(ChannelKind::Dephasing), fig3_panel(ChannelKind::Damping)};
    case 4:
        return {fig4_panel(ChannelKind::Dephasing), fig4_panel(ChannelKind::Damping)};
    default:
        throw ConfigError("--id: expected 1, 2, 3 or 4, got " + std::to_string(id));
    }
}

int worker_count() {
    if (const char* env = std::getenv("SPINPHASE_THREADS")) {
        int n = 0;
        const std::string_view s(env);
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), n);
        if (ec == std::errc() && ptr == s.data() + s.size() && n > 0) return n;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

// ---------------------------------------------------------------------------

Invocation parse_command_line(const std::vector<std::string>& args) {
    CLI::App app{"Entropy production of open spin-J dynamics", "spinphase"};
    app.require_subcommand(1);

    Invocation inv;
    RunConfig& cfg = inv.config;
    std::string out;

    auto* fig = app.add_subcommand("fig", "Write the CSV data behind one figure");
    fig->add_option("--id", inv.fig_id, "Figure number, 1 to 4")->required();
    fig->add_option("--out", out, "Output directory")->required();

    struct Raw {
        std::string channel, j = "1/2", bloch, state, grid = "64x64";
        std::optional<std::uint64_t> seed;
        std::optional<double> coherence;
    };
    Raw ev_raw, sw_raw;

    auto add_common = [&](CLI::App* sub, Raw& raw) {
        sub->add_option("--channel", raw.channel, "dephasing or damping")->required();
        sub->add_option("--j", raw.j, "Spin, e.g. 1/2, 1, 3/2");
        sub->add_option("--lambda", cfg.lambda, "Dephasing rate");
        sub->add_option("--gamma", cfg.gamma, "Damping rate Gamma");
        sub->add_option("--nbar", cfg.nbar, "Bath occupation");
        sub->add_option("--tau-bar-z", cfg.tau_bar_z, "Bath magnetisation, in [-1, 0]");
        sub->add_option("--gamma-bar", cfg.gamma_bar, "Gamma (2 nbar + 1)");
        sub->add_option("--grid", raw.grid, "Quadrature grid NTHETAxNPHI");
        sub->add_option("--out", out, "Output CSV (default stdout)");
        sub->add_flag("--deterministic", cfg.deterministic, "Pairwise quadrature reduction");
        sub->add_option("--seed", raw.seed, "Random-state seed");
    };

    auto* ev = app.add_subcommand("evolve", "Integrate one trajectory and report rates per row");
    add_common(ev, ev_raw);
    ev->add_option("--bloch", ev_raw.bloch, "Qubit Bloch vector X,Y,Z");
    ev->add_option("--state", ev_raw.state, "Density matrix file");
    ev->add_option("--coherence", ev_raw.coherence, "Target l1 coherence of a random state");
    ev->add_option("--tmax", cfg.t_max, "Final time");
    ev->add_option("--steps", cfg.n_steps, "RK4 steps");
    ev->add_option("--every", cfg.every, "Write every Nth step");

    auto* sw = app.add_subcommand("sweep-coherence", "Rates against initial coherence");
    add_common(sw, sw_raw);
    sw->add_option("--points", cfg.points, "Number of coherence values");
    sw->add_option("--tau-z", cfg.tau_z, "Qubit longitudinal component");
    sw->add_option("--cmax", cfg.cmax, "Largest coherence in the sweep");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        inv.help = true;
        inv.help_text = app.help();
        for (const CLI::App* sub : app.get_subcommands())
            if (sub->parsed()) inv.help_text = sub->help();
        return inv;
    } catch (const CLI::CallForAllHelp&) {
        inv.help = true;
        inv.help_text = app.help("", CLI::AppFormatMode::All);
        return inv;
    } catch (const CLI::ParseError& e) {
        throw ConfigError(e.what());
    }

    inv.out = out;
    if (fig->parsed()) {
        inv.command = Command::Fig;
        if (inv.fig_id < 1 || inv.fig_id > 4)
            throw ConfigError("--id: expected 1, 2, 3 or 4, got " + std::to_string(inv.fig_id));
        return inv;
    }
    const bool is_evolve = ev->parsed();
    inv.command = is_evolve ? Command::Evolve : Command::SweepCoherence;
    Raw& raw = is_evolve ? ev_raw : sw_raw;

    if (raw.channel == "dephasing") cfg.channel = ChannelKind::Dephasing;
    else if (raw.channel == "damping") cfg.channel = ChannelKind::Damping;
    else throw ConfigError("--channel: expected dephasing or damping, got '" + raw.channel + "'");
    cfg.two_j = parse_two_j(raw.j);
    std::tie(cfg.n_theta, cfg.n_phi) = parse_grid(raw.grid);

    if (is_evolve) {
        const int given = !raw.bloch.empty() + !raw.state.empty() + (raw.seed || raw.coherence);
        if (given > 1)
            throw ConfigError("--bloch, --state and --seed/--coherence are mutually exclusive");
        if (!raw.bloch.empty()) {
            cfg.init = BlochInit{parse_bloch(raw.bloch)};
        } else if (!raw.state.empty()) {
            cfg.init = FileInit{raw.state};
        } else if (raw.seed || raw.coherence) {
            if (!raw.seed) throw ConfigError("--coherence: needs --seed");
            if (!raw.coherence) throw ConfigError("--seed: needs --coherence");
            cfg.init = RandomInit{*raw.seed, *raw.coherence};
        }
    } else if (raw.seed) {
        cfg.seed = *raw.seed;
    }
    validate(cfg);
    return inv;
}

int run(const Invocation& inv) {
    if (inv.help) {
        std::cout << inv.help_text;
        return 0;
    }
    auto emit = [&](const CsvTable& t) {
        const std::string text = render_csv(t);
        if (inv.out.empty()) std::cout << text;
        else write_file(inv.out, text);
        return 0;
    };
    switch (inv.command) {
    case Command::Evolve:
        return emit(run_evolve(inv.config));
    case Command::SweepCoherence:
        return emit(run_sweep(inv.config));
    case Command::Fig: {
        std::error_code ec;
        std::filesystem::create_directories(inv.out, ec);
        if (ec) throw IoError("cannot create " + inv.out.string() + ": " + ec.message());
        for (const NamedTable& t : run_fig(inv.fig_id)) write_file(inv.out / t.file_name, render_csv(t.table));
        return 0;
    }
    }
    return 1;
}

} // namespace spinphase::cli
