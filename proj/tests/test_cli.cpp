#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "cli.hpp"

using namespace spinphase;
using namespace spinphase::cli;

namespace {

Invocation parse(std::initializer_list<const char*> args) {
    return parse_command_line(std::vector<std::string>(args.begin(), args.end()));
}

std::string config_error(std::initializer_list<const char*> args) {
    try {
        parse(args);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "<no error>";
}

std::size_t column(const CsvTable& t, const std::string& name) {
    for (std::size_t k = 0; k < t.header.size(); ++k)
        if (t.header[k] == name) return k;
    FAIL("missing column " << name);
    return 0;
}

RunConfig damping_qubit(Eigen::Vector3d tau) {
    RunConfig cfg;
    cfg.channel = ChannelKind::Damping;
    cfg.gamma = 1.0;
    cfg.nbar = 0.5;
    cfg.init = BlochInit{tau};
    cfg.deterministic = true;
    return cfg;
}

struct ThreadsEnv {
    explicit ThreadsEnv(const char* value) { setenv("SPINPHASE_THREADS", value, 1); }
    ~ThreadsEnv() { unsetenv("SPINPHASE_THREADS"); }
};

} // namespace

TEST_CASE("command line parses the documented grammar") {
    const Invocation ev = parse({"evolve", "--channel", "damping", "--j", "1/2", "--bloch",
                                 "0.6,0,0.1", "--gamma", "1", "--nbar", "0.5", "--tmax", "3",
                                 "--steps", "300", "--grid", "32x48", "--deterministic"});
    CHECK(ev.command == Command::Evolve);
    CHECK(ev.config.channel == ChannelKind::Damping);
    CHECK(ev.config.two_j == 1);
    CHECK(ev.config.n_theta == 32);
    CHECK(ev.config.n_phi == 48);
    CHECK(ev.config.deterministic);
    CHECK(ev.config.t_max == 3.0);
    REQUIRE(std::holds_alternative<BlochInit>(ev.config.init));
    CHECK(std::get<BlochInit>(ev.config.init).tau.z() == doctest::Approx(0.1));

    const Invocation rnd = parse({"evolve", "--channel", "dephasing", "--j", "1", "--seed", "7",
                                  "--coherence", "0.4"});
    REQUIRE(std::holds_alternative<RandomInit>(rnd.config.init));
    CHECK(std::get<RandomInit>(rnd.config.init).seed == 7);
    CHECK(rnd.config.two_j == 2);

    const Invocation sw = parse({"sweep-coherence", "--channel", "dephasing", "--j", "3/2",
                                 "--points", "9", "--seed", "4"});
    CHECK(sw.command == Command::SweepCoherence);
    CHECK(sw.config.two_j == 3);
    CHECK(sw.config.points == 9);
    CHECK(sw.config.seed == 4);

    const Invocation fig = parse({"fig", "--id", "3", "--out", "somewhere"});
    CHECK(fig.command == Command::Fig);
    CHECK(fig.fig_id == 3);
    CHECK(fig.out == "somewhere");

    CHECK(parse({"evolve", "--help"}).help);
}

TEST_CASE("config errors name the offending flag") {
    CHECK(config_error({"evolve", "--channel", "bogus", "--bloch", "0,0,0"}).find("--channel") !=
          std::string::npos);
    CHECK(config_error({"evolve", "--channel", "dephasing", "--j", "3/4"}).find("--j") !=
          std::string::npos);
    CHECK(config_error({"evolve", "--channel", "dephasing", "--j", "0"}).find("--j") !=
          std::string::npos);
    CHECK(config_error({"evolve", "--channel", "dephasing", "--grid", "64by64"}).find("--grid") !=
          std::string::npos);
    CHECK(config_error({"evolve", "--channel", "dephasing", "--bloch", "0,0"}).find("--bloch") !=
          std::string::npos);
    CHECK(config_error({"evolve", "--channel", "dephasing", "--bloch", "0,0,0", "--seed", "1",
                        "--coherence", "0.1"})
              .find("mutually exclusive") != std::string::npos);
    CHECK(config_error({"evolve", "--channel", "dephasing", "--coherence", "0.1"})
              .find("--seed") != std::string::npos);
    CHECK(config_error({"evolve", "--channel", "dephasing", "--lambda", "-1"}).find("--lambda") !=
          std::string::npos);
    CHECK(config_error({"evolve", "--channel", "damping", "--tau-bar-z", "0.2"})
              .find("--tau-bar-z") != std::string::npos);
    CHECK(config_error({"evolve", "--channel", "damping", "--tau-bar-z", "-0.5", "--nbar", "1"})
              .find("--nbar") != std::string::npos);
    CHECK(config_error({"evolve", "--channel", "damping", "--gamma", "-2"}).find("--gamma") !=
          std::string::npos);
    CHECK(config_error({"evolve", "--channel", "dephasing", "--steps", "0"}).find("--steps") !=
          std::string::npos);
    CHECK(config_error({"evolve", "--channel", "dephasing", "--lambda", "abc"}).find("--lambda") !=
          std::string::npos);
    CHECK(config_error({"fig", "--id", "7", "--out", "x"}).find("--id") != std::string::npos);
    CHECK(config_error({"frobnicate"}) != "<no error>");
}

TEST_CASE("initial-state flags are checked against the spin") {
    RunConfig cfg;
    cfg.two_j = 2;
    cfg.init = BlochInit{Eigen::Vector3d(0.1, 0.0, 0.0)};
    CHECK_THROWS_WITH_AS(run_evolve(cfg), doctest::Contains("--bloch"), ConfigError);

    cfg.two_j = 1;
    cfg.init = BlochInit{Eigen::Vector3d(1.0, 1.0, 0.0)};
    CHECK_THROWS_WITH_AS(run_evolve(cfg), doctest::Contains("--bloch"), ConfigError);

    cfg.init = std::monostate{};
    CHECK_THROWS_AS(run_evolve(cfg), ConfigError);

    cfg.two_j = 2;
    cfg.init = RandomInit{1, 50.0};
    CHECK_THROWS_WITH_AS(run_evolve(cfg), doctest::Contains("--coherence"), ConfigError);
}

TEST_CASE("bath resolution accepts both parameterizations") {
    RunConfig cfg;
    cfg.channel = ChannelKind::Damping;
    BathParams b = resolve_bath(cfg);
    CHECK(b.gamma == 1.0);
    CHECK(b.nbar == 0.5);
    CHECK(b.gamma_bar == doctest::Approx(2.0));

    cfg.gamma_bar = 1.0;
    cfg.tau_bar_z = 0.0;
    b = resolve_bath(cfg);
    CHECK(b.gamma_bar == 1.0);
    CHECK(b.tau_bar_z == 0.0);

    cfg.gamma_bar.reset();
    cfg.gamma = 0.5;
    cfg.tau_bar_z = -0.25;
    b = resolve_bath(cfg);
    CHECK(b.gamma_bar == doctest::Approx(2.0));
    CHECK(b.nbar == doctest::Approx(1.5));

    cfg.tau_bar_z = 0.0;
    CHECK_THROWS_AS(resolve_bath(cfg), ConfigError);
}

TEST_CASE("complex tokens") {
    CHECK(parse_complex("0.5") == Complex(0.5, 0.0));
    CHECK(parse_complex("0.5+0.25j") == Complex(0.5, 0.25));
    CHECK(parse_complex("0.5-0.25j") == Complex(0.5, -0.25));
    CHECK(parse_complex("-0.25j") == Complex(0.0, -0.25));
    CHECK(parse_complex("+1e-3-2E-2j") == Complex(1e-3, -2e-2));
    CHECK(parse_complex("1e+1+1e+1j") == Complex(10.0, 10.0));
    CHECK(parse_complex("2-j") == Complex(2.0, -1.0));
    CHECK_THROWS_AS(parse_complex("0.5+"), ConfigError);
    CHECK_THROWS_AS(parse_complex("abc"), ConfigError);
    CHECK_THROWS_AS(parse_complex(""), ConfigError);
}

TEST_CASE("state files") {
    const DensityMatrix rho = parse_state("# comment\ndim 2\n0.7 0.1-0.2j\n0.1+0.2j 0.3\n", "s");
    CHECK(rho(0, 1) == Complex(0.1, -0.2));
    CHECK(rho(1, 1).real() == doctest::Approx(0.3));

    CHECK_THROWS_WITH_AS(parse_state("dimension 2\n", "s"), doctest::Contains("s:1"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_state("dim 2\n1 0\n0\n", "s"), doctest::Contains("s:3"),
                         ConfigError);
    CHECK_THROWS_WITH_AS(parse_state("dim 2\n1 0\n0 x\n", "s"), doctest::Contains("s:3"),
                         ConfigError);
    CHECK_THROWS_WITH_AS(parse_state("dim 2\n1 0\n", "s"), doctest::Contains("rows"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_state("dim 2\n1 0\n0 0\n0 0\n", "s"), doctest::Contains("s:4"),
                         ConfigError);
    CHECK_THROWS_AS(parse_state("", "s"), ConfigError);
    // Not Hermitian.
    CHECK_THROWS_AS(parse_state("dim 2\n0.5 0.1\n0.2 0.5\n", "s"), ConfigError);
    // Negative eigenvalue.
    CHECK_THROWS_AS(parse_state("dim 2\n1.2 0\n0 -0.2\n", "s"), ConfigError);

    const auto path = std::filesystem::temp_directory_path() / "spinphase_test_state.txt";
    {
        std::ofstream out(path);
        out << "dim 3\n0.5 0.1 0\n0.1 0.3 0\n0 0 0.2\n";
    }
    CHECK(read_state_file(path).dim() == 3);

    RunConfig cfg;
    cfg.init = FileInit{path};
    cfg.t_max = 0.1;
    cfg.n_steps = 10;
    CHECK_THROWS_WITH_AS(run_evolve(cfg), doctest::Contains("dim"), ConfigError);
    cfg.two_j = 2;
    CHECK(run_evolve(cfg).rows.size() == 2);
    std::filesystem::remove(path);

    CHECK_THROWS_AS(read_state_file(path), ConfigError);
}

TEST_CASE("csv rendering") {
    CsvTable t;
    t.comments = {"a=1"};
    t.header = {"x", "y"};
    t.rows = {{0.5, std::nan("")}, {-1.0, 1e-300}};
    t.warnings.push_back({Warning::Kind::QFloor, "row 1: dropped", 1e-20});
    const std::string s = render_csv(t);
    CHECK(s == "# a=1\n"
               "x,y\n"
               "5.00000000000000000e-01,nan\n"
               "-1.00000000000000000e+00,1.00000000000000003e-300\n"
               "# warnings: 1\n"
               "# q_floor magnitude=9.99999999999999945e-21 row 1: dropped\n");

    CsvTable empty;
    empty.header = {"t"};
    CHECK(render_csv(empty) == "t\n# warnings: 0\n");
}

TEST_CASE("parallel_for covers every index and rethrows the first failure") {
    ThreadsEnv env("3");
    CHECK(worker_count() == 3);
    std::vector<int> hit(100, 0);
    parallel_for(hit.size(), [&](std::size_t i) { hit[i] += 1; });
    CHECK(std::all_of(hit.begin(), hit.end(), [](int h) { return h == 1; }));

    try {
        parallel_for(50, [](std::size_t i) {
            if (i == 17 || i == 40) throw std::runtime_error(std::to_string(i));
        });
        FAIL("expected an exception");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()) == "17");
    }
}

TEST_CASE("output is byte-identical across runs and worker counts") {
    RunConfig cfg = damping_qubit({0.3, 0.2, -0.1});
    cfg.t_max = 1.0;
    cfg.n_steps = 100;
    cfg.every = 10;
    cfg.n_theta = cfg.n_phi = 32;

    std::string one, many;
    {
        ThreadsEnv env("1");
        one = render_csv(run_evolve(cfg));
    }
    {
        ThreadsEnv env("4");
        many = render_csv(run_evolve(cfg));
    }
    CHECK(one == many);
    CHECK(one == render_csv(run_evolve(cfg)));

    RunConfig sweep;
    sweep.two_j = 2;
    sweep.cmax = 0.8;
    sweep.points = 5;
    sweep.n_theta = sweep.n_phi = 32;
    sweep.deterministic = true;
    const std::string a = render_csv(run_sweep(sweep));
    ThreadsEnv env("3");
    CHECK(a == render_csv(run_sweep(sweep)));
}

TEST_CASE("evolve: diagonal state under dephasing produces nothing") {
    RunConfig cfg;
    cfg.two_j = 2;
    cfg.init = RandomInit{3, 0.0};
    cfg.t_max = 2.0;
    cfg.n_steps = 200;
    cfg.every = 20;
    const CsvTable t = run_evolve(cfg);
    const std::size_t q = column(t, "sigma_quad");
    const std::size_t closed = column(t, "sigma_closed");
    REQUIRE(t.rows.size() == 11);
    for (const auto& row : t.rows) {
        CHECK(std::abs(row[q]) < 1e-12);
        CHECK(std::isnan(row[closed]));
    }
    CHECK(t.header.size() == 2 + 9 + 8);
}

TEST_CASE("evolve: damped qubit quadrature matches the closed form rowwise") {
    RunConfig cfg = damping_qubit({0.6, 0.0, 0.1});
    cfg.n_theta = cfg.n_phi = 128;
    cfg.t_max = 3.0;
    cfg.n_steps = 600;
    cfg.every = 20;
    const CsvTable t = run_evolve(cfg);
    const std::size_t q = column(t, "sigma_quad");
    const std::size_t c = column(t, "sigma_closed");
    const std::size_t vn = column(t, "sigma_vn");
    const std::size_t scaled = column(t, "scaled_t");
    const std::size_t time = column(t, "t");
    for (const auto& row : t.rows) {
        CHECK(std::abs(row[q] - row[c]) < 1e-6);
        CHECK(row[vn] >= row[q]);
        CHECK(row[scaled] == doctest::Approx(2.0 * row[time]));
    }
    CHECK(t.warnings.empty());
}

TEST_CASE("evolve: long damping run ends at the bath magnetisation") {
    RunConfig cfg = damping_qubit({0.6, 0.0, 0.1});
    cfg.n_theta = cfg.n_phi = 16;
    cfg.t_max = 10.0; // gamma_bar t = 20
    cfg.n_steps = 2000;
    cfg.every = 2000;
    const CsvTable t = run_evolve(cfg);
    const auto& last = t.rows.back();
    CHECK(last[column(t, "tau_z")] == doctest::Approx(-0.5).epsilon(1e-6));
    CHECK(std::abs(last[column(t, "tau_x")]) < 1e-4);
    CHECK(std::abs(last[column(t, "sigma_quad")]) < 1e-8);
}

TEST_CASE("evolve: zero-temperature bath has no finite vN entries") {
    RunConfig cfg = damping_qubit({0.2, 0.0, 0.0});
    cfg.nbar = 0.0;
    cfg.n_theta = cfg.n_phi = 16;
    cfg.t_max = 0.5;
    cfg.n_steps = 50;
    cfg.every = 25;
    const CsvTable t = run_evolve(cfg);
    for (const auto& row : t.rows) {
        CHECK(std::isnan(row[column(t, "sigma_vn")]));
        CHECK(std::isfinite(row[column(t, "sigma_quad")]));
    }
}

TEST_CASE("sweep-coherence on the qubit figure parameters") {
    for (ChannelKind kind : {ChannelKind::Dephasing, ChannelKind::Damping}) {
        RunConfig cfg;
        cfg.channel = kind;
        cfg.gamma_bar = 1.0;
        cfg.tau_bar_z = 0.0;
        cfg.points = 41;
        cfg.n_theta = cfg.n_phi = 96;
        const CsvTable t = run_sweep(cfg);
        const std::size_t w = column(t, "sigma_wehrl");
        const std::size_t vn = column(t, "sigma_vn");
        const std::size_t cf = column(t, "C_fig");
        const std::size_t cl = column(t, "C_l1");
        REQUIRE(t.rows.size() == 41);
        CHECK(t.rows.front()[w] == 0.0);
        CHECK(t.rows.front()[vn] == 0.0);
        for (std::size_t i = 0; i + 1 < t.rows.size(); ++i) {
            CHECK(t.rows[i + 1][w] >= t.rows[i][w]);
            CHECK(t.rows[i][w] <= t.rows[i][vn]);
            // l1 = |tau_perp| and the figure convention is 2 |tau_perp|^2.
            CHECK(t.rows[i][cf] == doctest::Approx(2.0 * t.rows[i][cl] * t.rows[i][cl]));
        }
        CHECK(std::isnan(t.rows.back()[vn]));
        CHECK(t.rows.back()[w] == doctest::Approx(0.25).epsilon(1e-12));
    }
}

TEST_CASE("sweep-coherence rejects unreachable bounds") {
    RunConfig cfg;
    cfg.tau_z = 0.6;
    cfg.cmax = 1.5;
    CHECK_THROWS_WITH_AS(run_sweep(cfg), doctest::Contains("--cmax"), ConfigError);
    cfg.cmax = 2.0 * (1.0 - 0.36);
    CHECK(run_sweep(cfg).rows.size() == 21);

    RunConfig qutrit;
    qutrit.two_j = 2;
    qutrit.cmax = 40.0;
    CHECK_THROWS_WITH_AS(run_sweep(qutrit), doctest::Contains("--cmax"), ConfigError);

    RunConfig with_state;
    with_state.init = BlochInit{Eigen::Vector3d::Zero()};
    CHECK_THROWS_AS(run_sweep(with_state), ConfigError);
}

TEST_CASE("sweep-coherence for a qutrit hits the l1 targets") {
    RunConfig cfg;
    cfg.channel = ChannelKind::Damping;
    cfg.two_j = 2;
    cfg.cmax = 1.0;
    cfg.points = 5;
    cfg.seed = 12;
    cfg.n_theta = cfg.n_phi = 64;
    const CsvTable t = run_sweep(cfg);
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        CHECK(std::isnan(t.rows[i][column(t, "C_fig")]));
        CHECK(t.rows[i][column(t, "C_l1")] == doctest::Approx(0.25 * i).epsilon(1e-12));
        CHECK(t.rows[i][column(t, "sigma_vn")] >= t.rows[i][column(t, "sigma_wehrl")]);
    }
}

TEST_CASE("figure 1: closed run stays on the sphere, damped run thermalizes") {
    const auto tables = run_fig(1);
    REQUIRE(tables.size() == 1);
    const CsvTable& t = tables[0].table;
    const std::size_t norm = column(t, "closed_norm");
    double worst = 0.0, max_z = 0.0;
    for (const auto& row : t.rows) {
        worst = std::max(worst, std::abs(row[norm] - 1.0));
        max_z = std::max(max_z, std::abs(row[column(t, "closed_z")]));
    }
    CHECK(worst < 1e-8);
    CHECK(max_z == doctest::Approx(1.0).epsilon(1e-8));
    const auto& last = t.rows.back();
    CHECK(last[column(t, "gamma_bar_t")] == doctest::Approx(20.0));
    CHECK(std::abs(last[column(t, "damped_z")] + 0.5) < 1e-6);
    CHECK(std::hypot(last[column(t, "damped_x")], last[column(t, "damped_y")]) < 1e-6);
}

TEST_CASE("figure 2: zero coherence gives zero production") {
    const auto tables = run_fig(2);
    REQUIRE(tables.size() == 2);
    CHECK(tables[0].file_name == "fig2a.csv");
    for (const auto& nt : tables) {
        CHECK(nt.table.rows.front()[column(nt.table, "sigma_wehrl")] == 0.0);
        CHECK(nt.table.rows.size() == 101);
    }
}

TEST_CASE("figure 3: higher initial coherence gives higher production") {
    for (const auto& nt : run_fig(3)) {
        const CsvTable& t = nt.table;
        std::vector<double> at_zero;
        for (const auto& row : t.rows)
            if (row[column(t, "t")] == 0.0) at_zero.push_back(row[column(t, "sigma_quad")]);
        REQUIRE(at_zero.size() == 5);
        CHECK(std::is_sorted(at_zero.begin(), at_zero.end()));
        CHECK(std::adjacent_find(at_zero.begin(), at_zero.end()) == at_zero.end());
        for (const auto& row : t.rows)
            CHECK(std::abs(row[column(t, "sigma_quad")] - row[column(t, "sigma_closed")]) < 1e-6);
    }
}

TEST_CASE("fig command writes every panel and reports unwritable targets") {
    const auto dir = std::filesystem::temp_directory_path() / "spinphase_fig_test";
    std::filesystem::remove_all(dir);
    Invocation inv;
    inv.command = Command::Fig;
    inv.fig_id = 2;
    inv.out = dir;
    CHECK(run(inv) == 0);
    CHECK(std::filesystem::exists(dir / "fig2a.csv"));
    CHECK(std::filesystem::exists(dir / "fig2b.csv"));

    inv.out = dir / "fig2a.csv" / "nested";
    CHECK_THROWS_AS(run(inv), IoError);
    std::filesystem::remove_all(dir);
    CHECK_THROWS_AS(write_file("/proc/spinphase/nope.csv", "x"), IoError);
}
