#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "hdgmg/harness.hpp"

using namespace hdgmg;

namespace {

// Forward-mode dual numbers; nesting gives exact second derivatives.
template <class T>
struct Dual
{
    T a, b;  // value, derivative
};

template <class T> Dual<T> operator+(Dual<T> x, Dual<T> y) { return {x.a + y.a, x.b + y.b}; }
template <class T> Dual<T> operator-(Dual<T> x, Dual<T> y) { return {x.a - y.a, x.b - y.b}; }
template <class T> Dual<T> operator*(Dual<T> x, Dual<T> y) { return {x.a * y.a, x.a * y.b + x.b * y.a}; }
template <class T> Dual<T> operator*(double s, Dual<T> x) { return {s * x.a, s * x.b}; }

inline double sin_(double x) { return std::sin(x); }
inline double cos_(double x) { return std::cos(x); }
template <class T> Dual<T> sin_(Dual<T> x) { return {sin_(x.a), cos_(x.a) * x.b}; }
template <class T> Dual<T> cos_(Dual<T> x) { return {cos_(x.a), -1.0 * (sin_(x.a) * x.b)}; }

constexpr double pi = std::numbers::pi;

template <class T> T u1(T x, T y) { return sin_(pi * x) * sin_(pi * y); }
template <class T> T u2(T x, T y) { return cos_(pi * x) * cos_(pi * y); }
template <class T> T pr(T x, T y) { return sin_(pi * x) * cos_(pi * y); }

using D1 = Dual<double>;
using D2 = Dual<D1>;

// second derivative of g along direction (dx, dy) twice
template <class G>
double second(G g, double x, double y, double dx, double dy)
{
    const D2 X{{x, dx}, {dx, 0.0}}, Y{{y, dy}, {dy, 0.0}};
    return g(X, Y).b.b;
}

template <class G>
std::pair<double, double> gradient(G g, double x, double y)
{
    return {g(D1{x, 1.0}, D1{y, 0.0}).b, g(D1{x, 0.0}, D1{y, 1.0}).b};
}

struct TempDir
{
    std::filesystem::path path;
    explicit TempDir(const std::string& name)
        : path(std::filesystem::temp_directory_path() / ("hdgmg_test_" + name))
    {
        std::filesystem::remove_all(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string str() const { return path.string(); }
};

std::string
read_file(const std::filesystem::path& p)
{
    std::ifstream is(p);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

int
cli(std::vector<std::string> args, std::string* out_text = nullptr)
{
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    if (out_text)
        *out_text = out.str();
    return code;
}

} // namespace

TEST(Manufactured, SourceMatchesDifferentiatedSolution)
{
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    auto g1 = [](auto x, auto y) { return u1(x, y); };
    auto g2 = [](auto x, auto y) { return u2(x, y); };
    auto gp = [](auto x, auto y) { return pr(x, y); };
    for (int i = 0; i < 1000; i++)
    {
        const double x = U(rng), y = U(rng);
        const auto [px, py] = gradient(gp, x, y);
        const double lap1 = second(g1, x, y, 1, 0) + second(g1, x, y, 0, 1);
        const double lap2 = second(g2, x, y, 1, 0) + second(g2, x, y, 0, 1);
        const Point  f    = ManufacturedProblem::f({x, y});
        EXPECT_NEAR(f.x(), -lap1 + px, 1e-12);
        EXPECT_NEAR(f.y(), -lap2 + py, 1e-12);
    }
}

TEST(Manufactured, VelocityIsDivergenceFree)
{
    std::mt19937 rng(12);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    auto g1 = [](auto x, auto y) { return u1(x, y); };
    auto g2 = [](auto x, auto y) { return u2(x, y); };
    for (int i = 0; i < 1000; i++)
    {
        const double x = U(rng), y = U(rng);
        const Eigen::Matrix2d G = ManufacturedProblem::grad_u({x, y});
        EXPECT_NEAR(G.trace(), 0.0, 1e-13);
        EXPECT_NEAR(gradient(g1, x, y).first + gradient(g2, x, y).second, 0.0, 1e-13);
    }
}

TEST(Manufactured, ClosedFormsAndTraction)
{
    std::mt19937 rng(13);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    auto g1 = [](auto x, auto y) { return u1(x, y); };
    auto g2 = [](auto x, auto y) { return u2(x, y); };
    for (int i = 0; i < 200; i++)
    {
        const Point x{U(rng), U(rng)};
        EXPECT_NEAR(ManufacturedProblem::u(x).x(), u1(x.x(), x.y()), 1e-15);
        EXPECT_NEAR(ManufacturedProblem::u(x).y(), u2(x.x(), x.y()), 1e-15);
        EXPECT_NEAR(ManufacturedProblem::p(x), pr(x.x(), x.y()), 1e-15);
        const auto [a, b] = gradient(g1, x.x(), x.y());
        const auto [c, d] = gradient(g2, x.x(), x.y());
        const Point n(0.0, -1.0);
        const Point t = ManufacturedProblem::traction(x, n);
        const double p = pr(x.x(), x.y());
        EXPECT_NEAR(t.x(), a * n.x() + b * n.y() - p * n.x(), 1e-13);
        EXPECT_NEAR(t.y(), c * n.x() + d * n.y() - p * n.y(), 1e-13);
    }
}

TEST(Config, ParsesLevels)
{
    EXPECT_EQ(parse_levels("4"), std::make_pair(1, 4));
    EXPECT_EQ(parse_levels("2-6"), std::make_pair(2, 6));
    EXPECT_THROW(parse_levels("x"), ConfigError);
    EXPECT_THROW(parse_levels("2-"), ConfigError);
    EXPECT_THROW(parse_levels("3a"), ConfigError);
}

TEST(Config, ParsesNestedMode)
{
    EXPECT_EQ(parse_nested("true"), NestedMode::On);
    EXPECT_EQ(parse_nested("false"), NestedMode::Off);
    EXPECT_EQ(parse_nested("both"), NestedMode::Both);
    EXPECT_THROW(parse_nested("sometimes"), ConfigError);
}

TEST(Config, DefaultsFollowDegree)
{
    ExperimentConfig c;
    EXPECT_NO_THROW(c.validate());
    EXPECT_EQ(c.tau, 1.0);
    EXPECT_EQ(c.al_config(1, 2.0).eps_tol, 1e-8);
    EXPECT_EQ(c.al_config(2, 2.0).rho, 1e-10);
    EXPECT_EQ(c.al_config(3, 2.0).eps_tol, 1e-10);
    EXPECT_EQ(c.al_config(3, 2.0).rho, 1e-12);
    c.rho = 1e-9;
    EXPECT_EQ(c.al_config(3, 2.0).rho, 1e-9);
}

TEST(Config, RejectsInvalidValues)
{
    auto bad = [](auto change) {
        ExperimentConfig c;
        change(c);
        EXPECT_THROW(c.validate(), ConfigError);
    };
    bad([](ExperimentConfig& c) { c.degrees = {0}; });
    bad([](ExperimentConfig& c) { c.degrees = {}; });
    bad([](ExperimentConfig& c) { c.first_level = 3, c.max_level = 2; });
    bad([](ExperimentConfig& c) { c.dts = {2.0, -1.0}; });
    bad([](ExperimentConfig& c) { c.steps = {0}; });
    bad([](ExperimentConfig& c) { c.tau = 0.0; });
    bad([](ExperimentConfig& c) { c.method = "hdg"; });
    bad([](ExperimentConfig& c) { c.eps_tol = 0.0; });
    bad([](ExperimentConfig& c) { c.omega = 1.5; });
}

TEST(ResultTable, LongFormatCsv)
{
    ResultTable t("demo");
    t.add(2, 2.0, 1, "n_iter", 61);
    t.add(3, 8.0, 1, "mg_iters", std::string("--"));
    t.add(4, 0.5, 2, "err_u", 0.125);
    std::ostringstream os;
    t.write_csv(os);
    EXPECT_EQ(os.str(), "table,level,dt,p,quantity,value\n"
                        "demo,2,2,1,n_iter,61\n"
                        "demo,3,8,1,mg_iters,--\n"
                        "demo,4,0.5,2,err_u,0.125\n");
    EXPECT_EQ(t.find(3, 8.0, 1, "mg_iters"), std::optional<std::string>("--"));
    EXPECT_FALSE(t.find(3, 2.0, 1, "mg_iters"));
    EXPECT_NE(t.format_wide().find("level 4"), std::string::npos);
}

TEST(Commands, EocRowsUseLogRatio)
{
    ExperimentConfig c;
    c.first_level = 2;
    c.max_level   = 3;
    const CommandResult r = cmd_eoc(c);
    EXPECT_EQ(r.exit_code, exit_ok);
    for (const char* q : {"u", "p", "L"})
    {
        const double e2  = std::stod(*r.table.find(2, 2.0, 1, std::string("err_") + q));
        const double e3  = std::stod(*r.table.find(3, 2.0, 1, std::string("err_") + q));
        const double eoc = std::stod(*r.table.find(3, 2.0, 1, std::string("eoc_") + q));
        EXPECT_NEAR(eoc, std::log2(e2 / e3), 1e-10);
        EXPECT_GT(eoc, 1.5);
    }
    // level 2 has a coarser neighbour computed, so its EOC is reported too
    EXPECT_TRUE(r.table.find(2, 2.0, 1, "eoc_u"));
}

TEST(Commands, SolveMatchesEocRow)
{
    ExperimentConfig c;
    c.max_level = 2;
    const CommandResult s = cmd_solve(c);
    EXPECT_EQ(s.exit_code, exit_ok);
    EXPECT_EQ(*s.table.find(2, 2.0, 1, "dofs"), "368");
    EXPECT_EQ(s.report["dofs"], 368);
    EXPECT_TRUE(s.report["converged"].get<bool>());

    c.first_level = 2;
    const CommandResult e = cmd_eoc(c);
    for (const char* q : {"err_u", "err_p", "err_L"})
        EXPECT_EQ(*s.table.find(2, 2.0, 1, q), *e.table.find(2, 2.0, 1, q)) << q;
}

TEST(Commands, SolveWithZeroDataTakesOneStep)
{
    ExperimentConfig c;
    c.max_level = 2;
    c.zero_data = true;
    const CommandResult s = cmd_solve(c);
    EXPECT_EQ(s.exit_code, exit_ok);
    EXPECT_EQ(s.report["n_iter"], 1);
    EXPECT_FALSE(s.table.find(2, 2.0, 1, "err_u"));
    EXPECT_THROW(cmd_eoc(c), ConfigError);
}

TEST(Commands, IdentityPassesAndDetectsControl)
{
    ExperimentConfig c;
    c.degrees   = {1, 3};
    c.max_level = 2;
    const CommandResult ok = cmd_identity(c);
    EXPECT_EQ(ok.exit_code, exit_ok);
    EXPECT_TRUE(ok.report["pass"].get<bool>());
    EXPECT_EQ(*ok.table.find(2, 2.0, 3, "pass"), "1");

    c.tau_offstar = 0.5;
    const CommandResult bad = cmd_identity(c);
    EXPECT_EQ(bad.exit_code, exit_failed);
    EXPECT_EQ(*bad.table.find(1, 2.0, 1, "pass"), "0");

    c.max_level = 4;
    EXPECT_THROW(cmd_identity(c), ConfigError);
}

TEST(Commands, ItersMarksInnerCapWithDashes)
{
    ExperimentConfig c;
    c.first_level = 2;
    c.max_level   = 3;
    c.dts         = {8.0};
    c.steps       = {1};
    c.smoother    = SmootherKind::Jacobi;
    c.max_inner   = 5;
    const CommandResult r = cmd_iters(c);
    EXPECT_EQ(r.exit_code, exit_ok);
    EXPECT_EQ(*r.table.find(2, 8.0, 1, "mg_iters_m1"), "--");
    EXPECT_EQ(*r.table.find(3, 8.0, 1, "n_iter_m1"), "--");
    EXPECT_EQ(*r.table.find(3, 8.0, 1, "dofs"), "1504");
}

TEST(Commands, CondReportsRatio)
{
    ExperimentConfig c;
    c.first_level = 1;
    c.max_level   = 3;
    const CommandResult r = cmd_cond(c);
    EXPECT_EQ(r.exit_code, exit_ok);
    EXPECT_FALSE(r.table.find(1, 2.0, 1, "ratio"));
    const double ratio = std::stod(*r.table.find(3, 2.0, 1, "ratio"));
    EXPECT_GT(ratio, 3.0);
    EXPECT_LT(ratio, 5.0);
}

TEST(Cli, ExitCodes)
{
    TempDir dir("exit");
    EXPECT_EQ(cli({"--help"}), exit_ok);
    EXPECT_EQ(cli({}), exit_bad_config);
    EXPECT_EQ(cli({"frobnicate"}), exit_bad_config);
    EXPECT_EQ(cli({"cond", "--smoother", "chebyshev", "--out", dir.str()}), exit_bad_config);
    EXPECT_EQ(cli({"cond", "--levels", "0", "--out", dir.str()}), exit_bad_config);
    EXPECT_EQ(cli({"cond", "--dt", "x", "--out", dir.str()}), exit_bad_config);
    EXPECT_EQ(cli({"solve", "--p", "1,2", "--out", dir.str()}), exit_bad_config);
    EXPECT_EQ(cli({"cond", "--config", (dir.path / "missing.ini").string()}), exit_bad_config);
    EXPECT_EQ(cli({"solve", "--levels", "2", "--max-outer", "3", "--out", dir.str()}),
              exit_not_converged);
    EXPECT_EQ(cli({"identity", "--levels", "1", "--tau-offstar", "1", "--out", dir.str()}),
              exit_failed);
    EXPECT_EQ(cli({"solve", "--levels", "2", "--out", dir.str()}), exit_ok);
    EXPECT_TRUE(std::filesystem::exists(dir.path / "solve.json"));
    const auto report = nlohmann::json::parse(read_file(dir.path / "solve.json"));
    EXPECT_EQ(report["dofs"], 368);
    EXPECT_EQ(report["exit_code"], 0);
}

TEST(Cli, ConfigFileWithOverrides)
{
    TempDir dir("config");
    std::filesystem::create_directories(dir.path);
    const auto ini = dir.path / "run.ini";
    std::ofstream(ini) << "; comment\ntable = mine\np = 1\nlevels = 1-2\ndt = 2,4\nmax-inner = 50\n";
    ASSERT_EQ(cli({"cond", "--config", ini.string(), "--dt", "8", "--out", dir.str()}), exit_ok);
    const std::string csv = read_file(dir.path / "mine.csv");
    EXPECT_NE(csv.find("mine,2,8,1,kappa,"), std::string::npos);
    EXPECT_EQ(csv.find(",2,1,kappa"), std::string::npos);

    std::ofstream(ini) << "p = 1\nbogus = 3\n";
    EXPECT_EQ(cli({"cond", "--config", ini.string(), "--out", dir.str()}), exit_bad_config);
}

TEST(Cli, CsvIsReproducible)
{
    TempDir a("repro_a"), b("repro_b");
    const std::vector<std::string> args = {"iters", "--levels", "1-3", "--dt", "2,8", "--nested=both"};
    auto with_out = [&](const TempDir& d) {
        auto v = args;
        v.push_back("--out");
        v.push_back(d.str());
        return v;
    };
    ASSERT_EQ(cli(with_out(a)), exit_ok);
    ASSERT_EQ(cli(with_out(b)), exit_ok);
    const std::string first = read_file(a.path / "iters.csv");
    EXPECT_FALSE(first.empty());
    EXPECT_EQ(first, read_file(b.path / "iters.csv"));
    EXPECT_NE(first.find("n_iter_m4_nested"), std::string::npos);
}

TEST(Cli, DumpsForSolve)
{
    TempDir dir("dumps");
    ASSERT_EQ(cli({"solve", "--levels", "1", "--dump-mesh", "--dump-matrix", "--dump-fields", "--out",
                   dir.str(), "--table", "s"}),
              exit_ok);
    const std::string mtx = read_file(dir.path / "s_level1_matrix.mtx");
    EXPECT_EQ(mtx.rfind("%%MatrixMarket", 0), 0u);
    EXPECT_FALSE(read_file(dir.path / "s_level1_mesh.txt").empty());
    const std::string fields = read_file(dir.path / "s_level1_pressure.csv");
    EXPECT_EQ(fields.rfind("cell,x,y,p\n", 0), 0u);
}

TEST(Cli, CannedConfigsParse)
{
    // every shipped config must load; --levels keeps the run small
    for (const char* name : {"table_n_iter", "table_steps_p1", "table_steps_p23", "table_eoc"})
    {
        TempDir dir(name);
        const std::string path = std::string(HDGMG_SOURCE_DIR) + "/configs/" + name + ".ini";
        ASSERT_TRUE(std::filesystem::exists(path)) << path;
        EXPECT_EQ(cli({"cond", "--config", path, "--levels", "1", "--out", dir.str()}), exit_ok) << name;
    }
}
