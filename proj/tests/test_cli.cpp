#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "geosteer/cli.hpp"
#include "geosteer/metrics.hpp"
#include "support.hpp"

#include <cstdlib>
#include <limits>
#include <random>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

using namespace geosteer;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "geosteer_cli_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_text(const fs::path& path, const std::string& content) {
    std::ofstream out(path);
    out << content;
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

int run_binary(const std::string& args) {
    const char* binary = std::getenv("GEOSTEER_BIN");
    REQUIRE(binary != nullptr);
    const int status = std::system((std::string(binary) + " " + args).c_str());
    return WEXITSTATUS(status);
}

std::string synth_config(const fs::path& dir, int seed = 7) {
    std::ostringstream out;
    out << "[synthesize]\n"
        << "n_pairs = 2\nn_neutral = 1\ndim = 3\nseed = " << seed << "\n"
        << "model_out = " << (dir / "model.sgm").string() << "\n"
        << "scheme_out = " << (dir / "scheme.json").string() << "\n"
        << "probe_out = " << (dir / "probe.json").string() << "\n"
        << "[output]\ndir = " << dir.string() << "\n";
    return out.str();
}

} // namespace

TEST_CASE("synthesize writes a reloadable, internally consistent triple") {
    const fs::path dir = fresh_dir("synth");
    const ConfigFile config = ConfigFile::parse_string(synth_config(dir));
    CHECK(cli::cmd_synthesize(config) == cli::kExitOk);

    const SoftmaxModel model = load_model((dir / "model.sgm").string());
    const ConceptScheme scheme =
        load_scheme((dir / "scheme.json").string(), model.vocab_size());
    const LinearProbe probe = load_probe((dir / "probe.json").string());
    CHECK(model.vocab_size() == 5);
    CHECK(model.dim() == 3);

    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 20; ++trial) {
        const PrimalPoint lambda = testsupport::random_point(rng, 3);
        CHECK(factorization_residual(model, scheme, lambda) < 1e-12);
        const double predicted =
            sigmoid(probe.beta.dot(lambda.lambda) + probe.offset);
        CHECK(std::abs(factorize(model, scheme, lambda).pw[1] - predicted) < 1e-10);
    }
}

TEST_CASE("synthesize is deterministic and validates the spec up front") {
    const fs::path dir_a = fresh_dir("synth_a");
    const fs::path dir_b = fresh_dir("synth_b");
    CHECK(cli::cmd_synthesize(ConfigFile::parse_string(synth_config(dir_a))) ==
          cli::kExitOk);
    CHECK(cli::cmd_synthesize(ConfigFile::parse_string(synth_config(dir_b))) ==
          cli::kExitOk);
    CHECK(read_text(dir_a / "model.sgm") == read_text(dir_b / "model.sgm"));
    CHECK(read_text(dir_a / "scheme.json") == read_text(dir_b / "scheme.json"));
    CHECK(read_text(dir_a / "probe.json") == read_text(dir_b / "probe.json"));

    // zero concept direction fails before writing anything
    const fs::path dir_bad = fresh_dir("synth_bad");
    std::string bad = synth_config(dir_bad);
    bad += "\n[synthesize]\nconcept_dir = 0,0,0\n";
    // parse_string keeps the last value for duplicate keys
    const ConfigFile config = ConfigFile::parse_string(bad);
    CHECK(cli::cmd_synthesize(config) == cli::kExitConfig);
    CHECK(!fs::exists(dir_bad / "model.sgm"));
    CHECK(!fs::exists(dir_bad / "scheme.json"));
}

TEST_CASE("interpolate: endpoints, mixture midpoint, and mass conservation") {
    const fs::path dir = fresh_dir("interp");
    // T1 as an inline SGM file
    write_text(dir / "t1.sgm",
               R"({"version":1,"V":3,"d":2,"labels":["a","b","c"],"inline":true,)"
               R"("matrix":[[1,0],[0,1],[0,0]]})"
               "\n");
    std::ostringstream config_text;
    config_text << std::setprecision(17) << "[model]\npath = "
                << (dir / "t1.sgm").string() << "\n"
                << "[interpolate]\nlambda0 = 0,0\nlambda1 = "
                << std::log(2.0) << ",0\n"
                << "kind = dual\nsteps = 3\ntop_k = 3\n"
                << "[output]\ndir = " << dir.string() << "\n";
    const ConfigFile config = ConfigFile::parse_string(config_text.str());
    CHECK(cli::cmd_interpolate(config) == cli::kExitOk);

    const std::string csv = read_text(dir / "interpolate_dual.csv");
    std::istringstream lines(csv);
    std::string header, row0, row_mid, row1;
    std::getline(lines, header);
    std::getline(lines, row0);
    std::getline(lines, row_mid);
    std::getline(lines, row1);
    CHECK(header ==
          "t,top1_label,top1_prob,top2_label,top2_prob,top3_label,top3_prob,others");

    // dual midpoint equals the distribution mixture (5/12, 7/24, 7/24)
    std::istringstream mid(row_mid);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(mid, field, ',')) fields.push_back(field);
    REQUIRE(fields.size() == 8);
    CHECK(std::stod(fields[0]) == doctest::Approx(0.5));
    CHECK(fields[1] == "a");
    CHECK(std::stod(fields[2]) == doctest::Approx(5.0 / 12.0).epsilon(1e-8));
    CHECK(std::stod(fields[4]) == doctest::Approx(7.0 / 24.0).epsilon(1e-8));
    // "others" column conserves mass
    const double others = std::stod(fields[7]);
    const double top_mass =
        std::stod(fields[2]) + std::stod(fields[4]) + std::stod(fields[6]);
    CHECK(std::abs(others - (1.0 - top_mass)) < 1e-12);

    // endpoints
    std::istringstream first(row0);
    std::getline(first, field, ',');
    CHECK(std::stod(field) == 0.0);
    std::istringstream last(row1);
    std::getline(last, field, ',');
    CHECK(std::stod(field) == 1.0);
}

TEST_CASE("steer sweep: determinism, manifest, and collapse recording") {
    const fs::path dir = fresh_dir("steer");
    write_text(dir / "points.pts", "0.3,0.1,-0.2\n-0.4,0.2,0.1\n");
    std::ostringstream config_text;
    config_text << "[synthesize]\nn_pairs = 2\nn_neutral = 1\ndim = 3\nseed = 3\n"
                << "[steer]\npoints = " << (dir / "points.pts").string() << "\n"
                << "[steering]\neta = 0.1\nmax_steps = 400\n"
                << "[metrics]\nn_bins = 10\n"
                << "[output]\ndir = " << (dir / "out").string() << "\nseed = 1\n";
    const ConfigFile config = ConfigFile::parse_string(config_text.str());
    CHECK(cli::cmd_steer(config) == cli::kExitOk);

    CHECK(fs::exists(dir / "out" / "run000_euclidean.csv"));
    CHECK(fs::exists(dir / "out" / "run001_dual.csv"));
    CHECK(fs::exists(dir / "out" / "summary_dual_offtarget_kl.csv"));
    CHECK(fs::exists(dir / "out" / "manifest.json"));

    const std::string trace = read_text(dir / "out" / "run000_dual.csv");
    CHECK(trace.rfind("step,lambda,target_prob,pair_mass,offtarget_kl,rank_diff,"
                      "dual_cosine,projection,logit\n",
                      0) == 0);

    // rerun into a second directory: byte-identical outputs
    std::ostringstream rerun_text;
    rerun_text << "[synthesize]\nn_pairs = 2\nn_neutral = 1\ndim = 3\nseed = 3\n"
               << "[steer]\npoints = " << (dir / "points.pts").string() << "\n"
               << "[steering]\neta = 0.1\nmax_steps = 400\n"
               << "[metrics]\nn_bins = 10\n"
               << "[output]\ndir = " << (dir / "out2").string() << "\nseed = 1\n";
    CHECK(cli::cmd_steer(ConfigFile::parse_string(rerun_text.str())) ==
          cli::kExitOk);
    for (const char* name :
         {"run000_euclidean.csv", "run000_dual.csv", "run001_euclidean.csv",
          "run001_dual.csv", "summary_dual_offtarget_kl.csv", "manifest.json"}) {
        CHECK(read_text(dir / "out" / name) == read_text(dir / "out2" / name));
    }

    const std::string manifest = read_text(dir / "out" / "manifest.json");
    CHECK(manifest.find("\"alpha\": 0.005") != std::string::npos);
    CHECK(manifest.find("\"terminate_at\": 0.9999") != std::string::npos);
}

namespace {

struct SummaryRow {
    double mean = std::numeric_limits<double>::quiet_NaN();
    int count = 0;
};

std::vector<SummaryRow> parse_summary(const fs::path& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::string line;
    std::getline(in, line); // header
    std::vector<SummaryRow> rows;
    while (std::getline(in, line)) {
        std::istringstream fields(line);
        std::string field;
        SummaryRow row;
        for (int i = 0; std::getline(fields, field, ','); ++i) {
            if (i == 3 && !field.empty()) row.mean = std::stod(field);
            if (i == 5) row.count = std::stoi(field);
        }
        rows.push_back(row);
    }
    return rows;
}

} // namespace

TEST_CASE("sweep summaries: dual off-target KL per bin never exceeds euclidean") {
    const fs::path dir = fresh_dir("sweep_bins");
    std::mt19937_64 rng(21);
    std::normal_distribution<double> gauss(0.0, 1.0);
    {
        std::ofstream points(dir / "points.pts");
        points << std::setprecision(17);
        for (int i = 0; i < 20; ++i) {
            points << gauss(rng) << "," << gauss(rng) << "," << gauss(rng) << "\n";
        }
    }
    std::ostringstream config_text;
    config_text << "[synthesize]\nn_pairs = 2\nn_neutral = 1\ndim = 3\nseed = 19\n"
                << "[steer]\npoints = " << (dir / "points.pts").string() << "\n"
                << "[steering]\nalpha = 1e-8\neta = 0.05\nmax_steps = 4000\n"
                << "[metrics]\nn_bins = 10\n"
                << "[output]\ndir = " << (dir / "out").string() << "\n";
    CHECK(cli::cmd_steer(ConfigFile::parse_string(config_text.str())) ==
          cli::kExitOk);

    const std::vector<SummaryRow> dual =
        parse_summary(dir / "out" / "summary_dual_offtarget_kl.csv");
    const std::vector<SummaryRow> euclid =
        parse_summary(dir / "out" / "summary_euclidean_offtarget_kl.csv");
    REQUIRE(dual.size() == euclid.size());
    int compared = 0;
    for (size_t b = 0; b < dual.size(); ++b) {
        if (dual[b].count < 3 || euclid[b].count < 3) continue;
        ++compared;
        CHECK(dual[b].mean <= euclid[b].mean);
    }
    CHECK(compared >= 3);
}

TEST_CASE("worker count override does not change sweep bytes") {
    const fs::path dir = fresh_dir("workers");
    write_text(dir / "points.pts", "0.3,0.1,-0.2\n-0.4,0.2,0.1\n0.1,0.5,0.2\n");
    const auto config_for = [&](const std::string& out) {
        std::ostringstream text;
        text << "[synthesize]\nn_pairs = 2\nn_neutral = 1\ndim = 3\nseed = 3\n"
             << "[steer]\npoints = " << (dir / "points.pts").string() << "\n"
             << "[steering]\neta = 0.1\nmax_steps = 300\n"
             << "[output]\ndir = " << (dir / out).string() << "\n";
        return ConfigFile::parse_string(text.str());
    };
    setenv("GEOSTEER_WORKERS", "1", 1);
    CHECK(cli::cmd_steer(config_for("serial")) == cli::kExitOk);
    setenv("GEOSTEER_WORKERS", "5", 1);
    CHECK(cli::cmd_steer(config_for("parallel")) == cli::kExitOk);
    unsetenv("GEOSTEER_WORKERS");
    for (const auto& entry : fs::directory_iterator(dir / "serial")) {
        const std::string name = entry.path().filename().string();
        CHECK(read_text(entry.path()) == read_text(dir / "parallel" / name));
    }
}

TEST_CASE("steer records per-run errors without failing the sweep") {
    // single-pair vocabulary: the winning item's probability crosses
    // 1 - 1e-12 long before the base mass underflows to an exact zero
    const fs::path dir = fresh_dir("steer_err");
    write_text(dir / "points.pts", "0.3,0.1,-0.2\n");
    std::ostringstream config_text;
    config_text << "[synthesize]\nn_pairs = 1\nn_neutral = 0\ndim = 3\nseed = 5\n"
                << "[steer]\npoints = " << (dir / "points.pts").string() << "\n"
                << "[steering]\neta = 0.5\nmax_steps = 100000\nterminate_at = 1.0\n"
                << "[output]\ndir = " << (dir / "out").string() << "\n";
    const ConfigFile config = ConfigFile::parse_string(config_text.str());
    CHECK(cli::cmd_steer(config) == cli::kExitPartial);
    const std::string manifest = read_text(dir / "out" / "manifest.json");
    CHECK(manifest.find("DistributionCollapsed") != std::string::npos);
}

TEST_CASE("diagnose emits per-step diagnostics and handles zero points") {
    const fs::path dir = fresh_dir("diag");
    write_text(dir / "points.pts", "0.2,0.0,-0.1\n");
    std::ostringstream config_text;
    config_text << "[synthesize]\nn_pairs = 2\nn_neutral = 1\ndim = 3\nseed = 9\n"
                << "[steer]\npoints = " << (dir / "points.pts").string() << "\n"
                << "[steering]\neta = 0.1\nmax_steps = 300\n"
                << "[output]\ndir = " << (dir / "out").string() << "\n";
    CHECK(cli::cmd_diagnose(ConfigFile::parse_string(config_text.str())) ==
          cli::kExitOk);
    const std::string csv = read_text(dir / "out" / "diagnostics.csv");
    CHECK(csv.rfind("run,method,step,dual_cosine,projection,concept_logit\n", 0) ==
          0);
    CHECK(csv.find("euclidean") != std::string::npos);
    CHECK(csv.find("dual") != std::string::npos);

    // empty points file: header-only CSV
    write_text(dir / "empty.pts", "# no points\n");
    std::ostringstream empty_text;
    empty_text << "[synthesize]\nn_pairs = 2\nn_neutral = 1\ndim = 3\nseed = 9\n"
               << "[steer]\npoints = " << (dir / "empty.pts").string() << "\n"
               << "[output]\ndir = " << (dir / "out_empty").string() << "\n";
    CHECK(cli::cmd_diagnose(ConfigFile::parse_string(empty_text.str())) ==
          cli::kExitOk);
    CHECK(read_text(dir / "out_empty" / "diagnostics.csv") ==
          "run,method,step,dual_cosine,projection,concept_logit\n");
}

TEST_CASE("metrics recomputes a trace and rejects hashed lambdas") {
    const fs::path dir = fresh_dir("metrics");
    write_text(dir / "points.pts", "0.25,-0.1,0.3\n");
    std::ostringstream steer_text;
    steer_text << "[synthesize]\nn_pairs = 2\nn_neutral = 1\ndim = 3\nseed = 11\n"
               << "[steer]\npoints = " << (dir / "points.pts").string() << "\n"
               << "[steering]\neta = 0.1\nmax_steps = 200\nmethods = dual\n"
               << "[output]\ndir = " << (dir / "out").string() << "\n";
    CHECK(cli::cmd_steer(ConfigFile::parse_string(steer_text.str())) ==
          cli::kExitOk);

    std::ostringstream metrics_text;
    metrics_text << "[synthesize]\nn_pairs = 2\nn_neutral = 1\ndim = 3\nseed = 11\n"
                 << "[recompute]\ntrace = "
                 << (dir / "out" / "run000_dual.csv").string() << "\n"
                 << "[output]\ndir = " << (dir / "redo").string() << "\n";
    CHECK(cli::cmd_metrics(ConfigFile::parse_string(metrics_text.str())) ==
          cli::kExitOk);

    // recomputed metric columns match the original trace
    const std::string original = read_text(dir / "out" / "run000_dual.csv");
    const std::string recomputed = read_text(dir / "redo" / "recomputed.csv");
    CHECK(original == recomputed);
}

TEST_CASE("binary entry point maps config errors to exit code 2") {
    const fs::path dir = fresh_dir("binary");
    write_text(dir / "bad.cfg", "[steer]\npoints = /nonexistent.pts\n");
    CHECK(run_binary("steer " + (dir / "bad.cfg").string()) == cli::kExitConfig);
    CHECK(run_binary("synthesize /nonexistent.cfg") == cli::kExitIo);

    // a valid end-to-end run through the binary
    write_text(dir / "good.cfg", synth_config(dir, 13));
    CHECK(run_binary("synthesize " + (dir / "good.cfg").string()) == cli::kExitOk);
    CHECK(fs::exists(dir / "model.sgm"));
}
