#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "sgmcmc/experiments.hpp"

using namespace sgmcmc;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// metrics.csv with the wall-clock column blanked, for byte comparison
std::string metrics_without_runtime(const fs::path& p) {
    std::istringstream in(slurp(p));
    std::string line, out;
    while (std::getline(in, line)) {
        std::size_t last = line.rfind(',');
        out += line.substr(0, last) + "\n";
    }
    return out;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("config files parse sections, comments and values") {
    std::istringstream in(
        "# comment\n"
        "[run]\n"
        "seed = 7\n"
        "presets = sgld, sghmc\n"
        "flag = true\n"
        "[preset.sgld]\n"
        "epsilon = 1e-3\n");
    ConfigMap cfg = ConfigMap::parse_stream(in);
    CHECK(cfg.get_int("run.seed", 0) == 7);
    CHECK(cfg.get_double("preset.sgld.epsilon", 0) == doctest::Approx(1e-3));
    CHECK(cfg.get_bool("run.flag", false));
    CHECK(cfg.get_list("run.presets", {}) == std::vector<std::string>{"sgld", "sghmc"});
    CHECK(cfg.get_string("run.missing", "fallback") == "fallback");

    std::istringstream bad1("[run\nx = 1\n");
    CHECK_THROWS_AS(ConfigMap::parse_stream(bad1), parse_error);
    std::istringstream bad2("[run]\nno equals sign\n");
    CHECK_THROWS_AS(ConfigMap::parse_stream(bad2), parse_error);

    ConfigMap typed;
    typed.set("run.seed", "abc");
    CHECK_THROWS_AS(typed.get_int("run.seed", 0), config_error);
    typed.set("run.x", "1.5oops");
    CHECK_THROWS_AS(typed.get_double("run.x", 0), config_error);
}

TEST_CASE("config echo is deterministic and grouped") {
    ConfigMap cfg;
    cfg.set("run.seed", "1");
    cfg.set("run.n_steps", "100");
    cfg.set("preset.sgld.epsilon", "0.01");
    std::string echo = cfg.echo();
    CHECK(echo.find("[run]") != std::string::npos);
    CHECK(echo.find("[preset.sgld]") != std::string::npos);
    CHECK(echo == cfg.echo());
}

TEST_CASE("unknown config keys are rejected before any run") {
    TempDir dir("sgmcmc_test_unknown_key");
    ConfigMap cfg;
    cfg.set("run.n_stepz", "100");  // typo
    CHECK_THROWS_WITH_AS(run_synthetic_1d(cfg, dir.path.string()),
                         doctest::Contains("n_stepz"), config_error);

    ConfigMap bad_preset;
    bad_preset.set("run.presets", "sgld,frobnicator");
    CHECK_THROWS_WITH_AS(run_synthetic_1d(bad_preset, dir.path.string()),
                         doctest::Contains("frobnicator"), config_error);
}

TEST_CASE("synthetic 1-D study emits the full metrics grid") {
    TempDir dir("sgmcmc_test_s1d");
    ConfigMap cfg;
    cfg.set("run.n_steps", "2000");
    cfg.set("run.n_chains", "3");
    SyntheticResult result = run_synthetic_1d(cfg, dir.path.string());
    CHECK(result.metrics.size() == 2 * 4 * 3);  // targets x presets x chains
    CHECK_FALSE(result.any_divergence);
    for (const MetricsRow& row : result.metrics) CHECK(row.kl >= 0.0);

    CHECK(fs::exists(dir.path / "metrics.csv"));
    CHECK(fs::exists(dir.path / "config_resolved.cfg"));
    CHECK(fs::exists(dir.path / "trace_one-peak_sgld_chain0.csv"));
    CHECK(fs::exists(dir.path / "trace_two-peaks_gsgrhmc_chain2.meta"));
}

TEST_CASE("repeated runs are byte-identical apart from wall-clock") {
    TempDir a("sgmcmc_test_det_a"), b("sgmcmc_test_det_b");
    ConfigMap cfg;
    cfg.set("run.n_steps", "3000");
    cfg.set("run.n_chains", "1");
    cfg.set("run.presets", "sgld,gsgrhmc");
    run_synthetic_1d(cfg, a.path.string());
    run_synthetic_1d(cfg, b.path.string());

    for (const char* name : {"trace_one-peak_sgld_chain0.csv", "trace_two-peaks_gsgrhmc_chain0.csv",
                          "config_resolved.cfg"})
        CHECK(slurp(a.path / name) == slurp(b.path / name));
    CHECK(metrics_without_runtime(a.path / "metrics.csv") ==
          metrics_without_runtime(b.path / "metrics.csv"));
    CHECK(slurp(a.path / "metrics.csv").size() > 100);
}

TEST_CASE("synthetic 2-D study writes ten-point paths and moments") {
    TempDir dir("sgmcmc_test_s2d");
    ConfigMap cfg;
    cfg.set("run.n_steps", "2000");
    cfg.set("run.n_chains", "1");
    cfg.set("run.presets", "sgld,gsgrhmc");
    SyntheticResult result = run_synthetic_2d(cfg, dir.path.string());
    CHECK(result.metrics.size() == 2);
    CHECK(result.moments.size() == 2);
    CHECK(result.target_mean.size() == 2);
    CHECK(result.target_mean[1] == doctest::Approx(-0.9328).epsilon(0.01));

    std::istringstream path_file(slurp(dir.path / "path_sgld_chain0.csv"));
    std::string line;
    std::getline(path_file, line);
    CHECK(line == "theta_0,theta_1");
    int rows = 0;
    while (std::getline(path_file, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 10);

    CHECK_THROWS_AS(
        [&] {
            ConfigMap bad;
            bad.set("run.presets", "naive-sgrhmc");
            TempDir d2("sgmcmc_test_s2d_bad");
            run_synthetic_2d(bad, d2.path.string());
        }(),
        config_error);
}

TEST_CASE("verification suite passes and reports") {
    TempDir dir("sgmcmc_test_verify");
    ConfigMap cfg;
    cfg.set("verify.broken_q", "true");
    VerifyResult result = run_verify(cfg, dir.path.string());
    INFO(slurp(dir.path / "report.txt"));
    CHECK(result.passed());
    CHECK(result.checks.size() > 30);
    CHECK(fs::exists(dir.path / "report.txt"));
    CHECK(fs::exists(dir.path / "verify.csv"));

    bool found_broken_control = false;
    for (const auto& c : result.checks)
        if (c.check == "broken-q-control") {
            found_broken_control = true;
            CHECK(c.pass);
            CHECK(c.value >= 0.1);
        }
    CHECK(found_broken_control);
}

TEST_CASE("lda study streams batches and logs perplexity") {
    TempDir dir("sgmcmc_test_lda");
    ConfigMap cfg;
    cfg.set("lda.batches", "30");
    cfg.set("lda.synthetic_docs", "120");
    cfg.set("lda.heldout_docs", "20");
    cfg.set("lda.perplexity_every", "10");
    cfg.set("run.n_chains", "1");
    cfg.set("run.presets", "sgrld,sgrhmc");
    LdaResult result = run_lda(cfg, dir.path.string());
    CHECK(result.series.size() == 2);
    CHECK_FALSE(result.any_divergence);
    for (const LdaSeries& s : result.series) {
        CHECK(s.docs_processed.front() == 50);
        CHECK(s.perplexity.size() >= 3);
        for (double p : s.perplexity) CHECK(p > 0.0);
        for (std::size_t i = 1; i < s.docs_processed.size(); ++i)
            CHECK(s.docs_processed[i] > s.docs_processed[i - 1]);
    }
    CHECK(fs::exists(dir.path / "corpus.txt"));
    CHECK(fs::exists(dir.path / "vocab.tsv"));
    CHECK(fs::exists(dir.path / "perplexity_sgrld_chain0.csv"));
}

TEST_CASE("empty corpus yields header-only perplexity logs") {
    TempDir dir("sgmcmc_test_lda_empty");
    ConfigMap cfg;
    cfg.set("lda.synthetic_docs", "0");
    cfg.set("lda.heldout_docs", "0");
    cfg.set("run.n_chains", "1");
    cfg.set("run.presets", "sgld");
    LdaResult result = run_lda(cfg, dir.path.string());
    CHECK(result.series.size() == 1);
    CHECK(result.series[0].perplexity.empty());
    CHECK(slurp(dir.path / "perplexity_sgld_chain0.csv") == "docs_processed,perplexity\n");
}

TEST_CASE("lda runs are reproducible byte for byte") {
    TempDir a("sgmcmc_test_lda_rep_a"), b("sgmcmc_test_lda_rep_b");
    ConfigMap cfg;
    cfg.set("lda.batches", "20");
    cfg.set("lda.synthetic_docs", "100");
    cfg.set("lda.heldout_docs", "15");
    cfg.set("run.n_chains", "2");
    cfg.set("run.presets", "sgrhmc");
    run_lda(cfg, a.path.string());
    run_lda(cfg, b.path.string());
    CHECK(slurp(a.path / "perplexity_sgrhmc_chain0.csv") ==
          slurp(b.path / "perplexity_sgrhmc_chain0.csv"));
    CHECK(slurp(a.path / "perplexity_sgrhmc_chain1.csv") ==
          slurp(b.path / "perplexity_sgrhmc_chain1.csv"));
    CHECK(slurp(a.path / "corpus.txt") == slurp(b.path / "corpus.txt"));
    CHECK(slurp(a.path / "perplexity_sgrhmc_chain0.csv").size() > 30);
}

TEST_CASE("lda ingests an external corpus file") {
    TempDir dir("sgmcmc_test_lda_file");
    fs::create_directories(dir.path);
    fs::path corpus = dir.path / "ext_corpus.txt";
    {
        Rng rng = make_rng(1);
        lda::SyntheticCorpus synth = lda::generate_synthetic_corpus(2, 10, 60, 0, 20, 0.3, rng);
        lda::write_corpus(synth.train, corpus.string());
    }
    ConfigMap cfg;
    cfg.set("lda.corpus", corpus.string());
    cfg.set("lda.vocab", "10");
    cfg.set("lda.topics", "2");
    cfg.set("lda.minibatch_docs", "10");
    cfg.set("lda.batches", "10");
    cfg.set("run.n_chains", "1");
    cfg.set("run.presets", "sgrld");
    LdaResult result = run_lda(cfg, (dir.path / "out").string());
    CHECK(result.series.size() == 1);
    CHECK_FALSE(result.series[0].perplexity.empty());
}
