// Licensed under the Apache License, Version 2.0 (the "License"); you
// may not use this file except in compliance with the License.  You
// may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or
// implied.  See the License for the specific language governing
// permissions and limitations under the License.

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits 4 when
// any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "gcldr/cli/commands.hpp"
#include "gcldr/cli/config.hpp"
#include "gcldr/cli/report.hpp"
#include "gcldr/errors.hpp"
#include "gcldr/eval/metrics.hpp"
#include "gcldr/ldd/ldd.hpp"

using namespace gcldr;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances.
constexpr double kGradTol = 1e-4;
constexpr std::size_t kGradSeeds = 20;
constexpr double kGradCpuBudgetS = 120.0;
constexpr double kEmTol = 1e-9;
constexpr std::size_t kEmInstances = 20;
constexpr double kPosteriorTol = 1e-9;
constexpr double kExtremeLogit = 50.0;
constexpr double kMinDecay = 50.0;
constexpr std::size_t kTaylorSeeds = 10;
constexpr double kDirectCeiling = 0.40;
constexpr double kFullMargin = 0.20;
constexpr double kBenchmarkCpuBudgetS = 600.0;
constexpr std::size_t kBenchmarkSeeds = 5;
constexpr double kMetaBand = 0.05;
constexpr std::size_t kAucInstances = 100;
constexpr std::size_t kAucMaxN = 200;
constexpr double kDeterminismTol = 1e-12;

struct Outcome {
    int id;
    std::string name;
    bool pass;
    std::string detail;
};

std::vector<Outcome> outcomes;

void record(int id, std::string name, bool pass, std::string detail) {
    std::cout << fmt::format("[{}] {} {}: {}\n", pass ? "PASS" : "FAIL", id, name, detail) << std::flush;
    outcomes.push_back({id, std::move(name), pass, std::move(detail)});
}

double cpu_seconds() { return static_cast<double>(std::clock()) / CLOCKS_PER_SEC; }

ad::Tensor uniform_features(std::size_t b, std::size_t h, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> v(b * h);
    for (auto& x : v) x = u(rng);
    return ad::Tensor::from({b, h}, std::move(v));
}

void gradient_correctness() {
    const double t0 = cpu_seconds();
    const auto rows = cli::gradcheck_suite(kGradSeeds, kGradTol);
    const double cpu = cpu_seconds() - t0;
    bool ok = true;
    double worst = 0.0;
    std::string worst_name;
    for (const auto& r : rows) {
        ok = ok && r.pass;
        if (!r.expect_failure && r.max_rel_error >= worst) {
            worst = r.max_rel_error;
            worst_name = r.name;
        }
    }
    record(1, "gradient correctness", ok && cpu < kGradCpuBudgetS,
           fmt::format("{} objectives x {} seeds, worst {:.2e} ({}) <= {:.0e}, injected fault caught, {:.1f}s CPU < {:.0f}s",
                       rows.size() - 1, kGradSeeds, worst, worst_name, kGradTol, cpu, kGradCpuBudgetS));
}

void em_identity() {
    double worst = 0.0;
    for (std::size_t s = 0; s < kEmInstances; ++s) {
        auto now = model::build_bundle({8, 3, 2, 16, 8, 0.5}, 500 + s);
        auto prev = model::build_bundle({8, 3, 2, 16, 8, 0.5}, 900 + s);
        std::mt19937_64 rng(s);
        const auto space = s % 2 ? model::Space::ci : model::Space::cd;
        const auto f = uniform_features(4, 8, rng);
        std::vector<std::size_t> y(4);
        for (auto& v : y) v = rng() % 3;
        const auto rho = ldd::compute_posteriors(ldd::ldd_heads(prev, space), f, y);
        const auto heads = ldd::ldd_heads(now, space);
        worst = std::max(worst, std::abs(ldd::discovery_loss(heads, f, y, rho).item() - ldd::q_function(rho, heads, f, y)));
    }
    record(2, "EM identity", worst <= kEmTol,
           fmt::format("max |discovery - Q| = {:.2e} <= {:.0e} over {} instances", worst, kEmTol, kEmInstances));
}

void posterior_contract() {
    std::mt19937_64 rng(7);
    double worst_sum = 0.0, worst_naive = 0.0;
    bool finite = true;
    for (int rep = 0; rep < 200; ++rep) {
        const std::size_t b = 8, k = 2 + rep % 3;
        std::vector<double> disc(b * k), lik(b * k);
        for (std::size_t i = 0; i < b; ++i) {
            // softmax of logits drawn from {-50, +50} plus jitter, in both inputs
            std::vector<double> dz(k), lz(k);
            for (std::size_t r = 0; r < k; ++r) {
                dz[r] = (rng() % 2 ? kExtremeLogit : -kExtremeLogit) + static_cast<double>(rng() % 1000) / 1e3;
                lz[r] = (rng() % 2 ? kExtremeLogit : -kExtremeLogit);
            }
            const double dm = *std::max_element(dz.begin(), dz.end());
            double ds = 0.0;
            for (auto& z : dz) ds += z = std::exp(z - dm);
            for (std::size_t r = 0; r < k; ++r) {
                disc[i * k + r] = dz[r] / ds;
                lik[i * k + r] = 1.0 / (1.0 + std::exp(-lz[r]));
            }
        }
        const auto rho = ldd::posteriors_from(disc, lik, b, k);
        for (std::size_t i = 0; i < b; ++i) {
            double s = 0.0;
            for (std::size_t r = 0; r < k; ++r) {
                finite = finite && std::isfinite(rho(i, r));
                s += rho(i, r);
            }
            worst_sum = std::max(worst_sum, std::abs(s - 1.0));
        }
    }
    std::uniform_real_distribution<double> u(1e-3, 1.0);
    for (int rep = 0; rep < 200; ++rep) {
        const std::size_t k = 2 + rep % 4;
        std::vector<double> disc(k), lik(k);
        double s = 0.0;
        for (auto& v : disc) s += v = u(rng);
        for (auto& v : disc) v /= s;
        for (auto& v : lik) v = u(rng);
        const auto rho = ldd::posteriors_from(disc, lik, 1, k);
        double z = 0.0;
        for (std::size_t r = 0; r < k; ++r) z += disc[r] * lik[r];
        for (std::size_t r = 0; r < k; ++r) worst_naive = std::max(worst_naive, std::abs(rho(0, r) - disc[r] * lik[r] / z));
    }
    record(3, "posterior contract", finite && worst_sum <= kPosteriorTol && worst_naive <= kPosteriorTol,
           fmt::format("+-{:.0f} logits: max |row sum - 1| = {:.2e}; log-space vs naive max diff {:.2e}; tol {:.0e}",
                       kExtremeLogit, worst_sum, worst_naive, kPosteriorTol));
}

void taylor(const cli::ExperimentConfig& base) {
    auto cfg = base;
    cfg.taylor.alphas = {1e-1, 1e-2, 1e-3, 0.0};
    double min_decay = INFINITY, zero_err = 0.0;
    for (std::uint64_t seed = 0; seed < kTaylorSeeds; ++seed) {
        const auto rows = cli::taylor_for_seed(cfg, seed);
        min_decay = std::min({min_decay, rows[0].decay_ratio, rows[1].decay_ratio});
        zero_err = std::max(zero_err, rows[3].abs_error);
    }
    record(4, "meta approximation order", min_decay >= kMinDecay && zero_err == 0.0,
           fmt::format("min error decay per decade {:.1f} >= {:.0f} over {} seeds; error at alpha 0 = {:.1e}", min_decay,
                       kMinDecay, kTaylorSeeds, zero_err));
}

std::map<std::string, double> mean_acc(const json& doc) {
    std::map<std::string, double> out;
    for (const auto& [variant, agg] : doc.at("aggregate").items()) out[variant] = agg.at("acc1").at("mean").get<double>();
    return out;
}

json run_train(const cli::ExperimentConfig& cfg, std::size_t workers, const fs::path& out) {
    cli::Overrides ov;
    ov.workers = workers;
    ov.out = out;
    if (cli::cmd_train(cfg, ov) != cli::kOk) throw gcldr::Error("cmd_train failed");
    return cli::read_json(out / "report.json");
}

double max_metric_diff(const json& a, const json& b) {
    if (a.at("runs").size() != b.at("runs").size()) return INFINITY;
    double worst = 0.0;
    for (std::size_t i = 0; i < a.at("runs").size(); ++i) {
        const auto& ra = a.at("runs")[i];
        const auto& rb = b.at("runs")[i];
        if (ra.at("variant") != rb.at("variant") || ra.at("seed") != rb.at("seed")) return INFINITY;
        for (const char* m : {"aauc", "afar", "afrr", "abfr", "acc1"})
            worst = std::max(worst, std::abs(ra.at("metrics").at(m).get<double>() - rb.at("metrics").at(m).get<double>()));
    }
    return worst;
}

void benchmark(const cli::ExperimentConfig& cfg, const fs::path& work) {
    const double t0 = cpu_seconds();
    const json doc = run_train(cfg, 1, work / "workers1");
    const double cpu = cpu_seconds() - t0;
    auto acc = mean_acc(doc);
    std::cout << "benchmark ACC@1 means over " << cfg.run_seeds().size() << " seeds:";
    for (const auto& [v, a] : acc) std::cout << fmt::format(" {}={:.4f}", v, a);
    std::cout << fmt::format(" ({:.1f}s CPU)\n", cpu);

    const double direct = acc.at("direct"), full = acc.at("full");
    record(5, "synthetic benchmark", direct <= kDirectCeiling && full >= direct + kFullMargin && cpu <= kBenchmarkCpuBudgetS,
           fmt::format("Direct {:.2f}% <= {:.0f}%; Full {:.2f}% vs required >= {:.2f}% (gap {:+.2f} points); {:.0f}s CPU for all variants <= {:.0f}s",
                       100 * direct, 100 * kDirectCeiling, 100 * full, 100 * (direct + kFullMargin),
                       100 * (full - direct), cpu, kBenchmarkCpuBudgetS));

    const bool order = full >= acc.at("single_space") && full >= acc.at("feature_based") &&
                       full >= acc.at("class_confuse") && acc.at("no_unification") <= direct;
    record(6, "ablation ordering", order,
           fmt::format("Full {:.2f} vs Single-Space {:.2f}, Feature-Based {:.2f}, Class-Confuse {:.2f}; No-Unification {:.2f} vs Direct {:.2f}",
                       100 * full, 100 * acc.at("single_space"), 100 * acc.at("feature_based"),
                       100 * acc.at("class_confuse"), 100 * acc.at("no_unification"), 100 * direct));

    auto zero = cfg;
    zero.training.gamma = 0.0;
    bool identical = true;
    for (std::size_t i = 0; i < cfg.run_seeds().size(); ++i) {
        const auto seed = cfg.run_seeds()[i];
        const auto meta0 = cli::run_one(zero, train::Variant::meta, seed).record;
        const auto full_rec = cli::run_one(cfg, train::Variant::full, seed).record;
        identical = identical && meta0.test.acc1 == full_rec.test.acc1 && meta0.test.aauc == full_rec.test.aauc &&
                    meta0.test.afar == full_rec.test.afar && meta0.test.afrr == full_rec.test.afrr &&
                    meta0.history.back().l_cd == full_rec.history.back().l_cd;
    }
    const double meta = acc.at("meta");
    record(7, "meta variant sanity", std::abs(meta - full) <= kMetaBand && identical,
           fmt::format("|Meta {:.2f} - Full {:.2f}| = {:.2f} <= {:.0f} points; gamma=0 meta bitwise equal to full on {} seeds: {}",
                       100 * meta, 100 * full, 100 * std::abs(meta - full), 100 * kMetaBand, cfg.run_seeds().size(),
                       identical ? "yes" : "no"));

    const json rerun = run_train(cfg, 1, work / "rerun");
    const json parallel = run_train(cfg, 4, work / "workers4");
    const double d_rerun = max_metric_diff(doc, rerun), d_par = max_metric_diff(doc, parallel);
    record(9, "determinism", d_rerun <= kDeterminismTol && d_par <= kDeterminismTol,
           fmt::format("rerun max metric diff {:.1e}, workers 4 vs 1 max diff {:.1e}, tol {:.0e}", d_rerun, d_par,
                       kDeterminismTol));
}

void metrics_oracle() {
    std::mt19937_64 rng(11);
    std::size_t mismatches = 0;
    for (std::size_t rep = 0; rep < kAucInstances; ++rep) {
        const std::size_t n = 2 + rng() % (kAucMaxN - 1);
        std::vector<double> s(n);
        std::vector<bool> pos(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = static_cast<double>(rng() % 33) / 32.0;
            pos[i] = rng() % 2;
        }
        pos[0] = true;
        pos[1] = false;
        double wins = 0.0, pairs = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (pos[i] && !pos[j]) {
                    pairs += 1.0;
                    wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
                }
        mismatches += eval::auc_one_vs_rest(s, pos) != wins / pairs;
    }
    std::size_t bfr_mismatch = 0;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 100; ++rep) {
        const std::size_t n = 50, c = 5;
        std::vector<double> p(n * c);
        std::vector<std::size_t> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            double t = 0.0;
            for (std::size_t j = 0; j < c; ++j) t += p[i * c + j] = u(rng);
            for (std::size_t j = 0; j < c; ++j) p[i * c + j] /= t;
            y[i] = rng() % c;
        }
        const auto m = eval::metrics(p, c, y, eval::default_tau(c));
        bfr_mismatch += m.abfr != (m.afar + m.afrr) / 2.0;
    }
    record(8, "metrics oracle", mismatches == 0 && bfr_mismatch == 0,
           fmt::format("AUC vs pairwise count: {} mismatches in {} instances (n <= {}); aBFR != (aFAR+aFRR)/2 in {} of 100",
                       mismatches, kAucInstances, kAucMaxN, bfr_mismatch));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gcldr acceptance suite"};
    std::string config_path = "configs/benchmark.ini";
    std::string work_dir = (fs::temp_directory_path() / "gcldr_acceptance").string();
    std::string report_path;
    app.add_option("--config", config_path, "benchmark configuration")->check(CLI::ExistingFile);
    app.add_option("--work", work_dir, "scratch directory for reports");
    app.add_option("--report", report_path, "also write the PASS/FAIL lines to this file");
    CLI11_PARSE(app, argc, argv);
    spdlog::set_level(spdlog::level::warn);

    try {
        auto cfg = cli::load_config(config_path);
        if (cfg.run_seeds().size() != kBenchmarkSeeds)
            throw gcldr::ConfigError(fmt::format("benchmark config must list {} seeds", kBenchmarkSeeds));
        fs::remove_all(work_dir);

        gradient_correctness();
        em_identity();
        posterior_contract();
        taylor(cfg);
        metrics_oracle();
        benchmark(cfg, work_dir);
    } catch (const std::exception& e) {
        std::cout << "acceptance aborted: " << e.what() << "\n";
        return 1;
    }

    std::sort(outcomes.begin(), outcomes.end(), [](const Outcome& a, const Outcome& b) { return a.id < b.id; });
    std::size_t passed = 0;
    std::cout << "\nsummary\n";
    for (const auto& o : outcomes) {
        std::cout << fmt::format("  [{}] {} {}\n", o.pass ? "PASS" : "FAIL", o.id, o.name);
        passed += o.pass;
    }
    const auto tail = fmt::format("acceptance complete: {}/{} criteria passed", passed, outcomes.size());
    std::cout << tail << "\n";
    if (!report_path.empty()) {
        std::ofstream out(report_path);
        for (const auto& o : outcomes)
            out << fmt::format("[{}] {} {}: {}\n", o.pass ? "PASS" : "FAIL", o.id, o.name, o.detail);
        out << tail << "\n";
    }
    return passed == outcomes.size() ? 0 : cli::kAcceptanceFailure;
}
