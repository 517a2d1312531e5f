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

#include "gcldr/cli/commands.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <iostream>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "gcldr/autodiff/gradcheck.hpp"
#include "gcldr/autodiff/ops.hpp"
#include "gcldr/errors.hpp"
#include "gcldr/eval/variants.hpp"
#include "gcldr/kernels/dense.hpp"
#include "gcldr/model/checkpoint.hpp"
#include "gcldr/train/losses.hpp"

namespace gcldr::cli {

using ad::Tensor;
using nlohmann::json;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

train::TrainConfig run_config(const ExperimentConfig& cfg, train::Variant v, std::uint64_t seed) {
    train::TrainConfig tc = cfg.training;
    tc.variant = v;
    tc.seed = seed;
    tc.tau = cfg.evaluation.tau;
    return tc;
}

double tau_for(const ExperimentConfig& cfg, std::size_t c) {
    return cfg.evaluation.tau > 0.0 ? cfg.evaluation.tau : eval::default_tau(c);
}

}  // namespace

ExperimentConfig apply_overrides(ExperimentConfig cfg, const Overrides& ov) {
    if (ov.seed) {
        cfg.evaluation.seeds = {*ov.seed};
        cfg.evaluation.repeat = 1;
    }
    if (ov.variant) {
        cfg.training.variant = *ov.variant;
        cfg.evaluation.variants = {*ov.variant};
    }
    if (ov.workers == 0) throw ConfigError("--workers must be at least 1");
    cfg.validate();
    return cfg;
}

std::string checkpoint_name(train::Variant v, std::uint64_t seed) {
    return fmt::format("{}_seed{}.json", train::to_string(v), seed);
}

RunOutcome run_one(const ExperimentConfig& cfg, train::Variant variant, std::uint64_t seed) {
    const auto t0 = std::chrono::steady_clock::now();
    const data::GcldrDataset ds = cfg.make_dataset(seed);
    auto fitted = train::fit(ds, run_config(cfg, variant, seed));
    const Tensor x_test = ds.features(fitted.split.test);
    const auto y_test = ds.labels(fitted.split.test);
    RunOutcome out;
    out.record.variant = variant;
    out.record.seed = seed;
    out.record.test =
        eval::metrics(eval::predict_variant(fitted.bundle, variant, x_test), y_test, tau_for(cfg, ds.class_count()));
    out.record.history = std::move(fitted.history);
    out.record.wall_clock_s = seconds_since(t0);
    out.bundle = std::move(fitted.bundle);
    spdlog::info("{} seed {}: ACC@1 {:.4f} aAUC {:.4f} aBFR {:.4f} ({:.1f}s)", train::to_string(variant), seed,
                 out.record.test.acc1, out.record.test.aauc, out.record.test.abfr, out.record.wall_clock_s);
    return out;
}

RunReport run_experiment(const ExperimentConfig& cfg, std::size_t workers,
                         const std::optional<std::filesystem::path>& checkpoint_dir) {
    const auto t0 = std::chrono::steady_clock::now();
    struct Job {
        train::Variant variant;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (auto v : cfg.run_variants())
        for (auto s : cfg.run_seeds()) jobs.push_back({v, s});

    std::vector<RunRecord> records(jobs.size());
    std::vector<std::exception_ptr> errors(jobs.size());
    std::atomic<std::size_t> next{0};
    if (checkpoint_dir) std::filesystem::create_directories(*checkpoint_dir);

    auto worker = [&](bool serial_kernels) {
        std::optional<kernels::ScopedSerialKernels> serial;
        if (serial_kernels) serial.emplace();
        for (std::size_t i = next++; i < jobs.size(); i = next++) {
            try {
                auto outcome = run_one(cfg, jobs[i].variant, jobs[i].seed);
                if (checkpoint_dir)
                    model::save_checkpoint(outcome.bundle, *checkpoint_dir / checkpoint_name(jobs[i].variant, jobs[i].seed));
                records[i] = std::move(outcome.record);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t n = std::min(workers, jobs.size());
    if (n <= 1) {
        worker(false);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker, true);
        for (auto& th : pool) th.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    RunReport report;
    report.config = cfg.to_json();
    report.config_hash = cfg.hash();
    report.runs = std::move(records);
    report.wall_clock_s = seconds_since(t0);
    return report;
}

int cmd_generate(const ExperimentConfig& cfg, const Overrides& ov) {
    std::filesystem::create_directories(ov.out);
    for (auto seed : cfg.run_seeds()) {
        const auto ds = cfg.make_dataset(seed);
        data::check_split(ds, cfg.split_spec());
        const auto path = ov.out / fmt::format("dataset_seed{}.csv", seed);
        data::save_csv(ds, path);
        spdlog::info("wrote {} ({} rows: {} train, {} test)", path.string(), ds.rows(),
                     ds.rows_with(data::Role::train).size(), ds.rows_with(data::Role::test).size());
    }
    return kOk;
}

int cmd_train(const ExperimentConfig& cfg, const Overrides& ov) {
    std::filesystem::create_directories(ov.out);
    const auto report = run_experiment(cfg, ov.workers, ov.out / "checkpoints");
    const auto doc = report_json(report);
    write_text(ov.out / "report.json", doc.dump(2));
    write_text(ov.out / "history.csv", history_csv(doc));
    for (const auto& [variant, agg] : doc.at("aggregate").items())
        std::cout << fmt::format("{:<16} ACC@1 {:.4f} +- {:.4f}  aAUC {:.4f}  aBFR {:.4f}\n", variant,
                                 agg.at("acc1").at("mean").get<double>(), agg.at("acc1").at("std").get<double>(),
                                 agg.at("aauc").at("mean").get<double>(), agg.at("abfr").at("mean").get<double>());
    return kOk;
}

int cmd_evaluate(const ExperimentConfig& cfg, const Overrides& ov) {
    json runs = json::array();
    for (auto v : cfg.run_variants())
        for (auto seed : cfg.run_seeds()) {
            auto bundle = model::load_checkpoint(ov.out / "checkpoints" / checkpoint_name(v, seed));
            const auto ds = cfg.make_dataset(seed);
            const auto split =
                data::split_validation(ds.rows_with(data::Role::test), cfg.training.val_fraction, seed);
            const auto m = eval::metrics(eval::predict_variant(bundle, v, ds.features(split.test)),
                                         ds.labels(split.test), tau_for(cfg, ds.class_count()));
            runs.push_back({{"variant", train::to_string(v)}, {"seed", seed}, {"metrics", metrics_json(m)}});
            std::cout << fmt::format("{:<16} seed {:<6} ACC@1 {:.4f} aAUC {:.4f} aBFR {:.4f}\n", train::to_string(v),
                                     seed, m.acc1, m.aauc, m.abfr);
        }
    const json doc{{"schema_version", kReportSchemaVersion}, {"config_hash", cfg.hash()}, {"runs", runs}};
    write_text(ov.out / "evaluation.json", doc.dump(2));
    return kOk;
}

std::vector<GradcheckRow> gradcheck_suite(std::size_t seeds, double tol, double eps) {
    using train::Variant;
    struct Case {
        std::string name;
        bool corrupt = false;
    };
    const std::vector<Case> cases{{"discovery_cd"},   {"discovery_ci"},   {"elimination_cd"}, {"elimination_ci"},
                                  {"global_cd"},      {"global_ci"},      {"class_prior"},    {"soft_domain"},
                                  {"head_phase"},     {"extractor_phase"}, {"meta_sets"},     {"corrupted", true}};
    std::vector<GradcheckRow> rows;
    for (const auto& c : cases) rows.push_back({c.name, 0, 0.0, INFINITY, c.corrupt, false});

    constexpr std::size_t d = 8, classes = 3, k = 2, b = 4;
    for (std::size_t seed = 0; seed < seeds; ++seed) {
        train::TrainConfig tc;
        tc.p_width = 16;
        tc.g_width = 8;
        tc.seed = 1000 + seed;
        auto bundle = eval::make_variant(tc, d, classes).bundle;
        std::mt19937_64 rng(tc.seed);
        std::normal_distribution<double> n01(0.0, 1.0);
        std::vector<double> xv(b * d);
        for (auto& v : xv) v = n01(rng);
        // Spread head parameters so the softmax outputs are not all near uniform.
        for (auto& p : model::select_group(bundle, model::Group::heads))
            for (auto& v : p.values_mut()) v += 0.5 * n01(rng);
        const Tensor x = Tensor::from({b, d}, xv);
        std::vector<std::size_t> y(b);
        for (auto& v : y) v = rng() % classes;
        const std::uint64_t mask_seed = rng();

        auto features = [&]() {
            std::mt19937_64 masks(mask_seed);
            model::ForwardContext ctx{ad::Mode::train, &masks, false};
            return model::forward_features(bundle, x, ctx);
        };
        const model::Features f0 = features();
        const Tensor fcd0 = f0.cd.detach(), fci0 = f0.ci.detach();
        const auto heads_cd = ldd::ldd_heads(bundle, model::Space::cd);
        const auto heads_ci = ldd::ldd_heads(bundle, model::Space::ci);
        const auto rho_cd = ldd::compute_posteriors(heads_cd, fcd0, y);
        const auto rho_ci = ldd::compute_posteriors(heads_ci, fci0, y);
        const auto prior = train::estimate_prior(y, classes);
        const auto all = model::all_parameters(bundle);
        const auto heads = model::select_group(bundle, model::Group::heads);
        const auto ext = model::select_group(bundle, model::Group::extractors);
        meta::MetaBatch mb{x, y, rho_cd, rho_ci, std::mt19937_64(mask_seed), true};

        for (std::size_t ci = 0; ci < cases.size(); ++ci) {
            const auto& name = cases[ci].name;
            ad::LossFn fn;
            std::vector<Tensor> params = all;
            if (name == "discovery_cd" || name == "corrupted")
                fn = [&] { return ldd::discovery_loss(heads_cd, features().cd, y, rho_cd); };
            else if (name == "discovery_ci")
                fn = [&] { return ldd::discovery_loss(heads_ci, features().ci, y, rho_ci); };
            else if (name == "elimination_cd")
                fn = [&] { return ldd::elimination_loss(heads_cd, features().cd, y); };
            else if (name == "elimination_ci")
                fn = [&] { return ldd::elimination_loss(heads_ci, features().ci, y); };
            else if (name == "global_cd")
                fn = [&] { return train::loss_cd(bundle, features().cd, y); };
            else if (name == "global_ci") {
                params = bundle.R_g_ci->parameters();
                fn = [&] { return train::loss_ci(bundle, features().ci, y); };
            }
            else if (name == "class_prior")
                fn = [&] { return train::loss_ac(bundle, features().ci, prior); };
            else if (name == "soft_domain")
                fn = [&] { return meta::merged_soft_loss(bundle, mb, 0); };
            else if (name == "head_phase") {
                params = heads;
                fn = [&] {
                    return ad::add(ad::add(train::loss_cd(bundle, fcd0, y), train::loss_ci(bundle, fci0, y)),
                                   train::loss_d(bundle, fcd0, fci0, y, &rho_cd, &rho_ci));
                };
            } else if (name == "extractor_phase") {
                params = ext;
                fn = [&] {
                    const auto f = features();
                    return ad::add(ad::add(train::loss_cd(bundle, f.cd, y), train::loss_ac(bundle, f.ci, prior)),
                                   train::loss_u(bundle, f.cd, f.ci, y));
                };
            } else if (name == "meta_sets") {
                params = ext;
                const std::vector<std::size_t> s1{1};
                fn = [&, s1] { return meta::set_loss(bundle, mb, s1); };
            }
            ad::GradientHook hook;
            if (cases[ci].corrupt)
                hook = [](std::vector<std::vector<double>>& g) {
                    for (auto& p : g)
                        for (auto& v : p)
                            if (v != 0.0) {
                                v *= 2.0;
                                return;
                            }
                };
            const auto rep = ad::finite_diff_report(fn, params, eps, hook);
            rows[ci].seeds += 1;
            rows[ci].max_rel_error = std::max(rows[ci].max_rel_error, rep.max_rel_error);
            rows[ci].min_rel_error = std::min(rows[ci].min_rel_error, rep.max_rel_error);
        }
    }
    for (auto& r : rows) r.pass = r.expect_failure ? r.min_rel_error > 0.1 : r.max_rel_error <= tol;
    return rows;
}

int cmd_gradcheck(const ExperimentConfig& cfg, const Overrides&) {
    const std::size_t seeds = std::max<std::size_t>(cfg.run_seeds().size(), 20);
    const auto rows = gradcheck_suite(seeds);
    bool ok = true;
    std::cout << fmt::format("{:<18} {:>6} {:>14}  {}\n", "loss", "seeds", "max_rel_err", "result");
    for (const auto& r : rows) {
        std::cout << fmt::format("{:<18} {:>6} {:>14.3e}  {}{}\n", r.name, r.seeds,
                                 r.expect_failure ? r.min_rel_error : r.max_rel_error,
                                 r.pass ? "PASS" : "FAIL", r.expect_failure ? " (fault injected)" : "");
        ok = ok && r.pass;
    }
    return ok ? kOk : kAcceptanceFailure;
}

std::vector<meta::TaylorRow> taylor_for_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
    const auto ds = cfg.make_dataset(seed);
    auto tc = run_config(cfg, train::Variant::full, seed);
    auto bundle = eval::make_variant(tc, ds.d, ds.class_count()).bundle;
    auto rows = ds.rows_with(data::Role::train);
    std::mt19937_64 rng(seed);
    std::shuffle(rows.begin(), rows.end(), rng);
    rows.resize(std::min(rows.size(), cfg.taylor.batch));
    const Tensor x = ds.features(rows);
    const auto y = ds.labels(rows);
    model::ForwardContext ctx{ad::Mode::train, nullptr, false, false};
    const auto f = model::forward_features(bundle, x, ctx);
    meta::MetaBatch mb{x,
                       y,
                       ldd::compute_posteriors(ldd::ldd_heads(bundle, model::Space::cd), f.cd.detach(), y),
                       ldd::compute_posteriors(ldd::ldd_heads(bundle, model::Space::ci), f.ci.detach(), y),
                       std::mt19937_64(seed),
                       false};
    const auto split = meta::split_domains(cfg.training.k, rng);
    return meta::verify_taylor(bundle, mb, split, cfg.training.gamma, cfg.taylor.alphas);
}

int cmd_taylor(const ExperimentConfig& cfg, const Overrides& ov) {
    std::filesystem::create_directories(ov.out);
    bool ok = true;
    for (auto seed : cfg.run_seeds()) {
        const auto rows = taylor_for_seed(cfg, seed);
        const auto path = ov.out / fmt::format("taylor_seed{}.csv", seed);
        meta::write_taylor_csv(rows, path);
        for (const auto& r : rows) {
            const bool last = std::isnan(r.decay_ratio);
            const bool good = last || r.decay_ratio >= cfg.taylor.min_decay;
            std::cout << fmt::format("seed {:<4} alpha {:<8.1e} abs_error {:.3e}  decay {:>8.2f}  {}\n", seed, r.alpha,
                                     r.abs_error, r.decay_ratio, good ? "ok" : "LOW");
            ok = ok && good;
        }
    }
    return ok ? kOk : kAcceptanceFailure;
}

int cmd_export(const Overrides& ov, const std::string& format, const std::optional<std::filesystem::path>& report) {
    const auto doc = read_json(report.value_or(ov.out / "report.json"));
    validate_report_json(doc);
    if (format == "json") {
        write_text(ov.out / "export.json", doc.dump(2));
    } else if (format == "csv") {
        write_text(ov.out / "history.csv", history_csv(doc));
    } else if (format == "plotdata") {
        write_text(ov.out / "plotdata.csv", plotdata_csv(doc));
    } else {
        throw ConfigError("export: unknown format '" + format + "' (csv, json or plotdata)");
    }
    return kOk;
}

}  // namespace gcldr::cli
