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

#include "gcldr/cli/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "gcldr/errors.hpp"

namespace gcldr::cli {

namespace pt = boost::property_tree;
using nlohmann::json;

namespace {

template <class T>
T convert(const std::string& section, const std::string& key, const std::string& text) {
    std::istringstream in(text);
    T value{};
    in >> value;
    if (in.fail() || !(in >> std::ws).eof())
        throw ConfigError(fmt::format("config: [{}] {} = '{}' is not a valid value", section, key, text));
    return value;
}

bool convert_bool(const std::string& section, const std::string& key, const std::string& text) {
    if (text == "true" || text == "1" || text == "yes") return true;
    if (text == "false" || text == "0" || text == "no") return false;
    throw ConfigError(fmt::format("config: [{}] {} = '{}' is not a boolean", section, key, text));
}

template <class T>
std::vector<T> convert_list(const std::string& section, const std::string& key, const std::string& text) {
    std::istringstream in(text);
    std::vector<T> out;
    std::string item;
    while (in >> item) {
        if (item.back() == ',') item.pop_back();
        if (!item.empty()) out.push_back(convert<T>(section, key, item));
    }
    return out;
}

using Setter = std::function<void(const std::string&)>;

std::vector<std::vector<std::string>> split_groups(const std::string& text) {
    std::vector<std::vector<std::string>> out;
    std::stringstream groups(text);
    std::string group;
    while (std::getline(groups, group, ';')) {
        std::istringstream in(group);
        std::vector<std::string> items;
        std::string item;
        while (in >> item) items.push_back(item);
        if (!items.empty()) out.push_back(items);
    }
    return out;
}

}  // namespace

ExperimentConfig parse_config(const std::string& ini_text) {
    pt::ptree tree;
    try {
        std::istringstream in(ini_text);
        pt::ini_parser::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    ExperimentConfig cfg;
    auto& ds = cfg.dataset;
    auto& tr = cfg.training;
    auto& ev = cfg.evaluation;
    auto& ty = cfg.taylor;

    std::map<std::string, std::map<std::string, Setter>> table;
#define GCLDR_KEY(sec, key, target, type) \
    table[sec][key] = [&](const std::string& v) { target = convert<type>(sec, key, v); }
    table["dataset"]["split"] = [&](const std::string& v) { ds.split = v; };
    GCLDR_KEY("dataset", "classes", ds.classes, std::size_t);
    GCLDR_KEY("dataset", "per_set", ds.per_set, std::size_t);
    table["dataset"]["class_sets"] = [&](const std::string& v) { ds.class_sets = v; };
    table["dataset"]["cells"] = [&](const std::string& v) { ds.cells = v; };
    GCLDR_KEY("dataset", "d", ds.d, std::size_t);
    GCLDR_KEY("dataset", "per_combo", ds.per_combo, std::size_t);
    GCLDR_KEY("dataset", "sigma", ds.sigma, double);
    table["dataset"]["nuisance"] = [&](const std::string& v) { ds.nuisance = data::parse_nuisance_kind(v); };
    GCLDR_KEY("dataset", "magnitude", ds.magnitude, double);
    GCLDR_KEY("dataset", "seed", ds.seed, std::uint64_t);

    GCLDR_KEY("model", "k", tr.k, std::size_t);
    GCLDR_KEY("model", "p_width", tr.p_width, std::size_t);
    GCLDR_KEY("model", "g_width", tr.g_width, std::size_t);
    GCLDR_KEY("model", "dropout", tr.p_dropout, double);

    table["training"]["variant"] = [&](const std::string& v) { tr.variant = train::parse_variant(v); };
    GCLDR_KEY("training", "epochs", tr.epochs, std::size_t);
    GCLDR_KEY("training", "batch_size", tr.batch_size, std::size_t);
    GCLDR_KEY("training", "lr", tr.lr, double);
    table["training"]["optimizer"] = [&](const std::string& v) { tr.optimizer = ad::parse_optimizer_kind(v); };
    GCLDR_KEY("training", "gamma", tr.gamma, double);
    GCLDR_KEY("training", "alpha", tr.alpha, double);
    GCLDR_KEY("training", "patience", tr.patience, std::size_t);
    GCLDR_KEY("training", "val_fraction", tr.val_fraction, double);
    GCLDR_KEY("training", "w_cd", tr.weights.cd, double);
    GCLDR_KEY("training", "w_ci", tr.weights.ci, double);
    GCLDR_KEY("training", "w_ac", tr.weights.ac, double);
    GCLDR_KEY("training", "w_d", tr.weights.d, double);
    GCLDR_KEY("training", "w_u", tr.weights.u, double);
    table["training"]["meta_hvp"] = [&](const std::string& v) { tr.meta_hvp = convert_bool("training", "meta_hvp", v); };
    table["training"]["track_meta_cosine"] = [&](const std::string& v) {
        tr.track_meta_cosine = convert_bool("training", "track_meta_cosine", v);
    };

    GCLDR_KEY("evaluation", "tau", ev.tau, double);
    table["evaluation"]["seeds"] = [&](const std::string& v) {
        ev.seeds = convert_list<std::uint64_t>("evaluation", "seeds", v);
    };
    GCLDR_KEY("evaluation", "repeat", ev.repeat, std::size_t);
    table["evaluation"]["variants"] = [&](const std::string& v) {
        ev.variants.clear();
        for (const auto& name : convert_list<std::string>("evaluation", "variants", v))
            ev.variants.push_back(train::parse_variant(name));
    };

    table["taylor"]["alphas"] = [&](const std::string& v) { ty.alphas = convert_list<double>("taylor", "alphas", v); };
    GCLDR_KEY("taylor", "batch", ty.batch, std::size_t);
    GCLDR_KEY("taylor", "min_decay", ty.min_decay, double);
#undef GCLDR_KEY

    for (const auto& [section, entries] : tree) {
        const auto sec = table.find(section);
        if (sec == table.end()) {
            if (entries.empty() && !entries.data().empty())
                throw ConfigError("config: key '" + section + "' outside any section");
            throw ConfigError("config: unknown section [" + section + "]");
        }
        for (const auto& [key, value] : entries) {
            const auto setter = sec->second.find(key);
            if (setter == sec->second.end()) throw ConfigError(fmt::format("config: unknown key [{}] {}", section, key));
            setter->second(value.data());
        }
    }
    tr.seed = ev.seeds.empty() ? 0 : ev.seeds.front();
    tr.tau = ev.tau;
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::vector<std::uint64_t> ExperimentConfig::run_seeds() const {
    std::vector<std::uint64_t> out;
    for (std::size_t r = 0; r < evaluation.repeat; ++r)
        for (auto s : evaluation.seeds) out.push_back(s + r * 1000003ULL);
    return out;
}

std::vector<train::Variant> ExperimentConfig::run_variants() const {
    return evaluation.variants.empty() ? std::vector<train::Variant>{training.variant} : evaluation.variants;
}

data::SplitSpec ExperimentConfig::split_spec() const {
    if (dataset.split == "two_sets") return data::SplitSpec::two_sets(dataset.classes);
    if (dataset.split == "diagonal3") return data::SplitSpec::diagonal3(dataset.per_set);
    if (dataset.split == "mobile_os") return data::SplitSpec::mobile_os();
    if (dataset.split != "custom") throw ConfigError("config: unknown split '" + dataset.split + "'");
    data::SplitSpec spec;
    for (const auto& group : split_groups(dataset.class_sets)) {
        std::vector<std::size_t> ids;
        for (const auto& item : group) ids.push_back(convert<std::size_t>("dataset", "class_sets", item));
        spec.class_sets.push_back(ids);
    }
    for (const auto& group : split_groups(dataset.cells)) {
        std::vector<data::Cell> row;
        for (const auto& item : group) row.push_back(data::parse_cell(item));
        spec.cells.push_back(row);
    }
    return spec;
}

data::NuisanceSpec ExperimentConfig::nuisance_spec() const {
    data::NuisanceSpec n;
    n.kind = dataset.nuisance;
    n.magnitude = dataset.magnitude;
    return n;
}

data::GenerateParams ExperimentConfig::generate_params() const {
    return {split_spec().class_count(), dataset.d, dataset.per_combo, dataset.sigma};
}

data::GcldrDataset ExperimentConfig::make_dataset(std::uint64_t run_seed) const {
    return data::generate(split_spec(), nuisance_spec(), generate_params(), dataset.seed + run_seed);
}

void ExperimentConfig::validate() const {
    const auto spec = split_spec();
    spec.validate();
    if (spec.domain_count() != training.k)
        throw ConfigError(fmt::format("config: split has {} domains but model k = {}", spec.domain_count(), training.k));
    if (dataset.d < 2) throw ConfigError("config: dataset d must be at least 2");
    if (dataset.per_combo == 0) throw ConfigError("config: per_combo must be positive");
    if (!(dataset.sigma >= 0.0) || !(dataset.magnitude >= 0.0))
        throw ConfigError("config: sigma and magnitude must be nonnegative");
    if (evaluation.seeds.empty()) throw ConfigError("config: evaluation seeds list is empty");
    if (evaluation.repeat == 0) throw ConfigError("config: repeat must be at least 1");
    if (!(evaluation.tau >= 0.0 && evaluation.tau <= 1.0)) throw ConfigError("config: tau must lie in [0,1]");
    if (taylor.alphas.empty() || taylor.batch < 2) throw ConfigError("config: taylor needs alphas and batch >= 2");
    for (std::size_t i = 1; i < taylor.alphas.size(); ++i)
        if (!(taylor.alphas[i] < taylor.alphas[i - 1])) throw ConfigError("config: taylor alphas must descend");
    training.validate();
}

json ExperimentConfig::to_json() const {
    const auto& ds = dataset;
    const auto& tr = training;
    std::vector<std::string> variants;
    for (auto v : run_variants()) variants.push_back(train::to_string(v));
    return {
        {"dataset",
         {{"split", ds.split}, {"classes", ds.classes}, {"per_set", ds.per_set}, {"class_sets", ds.class_sets},
          {"cells", ds.cells}, {"d", ds.d}, {"per_combo", ds.per_combo}, {"sigma", ds.sigma},
          {"nuisance", data::to_string(ds.nuisance)}, {"magnitude", ds.magnitude}, {"seed", ds.seed}}},
        {"model", {{"k", tr.k}, {"p_width", tr.p_width}, {"g_width", tr.g_width}, {"dropout", tr.p_dropout}}},
        {"training",
         {{"variant", train::to_string(tr.variant)}, {"epochs", tr.epochs}, {"batch_size", tr.batch_size},
          {"lr", tr.lr}, {"optimizer", ad::to_string(tr.optimizer)}, {"gamma", tr.gamma}, {"alpha", tr.alpha},
          {"patience", tr.patience}, {"val_fraction", tr.val_fraction},
          {"weights",
           {{"cd", tr.weights.cd}, {"ci", tr.weights.ci}, {"ac", tr.weights.ac}, {"d", tr.weights.d},
            {"u", tr.weights.u}}},
          {"meta_hvp", tr.meta_hvp}, {"track_meta_cosine", tr.track_meta_cosine}}},
        {"evaluation",
         {{"tau", evaluation.tau}, {"seeds", evaluation.seeds}, {"repeat", evaluation.repeat}, {"variants", variants}}},
        {"taylor", {{"alphas", taylor.alphas}, {"batch", taylor.batch}, {"min_decay", taylor.min_decay}}},
    };
}

std::string ExperimentConfig::hash() const {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : to_json().dump()) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return fmt::format("{:016x}", h);
}

}  // namespace gcldr::cli
