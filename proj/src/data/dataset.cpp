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

#include "gcldr/data/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "gcldr/errors.hpp"

namespace gcldr::data {

std::string to_string(Role role) { return role == Role::train ? "train" : "test"; }

Role parse_role(const std::string& text) {
    if (text == "train") return Role::train;
    if (text == "test") return Role::test;
    throw ConfigError("unknown role '" + text + "'");
}

std::string to_string(Cell cell) {
    switch (cell) {
        case Cell::train: return "train";
        case Cell::test: return "test";
        case Cell::absent: return "absent";
    }
    return "?";
}

Cell parse_cell(const std::string& text) {
    if (text == "train" || text == "T") return Cell::train;
    if (text == "test" || text == "E") return Cell::test;
    if (text == "absent" || text == "x" || text == "-") return Cell::absent;
    throw ConfigError("unknown split cell '" + text + "'");
}

std::string to_string(NuisanceKind kind) { return kind == NuisanceKind::affine ? "affine" : "additive_offset"; }

NuisanceKind parse_nuisance_kind(const std::string& text) {
    if (text == "additive_offset") return NuisanceKind::additive_offset;
    if (text == "affine") return NuisanceKind::affine;
    throw ConfigError("unknown nuisance kind '" + text + "'");
}

std::size_t SplitSpec::domain_count() const { return cells.empty() ? 0 : cells.front().size(); }

std::size_t SplitSpec::class_count() const {
    std::size_t n = 0;
    for (const auto& s : class_sets) n += s.size();
    return n;
}

std::size_t SplitSpec::set_of(std::size_t cls) const {
    for (std::size_t s = 0; s < class_sets.size(); ++s)
        if (std::find(class_sets[s].begin(), class_sets[s].end(), cls) != class_sets[s].end()) return s;
    throw LabelError("split: class " + std::to_string(cls) + " is in no class set");
}

Cell SplitSpec::cell_of(std::size_t cls, std::size_t domain) const { return cells.at(set_of(cls)).at(domain); }

void SplitSpec::validate() const {
    if (class_sets.empty()) throw ConfigError("split: no class sets");
    if (cells.size() != class_sets.size()) throw ConfigError("split: cell rows must match class sets");
    const std::size_t k = domain_count();
    if (k < 2) throw ConfigError("split: need at least two domains");
    const std::size_t c = class_count();
    std::vector<int> seen(c, 0);
    for (const auto& set : class_sets) {
        if (set.empty()) throw ConfigError("split: empty class set");
        for (auto cls : set) {
            if (cls >= c || seen[cls]++) throw ConfigError("split: class ids must be 0..c-1, each used once");
        }
    }
    bool any_test = false;
    for (std::size_t s = 0; s < cells.size(); ++s) {
        if (cells[s].size() != k) throw ConfigError("split: ragged cell matrix");
        const auto n_train = std::count(cells[s].begin(), cells[s].end(), Cell::train);
        const auto n_test = std::count(cells[s].begin(), cells[s].end(), Cell::test);
        if (n_train != 1) throw ConfigError(fmt::format("split: class set {} needs exactly one train cell", s));
        any_test = any_test || n_test > 0;
    }
    if (!any_test) throw ConfigError("split: no test cells");
}

SplitSpec SplitSpec::diagonal3(std::size_t per_set) {
    SplitSpec s;
    for (std::size_t set = 0; set < 3; ++set) {
        std::vector<std::size_t> ids(per_set);
        std::iota(ids.begin(), ids.end(), set * per_set);
        s.class_sets.push_back(ids);
        std::vector<Cell> row(3, Cell::test);
        row[set] = Cell::train;
        s.cells.push_back(row);
    }
    return s;
}

SplitSpec SplitSpec::mobile_os() {
    auto range = [](std::size_t lo, std::size_t hi) {
        std::vector<std::size_t> v(hi - lo + 1);
        std::iota(v.begin(), v.end(), lo - 1);
        return v;
    };
    SplitSpec s;
    s.class_sets = {range(1, 6), range(7, 12), range(13, 15), range(16, 29)};
    // columns: IOS, Android
    s.cells = {{Cell::train, Cell::test}, {Cell::test, Cell::train}, {Cell::absent, Cell::train},
               {Cell::train, Cell::absent}};
    return s;
}

SplitSpec SplitSpec::two_sets(std::size_t c) {
    if (c < 2 || c % 2) throw ConfigError("split: two_sets needs an even class count");
    SplitSpec s;
    std::vector<std::size_t> a(c / 2), b(c / 2);
    std::iota(a.begin(), a.end(), 0);
    std::iota(b.begin(), b.end(), c / 2);
    s.class_sets = {a, b};
    s.cells = {{Cell::train, Cell::test}, {Cell::test, Cell::train}};
    return s;
}

std::size_t GcldrDataset::class_count() const { return y.empty() ? 0 : *std::max_element(y.begin(), y.end()) + 1; }

std::vector<std::size_t> GcldrDataset::rows_with(Role r) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < role.size(); ++i)
        if (role[i] == r) out.push_back(i);
    return out;
}

GcldrDataset GcldrDataset::subset(std::span<const std::size_t> idx) const {
    GcldrDataset out;
    out.d = d;
    if (true_domain) out.true_domain.emplace();
    for (auto i : idx) {
        out.X.insert(out.X.end(), X.begin() + static_cast<long>(i * d), X.begin() + static_cast<long>((i + 1) * d));
        out.y.push_back(y[i]);
        out.role.push_back(role[i]);
        if (true_domain) out.true_domain->push_back((*true_domain)[i]);
    }
    return out;
}

ad::Tensor GcldrDataset::features(std::span<const std::size_t> idx) const {
    std::vector<double> v;
    v.reserve(idx.size() * d);
    for (auto i : idx) v.insert(v.end(), X.begin() + static_cast<long>(i * d), X.begin() + static_cast<long>((i + 1) * d));
    return ad::Tensor::from({idx.size(), d}, std::move(v));
}

std::vector<std::size_t> GcldrDataset::labels(std::span<const std::size_t> idx) const {
    std::vector<std::size_t> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(y[i]);
    return out;
}

namespace {

std::vector<double> unit_gaussian(std::size_t d, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> v(d);
    double norm = 0.0;
    do {
        norm = 0.0;
        for (auto& x : v) {
            x = n(rng);
            norm += x * x;
        }
    } while (norm == 0.0);
    norm = std::sqrt(norm);
    for (auto& x : v) x /= norm;
    return v;
}

std::vector<double> random_rotation(std::size_t d, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::MatrixXd g(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) g(i, j) = n(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ();
    const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (std::size_t j = 0; j < d; ++j)
        if (r(j, j) < 0) q.col(j) *= -1.0;
    std::vector<double> out(d * d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) out[i * d + j] = q(i, j);
    return out;
}

void check_invertible(const std::vector<double>& a, std::size_t d, std::size_t domain) {
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> m(a.data(), d, d);
    if (!Eigen::FullPivLU<Eigen::MatrixXd>(m).isInvertible())
        throw ConfigError(fmt::format("nuisance: transform of domain {} is singular", domain));
}

}  // namespace

GcldrDataset generate(const SplitSpec& spec, const NuisanceSpec& nuisance, const GenerateParams& params,
                      std::uint64_t seed) {
    spec.validate();
    const std::size_t c = spec.class_count(), d = params.d, k = spec.domain_count();
    if (params.c != c) throw ConfigError(fmt::format("generate: split has {} classes, config says {}", c, params.c));
    if (d < 2) throw ConfigError("generate: d must be at least 2");
    if (params.per_combo == 0) throw ConfigError("generate: per_combo must be positive");
    if (!(params.sigma >= 0.0)) throw ConfigError("generate: sigma must be nonnegative");
    if (!(nuisance.magnitude >= 0.0)) throw ConfigError("generate: nuisance magnitude must be nonnegative");
    if (!nuisance.offsets.empty() && nuisance.offsets.size() != k)
        throw ConfigError("generate: need one offset per domain");
    for (const auto& o : nuisance.offsets)
        if (o.size() != d) throw ConfigError("generate: offset width differs from d");
    if (!nuisance.transforms.empty() && nuisance.transforms.size() != k)
        throw ConfigError("generate: need one transform per domain");
    for (std::size_t z = 0; z < nuisance.transforms.size(); ++z) {
        if (nuisance.transforms[z].size() != d * d) throw ConfigError("generate: transform must be d x d");
        check_invertible(nuisance.transforms[z], d, z);
    }

    std::mt19937_64 rng(seed);
    std::vector<std::vector<double>> proto(c);
    for (auto& p : proto) p = unit_gaussian(d, rng);
    double mean_dist = 0.0;
    std::size_t pairs = 0;
    for (std::size_t a = 0; a < c; ++a)
        for (std::size_t b = a + 1; b < c; ++b, ++pairs) {
            double s = 0.0;
            for (std::size_t j = 0; j < d; ++j) s += (proto[a][j] - proto[b][j]) * (proto[a][j] - proto[b][j]);
            mean_dist += std::sqrt(s);
        }
    mean_dist /= static_cast<double>(std::max<std::size_t>(pairs, 1));

    auto offsets = nuisance.offsets;
    if (offsets.empty()) {
        for (std::size_t z = 0; z < k; ++z) {
            auto u = unit_gaussian(d, rng);
            for (auto& x : u) x *= nuisance.magnitude * mean_dist;
            offsets.push_back(std::move(u));
        }
    }
    auto transforms = nuisance.transforms;
    if (nuisance.kind == NuisanceKind::affine && transforms.empty())
        for (std::size_t z = 0; z < k; ++z) transforms.push_back(random_rotation(d, rng));

    GcldrDataset ds;
    ds.d = d;
    ds.true_domain.emplace();
    std::normal_distribution<double> noise(0.0, params.sigma);
    std::vector<double> x(d), t(d);
    for (std::size_t cls = 0; cls < c; ++cls)
        for (std::size_t z = 0; z < k; ++z) {
            const Cell cell = spec.cell_of(cls, z);
            if (cell == Cell::absent) continue;
            for (std::size_t n = 0; n < params.per_combo; ++n) {
                for (std::size_t j = 0; j < d; ++j) x[j] = proto[cls][j] + (params.sigma > 0 ? noise(rng) : 0.0);
                if (nuisance.kind == NuisanceKind::affine) {
                    for (std::size_t i = 0; i < d; ++i) {
                        t[i] = 0.0;
                        for (std::size_t j = 0; j < d; ++j) t[i] += transforms[z][i * d + j] * x[j];
                    }
                    x = t;
                }
                for (std::size_t j = 0; j < d; ++j) ds.X.push_back(x[j] + offsets[z][j]);
                ds.y.push_back(cls);
                ds.true_domain->push_back(z);
                ds.role.push_back(cell == Cell::train ? Role::train : Role::test);
            }
        }
    return ds;
}

void check_split(const GcldrDataset& ds, const SplitSpec& spec) {
    if (!ds.true_domain) throw ContractError("check_split: dataset has no true_domain column");
    for (std::size_t i = 0; i < ds.rows(); ++i) {
        const Cell cell = spec.cell_of(ds.y[i], (*ds.true_domain)[i]);
        const bool ok = (ds.role[i] == Role::train && cell == Cell::train) ||
                        (ds.role[i] == Role::test && cell == Cell::test);
        if (!ok) throw ContractError(fmt::format("check_split: row {} violates the split", i));
    }
}

std::string to_csv(const GcldrDataset& ds) {
    std::string out = "role,y";
    if (ds.true_domain) out += ",true_domain";
    for (std::size_t j = 0; j < ds.d; ++j) out += fmt::format(",x_{}", j);
    out += '\n';
    for (std::size_t i = 0; i < ds.rows(); ++i) {
        out += to_string(ds.role[i]);
        out += fmt::format(",{}", ds.y[i]);
        if (ds.true_domain) out += fmt::format(",{}", (*ds.true_domain)[i]);
        for (std::size_t j = 0; j < ds.d; ++j) out += fmt::format(",{:.17g}", ds.X[i * ds.d + j]);
        out += '\n';
    }
    return out;
}

void save_csv(const GcldrDataset& ds, const std::filesystem::path& path) {
    std::ofstream f(path);
    if (!f) throw Error("save_csv: cannot write " + path.string());
    f << to_csv(ds);
}

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

template <class T>
T parse_number(std::string_view field, std::size_t line, const char* what) {
    T value{};
    const auto* end = field.data() + field.size();
    const auto [ptr, ec] = std::from_chars(field.data(), end, value);
    if (ec != std::errc() || ptr != end || field.empty())
        throw ParseError(fmt::format("csv: bad {} '{}'", what, field), line);
    return value;
}

}  // namespace

GcldrDataset parse_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 1;
    if (!std::getline(in, line)) throw ParseError("csv: missing header", 1);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split_commas(line);
    if (header.size() < 3 || header[0] != "role" || header[1] != "y")
        throw ParseError("csv: header must start with role,y", 1);
    const bool has_domain = header[2] == "true_domain";
    const std::size_t first_x = has_domain ? 3 : 2;
    GcldrDataset ds;
    ds.d = header.size() - first_x;
    if (ds.d == 0) throw ParseError("csv: no feature columns", 1);
    for (std::size_t j = 0; j < ds.d; ++j)
        if (header[first_x + j] != fmt::format("x_{}", j))
            throw ParseError(fmt::format("csv: expected column x_{}", j), 1);
    if (has_domain) ds.true_domain.emplace();
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_commas(line);
        if (fields.size() != header.size())
            throw ParseError(fmt::format("csv: expected {} columns, found {}", header.size(), fields.size()), line_no);
        try {
            ds.role.push_back(parse_role(std::string(fields[0])));
        } catch (const ConfigError&) {
            throw ParseError(fmt::format("csv: bad role '{}'", fields[0]), line_no);
        }
        ds.y.push_back(parse_number<std::size_t>(fields[1], line_no, "label"));
        if (has_domain) ds.true_domain->push_back(parse_number<std::size_t>(fields[2], line_no, "domain"));
        for (std::size_t j = 0; j < ds.d; ++j) {
            const double v = parse_number<double>(fields[first_x + j], line_no, "value");
            if (!std::isfinite(v)) throw ParseError("csv: non-finite value", line_no);
            ds.X.push_back(v);
        }
    }
    return ds;
}

GcldrDataset load_csv(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw Error("load_csv: cannot read " + path.string());
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_csv(ss.str());
}

ValidationSplit split_validation(std::span<const std::size_t> test_rows, double fraction, std::uint64_t seed) {
    if (!(fraction >= 0.0 && fraction <= 1.0)) throw ConfigError("split_validation: fraction outside [0,1]");
    std::vector<std::size_t> idx(test_rows.begin(), test_rows.end());
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n_val = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(idx.size())));
    ValidationSplit out;
    out.val.assign(idx.begin(), idx.begin() + static_cast<long>(n_val));
    out.test.assign(idx.begin() + static_cast<long>(n_val), idx.end());
    std::sort(out.val.begin(), out.val.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

}  // namespace gcldr::data
