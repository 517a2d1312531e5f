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

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gcldr/autodiff/tensor.hpp"

namespace gcldr::data {

enum class Role { train, test };
enum class Cell { train, test, absent };

std::string to_string(Role role);
Role parse_role(const std::string& text);
std::string to_string(Cell cell);
Cell parse_cell(const std::string& text);

/// Assignment of (class set, domain) pairs to train, test or absent.
struct SplitSpec {
    std::vector<std::vector<std::size_t>> class_sets;  // class ids per set
    std::vector<std::vector<Cell>> cells;              // [set][domain]

    std::size_t set_count() const noexcept { return class_sets.size(); }
    std::size_t domain_count() const;
    std::size_t class_count() const;
    std::size_t set_of(std::size_t cls) const;
    Cell cell_of(std::size_t cls, std::size_t domain) const;

    /// Classes 0..c-1 each appear in exactly one set, every set has exactly one
    /// train cell, and at least one test cell exists. A set may have no test
    /// cell when all its other cells are absent.
    void validate() const;

    /// Three class sets of `per_set` classes, three domains, train on the diagonal.
    static SplitSpec diagonal3(std::size_t per_set = 2);
    /// 29 classes in groups 1-6, 7-12, 13-15, 16-29 over domains (IOS, Android),
    /// with (13-15, IOS) and (16-29, Android) absent.
    static SplitSpec mobile_os();
    /// Two sets of c/2 classes over two domains, train on the diagonal.
    static SplitSpec two_sets(std::size_t c = 6);
};

enum class NuisanceKind { additive_offset, affine };

std::string to_string(NuisanceKind kind);
NuisanceKind parse_nuisance_kind(const std::string& text);

/// Per-domain corruption x -> A_z x + o_z. Empty offsets/transforms are drawn
/// from the generation seed: offsets get norm `magnitude` times the mean
/// distance between class prototypes, transforms are random rotations.
struct NuisanceSpec {
    NuisanceKind kind = NuisanceKind::additive_offset;
    double magnitude = 2.0;
    std::vector<std::vector<double>> offsets;     // [domain][d]
    std::vector<std::vector<double>> transforms;  // [domain][d*d] row-major, affine only
};

struct GcldrDataset {
    std::size_t d = 0;
    std::vector<double> X;  // rows x d
    std::vector<std::size_t> y;
    std::optional<std::vector<std::size_t>> true_domain;
    std::vector<Role> role;

    std::size_t rows() const noexcept { return y.size(); }
    std::size_t class_count() const;
    std::vector<std::size_t> rows_with(Role r) const;
    GcldrDataset subset(std::span<const std::size_t> idx) const;
    ad::Tensor features(std::span<const std::size_t> idx) const;
    std::vector<std::size_t> labels(std::span<const std::size_t> idx) const;
};

struct GenerateParams {
    std::size_t c = 6;
    std::size_t d = 20;
    std::size_t per_combo = 200;  // rows per present (class, domain) pair
    double sigma = 0.3;
};

GcldrDataset generate(const SplitSpec& spec, const NuisanceSpec& nuisance, const GenerateParams& params,
                      std::uint64_t seed);

/// Structural check of `ds` against `spec` using true_domain.
void check_split(const GcldrDataset& ds, const SplitSpec& spec);

void save_csv(const GcldrDataset& ds, const std::filesystem::path& path);
std::string to_csv(const GcldrDataset& ds);
GcldrDataset load_csv(const std::filesystem::path& path);
GcldrDataset parse_csv(const std::string& text);

struct ValidationSplit {
    std::vector<std::size_t> val;
    std::vector<std::size_t> test;
};

/// round(fraction * n) rows of `test_rows` go to validation.
ValidationSplit split_validation(std::span<const std::size_t> test_rows, double fraction, std::uint64_t seed);

}  // namespace gcldr::data
