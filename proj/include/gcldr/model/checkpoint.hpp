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

#include <filesystem>
#include <string>

#include "gcldr/model/bundle.hpp"

namespace gcldr::model {

inline constexpr int kCheckpointVersion = 1;

/// JSON document: dims, layout, and per network its layer specs, parameter
/// arrays and batchnorm running statistics. Doubles are written in shortest
/// round-trip form, so a reload is bit-exact.
std::string checkpoint_to_string(const ModelBundle& bundle);
ModelBundle checkpoint_from_string(const std::string& text);

void save_checkpoint(const ModelBundle& bundle, const std::filesystem::path& path);
ModelBundle load_checkpoint(const std::filesystem::path& path);

}  // namespace gcldr::model
