#pragma once

#include "iden/tape.hpp"

#include <map>
#include <string>

namespace iden::ckpt {

// Flat named-array container. JSON on disk:
//   { "format": "idenlink-checkpoint", "version": 1,
//     "arrays": [ { "name": "...", "shape": [rows, cols], "data": [...] } ] }
// Row-major values; the version tag is mandatory on load.
using ArrayMap = std::map<std::string, ad::Tensor>;

void save_arrays(const std::string& path, const ArrayMap& arrays,
                 const std::map<std::string, std::string>& meta = {});
ArrayMap load_arrays(const std::string& path, std::map<std::string, std::string>* meta = nullptr);

} // namespace iden::ckpt
