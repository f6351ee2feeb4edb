#include "iden/checkpoint.hpp"

#include <fstream>

#include <json.hpp>

namespace iden::ckpt {

using nlohmann::json;

void save_arrays(const std::string& path, const ArrayMap& arrays,
                 const std::map<std::string, std::string>& meta) {
    json j;
    j["format"] = "idenlink-checkpoint";
    j["version"] = 1;
    for (const auto& [k, v] : meta) j["meta"][k] = v;
    j["arrays"] = json::array();
    for (const auto& [name, t] : arrays) {
        json a;
        a["name"] = name;
        a["shape"] = {t.rows, t.cols};
        a["data"] = t.v;
        j["arrays"].push_back(std::move(a));
    }
    std::ofstream os(path);
    if (!os) throw std::runtime_error("checkpoint: cannot write " + path);
    os << j.dump();
}

ArrayMap load_arrays(const std::string& path, std::map<std::string, std::string>* meta) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("checkpoint: cannot read " + path);
    json j;
    is >> j;
    if (!j.contains("version")) throw std::runtime_error("checkpoint: missing version tag in " + path);
    if (j["version"].get<int>() != 1) throw std::runtime_error("checkpoint: unsupported version in " + path);
    if (meta && j.contains("meta"))
        for (auto& [k, v] : j["meta"].items()) (*meta)[k] = v.get<std::string>();
    ArrayMap out;
    for (const auto& a : j["arrays"]) {
        ad::Tensor t;
        t.rows = a["shape"][0].get<int>();
        t.cols = a["shape"][1].get<int>();
        t.v = a["data"].get<std::vector<double>>();
        if ((int)t.v.size() != t.rows * t.cols)
            throw std::runtime_error("checkpoint: shape/data mismatch for " + a["name"].get<std::string>());
        out[a["name"].get<std::string>()] = std::move(t);
    }
    return out;
}

} // namespace iden::ckpt
