#pragma once

#include <chrono>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "ivqa/tensor.hpp"

namespace ivqa {

inline std::uint64_t file_hash(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot hash missing file: " + path);
    std::uint64_t h = 1469598103934665603ull;
    char buf[1 << 14];
    while (f.read(buf, sizeof(buf)) || f.gcount() > 0) {
        for (std::streamsize i = 0; i < f.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ull;
        }
        if (!f) break;
    }
    return h;
}

// Record of one CLI invocation: flags, seeds, input/output paths and
// content hashes of the artifacts the run produced. The manifest itself
// is the only run output whose bytes may differ between identical runs
// (it carries wall time).
class RunManifest {
  public:
    RunManifest(std::string command) : command_(std::move(command)), start_(clock::now()) {}

    void flag(const std::string& name, const nlohmann::json& value) { flags_[name] = value; }
    void input(const std::string& path) { inputs_.push_back(path); }
    void artifact(const std::string& path) { artifacts_.push_back(path); }

    void write(const std::string& path) const {
        nlohmann::json j;
        j["command"] = command_;
        j["flags"] = flags_;
        j["inputs"] = inputs_;
        nlohmann::json arts = nlohmann::json::array();
        char buf[32];
        for (const auto& p : artifacts_) {
            std::snprintf(buf, sizeof(buf), "%016llx",
                          static_cast<unsigned long long>(file_hash(p)));
            arts.push_back({{"path", p}, {"fnv1a64", buf}});
        }
        j["artifacts"] = arts;
        j["wall_time_s"] =
            std::chrono::duration<double>(clock::now() - start_).count();
        std::ofstream f(path);
        if (!f) throw DataError("cannot write manifest: " + path);
        f << j.dump(2) << "\n";
    }

  private:
    using clock = std::chrono::steady_clock;
    std::string command_;
    nlohmann::json flags_ = nlohmann::json::object();
    std::vector<std::string> inputs_;
    std::vector<std::string> artifacts_;
    clock::time_point start_;
};

}  // namespace ivqa
