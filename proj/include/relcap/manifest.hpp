/**
 * @file manifest.hpp
 * @brief Run manifests: every artifact file with its SHA-256, plus the solve log.
 *
 * The wall-clock timestamp lives only in the manifest "header" object so that
 * report files themselves are byte-identical across reruns. Requires OpenSSL
 * (libcrypto).
 */
#pragma once

#include "relcap/io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <mutex>
#include <tuple>

namespace relcap {

inline std::string sha256_hex(const std::string& data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) throw Error("SHA-256 failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

/// Collects written artifacts and solver runs for one CLI invocation.
class Manifest {
public:
    explicit Manifest(std::filesystem::path out_dir) : out_dir_(std::move(out_dir)) {}

    /// Atomically write `name` under the output directory and record its hash.
    std::filesystem::path write(const std::string& name, const std::string& content) {
        std::lock_guard<std::mutex> lock(mutex_);
        const auto path = out_dir_ / name;
        atomic_write(path, content);
        artifacts_.push_back({name, sha256_hex(content), content.size()});
        return path;
    }

    /// Observer suitable for SolverOptions::observer.
    std::function<void(const SolveRecord&)> observer() {
        return [this](const SolveRecord& r) {
            std::lock_guard<std::mutex> lock(mutex_);
            solves_.push_back(r);
        };
    }

    std::size_t solve_count() const { return solves_.size(); }

    /// The manifest document. Artifacts and solves are sorted so the list is independent of thread scheduling.
    Json document(const std::string& command, const Json& inputs) const {
        std::lock_guard<std::mutex> lock(mutex_);
        Json j;
        j["header"] = Json{{"format", "relcap/manifest"}, {"version", json_format_version}, {"created", timestamp()}};
        j["command"] = command;
        j["inputs"] = inputs;
        auto sorted = artifacts_;
        std::sort(sorted.begin(), sorted.end(), [](const Artifact& a, const Artifact& b) { return a.name < b.name; });
        Json arts = Json::array();
        for (const auto& a : sorted) arts.push_back(Json{{"file", a.name}, {"sha256", a.sha}, {"bytes", a.bytes}});
        j["artifacts"] = arts;
        auto solves = solves_;
        std::sort(solves.begin(), solves.end(), [](const SolveRecord& a, const SolveRecord& b) {
            return std::tie(a.domain_id, a.input_hash, a.p, a.obstacle, a.iterations, a.residual) <
                   std::tie(b.domain_id, b.input_hash, b.p, b.obstacle, b.iterations, b.residual);
        });
        Json sj = Json::array();
        for (const auto& s : solves)
            sj.push_back(Json{{"kind", s.obstacle ? "capacity" : "potential"},
                              {"p", s.p},
                              {"domain_id", detail::hash_hex(s.domain_id)},
                              {"input_hash", detail::hash_hex(s.input_hash)},
                              {"algorithm", to_string(s.algorithm)},
                              {"iterations", s.iterations},
                              {"residual", s.residual},
                              {"converged", s.converged}});
        j["solves"] = sj;
        return j;
    }

    void finish(const std::string& command, const Json& inputs) {
        atomic_write(out_dir_ / "manifest.json", dump(document(command, inputs)));
    }

    const std::filesystem::path& dir() const { return out_dir_; }

private:
    static std::string timestamp() {
        const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        std::tm tm{};
        gmtime_r(&now, &tm);
        char buf[32];
        std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
        return buf;
    }

    struct Artifact {
        std::string name, sha;
        std::size_t bytes;
    };
    std::filesystem::path out_dir_;
    mutable std::mutex mutex_;
    std::vector<Artifact> artifacts_;
    std::vector<SolveRecord> solves_;
};

}  // namespace relcap
