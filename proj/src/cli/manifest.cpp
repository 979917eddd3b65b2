#include <chrono>
#include <cstdio>

#include <openssl/evp.h>

#include "cla/cli.hpp"
#include "cla/common.hpp"
#include "cla/csv.hpp"

namespace cla::cli {

namespace {

double now_seconds() {
    using namespace std::chrono;
    return duration<double>(steady_clock::now().time_since_epoch()).count();
}

}  // namespace

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1)
        throw ComputeError("SHA-256 digest failed");
    std::string hex;
    char buf[3];
    for (unsigned int i = 0; i < length; ++i) {
        std::snprintf(buf, sizeof(buf), "%02x", digest[i]);
        hex += buf;
    }
    return hex;
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(csv::read_text(path)); }

Manifest::Manifest(std::string command) : command_(std::move(command)), start_(now_seconds()) {
    config_hash_ = sha256_hex("");
}

void Manifest::set_config(const std::string& text) { config_hash_ = sha256_hex(text); }

void Manifest::add_input(const std::string& label, const std::filesystem::path& path) {
    if (std::filesystem::is_directory(path)) {
        nlohmann::json files = nlohmann::json::object();
        for (const auto& entry : std::filesystem::directory_iterator(path))
            if (entry.is_regular_file()) files[entry.path().filename().string()] = sha256_file(entry.path());
        inputs_[label] = {{"path", path.string()}, {"files", files}};
        return;
    }
    inputs_[label] = {{"path", path.string()}, {"sha256", sha256_file(path)}};
}

void Manifest::warn_all(const std::vector<std::string>& messages) {
    warnings_.insert(warnings_.end(), messages.begin(), messages.end());
}

nlohmann::json Manifest::to_json(int exit_code) const {
    return {{"command", command_},
            {"tool_version", std::string(kToolVersion)},
            {"config_sha256", config_hash_},
            {"inputs", inputs_},
            {"seed", seed_},
            {"wall_time_seconds", now_seconds() - start_},
            {"exit_code", exit_code},
            {"outputs", outputs_},
            {"warnings", warnings_}};
}

void Manifest::write(const std::filesystem::path& dir, int exit_code, const std::string& filename) const {
    csv::write_text(dir / filename, to_json(exit_code).dump(2) + "\n");
}

}  // namespace cla::cli
