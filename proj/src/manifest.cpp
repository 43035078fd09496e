#include "orbm/manifest.hpp"

#include "orbm/common.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <Eigen/Core>

#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>

namespace orbm {

namespace {

std::string to_hex(const unsigned char* data, unsigned int n) {
    static const char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * n);
    for (unsigned int i = 0; i < n; ++i) {
        out.push_back(digits[data[i] >> 4]);
        out.push_back(digits[data[i] & 0xf]);
    }
    return out;
}

struct MdCtxFree {
    void operator()(EVP_MD_CTX* c) const { EVP_MD_CTX_free(c); }
};

}  // namespace

std::string sha256_bytes(const std::string& data) {
    std::unique_ptr<EVP_MD_CTX, MdCtxFree> ctx(EVP_MD_CTX_new());
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), md, &len) != 1) {
        throw Error("sha256: digest failed");
    }
    return to_hex(md, len);
}

std::string sha256_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("sha256_file: cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return sha256_bytes(ss.str());
}

void Manifest::add_output(const std::string& dir, const std::string& file) {
    const auto path = std::filesystem::path(dir) / file;
    outputs.push_back({file, sha256_file(path.string()), std::filesystem::file_size(path)});
}

void Manifest::write(const std::string& dir) const {
    nlohmann::ordered_json j;
    j["subcommand"] = subcommand;
    j["config_path"] = config_path;
    j["config"] = config_echo;
    j["seed"] = seed;
    j["threads"] = threads;
    j["exit_code"] = exit_code;
    j["wall_time_s"] = wall_time_s;
    j["versions"] = {{"orbm", ORBM_VERSION},
                     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                   "." + std::to_string(EIGEN_MINOR_VERSION)},
                     {"compiler", __VERSION__},
                     {"cxx_standard", static_cast<long>(__cplusplus)}};
    auto& outs = j["outputs"] = nlohmann::ordered_json::array();
    for (const auto& e : outputs) outs.push_back({{"file", e.file}, {"sha256", e.sha256}, {"bytes", e.bytes}});
    std::ofstream os(std::filesystem::path(dir) / "manifest.json", std::ios::binary);
    if (!os) throw Error("manifest: cannot write to " + dir);
    os << j.dump(2) << '\n';
}

}  // namespace orbm
