#include "dyetest/store.hpp"

#include <algorithm>

#include "dyetest/errors.hpp"
#include "dyetest/md5.hpp"
#include "dyetest/util.hpp"

namespace dyetest {

namespace fs = std::filesystem;

RunStore::RunStore(fs::path root) : root_(std::move(root)) {
    if (root_.empty()) throw ConfigError("store root must not be empty");
    std::error_code ec;
    fs::create_directories(root_, ec);
    if (ec) throw StoreError("cannot create store root " + root_.string() + ": " + ec.message());
}

fs::path RunStore::run_dir(const std::string& run_id) const {
    if (run_id.empty() || run_id.find('/') != std::string::npos)
        throw ValidationError("run id must be a non-empty path-free name");
    return root_ / run_id;
}

RunManifest RunStore::load_manifest_unchecked(const std::string& run_id) const {
    const fs::path path = run_dir(run_id) / "manifest.json";
    if (!fs::exists(path)) throw StoreError("run not found: " + run_id);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path.string()));
    } catch (const nlohmann::json::exception& e) {
        throw StoreError("manifest parse for " + run_id + ": " + e.what());
    }
    try {
        RunManifest m;
        m.schema = j.at("schema").get<int>();
        if (m.schema != 1) throw StoreError("unknown manifest schema");
        m.run_id = j.at("run_id").get<std::string>();
        m.created_at = j.at("created_at").get<std::string>();
        m.params = j.value("params", nlohmann::json::object());
        for (const auto& [kind, fj] : j.at("files").items())
            m.files[kind] = {fj.at("path").get<std::string>(), fj.at("md5").get<std::string>()};
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw StoreError("manifest fields for " + run_id + ": " + e.what());
    }
}

void RunStore::write_manifest(const RunManifest& m) {
    nlohmann::json j;
    j["schema"] = m.schema;
    j["run_id"] = m.run_id;
    j["created_at"] = m.created_at;
    j["params"] = m.params;
    auto& files = j["files"] = nlohmann::json::object();
    for (const auto& [kind, f] : m.files) files[kind] = {{"path", f.path}, {"md5", f.md5_hex}};
    write_file_atomic((run_dir(m.run_id) / "manifest.json").string(), j.dump(2) + "\n");
}

StoredFile RunStore::save(const std::string& run_id, const std::string& kind,
                          std::string_view bytes, const std::string& filename) {
    if (filename.empty() || filename.find('/') != std::string::npos)
        throw ValidationError("artifact filename must be path-free");
    const fs::path dir = run_dir(run_id);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw StoreError("cannot create " + dir.string() + ": " + ec.message());

    RunManifest m;
    try {
        m = load_manifest_unchecked(run_id);
    } catch (const StoreError&) {
        m.run_id = run_id;
        m.created_at = utc_timestamp();
        m.params = nlohmann::json::object();
    }

    // Artifact first, manifest second: a crash in between leaves an extra
    // file on disk, never a manifest entry without its file.
    write_file_atomic((dir / filename).string(), bytes);
    StoredFile f{filename, md5::hex(bytes)};
    m.files[kind] = f;
    write_manifest(m);
    return f;
}

void RunStore::put_params(const std::string& run_id, const nlohmann::json& params) {
    const fs::path dir = run_dir(run_id);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw StoreError("cannot create " + dir.string() + ": " + ec.message());
    RunManifest m;
    try {
        m = load_manifest_unchecked(run_id);
    } catch (const StoreError&) {
        m.run_id = run_id;
        m.created_at = utc_timestamp();
    }
    m.params = params;
    write_manifest(m);
}

RunManifest RunStore::load_manifest(const std::string& run_id) const {
    RunManifest m = load_manifest_unchecked(run_id);
    for (const auto& [kind, f] : m.files) {
        const fs::path path = run_dir(run_id) / f.path;
        if (!fs::exists(path))
            throw StoreError("run " + run_id + ": missing artifact " + f.path);
        const std::string bytes = read_file(path.string());
        if (md5::hex(bytes) != f.md5_hex)
            throw StoreError("run " + run_id + ": hash mismatch for " + f.path);
    }
    return m;
}

std::string RunStore::read(const std::string& run_id, const std::string& kind) const {
    const RunManifest m = load_manifest_unchecked(run_id);
    const auto it = m.files.find(kind);
    if (it == m.files.end()) throw StoreError("run " + run_id + " has no artifact " + kind);
    const std::string bytes = read_file((run_dir(run_id) / it->second.path).string());
    if (md5::hex(bytes) != it->second.md5_hex)
        throw StoreError("run " + run_id + ": hash mismatch for " + it->second.path);
    return bytes;
}

bool RunStore::has(const std::string& run_id, const std::string& kind) const {
    try {
        const RunManifest m = load_manifest_unchecked(run_id);
        return m.files.contains(kind);
    } catch (const StoreError&) {
        return false;
    }
}

std::vector<std::string> RunStore::list_runs() const {
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(root_))
        if (entry.is_directory() && fs::exists(entry.path() / "manifest.json"))
            names.push_back(entry.path().filename().string());
    std::sort(names.begin(), names.end());
    return names;
}

}  // namespace dyetest
