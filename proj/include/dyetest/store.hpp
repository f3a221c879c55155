#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace dyetest {

struct StoredFile {
    std::string path;     // relative to the run directory
    std::string md5_hex;  // content hash
    friend bool operator==(const StoredFile&, const StoredFile&) = default;
};

struct RunManifest {
    std::string run_id;
    std::string created_at;  // UTC, ISO-8601
    int schema = 1;
    nlohmann::json params;   // run config snapshot, for replay
    std::map<std::string, StoredFile> files;  // artifact kind -> file
};

/// Flat directory store: one directory per run, one manifest per run, every
/// artifact a plain text file. Writes go through temp-then-rename so a crash
/// never leaves the manifest pointing at a missing or half-written file.
class RunStore {
public:
    explicit RunStore(std::filesystem::path root);

    const std::filesystem::path& root() const { return root_; }
    std::filesystem::path run_dir(const std::string& run_id) const;

    /// Content-addressed write: stores `bytes` as `filename` under the run,
    /// records its hash, and rewrites the manifest atomically.
    StoredFile save(const std::string& run_id, const std::string& kind, std::string_view bytes,
                    const std::string& filename);

    void put_params(const std::string& run_id, const nlohmann::json& params);

    /// Loads a manifest and verifies every referenced file against its
    /// recorded hash. Unknown run ids and hash mismatches raise StoreError.
    RunManifest load_manifest(const std::string& run_id) const;

    /// Verified read of one artifact.
    std::string read(const std::string& run_id, const std::string& kind) const;

    bool has(const std::string& run_id, const std::string& kind) const;
    std::vector<std::string> list_runs() const;

private:
    RunManifest load_manifest_unchecked(const std::string& run_id) const;
    void write_manifest(const RunManifest& m);

    std::filesystem::path root_;
};

}  // namespace dyetest
