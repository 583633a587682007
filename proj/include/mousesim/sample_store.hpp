#pragma once

#include "mousesim/pairs.hpp"
#include "mousesim/preprocess.hpp"

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace mousesim {

// Samples grouped by user. Users keep insertion order; each user's samples
// keep the order they were added in, which defines SampleRef::index.
class SampleStore {
public:
    explicit SampleStore(std::size_t max_rows = 256) : max_rows_(max_rows) {}

    void add(preprocess::Sample sample);
    void add_all(std::vector<preprocess::Sample> samples);

    std::size_t max_rows() const { return max_rows_; }
    std::size_t size() const;
    bool has_user(const std::string& user_id) const { return index_.count(user_id) != 0; }
    const std::vector<std::string>& users() const { return users_; }
    const std::vector<preprocess::Sample>& samples_of(const std::string& user_id) const;
    const preprocess::Sample& at(const pairs::SampleRef& ref) const;
    std::span<const float> matrix(const pairs::SampleRef& ref) const { return at(ref).rows; }

    std::vector<pairs::UserSampleCount> counts() const;
    std::vector<pairs::UserSampleCount> counts(const std::vector<std::string>& user_ids) const;

    // Writes <dir>/samples.json (metadata) and <dir>/samples.bin (float32
    // little-endian, max_rows x 4 per sample, row-major).
    void save(const std::filesystem::path& dir, const std::string& meta_json = "{}") const;
    static SampleStore load(const std::filesystem::path& dir);

private:
    std::size_t max_rows_;
    std::vector<std::string> users_;
    std::map<std::string, std::size_t> index_;
    std::vector<std::vector<preprocess::Sample>> samples_;
};

}  // namespace mousesim
