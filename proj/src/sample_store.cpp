#include "mousesim/sample_store.hpp"

#include "mousesim/error.hpp"

#include <json.hpp>

#include <bit>
#include <cstring>
#include <fstream>

namespace mousesim {

static_assert(std::endian::native == std::endian::little, "sample store assumes a little-endian host");

void SampleStore::add(preprocess::Sample sample) {
    if (sample.rows.size() != max_rows_ * preprocess::kFeatures)
        throw Error(ErrorCode::ShapeMismatch, "sample has " + std::to_string(sample.rows.size()) +
                                                  " values, store expects " +
                                                  std::to_string(max_rows_ * preprocess::kFeatures));
    auto it = index_.find(sample.user_id);
    if (it == index_.end()) {
        it = index_.emplace(sample.user_id, users_.size()).first;
        users_.push_back(sample.user_id);
        samples_.emplace_back();
    }
    samples_[it->second].push_back(std::move(sample));
}

void SampleStore::add_all(std::vector<preprocess::Sample> samples) {
    for (auto& s : samples) add(std::move(s));
}

std::size_t SampleStore::size() const {
    std::size_t n = 0;
    for (const auto& v : samples_) n += v.size();
    return n;
}

const std::vector<preprocess::Sample>& SampleStore::samples_of(const std::string& user_id) const {
    auto it = index_.find(user_id);
    if (it == index_.end()) throw Error(ErrorCode::UnknownUser, "'" + user_id + "' not in sample store");
    return samples_[it->second];
}

const preprocess::Sample& SampleStore::at(const pairs::SampleRef& ref) const {
    const auto& list = samples_of(ref.user_id);
    if (ref.index >= list.size())
        throw Error(ErrorCode::IndexOutOfRange, "sample " + std::to_string(ref.index) + " of user '" +
                                                    ref.user_id + "' (has " + std::to_string(list.size()) + ")");
    return list[ref.index];
}

std::vector<pairs::UserSampleCount> SampleStore::counts() const { return counts(users_); }

std::vector<pairs::UserSampleCount> SampleStore::counts(const std::vector<std::string>& user_ids) const {
    std::vector<pairs::UserSampleCount> out;
    for (const auto& id : user_ids) out.push_back({id, samples_of(id).size()});
    return out;
}

void SampleStore::save(const std::filesystem::path& dir, const std::string& meta_json) const {
    std::filesystem::create_directories(dir);
    std::ofstream bin(dir / "samples.bin", std::ios::binary);
    if (!bin) throw Error(ErrorCode::IoFailure, "cannot write " + (dir / "samples.bin").string());

    nlohmann::json manifest;
    manifest["format"] = "mousesim-samples";
    manifest["version"] = 1;
    manifest["max_rows"] = max_rows_;
    manifest["features"] = preprocess::kFeatures;
    manifest["meta"] = nlohmann::json::parse(meta_json);
    auto& entries = manifest["samples"] = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (std::size_t u = 0; u < users_.size(); ++u) {
        for (const auto& s : samples_[u]) {
            entries.push_back({{"user_id", s.user_id},
                               {"session_id", s.session_id},
                               {"segment_ids", s.segment_ids},
                               {"segment_durations", s.segment_durations},
                               {"true_len", s.true_len},
                               {"effective_duration", s.effective_duration},
                               {"offset", offset}});
            const auto bytes = s.rows.size() * sizeof(float);
            bin.write(reinterpret_cast<const char*>(s.rows.data()), static_cast<std::streamsize>(bytes));
            offset += bytes;
        }
    }
    if (!bin) throw Error(ErrorCode::IoFailure, "write failed for samples.bin");
    std::ofstream js(dir / "samples.json");
    js << manifest.dump(1) << '\n';
    if (!js) throw Error(ErrorCode::IoFailure, "write failed for samples.json");
}

SampleStore SampleStore::load(const std::filesystem::path& dir) {
    std::ifstream js(dir / "samples.json");
    if (!js) throw Error(ErrorCode::MissingFile, (dir / "samples.json").string());
    std::ifstream bin(dir / "samples.bin", std::ios::binary);
    if (!bin) throw Error(ErrorCode::MissingFile, (dir / "samples.bin").string());
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(js);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::IoFailure, "samples.json: " + std::string(e.what()));
    }
    if (manifest.value("format", "") != "mousesim-samples")
        throw Error(ErrorCode::IoFailure, "samples.json is not a sample store manifest");
    const std::size_t max_rows = manifest.at("max_rows").get<std::size_t>();
    SampleStore store(max_rows);
    const std::size_t count = max_rows * preprocess::kFeatures;
    for (const auto& e : manifest.at("samples")) {
        preprocess::Sample s;
        s.user_id = e.at("user_id").get<std::string>();
        s.session_id = e.at("session_id").get<std::size_t>();
        s.segment_ids = e.at("segment_ids").get<std::vector<std::size_t>>();
        s.segment_durations = e.at("segment_durations").get<std::vector<double>>();
        s.true_len = e.at("true_len").get<std::size_t>();
        s.effective_duration = e.at("effective_duration").get<double>();
        s.rows.resize(count);
        bin.seekg(static_cast<std::streamoff>(e.at("offset").get<std::uint64_t>()));
        bin.read(reinterpret_cast<char*>(s.rows.data()), static_cast<std::streamsize>(count * sizeof(float)));
        if (!bin) throw Error(ErrorCode::IoFailure, "samples.bin truncated");
        store.add(std::move(s));
    }
    return store;
}

}  // namespace mousesim
