#pragma once

#include <json.hpp>

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace mousesim::cli {

std::string sha1_hex(std::string_view bytes);

// Content hash in the form git uses for blobs: sha1("blob <size>\0" + data).
std::string git_blob_hash(const std::filesystem::path& path);

// Run-config hash: the first 16 hex digits of sha1 over the compact dump.
std::string config_hash(const nlohmann::json& config);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view data);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

std::vector<std::size_t> parse_size_list(const std::string& csv);

}  // namespace mousesim::cli
