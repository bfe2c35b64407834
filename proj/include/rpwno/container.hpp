#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "rpwno/pde_data.hpp"
#include "rpwno/rp_ensemble.hpp"

namespace rpwno {

// Little-endian binary layout shared by datasets ("RPWD") and checkpoints ("RPWC"):
//   magic[4] | version u32 | metadata length u64 | metadata JSON (UTF-8)
//   then until EOF: name length u32 | name | rank u32 | extents u64[rank] | float64 payload
struct NamedTensor {
    std::string name;
    Tensor value;
};

struct Container {
    std::string magic;
    std::uint32_t version = 1;
    nlohmann::json metadata = nlohmann::json::object();
    std::vector<NamedTensor> tensors;

    const Tensor& get(const std::string& name) const;
    bool has(const std::string& name) const;
};

inline constexpr std::uint32_t kContainerVersion = 1;

void write_container(const std::filesystem::path& path, const Container& c);
Container read_container(const std::filesystem::path& path, const std::string& expected_magic);

nlohmann::json to_json(const WnoConfig& c);
WnoConfig wno_config_from_json(const nlohmann::json& j);

void save_dataset(const std::filesystem::path& path, const Dataset& d);
Dataset load_dataset(const std::filesystem::path& path);

void save_checkpoint(const std::filesystem::path& path, const Ensemble& e, const nlohmann::json& extra = {});
Ensemble load_checkpoint(const std::filesystem::path& path, nlohmann::json* metadata = nullptr);

// Writes header then rows; values printed with 17 significant digits.
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

}  // namespace rpwno
