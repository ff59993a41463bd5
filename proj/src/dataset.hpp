#ifndef HFID_DATASET_HPP
#define HFID_DATASET_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tensor.hpp"

namespace hfid {

// On-disk layout: <root>/printer_<id>/sample_<n>.png (8-bit RGB) plus an
// optional sample_<n>.cmyk.png ground-truth file (8-bit RGBA bytes = CMYK),
// indexed by <root>/manifest.tsv with columns
//   path <tab> printer_id <tab> content_seed <tab> noise_seed
struct DatasetEntry {
    std::string rgb_path; // relative to root
    int printer_id = 0;
    uint64_t content_seed = 0;
    uint64_t noise_seed = 0;
};

struct Dataset {
    std::string root;
    std::vector<DatasetEntry> entries;

    size_t size() const { return entries.size(); }
};

std::string cmyk_path_for(const std::string& rgb_path);

// Appends one sample to disk; caller writes the manifest afterwards.
void save_sample_files(const std::string& root, const DatasetEntry& entry, const Tensor& rgb,
                       const Tensor* cmyk);

void write_manifest(const Dataset& dataset);

Dataset load_dataset(const std::string& root);

Tensor load_rgb(const Dataset& dataset, size_t index);
// Empty optional when the sample has no ground-truth file.
std::optional<Tensor> load_cmyk(const Dataset& dataset, size_t index);

} // namespace hfid

#endif
