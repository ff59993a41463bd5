#include "dataset.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "png_io.hpp"

namespace fs = std::filesystem;

namespace hfid {

std::string cmyk_path_for(const std::string& rgb_path) {
    if (rgb_path.size() < 4 || !rgb_path.ends_with(".png"))
        raise(ErrorCode::InvalidArgument, "sample path must end in .png: " + rgb_path);
    return rgb_path.substr(0, rgb_path.size() - 4) + ".cmyk.png";
}

void save_sample_files(const std::string& root, const DatasetEntry& entry, const Tensor& rgb,
                       const Tensor* cmyk) {
    fs::path full = fs::path(root) / entry.rgb_path;
    std::error_code ec;
    fs::create_directories(full.parent_path(), ec);
    if (ec)
        raise(ErrorCode::Io, "cannot create " + full.parent_path().string());
    write_png(rgb, full.string());
    if (cmyk)
        write_png(*cmyk, (fs::path(root) / cmyk_path_for(entry.rgb_path)).string());
}

void write_manifest(const Dataset& dataset) {
    fs::path path = fs::path(dataset.root) / "manifest.tsv";
    std::ofstream out(path);
    if (!out)
        raise(ErrorCode::Io, "cannot write manifest: " + path.string());
    out << "path\tprinter_id\tcontent_seed\tnoise_seed\n";
    for (const DatasetEntry& e : dataset.entries)
        out << e.rgb_path << '\t' << e.printer_id << '\t' << e.content_seed << '\t'
            << e.noise_seed << '\n';
    if (!out)
        raise(ErrorCode::Io, "short write on manifest: " + path.string());
}

Dataset load_dataset(const std::string& root) {
    fs::path path = fs::path(root) / "manifest.tsv";
    std::ifstream in(path);
    if (!in)
        raise(ErrorCode::Io, "cannot open manifest: " + path.string());
    Dataset d;
    d.root = root;
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (header) {
            header = false;
            continue;
        }
        std::istringstream ss(line);
        DatasetEntry e;
        std::string printer, cseed, nseed;
        if (!std::getline(ss, e.rgb_path, '\t') || !std::getline(ss, printer, '\t') ||
            !std::getline(ss, cseed, '\t') || !std::getline(ss, nseed))
            raise(ErrorCode::Io, "malformed manifest line: " + line);
        try {
            e.printer_id = std::stoi(printer);
            e.content_seed = std::stoull(cseed);
            e.noise_seed = std::stoull(nseed);
        } catch (const std::exception&) {
            raise(ErrorCode::Io, "malformed manifest numbers: " + line);
        }
        d.entries.push_back(std::move(e));
    }
    return d;
}

Tensor load_rgb(const Dataset& dataset, size_t index) {
    if (index >= dataset.entries.size())
        raise(ErrorCode::InvalidArgument, "dataset index out of range");
    return read_png((fs::path(dataset.root) / dataset.entries[index].rgb_path).string());
}

std::optional<Tensor> load_cmyk(const Dataset& dataset, size_t index) {
    if (index >= dataset.entries.size())
        raise(ErrorCode::InvalidArgument, "dataset index out of range");
    fs::path p = fs::path(dataset.root) / cmyk_path_for(dataset.entries[index].rgb_path);
    if (!fs::exists(p))
        return std::nullopt;
    return read_png(p.string());
}

} // namespace hfid
