#ifndef HFID_CONFIG_HPP
#define HFID_CONFIG_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "halftone.hpp"
#include "hcd.hpp"
#include "printer_id.hpp"
#include "refiner.hpp"

namespace hfid {

// Flat key=value settings with a registered default and one-line doc per
// key. Unknown keys are rejected on sight.
class RunConfig {
public:
    RunConfig();

    void set(const std::string& key, const std::string& value);
    void load_file(const std::string& path);
    const std::string& get(const std::string& key) const;

    int64_t get_int(const std::string& key) const;
    double get_double(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    std::vector<double> get_list(const std::string& key) const;

    uint64_t seed() const { return static_cast<uint64_t>(get_int("seed")); }
    void set_seed(uint64_t seed);

    // Documented key=value dump, defaults included.
    std::string dump() const;
    static std::string describe_defaults();

    int printer_count() const;
    VirtualPrinter printer(int id, bool real_camera) const;
    std::vector<VirtualPrinter> printers(bool real_camera) const;

    GanConfig gan() const;
    HcdConfig hcd() const;
    PiConfig pi() const;
    AugmentPolicy augment_policy() const;

private:
    std::map<std::string, std::string> values_;
};

} // namespace hfid

#endif
