#include "config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "rng.hpp"

namespace hfid {

namespace {

struct KeyDef {
    const char* key;
    const char* def;
    const char* doc;
};

// Every key carries a documented default. The gan/hcd/pi learning-rate and
// batch defaults here are desk-scale values sized for a single CPU core;
// the paper-reported settings (lr 1e-5/1e-4/2e-5, batch 32) remain the
// struct defaults in GanConfig/HcdConfig/PiConfig.
const KeyDef kKeys[] = {
    {"seed", "1", "global RNG seed; every stage derives its streams from it"},
    {"printers.count", "4", "number of virtual printers"},
    {"printers.angle_step_deg", "22.5", "per-printer rotation of the CMYK screen set"},
    {"printers.pitch_base", "4.0", "dot pitch of printer 0 in pixels"},
    {"printers.pitch_step", "0.35", "per-printer pitch increment in pixels"},
    {"printers.jitter_base", "0.06", "dot-center jitter of printer 0 in pixels"},
    {"printers.jitter_step", "0.05", "per-printer jitter increment in pixels"},
    {"printers.dot_gain", "0.05", "midtone dot gain shared by all printers"},
    {"camera.synth.blur", "0.4", "gaussian blur sigma for synthetic captures"},
    {"camera.synth.noise", "0.01", "sensor noise sigma for synthetic captures"},
    {"camera.synth.illum", "0.02", "illumination slope for synthetic captures"},
    {"camera.real.blur", "1.0", "gaussian blur sigma for real-style captures"},
    {"camera.real.noise", "0.04", "sensor noise sigma for real-style captures"},
    {"camera.real.illum", "0.10", "illumination slope for real-style captures"},
    {"data.gan_synth", "512", "synthetic 64x64 samples for refiner training"},
    {"data.gan_real", "512", "real-style 64x64 samples for refiner training"},
    {"data.hcd_samples", "1536", "synthetic samples refined for HCD training"},
    {"data.hcd_eval", "192", "held-out refined samples for the decomposition report"},
    {"data.pi_train_images", "12", "training composites per printer for the PI net"},
    {"data.pi_val_images", "2", "of the training composites, images held out for validation"},
    {"data.pi_image_size", "512", "composite edge length in pixels (multiple of 64)"},
    {"data.eval_images", "8", "held-out evaluation composites per printer"},
    {"data.sweep_images", "6", "robustness-sweep composites per printer"},
    {"gan.lambda", "1e-5", "Eq. 1 scaling factor"},
    {"gan.batch", "4", "refiner mini-batch size b (even)"},
    {"gan.iters", "1000", "outer iterations T"},
    {"gan.refiner_lr", "2e-4", "refiner Adam learning rate"},
    {"gan.disc_lr", "2e-4", "discriminator Adam learning rate"},
    {"gan.buffer", "640", "history buffer capacity"},
    {"hcd.lr", "3e-4", "HCD Adam learning rate"},
    {"hcd.batch", "32", "HCD mini-batch size"},
    {"hcd.epochs", "40", "HCD maximum epochs"},
    {"hcd.patience", "4", "HCD early-stop patience on validation loss"},
    {"pi.lr", "1e-4", "PI Adam learning rate"},
    {"pi.batch", "32", "PI mini-batch size"},
    {"pi.epochs", "12", "PI maximum epochs per phase"},
    {"pi.patience", "10", "PI early-stop patience on validation accuracy"},
    {"augment.scales", "0.8,1.0,1.2", "phase-2 scale set S"},
    {"augment.rotations", "-10,0,10", "phase-2 rotation set in degrees"},
    {"robust.rotations", "-10,-5,0,5,10", "rotation sweep grid in degrees"},
    {"robust.scales", "0.8,0.9,1.0,1.1,1.2", "scaling sweep grid"},
    {"robust.eval_size", "256", "sweep evaluation crop edge (multiple of 64)"},
    {"pipeline.skip_refine", "false", "ablation: train the HCD on raw synthetic data"},
};

const KeyDef* find_key(const std::string& key) {
    for (const KeyDef& k : kKeys)
        if (key == k.key) return &k;
    return nullptr;
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

} // namespace

RunConfig::RunConfig() {
    for (const KeyDef& k : kKeys)
        values_[k.key] = k.def;
}

void RunConfig::set(const std::string& key, const std::string& value) {
    if (!find_key(key))
        raise(ErrorCode::Config, "unknown config key: " + key);
    values_[key] = value;
}

void RunConfig::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        raise(ErrorCode::Io, "cannot open config: " + path);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#')
            continue;
        size_t eq = t.find('=');
        if (eq == std::string::npos)
            raise(ErrorCode::Config,
                  path + ":" + std::to_string(line_no) + ": expected key=value");
        set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
}

const std::string& RunConfig::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end())
        raise(ErrorCode::Config, "unknown config key: " + key);
    return it->second;
}

int64_t RunConfig::get_int(const std::string& key) const {
    try {
        return std::stoll(get(key));
    } catch (const std::exception&) {
        raise(ErrorCode::Config, "config key " + key + " is not an integer: " + get(key));
    }
}

double RunConfig::get_double(const std::string& key) const {
    try {
        return std::stod(get(key));
    } catch (const std::exception&) {
        raise(ErrorCode::Config, "config key " + key + " is not a number: " + get(key));
    }
}

bool RunConfig::get_bool(const std::string& key) const {
    const std::string& v = get(key);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    raise(ErrorCode::Config, "config key " + key + " is not a boolean: " + v);
}

std::vector<double> RunConfig::get_list(const std::string& key) const {
    std::vector<double> out;
    std::istringstream ss(get(key));
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stod(trim(item)));
        } catch (const std::exception&) {
            raise(ErrorCode::Config, "config key " + key + " has a bad list item: " + item);
        }
    }
    if (out.empty())
        raise(ErrorCode::Config, "config key " + key + " is an empty list");
    return out;
}

void RunConfig::set_seed(uint64_t seed) {
    values_["seed"] = std::to_string(seed);
}

std::string RunConfig::dump() const {
    std::ostringstream out;
    for (const KeyDef& k : kKeys)
        out << k.key << "=" << values_.at(k.key) << "\n";
    return out.str();
}

std::string RunConfig::describe_defaults() {
    std::ostringstream out;
    for (const KeyDef& k : kKeys)
        out << k.key << "=" << k.def << "\n    " << k.doc << "\n";
    return out.str();
}

int RunConfig::printer_count() const {
    int n = static_cast<int>(get_int("printers.count"));
    if (n < 2)
        raise(ErrorCode::Config, "printers.count must be >= 2");
    return n;
}

VirtualPrinter RunConfig::printer(int id, bool real_camera) const {
    if (id < 0 || id >= printer_count())
        raise(ErrorCode::Config, "printer id out of range: " + std::to_string(id));
    // Industry-convention base angles, rotated as a set per printer.
    static const double base_angles[4] = {15.0, 75.0, 0.0, 45.0};
    double angle_off = get_double("printers.angle_step_deg") * id;
    double pitch = get_double("printers.pitch_base") + get_double("printers.pitch_step") * id;
    double gain = get_double("printers.dot_gain");
    VirtualPrinter p;
    p.id = id;
    for (int ch = 0; ch < 4; ++ch)
        p.screens[static_cast<size_t>(ch)] = make_screen(base_angles[ch] + angle_off, pitch, gain);
    p.geometric_jitter =
        get_double("printers.jitter_base") + get_double("printers.jitter_step") * id;
    const char* prefix = real_camera ? "camera.real." : "camera.synth.";
    p.blur_sigma = get_double(std::string(prefix) + "blur");
    p.noise_sigma = get_double(std::string(prefix) + "noise");
    p.illumination_slope = get_double(std::string(prefix) + "illum");
    return p;
}

std::vector<VirtualPrinter> RunConfig::printers(bool real_camera) const {
    std::vector<VirtualPrinter> out;
    int n = printer_count();
    out.reserve(static_cast<size_t>(n));
    for (int id = 0; id < n; ++id)
        out.push_back(printer(id, real_camera));
    // Identifiability: the (angle, pitch, jitter) signature must differ
    // between any two printers.
    for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b) {
            bool same = out[static_cast<size_t>(a)].screens[0].angle_deg ==
                            out[static_cast<size_t>(b)].screens[0].angle_deg &&
                        out[static_cast<size_t>(a)].screens[0].pitch ==
                            out[static_cast<size_t>(b)].screens[0].pitch &&
                        out[static_cast<size_t>(a)].geometric_jitter ==
                            out[static_cast<size_t>(b)].geometric_jitter;
            if (same)
                raise(ErrorCode::Config, "printers " + std::to_string(a) + " and " +
                                             std::to_string(b) +
                                             " share an identical screen signature");
        }
    return out;
}

GanConfig RunConfig::gan() const {
    GanConfig g;
    g.lambda = get_double("gan.lambda");
    g.batch_size = static_cast<int>(get_int("gan.batch"));
    g.max_iters = static_cast<int>(get_int("gan.iters"));
    g.refiner_lr = static_cast<float>(get_double("gan.refiner_lr"));
    g.disc_lr = static_cast<float>(get_double("gan.disc_lr"));
    g.buffer_capacity = static_cast<int>(get_int("gan.buffer"));
    return g;
}

HcdConfig RunConfig::hcd() const {
    HcdConfig h;
    h.lr = static_cast<float>(get_double("hcd.lr"));
    h.batch_size = static_cast<int>(get_int("hcd.batch"));
    h.max_epochs = static_cast<int>(get_int("hcd.epochs"));
    h.patience = static_cast<int>(get_int("hcd.patience"));
    return h;
}

PiConfig RunConfig::pi() const {
    PiConfig p;
    p.lr = static_cast<float>(get_double("pi.lr"));
    p.batch_size = static_cast<int>(get_int("pi.batch"));
    p.max_epochs = static_cast<int>(get_int("pi.epochs"));
    p.patience = static_cast<int>(get_int("pi.patience"));
    p.n_printers = printer_count();
    return p;
}

AugmentPolicy RunConfig::augment_policy() const {
    AugmentPolicy a;
    a.scales = get_list("augment.scales");
    a.rotations_deg = get_list("augment.rotations");
    bool has_identity = false;
    for (double s : a.scales)
        for (double r : a.rotations_deg)
            if (s == 1.0 && r == 0.0) has_identity = true;
    if (!has_identity)
        raise(ErrorCode::Config, "augment policy must contain the identity (1.0, 0)");
    return a;
}

} // namespace hfid
