#ifndef HFID_HALFTONE_HPP
#define HFID_HALFTONE_HPP

#include <array>
#include <cstdint>

#include "tensor.hpp"

namespace hfid {

// One ink channel's clustered-dot screen: lattice orientation, dot-cell
// pitch in pixels and a midtone dot-gain term.
struct ScreenConfig {
    double angle_deg = 45.0; // normalized to [0, 180)
    double pitch = 4.0;      // >= 2 px
    double dot_gain = 0.0;   // in [-0.2, 0.2]
};

ScreenConfig make_screen(double angle_deg, double pitch, double dot_gain = 0.0);

// Parameterized printing signature standing in for a physical printer's OPC
// drum fingerprint: per-channel screens plus capture-side degradation.
struct VirtualPrinter {
    int id = 0;
    std::array<ScreenConfig, 4> screens; // C, M, Y, K
    double blur_sigma = 0.0;             // px
    double noise_sigma = 0.0;            // intensity fraction
    double illumination_slope = 0.0;     // fraction across image width
    double geometric_jitter = 0.0;       // px, dot-center perturbation scale
};

struct SyntheticSample {
    Tensor rgb;  // (1,3,64,64) in [0,1]
    Tensor cmyk; // (1,4,64,64) in [0,1], pre-degradation screened planes
    int printer_id = 0;
    uint64_t content_seed = 0;
    uint64_t noise_seed = 0;
};

constexpr int kBlockSize = 64;

// Renders one coverage plane through a rotated clustered-dot screen. Dot
// radius grows with the local coverage (area calibrated), dot_gain applies a
// parabolic midtone gain, jitter displaces dot centers reproducibly from
// `seed`. Input and output are (1,1,H,W) in [0,1].
Tensor halftone_channel(const Tensor& coverage, const ScreenConfig& screen,
                        double jitter_px = 0.0, uint64_t seed = 0);

// Ideal subtractive composition: R=(1-C)(1-K), G=(1-M)(1-K), B=(1-Y)(1-K).
Tensor cmyk_to_rgb(const Tensor& cmyk);

// Gaussian blur, linear illumination ramp across width, additive Gaussian
// noise, clamped to [0,1]. Deterministic per seed.
Tensor camera_degrade(const Tensor& rgb, const VirtualPrinter& printer, uint64_t seed);

// Classical profile-free conversion: K=min(1-R,1-G,1-B), C=((1-R)-K)/(1-K).
Tensor naive_profile_decompose(const Tensor& rgb);

// Smooth per-channel coverage fields (two-octave value noise), screened and
// composed into an rgb/cmyk pair of the given size.
struct RenderedImage {
    Tensor rgb;
    Tensor cmyk;
};
RenderedImage generate_image(const VirtualPrinter& printer, int height, int width,
                             uint64_t content_seed, uint64_t noise_seed);

SyntheticSample generate_sample(const VirtualPrinter& printer, uint64_t content_seed,
                                uint64_t noise_seed);

} // namespace hfid

#endif
