#include "halftone.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "rng.hpp"

namespace hfid {

namespace {

// ---------------------------------------------------------------------------
// Radius lookup: ink fraction of a square lattice cell covered by the union
// of equal discs centered on the lattice, as a function of radius/pitch.
// Built once by supersampling; inverted to map target coverage -> radius.

constexpr int kLutSize = 160;
constexpr double kLutMaxQ = 0.80; // radius/pitch range

const std::vector<double>& ink_fraction_lut() {
    static const std::vector<double> lut = [] {
        std::vector<double> f(kLutSize);
        const int k = 48; // subsamples per axis
        for (int qi = 0; qi < kLutSize; ++qi) {
            double q = kLutMaxQ * qi / (kLutSize - 1);
            int covered = 0;
            for (int sy = 0; sy < k; ++sy)
                for (int sx = 0; sx < k; ++sx) {
                    double px = (sx + 0.5) / k - 0.5;
                    double py = (sy + 0.5) / k - 0.5;
                    bool hit = false;
                    for (int dy = -1; dy <= 1 && !hit; ++dy)
                        for (int dx = -1; dx <= 1 && !hit; ++dx) {
                            double ddx = px - dx, ddy = py - dy;
                            if (ddx * ddx + ddy * ddy <= q * q) hit = true;
                        }
                    if (hit) ++covered;
                }
            f[static_cast<size_t>(qi)] = static_cast<double>(covered) / (k * k);
        }
        return f;
    }();
    return lut;
}

// Monotone inverse: coverage in [0,1] -> radius/pitch.
double radius_for_coverage(double c) {
    const auto& lut = ink_fraction_lut();
    if (c <= 0.0) return 0.0;
    if (c >= lut.back()) return kLutMaxQ;
    size_t lo = 0, hi = lut.size() - 1;
    while (hi - lo > 1) {
        size_t mid = (lo + hi) / 2;
        if (lut[mid] < c) lo = mid;
        else hi = mid;
    }
    double f0 = lut[lo], f1 = lut[hi];
    double t = (f1 > f0) ? (c - f0) / (f1 - f0) : 0.0;
    return kLutMaxQ * (static_cast<double>(lo) + t) / (kLutSize - 1);
}

// Odd (point-symmetric) per-cell jitter so that rotating the screen by 180
// degrees reproduces the identical dot pattern.
void cell_jitter(int64_t i, int64_t j, uint64_t seed, double amp_lattice, double& jx,
                 double& jy) {
    auto h01 = [](uint64_t v) {
        return static_cast<double>(v >> 11) * 0x1.0p-53;
    };
    uint64_t ij = hash_combine(hash_combine(seed, static_cast<uint64_t>(i) * 0x9e37u),
                               static_cast<uint64_t>(j));
    uint64_t ji = hash_combine(hash_combine(seed, static_cast<uint64_t>(-i) * 0x9e37u),
                               static_cast<uint64_t>(-j));
    jx = amp_lattice * (h01(splitmix64(ij)) - h01(splitmix64(ji)));
    jy = amp_lattice * (h01(splitmix64(ij ^ 0xabcdefULL)) - h01(splitmix64(ji ^ 0xabcdefULL)));
}

double bilinear_sample(const float* plane, int64_t h, int64_t w, double y, double x) {
    x = std::clamp(x, 0.0, static_cast<double>(w - 1));
    y = std::clamp(y, 0.0, static_cast<double>(h - 1));
    int64_t x0 = static_cast<int64_t>(x), y0 = static_cast<int64_t>(y);
    int64_t x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
    double tx = x - x0, ty = y - y0;
    double a = plane[y0 * w + x0] * (1 - tx) + plane[y0 * w + x1] * tx;
    double b = plane[y1 * w + x0] * (1 - tx) + plane[y1 * w + x1] * tx;
    return a * (1 - ty) + b * ty;
}

// Two-octave value noise in [0,1] with smoothstep interpolation.
std::vector<float> value_noise_field(int64_t h, int64_t w, uint64_t seed) {
    auto octave = [&](int64_t spacing, uint64_t oseed, std::vector<double>& out) {
        int64_t gh = h / spacing + 2, gw = w / spacing + 2;
        std::vector<double> grid(static_cast<size_t>(gh * gw));
        for (int64_t i = 0; i < gh * gw; ++i)
            grid[static_cast<size_t>(i)] =
                static_cast<double>(splitmix64(hash_combine(oseed, static_cast<uint64_t>(i))) >> 11) *
                0x1.0p-53;
        auto smooth = [](double t) { return t * t * (3.0 - 2.0 * t); };
        out.resize(static_cast<size_t>(h * w));
        for (int64_t y = 0; y < h; ++y)
            for (int64_t x = 0; x < w; ++x) {
                double gy = static_cast<double>(y) / spacing;
                double gx = static_cast<double>(x) / spacing;
                int64_t y0 = static_cast<int64_t>(gy), x0 = static_cast<int64_t>(gx);
                double ty = smooth(gy - y0), tx = smooth(gx - x0);
                double v00 = grid[static_cast<size_t>(y0 * gw + x0)];
                double v01 = grid[static_cast<size_t>(y0 * gw + x0 + 1)];
                double v10 = grid[static_cast<size_t>((y0 + 1) * gw + x0)];
                double v11 = grid[static_cast<size_t>((y0 + 1) * gw + x0 + 1)];
                double a = v00 * (1 - tx) + v01 * tx;
                double b = v10 * (1 - tx) + v11 * tx;
                out[static_cast<size_t>(y * w + x)] = a * (1 - ty) + b * ty;
            }
    };
    std::vector<double> o1, o2;
    octave(16, hash_combine(seed, 1), o1);
    octave(7, hash_combine(seed, 2), o2);
    std::vector<float> out(static_cast<size_t>(h * w));
    for (int64_t i = 0; i < h * w; ++i) {
        double v = 0.72 * o1[static_cast<size_t>(i)] + 0.28 * o2[static_cast<size_t>(i)];
        out[static_cast<size_t>(i)] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
    return out;
}

} // namespace

ScreenConfig make_screen(double angle_deg, double pitch, double dot_gain) {
    ScreenConfig s;
    s.angle_deg = std::fmod(angle_deg, 180.0);
    if (s.angle_deg < 0.0) s.angle_deg += 180.0;
    s.pitch = pitch;
    s.dot_gain = dot_gain;
    if (pitch < 2.0)
        raise(ErrorCode::InvalidArgument, "screen pitch must be >= 2 px");
    if (dot_gain < -0.2 || dot_gain > 0.2)
        raise(ErrorCode::InvalidArgument, "dot gain must lie in [-0.2, 0.2]");
    return s;
}

Tensor halftone_channel(const Tensor& coverage, const ScreenConfig& screen, double jitter_px,
                        uint64_t seed) {
    const Dims& d = coverage.dims();
    if (d.n != 1 || d.c != 1)
        raise(ErrorCode::ShapeMismatch, "halftone_channel expects a (1,1,H,W) plane");
    if (screen.pitch < 2.0)
        raise(ErrorCode::InvalidArgument, "screen pitch must be >= 2 px");

    const double p = screen.pitch;
    const double theta = screen.angle_deg * M_PI / 180.0;
    const double ca = std::cos(theta), sa = std::sin(theta);
    const double amp_lattice = jitter_px / p;
    const double gain = screen.dot_gain;
    const float* cov = coverage.data();
    Tensor out(d);
    float* ink = out.data();

    for (int64_t y = 0; y < d.h; ++y) {
        for (int64_t x = 0; x < d.w; ++x) {
            double px = x + 0.5, py = y + 0.5;
            double u = (px * ca + py * sa) / p;
            double v = (-px * sa + py * ca) / p;
            int64_t iu = static_cast<int64_t>(std::lround(u));
            int64_t iv = static_cast<int64_t>(std::lround(v));
            double best = 0.0;
            for (int64_t dj = -1; dj <= 1; ++dj) {
                for (int64_t di = -1; di <= 1; ++di) {
                    int64_t ci = iu + di, cj = iv + dj;
                    double jx, jy;
                    cell_jitter(ci, cj, seed, amp_lattice, jx, jy);
                    double cu = ci + jx, cv = cj + jy;
                    // Dot center back in image coordinates.
                    double cx = p * (cu * ca - cv * sa);
                    double cy = p * (cu * sa + cv * ca);
                    double c = bilinear_sample(cov, d.h, d.w, cy - 0.5, cx - 0.5);
                    double cg = std::clamp(c + gain * 4.0 * c * (1.0 - c), 0.0, 1.0);
                    if (cg < 1e-4) continue;
                    double dist = std::hypot(px - cx, py - cy);
                    double r;
                    if (cg >= 0.999) {
                        // Solid tone: cover the farthest pixel of the cell
                        // regardless of jitter.
                        r = p * M_SQRT1_2 + jitter_px * M_SQRT2 + 0.5;
                    } else {
                        r = p * radius_for_coverage(cg);
                    }
                    double a = std::clamp(r - dist + 0.5, 0.0, 1.0);
                    best = std::max(best, a);
                }
            }
            ink[y * d.w + x] = static_cast<float>(best);
        }
    }
    return out;
}

Tensor cmyk_to_rgb(const Tensor& cmyk) {
    const Dims& d = cmyk.dims();
    if (d.c != 4)
        raise(ErrorCode::ShapeMismatch, "cmyk_to_rgb expects 4 channels");
    Tensor rgb(Dims{d.n, 3, d.h, d.w});
    int64_t plane = d.h * d.w;
    for (int64_t n = 0; n < d.n; ++n) {
        const float* c = cmyk.data() + (n * 4 + 0) * plane;
        const float* m = cmyk.data() + (n * 4 + 1) * plane;
        const float* y = cmyk.data() + (n * 4 + 2) * plane;
        const float* k = cmyk.data() + (n * 4 + 3) * plane;
        float* r = rgb.data() + (n * 3 + 0) * plane;
        float* g = rgb.data() + (n * 3 + 1) * plane;
        float* b = rgb.data() + (n * 3 + 2) * plane;
        for (int64_t i = 0; i < plane; ++i) {
            float ik = 1.0f - k[i];
            r[i] = (1.0f - c[i]) * ik;
            g[i] = (1.0f - m[i]) * ik;
            b[i] = (1.0f - y[i]) * ik;
        }
    }
    return rgb;
}

Tensor camera_degrade(const Tensor& rgb, const VirtualPrinter& printer, uint64_t seed) {
    const Dims& d = rgb.dims();
    if (d.c != 3)
        raise(ErrorCode::ShapeMismatch, "camera_degrade expects 3 channels");
    Tensor out = rgb;
    int64_t plane = d.h * d.w;

    // Optics first: separable Gaussian blur with replicated borders.
    if (printer.blur_sigma > 0.0) {
        double sigma = printer.blur_sigma;
        int radius = static_cast<int>(std::ceil(3.0 * sigma));
        std::vector<double> kernel(static_cast<size_t>(2 * radius + 1));
        double sum = 0.0;
        for (int i = -radius; i <= radius; ++i) {
            kernel[static_cast<size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
            sum += kernel[static_cast<size_t>(i + radius)];
        }
        for (double& k : kernel) k /= sum;
        std::vector<float> tmp(static_cast<size_t>(plane));
        for (int64_t n = 0; n < d.n; ++n)
            for (int64_t c = 0; c < 3; ++c) {
                float* ch = out.data() + (n * 3 + c) * plane;
                for (int64_t y = 0; y < d.h; ++y)
                    for (int64_t x = 0; x < d.w; ++x) {
                        double acc = 0.0;
                        for (int i = -radius; i <= radius; ++i) {
                            int64_t xx = std::clamp<int64_t>(x + i, 0, d.w - 1);
                            acc += kernel[static_cast<size_t>(i + radius)] * ch[y * d.w + xx];
                        }
                        tmp[static_cast<size_t>(y * d.w + x)] = static_cast<float>(acc);
                    }
                for (int64_t y = 0; y < d.h; ++y)
                    for (int64_t x = 0; x < d.w; ++x) {
                        double acc = 0.0;
                        for (int i = -radius; i <= radius; ++i) {
                            int64_t yy = std::clamp<int64_t>(y + i, 0, d.h - 1);
                            acc += kernel[static_cast<size_t>(i + radius)] *
                                   tmp[static_cast<size_t>(yy * d.w + x)];
                        }
                        ch[y * d.w + x] = static_cast<float>(acc);
                    }
            }
    }

    // Scene lighting: additive left-to-right ramp centered on the image.
    if (printer.illumination_slope != 0.0 && d.w > 1) {
        for (int64_t n = 0; n < d.n; ++n)
            for (int64_t c = 0; c < 3; ++c) {
                float* ch = out.data() + (n * 3 + c) * plane;
                for (int64_t y = 0; y < d.h; ++y)
                    for (int64_t x = 0; x < d.w; ++x)
                        ch[y * d.w + x] += static_cast<float>(
                            printer.illumination_slope *
                            (static_cast<double>(x) / static_cast<double>(d.w - 1) - 0.5));
            }
    }

    // Sensor noise last.
    if (printer.noise_sigma > 0.0) {
        Rng rng(hash_combine(seed, 0x6e6f6973u));
        float* p = out.data();
        for (int64_t i = 0; i < out.size(); ++i)
            p[i] += static_cast<float>(rng.normal(0.0, printer.noise_sigma));
    }

    clamp01(out);
    return out;
}

Tensor naive_profile_decompose(const Tensor& rgb) {
    const Dims& d = rgb.dims();
    if (d.c != 3)
        raise(ErrorCode::ShapeMismatch, "naive_profile_decompose expects 3 channels");
    Tensor cmyk(Dims{d.n, 4, d.h, d.w});
    int64_t plane = d.h * d.w;
    for (int64_t n = 0; n < d.n; ++n) {
        const float* r = rgb.data() + (n * 3 + 0) * plane;
        const float* g = rgb.data() + (n * 3 + 1) * plane;
        const float* b = rgb.data() + (n * 3 + 2) * plane;
        float* c = cmyk.data() + (n * 4 + 0) * plane;
        float* m = cmyk.data() + (n * 4 + 1) * plane;
        float* y = cmyk.data() + (n * 4 + 2) * plane;
        float* k = cmyk.data() + (n * 4 + 3) * plane;
        for (int64_t i = 0; i < plane; ++i) {
            float kr = 1.0f - r[i], kg = 1.0f - g[i], kb = 1.0f - b[i];
            float kk = std::min(kr, std::min(kg, kb));
            k[i] = kk;
            if (kk >= 1.0f - 1e-6f) {
                c[i] = m[i] = y[i] = 0.0f;
            } else {
                float inv = 1.0f / (1.0f - kk);
                c[i] = std::clamp((kr - kk) * inv, 0.0f, 1.0f);
                m[i] = std::clamp((kg - kk) * inv, 0.0f, 1.0f);
                y[i] = std::clamp((kb - kk) * inv, 0.0f, 1.0f);
            }
        }
    }
    return cmyk;
}

RenderedImage generate_image(const VirtualPrinter& printer, int height, int width,
                             uint64_t content_seed, uint64_t noise_seed) {
    if (height < 1 || width < 1)
        raise(ErrorCode::InvalidArgument, "generate_image: empty size");
    // Channel ranges keep black coverage moderate so CMY structure stays
    // visible through the composite.
    const double lo[4] = {0.05, 0.05, 0.05, 0.00};
    const double hi[4] = {0.85, 0.85, 0.85, 0.45};
    RenderedImage img;
    img.cmyk = Tensor(Dims{1, 4, height, width});
    for (int ch = 0; ch < 4; ++ch) {
        std::vector<float> field =
            value_noise_field(height, width, hash_combine(content_seed, static_cast<uint64_t>(ch)));
        Tensor coverage(Dims{1, 1, height, width});
        for (int64_t i = 0; i < coverage.size(); ++i)
            coverage.data()[i] =
                static_cast<float>(lo[ch] + (hi[ch] - lo[ch]) * field[static_cast<size_t>(i)]);
        uint64_t screen_seed =
            hash_combine(hash_combine(0x4f5043u, static_cast<uint64_t>(printer.id)),
                         static_cast<uint64_t>(ch)); // drum pattern: printer-persistent
        Tensor plane = halftone_channel(coverage, printer.screens[static_cast<size_t>(ch)],
                                        printer.geometric_jitter, screen_seed);
        std::memcpy(img.cmyk.data() + ch * height * width, plane.data(),
                    static_cast<size_t>(height) * width * sizeof(float));
    }
    Tensor pre = cmyk_to_rgb(img.cmyk);
    img.rgb = camera_degrade(pre, printer, noise_seed);
    return img;
}

SyntheticSample generate_sample(const VirtualPrinter& printer, uint64_t content_seed,
                                uint64_t noise_seed) {
    RenderedImage img = generate_image(printer, kBlockSize, kBlockSize, content_seed, noise_seed);
    SyntheticSample s;
    s.rgb = std::move(img.rgb);
    s.cmyk = std::move(img.cmyk);
    s.printer_id = printer.id;
    s.content_seed = content_seed;
    s.noise_seed = noise_seed;
    return s;
}

} // namespace hfid
