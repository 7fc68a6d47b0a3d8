#pragma once

#include "pinch/errors.hpp"
#include "pinch/shapes.hpp"
#include "pinch/spatial.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

namespace pinch {

// ---------------------------------------------------------------------------
// Sensed contact frames

enum class TangentAxis { X, Y };

struct FrameError {
    TangentAxis axis = TangentAxis::X;
    double bias = 0.0;       // rad
    double noise_std = 0.0;  // rad
};

struct SensorErrorModel {
    std::array<FrameError, 2> fingers;
    double update_period = 0.0;  // s; 0 refreshes on every call
    unsigned long long seed = 0;

    void validate() const
    {
        for (const auto& f : fingers) {
            if (!(std::abs(f.bias) < 0.5 * kPi)) {
                throw std::invalid_argument("sensor bias must lie in (-pi/2, pi/2)");
            }
            if (!(f.noise_std >= 0.0)) {
                throw std::invalid_argument("sensor noise std must be non-negative");
            }
        }
        if (!(update_period >= 0.0)) {
            throw std::invalid_argument("sensor update period must be non-negative");
        }
    }
};

/// Rotates the triad about its own t_x or t_y axis by `angle` and
/// re-orthonormalizes it. The contact point is passed through.
inline ContactFrame rotate_frame(const ContactFrame& f, TangentAxis axis, double angle)
{
    const Vec3 a = (axis == TangentAxis::X) ? f.tx : f.ty;
    const Mat3 r = rotation_about(a, angle);
    ContactFrame out;
    out.point = f.point;
    out.nz = (r * f.nz).normalized();
    out.tx = r * f.tx;
    out.tx = (out.tx - out.tx.dot(out.nz) * out.nz).normalized();
    out.ty = out.nz.cross(out.tx);
    return out;
}

/// Orientation error applied to one true frame: bias plus one noise draw.
template <class Rng>
ContactFrame sense_frame(const ContactFrame& truth, const FrameError& err, Rng& rng)
{
    double angle = err.bias;
    if (err.noise_std > 0.0) {
        std::normal_distribution<double> noise(0.0, err.noise_std);
        angle += noise(rng);
    }
    return rotate_frame(truth, err.axis, angle);
}

/// Stateful sensor for one run: seeded noise stream plus a zero-order hold
/// of the sensed frames between updates.
class FrameSensor {
public:
    explicit FrameSensor(SensorErrorModel model) : model_(model), rng_(model.seed) {}

    /// Returns the held frames, refreshing them from `truth` when the update
    /// period has elapsed since the last refresh (or on the first call).
    const std::array<ContactFrame, 2>& sense(const std::array<ContactFrame, 2>& truth, double t)
    {
        if (!initialized_ || t + 1e-12 >= next_update_) {
            for (std::size_t i = 0; i < 2; ++i) {
                held_[i] = sense_frame(truth[i], model_.fingers[i], rng_);
            }
            initialized_ = true;
            next_update_ = t + model_.update_period;
        }
        return held_;
    }

    /// Forces a refresh on the next call.
    void reset() { initialized_ = false; }

    const std::array<ContactFrame, 2>& held() const { return held_; }

private:
    SensorErrorModel model_;
    std::mt19937_64 rng_;
    std::array<ContactFrame, 2> held_{};
    bool initialized_ = false;
    double next_update_ = 0.0;
};

// ---------------------------------------------------------------------------
// Tactile images

struct TactileImage {
    int width = 0;
    int height = 0;
    std::vector<double> pixels;  // row-major, intensities in [0, 1]

    TactileImage() = default;
    TactileImage(int w, int h, double fill = 0.0)
        : width(w), height(h), pixels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill)
    {
    }

    double& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)]; }
    double at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)]; }

    bool operator==(const TactileImage& o) const
    {
        return width == o.width && height == o.height && pixels == o.pixels;
    }
};

struct SsimParams {
    int window = 11;
    double data_range = 1.0;
    double k1 = 0.01;
    double k2 = 0.03;
};

namespace detail {

/// Summed-area table with one row/column of zero padding.
inline std::vector<double> integral(const TactileImage& img, auto&& value)
{
    const auto w = static_cast<std::size_t>(img.width) + 1;
    std::vector<double> s(w * (static_cast<std::size_t>(img.height) + 1), 0.0);
    for (int y = 0; y < img.height; ++y) {
        double row = 0.0;
        for (int x = 0; x < img.width; ++x) {
            row += value(static_cast<std::size_t>(y) * static_cast<std::size_t>(img.width) + static_cast<std::size_t>(x));
            s[(static_cast<std::size_t>(y) + 1) * w + static_cast<std::size_t>(x) + 1]
                = s[static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x) + 1] + row;
        }
    }
    return s;
}

inline double box_sum(const std::vector<double>& s, int width, int x0, int y0, int k)
{
    const auto w = static_cast<std::size_t>(width) + 1;
    const auto xa = static_cast<std::size_t>(x0);
    const auto ya = static_cast<std::size_t>(y0);
    const auto kk = static_cast<std::size_t>(k);
    return s[(ya + kk) * w + xa + kk] - s[ya * w + xa + kk] - s[(ya + kk) * w + xa] + s[ya * w + xa];
}

} // namespace detail

/// Mean structural similarity over all fully-contained square windows, using
/// uniform weights and sample (N-1) variances and covariance.
inline double ssim(const TactileImage& a, const TactileImage& b, const SsimParams& p = {})
{
    if (a.width != b.width || a.height != b.height) {
        throw Error(ErrorKind::DimensionMismatch, "SSIM inputs differ in size");
    }
    if (a.width < p.window || a.height < p.window) {
        throw Error(ErrorKind::DimensionMismatch, "image smaller than the SSIM window");
    }
    const auto& pa = a.pixels;
    const auto& pb = b.pixels;
    const auto sa = detail::integral(a, [&](std::size_t i) { return pa[i]; });
    const auto sb = detail::integral(a, [&](std::size_t i) { return pb[i]; });
    const auto saa = detail::integral(a, [&](std::size_t i) { return pa[i] * pa[i]; });
    const auto sbb = detail::integral(a, [&](std::size_t i) { return pb[i] * pb[i]; });
    const auto sab = detail::integral(a, [&](std::size_t i) { return pa[i] * pb[i]; });

    const double n = static_cast<double>(p.window * p.window);
    const double cov_norm = n / (n - 1.0);
    const double c1 = (p.k1 * p.data_range) * (p.k1 * p.data_range);
    const double c2 = (p.k2 * p.data_range) * (p.k2 * p.data_range);

    double total = 0.0;
    long count = 0;
    for (int y = 0; y + p.window <= a.height; ++y) {
        for (int x = 0; x + p.window <= a.width; ++x) {
            const double ma = detail::box_sum(sa, a.width, x, y, p.window) / n;
            const double mb = detail::box_sum(sb, a.width, x, y, p.window) / n;
            const double va = cov_norm * (detail::box_sum(saa, a.width, x, y, p.window) / n - ma * ma);
            const double vb = cov_norm * (detail::box_sum(sbb, a.width, x, y, p.window) / n - mb * mb);
            const double cab = cov_norm * (detail::box_sum(sab, a.width, x, y, p.window) / n - ma * mb);
            total += ((2.0 * ma * mb + c1) * (2.0 * cab + c2))
                   / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            ++count;
        }
    }
    return total / static_cast<double>(count);
}

inline double e_ssim(const TactileImage& img, const TactileImage& ref, const SsimParams& p = {})
{
    return 1.0 - ssim(img, ref, p);
}

/// Synthetic pin-array image: a grid of Gaussian blobs displaced radially
/// away from the contact centre, by an amount linear in indentation.
struct TactileConfig {
    int width = 240;
    int height = 135;
    int pins_x = 8;
    int pins_y = 8;
    double pin_sigma = 2.5;       // px
    double px_per_mm = 6.0;       // contact-offset scale
    // px of radial shift per mm indentation at the reference radius; kept
    // small enough that no pin travels near a neighbour's rest spot, which
    // would make the deformation measure non-monotone.
    double gain = 3.0;
    double reference_radius = 60.0;  // px
    double max_indentation = 2.5;    // mm
};

inline std::vector<Vec2> pin_rest_positions(const TactileConfig& c)
{
    std::vector<Vec2> pins;
    const double dx = static_cast<double>(c.width) / c.pins_x;
    const double dy = static_cast<double>(c.height) / c.pins_y;
    for (int j = 0; j < c.pins_y; ++j) {
        for (int i = 0; i < c.pins_x; ++i) {
            pins.emplace_back((i + 0.5) * dx, (j + 0.5) * dy);
        }
    }
    return pins;
}

inline std::vector<Vec2> pin_positions(double indentation_mm, const Vec2& offset_mm, const TactileConfig& c)
{
    auto pins = pin_rest_positions(c);
    const Vec2 centre = Vec2(0.5 * c.width, 0.5 * c.height) + c.px_per_mm * offset_mm;
    for (auto& p : pins) {
        p += c.gain * indentation_mm * (p - centre) / c.reference_radius;
    }
    return pins;
}

inline TactileImage synth_tactile_image(double indentation_mm, const Vec2& offset_mm, const TactileConfig& c = {})
{
    if (indentation_mm < 0.0 || indentation_mm > c.max_indentation) {
        throw std::invalid_argument("indentation outside the sensor range");
    }
    TactileImage img(c.width, c.height, 0.0);
    const int reach = static_cast<int>(std::ceil(4.0 * c.pin_sigma));
    const double inv2s2 = 1.0 / (2.0 * c.pin_sigma * c.pin_sigma);
    for (const auto& p : pin_positions(indentation_mm, offset_mm, c)) {
        const int cx = static_cast<int>(std::lround(p.x()));
        const int cy = static_cast<int>(std::lround(p.y()));
        for (int y = std::max(0, cy - reach); y <= std::min(c.height - 1, cy + reach); ++y) {
            for (int x = std::max(0, cx - reach); x <= std::min(c.width - 1, cx + reach); ++x) {
                const double d2 = (x - p.x()) * (x - p.x()) + (y - p.y()) * (y - p.y());
                img.at(x, y) += std::exp(-d2 * inv2s2);
            }
        }
    }
    for (auto& v : img.pixels) {
        v = std::clamp(v, 0.0, 1.0);
    }
    return img;
}

/// Inclusive threshold on the deformation measure.
inline bool detect_contact(double e, double threshold) { return e >= threshold; }

} // namespace pinch
