#include "pinch/scenario.hpp"
#include "pinch/sensor.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace pinch;

namespace {

ContactFrame frame_from(const Mat3& r)
{
    ContactFrame f;
    f.tx = r.col(0);
    f.ty = r.col(1);
    f.nz = r.col(2);
    f.point = Vec3(0.01, -0.02, 0.03);
    return f;
}

ContactFrame random_frame(std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    return frame_from(exp_quaternion(Vec3(u(rng), u(rng), u(rng)) * 3.0).toRotationMatrix());
}

// Direct windowed SSIM, written independently of the summed-area version.
double naive_ssim(const TactileImage& a, const TactileImage& b, int w = 11)
{
    const double c1 = 1e-4;
    const double c2 = 9e-4;
    const double n = w * w;
    double total = 0.0;
    int count = 0;
    for (int y0 = 0; y0 + w <= a.height; ++y0) {
        for (int x0 = 0; x0 + w <= a.width; ++x0) {
            double ma = 0.0;
            double mb = 0.0;
            for (int y = y0; y < y0 + w; ++y) {
                for (int x = x0; x < x0 + w; ++x) {
                    ma += a.at(x, y);
                    mb += b.at(x, y);
                }
            }
            ma /= n;
            mb /= n;
            double va = 0.0;
            double vb = 0.0;
            double cab = 0.0;
            for (int y = y0; y < y0 + w; ++y) {
                for (int x = x0; x < x0 + w; ++x) {
                    va += (a.at(x, y) - ma) * (a.at(x, y) - ma);
                    vb += (b.at(x, y) - mb) * (b.at(x, y) - mb);
                    cab += (a.at(x, y) - ma) * (b.at(x, y) - mb);
                }
            }
            va /= n - 1;
            vb /= n - 1;
            cab /= n - 1;
            total += (2 * ma * mb + c1) * (2 * cab + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            ++count;
        }
    }
    return total / count;
}

TactileImage random_image(std::mt19937_64& rng, int w, int h)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    TactileImage img(w, h);
    for (auto& v : img.pixels) {
        v = u(rng);
    }
    return img;
}

void expect_orthonormal(const ContactFrame& f)
{
    EXPECT_NEAR(f.tx.norm(), 1.0, 1e-10);
    EXPECT_NEAR(f.ty.norm(), 1.0, 1e-10);
    EXPECT_NEAR(f.nz.norm(), 1.0, 1e-10);
    EXPECT_NEAR(f.tx.dot(f.ty), 0.0, 1e-10);
    EXPECT_NEAR(f.tx.dot(f.nz), 0.0, 1e-10);
    EXPECT_LT((f.tx.cross(f.ty) - f.nz).norm(), 1e-10);
}

} // namespace

TEST(SenseFrame, ZeroErrorIsIdentity)
{
    std::mt19937_64 rng(1);
    std::mt19937_64 noise(2);
    for (int k = 0; k < 20; ++k) {
        const ContactFrame truth = random_frame(rng);
        const ContactFrame s = sense_frame(truth, FrameError{}, noise);
        EXPECT_LT((s.tx - truth.tx).norm(), 1e-15);
        EXPECT_LT((s.ty - truth.ty).norm(), 1e-15);
        EXPECT_LT((s.nz - truth.nz).norm(), 1e-15);
        EXPECT_EQ(s.point, truth.point);
    }
}

TEST(SenseFrame, BiasAboutTyTiltsNormal)
{
    std::mt19937_64 rng(3);
    const double bias = 30.0 * kPi / 180.0;
    for (int k = 0; k < 20; ++k) {
        const ContactFrame truth = random_frame(rng);
        const ContactFrame s = sense_frame(truth, FrameError{TangentAxis::Y, bias, 0.0}, rng);
        EXPECT_NEAR(s.nz.dot(truth.nz), std::cos(bias), 1e-12);
        EXPECT_NEAR(s.ty.dot(truth.ty), 1.0, 1e-12);
        EXPECT_NEAR(s.tx.dot(truth.tx), std::cos(bias), 1e-12);
    }
}

TEST(SenseFrame, BiasAboutTxKeepsTx)
{
    std::mt19937_64 rng(4);
    const double bias = 15.0 * kPi / 180.0;
    for (int k = 0; k < 20; ++k) {
        const ContactFrame truth = random_frame(rng);
        const ContactFrame s = sense_frame(truth, FrameError{TangentAxis::X, bias, 0.0}, rng);
        EXPECT_NEAR(s.tx.dot(truth.tx), 1.0, 1e-12);
        EXPECT_NEAR(s.nz.dot(truth.nz), std::cos(bias), 1e-12);
        // Positive angle about t_x turns n_z toward -t_y.
        EXPECT_NEAR(s.nz.dot(truth.ty), -std::sin(bias), 1e-12);
    }
}

TEST(SenseFrame, AlwaysOrthonormalRightHanded)
{
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    for (int k = 0; k < 200; ++k) {
        const FrameError e{k % 2 ? TangentAxis::X : TangentAxis::Y, u(rng), 0.01};
        expect_orthonormal(sense_frame(random_frame(rng), e, rng));
    }
}

TEST(FrameSensor, SeededRunsAreIdentical)
{
    SensorErrorModel m;
    m.fingers = {FrameError{TangentAxis::X, 0.1, 0.01}, FrameError{TangentAxis::Y, -0.2, 0.02}};
    m.seed = 42;
    std::mt19937_64 rng(6);
    std::vector<std::array<ContactFrame, 2>> truths;
    for (int k = 0; k < 50; ++k) {
        truths.push_back({random_frame(rng), random_frame(rng)});
    }
    FrameSensor a(m);
    FrameSensor b(m);
    for (int k = 0; k < 50; ++k) {
        const auto fa = a.sense(truths[static_cast<std::size_t>(k)], k * 1e-3);
        const auto fb = b.sense(truths[static_cast<std::size_t>(k)], k * 1e-3);
        for (std::size_t i = 0; i < 2; ++i) {
            EXPECT_EQ(fa[i].nz, fb[i].nz);
            EXPECT_EQ(fa[i].tx, fb[i].tx);
        }
    }
    FrameSensor first(m);
    m.seed = 43;
    FrameSensor other(m);
    EXPECT_NE(first.sense(truths[0], 0.0)[0].nz, other.sense(truths[0], 0.0)[0].nz);
}

TEST(FrameSensor, ZeroOrderHold)
{
    SensorErrorModel m;
    m.update_period = 0.1;
    FrameSensor sensor(m);
    const ContactFrame f0 = frame_from(Mat3::Identity());
    const ContactFrame f1 = frame_from(rotation_about(Vec3::UnitZ(), 0.3));
    EXPECT_EQ(sensor.sense({f0, f0}, 0.0)[0].tx, f0.tx);
    EXPECT_EQ(sensor.sense({f1, f1}, 0.05)[0].tx, f0.tx);
    EXPECT_EQ(sensor.sense({f1, f1}, 0.0999)[0].tx, f0.tx);
    EXPECT_EQ(sensor.sense({f1, f1}, 0.1)[0].tx, f1.tx);
    sensor.reset();
    EXPECT_EQ(sensor.sense({f0, f0}, 0.11)[0].tx, f0.tx);
}

TEST(SensorErrorModel, Validation)
{
    SensorErrorModel m;
    EXPECT_NO_THROW(m.validate());
    m.fingers[0].bias = kPi / 2;
    EXPECT_THROW(m.validate(), std::invalid_argument);
    m.fingers[0].bias = 0.0;
    m.fingers[1].noise_std = -1e-3;
    EXPECT_THROW(m.validate(), std::invalid_argument);
}

TEST(Ssim, ConstantImagesClosedForm)
{
    const TactileImage a(40, 30, 0.5);
    const TactileImage b(40, 30, 0.6);
    const double c1 = 1e-4;
    EXPECT_NEAR(ssim(a, b), (2 * 0.3 + c1) / (0.25 + 0.36 + c1), 1e-12);
}

TEST(Ssim, SelfSimilarity)
{
    std::mt19937_64 rng(7);
    const TactileImage a = random_image(rng, 30, 20);
    EXPECT_NEAR(ssim(a, a), 1.0, 1e-12);
    EXPECT_NEAR(e_ssim(a, a), 0.0, 1e-12);
    const TactileImage r = synth_tactile_image(0.0, Vec2::Zero());
    EXPECT_NEAR(e_ssim(r, r), 0.0, 1e-12);
}

TEST(Ssim, MatchesDirectWindowedComputation)
{
    std::mt19937_64 rng(8);
    for (int k = 0; k < 5; ++k) {
        const TactileImage a = random_image(rng, 25, 18);
        TactileImage b = a;
        std::normal_distribution<double> n(0.0, 0.1 * (k + 1));
        for (auto& v : b.pixels) {
            v = std::clamp(v + n(rng), 0.0, 1.0);
        }
        EXPECT_NEAR(ssim(a, b), naive_ssim(a, b), 1e-12);
    }
}

TEST(Ssim, SymmetricAndBounded)
{
    std::mt19937_64 rng(9);
    for (int k = 0; k < 10; ++k) {
        const TactileImage a = random_image(rng, 24, 24);
        const TactileImage b = random_image(rng, 24, 24);
        EXPECT_NEAR(ssim(a, b), ssim(b, a), 1e-12);
        const double e = e_ssim(a, b);
        EXPECT_GE(e, 0.0);
        EXPECT_LE(e, 2.0);
    }
}

TEST(Ssim, DimensionMismatch)
{
    try {
        ssim(TactileImage(20, 20), TactileImage(21, 20));
        FAIL() << "expected DimensionMismatch";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::DimensionMismatch);
    }
}

TEST(SynthTactile, ZeroIndentationIsReference)
{
    const TactileImage ref = synth_tactile_image(0.0, Vec2::Zero());
    EXPECT_EQ(ref.width, 240);
    EXPECT_EQ(ref.height, 135);
    EXPECT_TRUE(synth_tactile_image(0.0, Vec2(1.0, -2.0)) == ref);
    for (double v : ref.pixels) {
        ASSERT_GE(v, 0.0);
        ASSERT_LE(v, 1.0);
    }
}

TEST(SynthTactile, IndentationChangesImage)
{
    const TactileImage ref = synth_tactile_image(0.0, Vec2::Zero());
    const TactileImage img = synth_tactile_image(0.5, Vec2::Zero());
    EXPECT_FALSE(img == ref);
    EXPECT_GT(e_ssim(img, ref), 0.0);
    EXPECT_TRUE(synth_tactile_image(0.5, Vec2::Zero()) == img);
}

TEST(SynthTactile, DeformationMonotoneInIndentation)
{
    const TactileImage ref = synth_tactile_image(0.0, Vec2::Zero());
    double prev = -1.0;
    for (int k = 0; k <= 50; ++k) {
        const double e = e_ssim(synth_tactile_image(0.05 * k, Vec2::Zero()), ref);
        EXPECT_GT(e, prev) << "indentation " << 0.05 * k;
        prev = e;
    }
}

TEST(SynthTactile, PinDisplacementLinearInIndentation)
{
    const TactileConfig c;
    const auto rest = pin_rest_positions(c);
    std::vector<double> xs;
    std::vector<double> ys;
    for (int k = 0; k <= 25; ++k) {
        const double d = 0.1 * k;
        const auto pins = pin_positions(d, Vec2(0.7, -0.4), c);
        double total = 0.0;
        for (std::size_t i = 0; i < pins.size(); ++i) {
            total += (pins[i] - rest[i]).norm();
        }
        xs.push_back(d);
        ys.push_back(total / static_cast<double>(pins.size()));
    }
    const double n = static_cast<double>(xs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
        syy += ys[i] * ys[i];
    }
    const double r = (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
    EXPECT_GT(r * r, 0.999);
    EXPECT_GT(ys.back(), 0.0);
}

TEST(SynthTactile, RejectsOutOfRangeIndentation)
{
    EXPECT_THROW(synth_tactile_image(-0.1, Vec2::Zero()), std::invalid_argument);
    EXPECT_THROW(synth_tactile_image(2.6, Vec2::Zero()), std::invalid_argument);
}

TEST(DetectContact, Boundaries)
{
    EXPECT_FALSE(detect_contact(0.0, 0.01));
    EXPECT_TRUE(detect_contact(0.01, 0.01));
    EXPECT_FALSE(detect_contact(std::nextafter(0.01, 0.0), 0.01));
}

TEST(DetectContact, CalibratedThresholdRejectsNoContactFrames)
{
    const TactileConfig c;
    const TactileImage ref = synth_tactile_image(0.0, Vec2::Zero(), c);
    const double threshold = default_tactile_threshold(c);
    EXPECT_NEAR(threshold, 3.0 * e_ssim(synth_tactile_image(0.05, Vec2::Zero(), c), ref), 1e-15);
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    int false_positives = 0;
    for (int k = 0; k < 10000; ++k) {
        const TactileImage img = synth_tactile_image(0.0, Vec2(u(rng), u(rng)), c);
        false_positives += detect_contact(e_ssim(img, ref), threshold) ? 1 : 0;
    }
    EXPECT_EQ(false_positives, 0);
    // A firm press is detected.
    EXPECT_TRUE(detect_contact(e_ssim(synth_tactile_image(0.5, Vec2::Zero(), c), ref), threshold));
}
