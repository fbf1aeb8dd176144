#include <gtest/gtest.h>

#include <set>
#include <thread>

#include "hg/synth.hpp"
#include "hg/training.hpp"

using namespace hg;

namespace {

SynthOptions options(std::uint64_t seed, double occlusion = 0, double truncation = 0) {
    SynthOptions o;
    o.seed = seed;
    o.occlusion_probability = occlusion;
    o.truncation_probability = truncation;
    return o;
}

}  // namespace

TEST(Skeleton, StandardIsValid) {
    const SkeletonSpec s = SkeletonSpec::standard();
    EXPECT_NO_THROW(s.validate());
    EXPECT_EQ(s.joint_names.size(), 14u);
    const DatasetHeader h = s.header();
    const auto perm = h.flip_permutation();
    for (std::size_t k = 0; k < perm.size(); ++k) EXPECT_EQ(perm[static_cast<std::size_t>(perm[k])], int(k));
    EXPECT_EQ(h.flip_pairs.size(), 6u);
}

TEST(Skeleton, RejectsBrokenSpecs) {
    SkeletonSpec s = SkeletonSpec::standard();
    s.bones[3].length = 0;
    EXPECT_THROW(s.validate(), std::invalid_argument);
    s = SkeletonSpec::standard();
    s.flip_pairs.push_back({s.flip_pairs[0].first, 0});
    EXPECT_THROW(s.validate(), std::invalid_argument);
    s = SkeletonSpec::standard();
    std::swap(s.bones.front(), s.bones.back());  // child before its parent
    EXPECT_THROW(s.validate(), std::invalid_argument);
}

TEST(Synth, SameSeedAndIndexIsBitIdentical) {
    const SkeletonSpec s = SkeletonSpec::standard();
    const SynthOptions o = options(5, 0.3, 0.2);
    for (std::size_t i : {0u, 7u, 123u}) {
        const Sample a = generate_sample(s, o, i), b = generate_sample(s, o, i);
        EXPECT_EQ(a.image, b.image);
        EXPECT_EQ(a.annotation, b.annotation);
    }
    EXPECT_NE(generate_sample(s, o, 0).image, generate_sample(s, options(6, 0.3, 0.2), 0).image);
    // A sample does not depend on how many others were generated.
    EXPECT_EQ(generate(s, 3, o).samples[2].annotation, generate(s, 10, o).samples[2].annotation);
}

TEST(Synth, NoOcclusionMeansEverythingVisible) {
    const Dataset d = generate(SkeletonSpec::standard(), 200, options(1));
    for (const auto& s : d.samples)
        for (std::size_t k = 0; k < 14; ++k) {
            EXPECT_TRUE(s.annotation.present[k]);
            EXPECT_TRUE(s.annotation.visible[k]);
        }
}

TEST(Synth, OcclusionRateMatchesProbability) {
    const Dataset d = generate(SkeletonSpec::standard(), 1000, options(2, 0.3));
    int occluded = 0;
    for (const auto& s : d.samples) {
        bool any = false;
        for (std::size_t k = 0; k < 14; ++k) any = any || !s.annotation.visible[k];
        occluded += any;
    }
    // Binomial(1000, 0.3) has standard deviation 0.0145; 0.03 is about two of them.
    EXPECT_NEAR(occluded / 1000.0, 0.3, 0.03);
}

TEST(Synth, SampleInvariantsHold) {
    const SkeletonSpec spec = SkeletonSpec::standard();
    const Dataset d = generate(spec, 300, options(3, 0.5, 0.3));
    int truncated = 0;
    for (const auto& s : d.samples) {
        const Annotation& a = s.annotation;
        EXPECT_NO_THROW(a.validate(14));
        EXPECT_EQ(s.image.width, 64);
        EXPECT_EQ(s.image.height, 64);
        EXPECT_GT(a.norm_length, 0.0);
        EXPECT_GT(a.scale, 0.0);
        bool any_absent = false;
        for (std::size_t k = 0; k < 14; ++k) {
            if (a.visible[k]) {
                EXPECT_TRUE(a.present[k]);
            }
            if (a.present[k]) {
                EXPECT_GE(a.joints[k].x, 0.0);
                EXPECT_GE(a.joints[k].y, 0.0);
                EXPECT_LE(a.joints[k].x, 64.0);
                EXPECT_LE(a.joints[k].y, 64.0);
            }
            any_absent = any_absent || !a.present[k];
        }
        truncated += any_absent;
        // norm_length is the head segment.
        EXPECT_NEAR(a.norm_length, distance(a.joints[spec.head_top], a.joints[spec.root]), 1e-5);
    }
    EXPECT_GT(truncated, 30);
    EXPECT_LT(truncated, 150);
}

TEST(Synth, RejectsInvalidRequests) {
    const SkeletonSpec s = SkeletonSpec::standard();
    EXPECT_THROW(generate(s, 0, options(1)), std::invalid_argument);
    SynthOptions small = options(1);
    small.image_size = 16;
    EXPECT_THROW(generate(s, 1, small), std::invalid_argument);
}

TEST(Synth, StatisticsAreSeedStable) {
    auto means = [] {
        const Dataset d = generate(SkeletonSpec::standard(), 100, options(4, 0.2, 0.1));
        std::vector<double> m(28, 0.0);
        for (const auto& s : d.samples)
            for (std::size_t k = 0; k < 14; ++k) {
                m[2 * k] += s.annotation.joints[k].x / 100;
                m[2 * k + 1] += s.annotation.joints[k].y / 100;
            }
        return m;
    };
    const auto a = means(), b = means();
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_LT(std::abs(a[i] - b[i]), 1e-12);
}

TEST(Synth, ParallelGenerationEqualsSerial) {
    const SkeletonSpec spec = SkeletonSpec::standard();
    const SynthOptions o = options(8, 0.3, 0.1);
    const Dataset serial = generate(spec, 40, o);
    std::vector<Sample> parallel(40);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < 4; ++w)
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < 40; i += 4) parallel[i] = generate_sample(spec, o, i);
        });
    for (auto& t : pool) t.join();
    for (std::size_t i = 0; i < 40; ++i) {
        EXPECT_EQ(parallel[i].image, serial.samples[i].image);
        EXPECT_EQ(parallel[i].annotation, serial.samples[i].annotation);
    }
}

TEST(Synth, RenderedTargetsDecodeToTheJoint) {
    const Dataset d = generate(SkeletonSpec::standard(), 50, options(9, 0.2, 0.2));
    const ModelConfig mc = ModelConfig::desk_scale();
    const auto perm = d.header.flip_permutation();
    for (const auto& s : d.samples) {
        const PreparedSample p = prepare_sample(s, perm, mc, {});
        const TensorF t = render_targets(p.joints, p.present, mc.output_resolution, 1.0);
        for (std::size_t k = 0; k < 14; ++k) {
            if (!p.present[k]) continue;
            const DecodedPeak peak = decode(t.data().subspan(k * 256, 256), 16, 16);
            EXPECT_LT(distance({peak.x + 0.5, peak.y + 0.5}, p.joints[k]), 0.5);
        }
    }
}

TEST(Synth, ImagesAreNotBlank) {
    const Dataset d = generate(SkeletonSpec::standard(), 5, options(10));
    for (const auto& s : d.samples) {
        std::set<std::uint8_t> distinct(s.image.pixels.begin(), s.image.pixels.end());
        EXPECT_GT(distinct.size(), 50u);
    }
}
