#include "cfsl/synth.hpp"

#include <cmath>
#include <cstdio>

#include "cfsl/numerics.hpp"
#include "cfsl/rng.hpp"

namespace cfsl {

namespace {

enum Stream : std::uint64_t {
    kClipMeans = 1,
    kBlipMeans,
    kClipTrain,
    kBlipTrain,
    kClipTest,
    kBlipTest,
    kClipText,
    kBlipText,
};

std::vector<double> noisy_unit(std::span<const double> mean, double sigma, CounterRng& rng) {
    std::vector<double> v(mean.size());
    do {
        for (std::size_t d = 0; d < v.size(); ++d) {
            v[d] = mean[d] + sigma * rng.normal();
        }
    } while (l2_norm(v) < 1e-300);  // measure-zero for sigma > 0
    return l2_normalize(v);
}

Matrix sphere_means(std::size_t n, std::size_t dims, CounterRng& rng) {
    Matrix means(n, dims);
    const std::vector<double> origin(dims, 0.0);
    for (std::size_t c = 0; c < n; ++c) {
        const auto v = noisy_unit(origin, 1.0, rng);
        std::copy(v.begin(), v.end(), means.row(c).begin());
    }
    return means;
}

Matrix noisy_rows(const Matrix& means, std::size_t per_class, double sigma, CounterRng& rng) {
    Matrix out(means.rows() * per_class, means.cols());
    for (std::size_t c = 0; c < means.rows(); ++c) {
        for (std::size_t i = 0; i < per_class; ++i) {
            const auto v = noisy_unit(means.row(c), sigma, rng);
            std::copy(v.begin(), v.end(), out.row(c * per_class + i).begin());
        }
    }
    return out;
}

std::string class_name(std::size_t c) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "class_%02zu", c);
    return buf;
}

Manifest make_manifest(const SynthSpec& spec, const char* split, std::size_t per_class) {
    Manifest m;
    m.dataset_name = "synthetic";
    for (std::size_t c = 0; c < spec.n_classes; ++c) {
        m.class_names.push_back(class_name(c));
    }
    m.embeddings["clip"] = std::string(split) + "_clip.fseb";
    m.embeddings["blip"] = std::string(split) + "_blip.fseb";
    for (std::size_t c = 0; c < spec.n_classes; ++c) {
        for (std::size_t i = 0; i < per_class; ++i) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%s_c%02zu_i%04zu", split, c, i);
            m.items.push_back({buf, c, c * per_class + i});
        }
    }
    return m;
}

} // namespace

void SynthSpec::validate() const {
    if (n_classes == 0) {
        throw Error(ErrorCode::InvalidArgument, "need at least one class");
    }
    if (dims < 2) {
        throw Error(ErrorCode::InvalidArgument, "dims must be at least 2");
    }
    if (!(visual_noise >= 0.0) || !(text_noise_clip >= 0.0) || !(text_noise_blip >= 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "noise levels must be nonnegative");
    }
}

SynthDataset generate(const SynthSpec& spec) {
    spec.validate();
    auto rng = [&](Stream s) { return CounterRng(spec.seed, s); };

    CounterRng clip_means_rng = rng(kClipMeans), blip_means_rng = rng(kBlipMeans);
    const Matrix clip_means = sphere_means(spec.n_classes, spec.dims, clip_means_rng);
    const Matrix blip_means = sphere_means(spec.n_classes, spec.dims, blip_means_rng);

    SynthDataset data;
    CounterRng r3 = rng(kClipTrain), r4 = rng(kBlipTrain), r5 = rng(kClipTest), r6 = rng(kBlipTest);
    data.train.manifest = make_manifest(spec, "train", spec.train_per_class);
    data.train.clip = noisy_rows(clip_means, spec.train_per_class, spec.visual_noise, r3);
    data.train.blip = noisy_rows(blip_means, spec.train_per_class, spec.visual_noise, r4);
    data.test.manifest = make_manifest(spec, "test", spec.test_per_class);
    data.test.clip = noisy_rows(clip_means, spec.test_per_class, spec.visual_noise, r5);
    data.test.blip = noisy_rows(blip_means, spec.test_per_class, spec.visual_noise, r6);

    CounterRng r7 = rng(kClipText), r8 = rng(kBlipText);
    data.heads.clip = noisy_rows(clip_means, 1, spec.text_noise_clip, r7);
    data.heads.blip = noisy_rows(blip_means, 1, spec.text_noise_blip, r8);
    return data;
}

void write_dataset(const std::filesystem::path& dir, const SynthDataset& data, Dtype dtype) {
    std::filesystem::create_directories(dir);
    for (const FeatureSet* fs : {&data.train, &data.test}) {
        write_embeddings(dir / fs->manifest.embeddings.at("clip"), fs->clip, dtype);
        write_embeddings(dir / fs->manifest.embeddings.at("blip"), fs->blip, dtype);
    }
    save_manifest(dir / kTrainManifest, data.train.manifest);
    save_manifest(dir / kTestManifest, data.test.manifest);
    write_embeddings(dir / kTextClip, data.heads.clip, dtype);
    write_embeddings(dir / kTextBlip, data.heads.blip, dtype);
}

} // namespace cfsl
