#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>

#include "cfsl/embedding_store.hpp"
#include "cfsl/episodes.hpp"

namespace cfsl {

// Desk-scale stand-in for two pretrained vision-language encoders.
// Noise values are per-coordinate standard deviations of isotropic Gaussian
// noise added before re-normalization.
struct SynthSpec {
    std::size_t n_classes = 10;
    std::size_t dims = 64;
    std::size_t train_per_class = 16;
    std::size_t test_per_class = 100;
    double visual_noise = 0.35;
    double text_noise_clip = 0.1;
    double text_noise_blip = 0.15;
    std::uint64_t seed = 42;

    void validate() const;
};

struct SynthDataset {
    FeatureSet train;
    FeatureSet test;
    TextHeads heads;
};

// Each encoder has its own class means on the unit sphere; items and text
// heads are mean + noise with independent draws per encoder.
SynthDataset generate(const SynthSpec& spec);

// File names written by write_dataset / expected by load_dataset.
inline constexpr const char* kTrainManifest = "train_manifest.json";
inline constexpr const char* kTestManifest = "test_manifest.json";
inline constexpr const char* kTextClip = "text_clip.fseb";
inline constexpr const char* kTextBlip = "text_blip.fseb";

// Writes manifests, visual FSEB files for both encoders and both text heads.
void write_dataset(const std::filesystem::path& dir, const SynthDataset& data,
                   Dtype dtype = Dtype::Float64);

} // namespace cfsl
