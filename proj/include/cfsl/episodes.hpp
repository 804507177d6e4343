#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "cfsl/embedding_store.hpp"
#include "cfsl/matrix.hpp"

namespace cfsl {

// Text heads for every class of a dataset, rows in manifest class order.
struct TextHeads {
    Matrix clip;  // W_t
    Matrix blip;  // W_t*, 0 columns when not supplied
};

// One N-way task. Columns of every logit vector follow `class_indices`,
// which lists the selected dataset classes in ascending manifest order.
struct Episode {
    std::size_t n_way = 0;
    // Shots per class; 0 when classes carry unequal counts (full splits).
    std::size_t k_shot = 0;

    Matrix support_features;      // clip, NK x D
    Matrix support_aux_features;  // blip, NK x D', may be empty
    Matrix support_labels;        // NK x N one-hot
    std::vector<std::string> support_ids;

    Matrix query_features;
    Matrix query_aux_features;
    std::vector<std::size_t> query_labels;  // episode-local class index
    std::vector<std::string> query_ids;

    std::vector<std::size_t> class_indices;

    Matrix text_clip;  // N x D rows of W_t for the selected classes
    Matrix text_blip;

    std::size_t num_support() const noexcept { return support_features.rows(); }
    std::size_t num_queries() const noexcept { return query_labels.size(); }
    bool has_blip() const noexcept {
        return query_aux_features.cols() != 0 && text_blip.cols() != 0;
    }
    bool has_clip_text() const noexcept { return text_clip.cols() != 0; }

    // Local class index of each support row (argmax of its one-hot).
    std::vector<std::size_t> support_classes() const;
};

// Samples n classes, then k support and q query items per class, all without
// replacement. Deterministic in (features, n, k, q, seed).
Episode sample_episode(const FeatureSet& features, const TextHeads& heads, std::size_t n,
                       std::size_t k, std::size_t q, std::uint64_t seed);

// Support = every training item, queries = every test item, all classes.
Episode full_split_episode(const FeatureSet& train, const FeatureSet& test, const TextHeads& heads);

// Keeps `shots` items per class, chosen by seed; classes with fewer items keep
// all of them.
FeatureSet subsample_shots(const FeatureSet& train, std::size_t shots, std::uint64_t seed);

} // namespace cfsl
