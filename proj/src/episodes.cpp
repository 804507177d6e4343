#include "cfsl/episodes.hpp"

#include <algorithm>
#include <numeric>

#include "cfsl/numerics.hpp"
#include "cfsl/rng.hpp"

namespace cfsl {

namespace {

// RNG stream ids, so class selection and per-class item draws never share draws.
constexpr std::uint64_t kClassStream = 1;
constexpr std::uint64_t kItemStreamBase = 1000;
constexpr std::uint64_t kShotStreamBase = 5000;

Matrix rows_or_empty(const Matrix& m, std::span<const std::size_t> rows) {
    if (m.cols() == 0) {
        return Matrix(rows.size(), 0);
    }
    return select_rows(m, rows);
}

std::vector<std::vector<std::size_t>> items_by_class(const Manifest& manifest) {
    std::vector<std::vector<std::size_t>> by_class(manifest.num_classes());
    for (std::size_t i = 0; i < manifest.items.size(); ++i) {
        by_class[manifest.items[i].class_index].push_back(i);
    }
    return by_class;
}

void check_heads(const TextHeads& heads, std::size_t num_classes) {
    if (heads.clip.cols() != 0 && heads.clip.rows() != num_classes) {
        throw Error(ErrorCode::ShapeMismatch, "clip text heads have " +
                                                  std::to_string(heads.clip.rows()) + " rows for " +
                                                  std::to_string(num_classes) + " classes");
    }
    if (heads.blip.cols() != 0 && heads.blip.rows() != num_classes) {
        throw Error(ErrorCode::ShapeMismatch, "blip text heads have " +
                                                  std::to_string(heads.blip.rows()) + " rows for " +
                                                  std::to_string(num_classes) + " classes");
    }
}

// Fills the support/query halves of an episode from item-position lists
// (positions into the FeatureSet rows) grouped by local class.
void fill_side(const FeatureSet& fs, const std::vector<std::vector<std::size_t>>& per_class,
               Matrix& features, Matrix& aux, std::vector<std::string>& ids,
               std::vector<std::size_t>& local_labels) {
    std::vector<std::size_t> rows;
    for (std::size_t c = 0; c < per_class.size(); ++c) {
        for (std::size_t pos : per_class[c]) {
            rows.push_back(pos);
            ids.push_back(fs.manifest.items[pos].item_id);
            local_labels.push_back(c);
        }
    }
    features = select_rows(fs.clip, rows);
    aux = rows_or_empty(fs.blip, rows);
}

Matrix onehot(const std::vector<std::size_t>& labels, std::size_t n) {
    Matrix out(labels.size(), n);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        out(i, labels[i]) = 1.0;
    }
    return out;
}

} // namespace

std::vector<std::size_t> Episode::support_classes() const {
    std::vector<std::size_t> out(support_labels.rows());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = argmax(support_labels.row(i));
    }
    return out;
}

Episode sample_episode(const FeatureSet& features, const TextHeads& heads, std::size_t n,
                       std::size_t k, std::size_t q, std::uint64_t seed) {
    const Manifest& manifest = features.manifest;
    if (n == 0 || n > manifest.num_classes()) {
        throw Error(ErrorCode::InsufficientClasses, "asked for " + std::to_string(n) +
                                                        " classes, manifest has " +
                                                        std::to_string(manifest.num_classes()));
    }
    check_heads(heads, manifest.num_classes());
    const auto by_class = items_by_class(manifest);

    CounterRng class_rng(seed, kClassStream);
    std::vector<std::size_t> classes(manifest.num_classes());
    std::iota(classes.begin(), classes.end(), 0);
    shuffle(classes, class_rng);
    classes.resize(n);
    std::sort(classes.begin(), classes.end());

    std::vector<std::vector<std::size_t>> support(n), query(n);
    for (std::size_t c = 0; c < n; ++c) {
        const std::size_t cls = classes[c];
        std::vector<std::size_t> pool = by_class[cls];
        if (pool.size() < k + q) {
            throw Error(ErrorCode::InsufficientItems,
                        "class '" + manifest.class_names[cls] + "' has " +
                            std::to_string(pool.size()) + " items, needs " + std::to_string(k + q));
        }
        CounterRng item_rng(seed, kItemStreamBase + cls);
        shuffle(pool, item_rng);
        support[c].assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
        query[c].assign(pool.begin() + static_cast<std::ptrdiff_t>(k),
                        pool.begin() + static_cast<std::ptrdiff_t>(k + q));
    }

    Episode ep;
    ep.n_way = n;
    ep.k_shot = k;
    ep.class_indices = classes;
    std::vector<std::size_t> support_local;
    fill_side(features, support, ep.support_features, ep.support_aux_features, ep.support_ids,
              support_local);
    ep.support_labels = onehot(support_local, n);
    fill_side(features, query, ep.query_features, ep.query_aux_features, ep.query_ids,
              ep.query_labels);
    ep.text_clip = rows_or_empty(heads.clip, classes);
    ep.text_blip = rows_or_empty(heads.blip, classes);
    return ep;
}

Episode full_split_episode(const FeatureSet& train, const FeatureSet& test, const TextHeads& heads) {
    if (train.manifest.class_names != test.manifest.class_names) {
        throw Error(ErrorCode::ClassListMismatch, "train and test manifests list different classes");
    }
    const std::size_t n = train.manifest.num_classes();
    check_heads(heads, n);
    const auto train_by_class = items_by_class(train.manifest);
    const auto test_by_class = items_by_class(test.manifest);

    Episode ep;
    ep.n_way = n;
    ep.class_indices.resize(n);
    std::iota(ep.class_indices.begin(), ep.class_indices.end(), 0);
    const auto counts = train.manifest.class_counts();
    const bool uniform = !counts.empty() && std::all_of(counts.begin(), counts.end(), [&](auto c) {
        return c == counts.front();
    });
    ep.k_shot = uniform ? counts.front() : 0;

    std::vector<std::size_t> support_local;
    fill_side(train, train_by_class, ep.support_features, ep.support_aux_features, ep.support_ids,
              support_local);
    ep.support_labels = onehot(support_local, n);
    fill_side(test, test_by_class, ep.query_features, ep.query_aux_features, ep.query_ids,
              ep.query_labels);
    if (test.manifest.items.empty()) {
        ep.query_features = Matrix(0, train.clip.cols());
        ep.query_aux_features = Matrix(0, train.blip.cols());
    }
    ep.text_clip = heads.clip;
    ep.text_blip = heads.blip;
    return ep;
}

FeatureSet subsample_shots(const FeatureSet& train, std::size_t shots, std::uint64_t seed) {
    const auto by_class = items_by_class(train.manifest);
    std::vector<std::size_t> keep;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        std::vector<std::size_t> pool = by_class[c];
        CounterRng rng(seed, kShotStreamBase + c);
        shuffle(pool, rng);
        if (pool.size() > shots) {
            pool.resize(shots);
        }
        // Keep manifest order within the subset.
        std::sort(pool.begin(), pool.end());
        keep.insert(keep.end(), pool.begin(), pool.end());
    }
    std::sort(keep.begin(), keep.end());

    FeatureSet out;
    out.manifest.dataset_name = train.manifest.dataset_name;
    out.manifest.class_names = train.manifest.class_names;
    out.manifest.embeddings = train.manifest.embeddings;
    for (std::size_t pos : keep) {
        out.manifest.items.push_back(train.manifest.items[pos]);
    }
    out.clip = select_rows(train.clip, keep);
    out.blip = rows_or_empty(train.blip, keep);
    return out;
}

} // namespace cfsl
