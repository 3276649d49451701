#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "dse/corpus.hpp"
#include "dse/matrix.hpp"
#include "dse/model.hpp"
#include "dse/vocab.hpp"

namespace dse {

/// Something that maps a surface word, as seen in a domain, to a vector.
class FeatureSource {
public:
    virtual ~FeatureSource() = default;
    virtual std::size_t dim() const = 0;
    /// Writes the word's vector into `out` (size dim()); false when OOV.
    virtual bool lookup(std::string_view word, Domain domain, std::span<double> out) const = 0;
};

/// Composed DSE vectors. Optionally L2-normalizes each word vector.
class ModelFeatures final : public FeatureSource {
public:
    ModelFeatures(const DseModel& model, const Vocabulary& vocab, Variant variant, bool normalize = false);
    std::size_t dim() const override { return composed_dim(variant_, model_.dim); }
    bool lookup(std::string_view word, Domain domain, std::span<double> out) const override;

private:
    const DseModel& model_;
    const Vocabulary& vocab_;
    Variant variant_;
    bool normalize_;
};

/// A fixed word -> vector table (skip-gram baselines); domain is ignored.
class TableFeatures final : public FeatureSource {
public:
    explicit TableFeatures(EmbeddingTable table);
    TableFeatures(const Vocabulary& vocab, Matrix vectors);
    std::size_t dim() const override { return table_.vectors.cols(); }
    bool lookup(std::string_view word, Domain domain, std::span<double> out) const override;

private:
    EmbeddingTable table_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// [a ; b]. A word missing from one side gets zeros there; it is OOV only
/// when missing from both.
class ConcatFeatures final : public FeatureSource {
public:
    ConcatFeatures(const FeatureSource& a, const FeatureSource& b) : a_(a), b_(b) {}
    std::size_t dim() const override { return a_.dim() + b_.dim(); }
    bool lookup(std::string_view word, Domain domain, std::span<double> out) const override;

private:
    const FeatureSource& a_;
    const FeatureSource& b_;
};

struct FeatureVector {
    std::vector<double> values;
    std::size_t oov_tokens = 0;
    bool all_oov = false;
};

/// Unweighted mean of the token vectors; OOV tokens are skipped and an
/// all-OOV review maps to the zero vector.
FeatureVector review_features(const TextReview& review, const FeatureSource& features);

// ---------------------------------------------------------------------------
// Classifier

struct ClassifierOptions {
    int max_iterations = 1000;
    double l2 = 1e-4;
    /// Stop once the gradient norm falls below this.
    double tolerance = 1e-6;
    /// Z-score each feature with training-set statistics before fitting.
    bool standardize = true;
};

/// L2-regularized logistic regression (bias unpenalized).
struct LinearClassifier {
    std::vector<double> weights;
    double bias = 0.0;
    std::vector<double> mean;
    std::vector<double> scale;

    /// Signed score in the original feature space.
    double decision(std::span<const double> x) const;
    int predict(std::span<const double> x) const { return decision(x) > 0.0 ? 1 : 0; }
    /// Weight vector mapped back to the original feature space.
    std::vector<double> direction() const;
};

/// Full-batch gradient descent with Armijo backtracking; deterministic.
/// Throws InputError unless both classes are present.
LinearClassifier train_linear_classifier(const Matrix& features, std::span<const int> labels,
                                         const ClassifierOptions& options = {});

// ---------------------------------------------------------------------------
// Metrics and reports

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;
};

struct FoldResult {
    int fold = 0;
    std::size_t train_size = 0;
    std::size_t test_size = 0;
    double accuracy = 0.0;
    double macro_f1 = 0.0;
};

struct EvalReport {
    double accuracy = 0.0;
    double macro_f1 = 0.0;
    /// Index 0 is the negative class, 1 the positive class.
    std::array<ClassMetrics, 2> per_class{};
    std::vector<FoldResult> folds;
    std::size_t oov_dropped = 0;
    std::size_t all_oov_reviews = 0;
    std::size_t test_size = 0;
    std::uint64_t split_seed = 0;

    nlohmann::json to_json() const;
    std::string to_table() const;
};

/// Accuracy, per-class precision/recall/F1 and macro-F1 from predictions.
/// F1 of a class with no true or predicted members is 0.
EvalReport score_predictions(std::span<const int> truth, std::span<const int> predicted);

// ---------------------------------------------------------------------------
// Review classification

struct ReviewSplit {
    std::vector<TextReview> train;
    std::vector<TextReview> test;
    /// True when a class had fewer than train + test reviews and an 80/20
    /// split of what was available was used instead.
    bool proportional = false;
};

/// Per-class random split of one domain's labeled reviews.
ReviewSplit split_reviews(std::span<const TextReview> labeled, Domain domain, std::size_t train_per_class,
                          std::size_t test_per_class, std::uint64_t seed);

/// Fits the classifier on train features and scores the test set. Test-set
/// predictions are stored in `predictions` when given.
EvalReport evaluate_reviews(std::span<const TextReview> train, std::span<const TextReview> test,
                            const FeatureSource& features, const ClassifierOptions& options = {},
                            std::vector<int>* predictions = nullptr);

/// Sparse `label index:value` lines (labels +1/-1, 1-based indices, zeros omitted).
void write_sparse_features(std::ostream& out, std::span<const TextReview> reviews, const FeatureSource& features);

// ---------------------------------------------------------------------------
// Lexicon classification

struct LexiconEntry {
    std::string word;  // preprocessed (stemmed) form
    int label = 0;
};

struct Lexicon {
    std::vector<LexiconEntry> entries;
    std::size_t positive_raw = 0;
    std::size_t negative_raw = 0;
    std::size_t phrases_dropped = 0;
    std::size_t stopwords_dropped = 0;
    std::size_t duplicates_merged = 0;
    std::size_t conflicts_dropped = 0;

    std::size_t count(int label) const;
};

/// Reads `word<TAB>label` lines (label positive or negative) and runs each
/// word through the tokenizer. Neutral labels are an InputError; multi-token
/// entries are dropped as phrases.
Lexicon load_lexicon(std::istream& in, const PreprocessConfig& cfg);
Lexicon load_lexicon_file(const std::filesystem::path& path, const PreprocessConfig& cfg);

/// Fold id of each item: each class is shuffled with `seed` and dealt
/// round-robin, so class counts per fold differ by at most one.
std::vector<int> stratified_folds(std::span<const int> labels, int folds, std::uint64_t seed);

struct LexiconOptions {
    int folds = 5;
    std::uint64_t seed = 1;
    ClassifierOptions classifier;
};

/// k-fold cross-validated term classification. OOV terms are dropped and
/// counted; throws InputError when a class has fewer kept terms than folds.
/// Report accuracy, macro-F1 and per-class figures are fold averages.
EvalReport evaluate_lexicon(const Lexicon& lexicon, const FeatureSource& features, const LexiconOptions& options = {});

// ---------------------------------------------------------------------------

struct Neighbor {
    std::string word;
    double cosine = 0.0;
};

/// Top-k words by cosine similarity of composed vectors in `domain`,
/// excluding the query. Throws InputError for an OOV query.
std::vector<Neighbor> nearest_neighbors(const DseModel& model, const Vocabulary& vocab, std::string_view word,
                                        Domain domain, Variant variant, std::size_t k);

double cosine(std::span<const double> a, std::span<const double> b);

}  // namespace dse
