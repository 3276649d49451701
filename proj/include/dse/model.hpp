#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dse/common.hpp"
#include "dse/matrix.hpp"
#include "dse/vocab.hpp"

namespace dse {

/// Mixture component of a word occurrence: common is z_w = 1.
enum class Branch : std::uint8_t { common, specific };

/// How a word is represented for downstream classifiers.
enum class Variant : std::uint8_t {
    dse_c,          ///< [U^c ; U^dom]
    dse_w,          ///< [p(z_w) U^c ; (1 - p(z_w)) U^dom]
    common_only,    ///< U^c
    specific_only,  ///< U^dom
};

std::string_view to_string(Variant v);
/// Accepts dse_c, dse_w, common, common_only, specific, specific_only.
Variant parse_variant(std::string_view name);
std::size_t composed_dim(Variant v, std::size_t dim);

/// All learned parameters. Row w of each matrix belongs to vocabulary id w.
struct DseModel {
    std::size_t dim = 0;
    DomainNames domains;
    Matrix common;                   // U^c
    std::array<Matrix, 2> specific;  // U^p, U^q
    Matrix output;                   // V, shared by both branches
    std::vector<double> sentiment;   // s
    std::vector<double> prior;       // p(z_w = 1)

    std::size_t vocab_size() const { return prior.size(); }

    /// Input vector u for a branch; the specific branch picks U^p or U^q.
    std::span<const double> input(WordId w, Branch b, Domain d) const;
    std::span<double> input(WordId w, Branch b, Domain d);

    /// Throws NumericError if any parameter is non-finite or a prior falls
    /// outside [0, 1].
    void check_invariants() const;

    bool operator==(const DseModel&) const = default;
};

/// Inputs uniform in [-0.5/d, 0.5/d], V zero, s uniform like the inputs and
/// every prior 0.5. Deterministic in `seed`. Throws InputError for d = 0 or
/// an empty vocabulary.
DseModel init_model(std::size_t vocab_size, std::size_t dim, std::uint64_t seed, DomainNames domains = {});
DseModel init_model(const Vocabulary& vocab, std::size_t dim, std::uint64_t seed, DomainNames domains = {});

/// Writes the representation of `w` as seen in `domain` into `out`, which
/// must have composed_dim(variant, dim) entries.
void compose(const DseModel& model, WordId w, Domain domain, Variant variant, std::span<double> out);
std::vector<double> compose(const DseModel& model, WordId w, Domain domain, Variant variant);

/// Errors from reading a binary model file.
class ModelFormatError : public InputError {
public:
    enum class Code { io, version, truncated, checksum };

    ModelFormatError(Code code, const std::string& what) : InputError(what), code_(code) {}
    Code code() const { return code_; }

private:
    Code code_;
};

/// Binary model format, all integers and doubles little-endian:
///
///   "DSEM" | u32 version (1) | u32 dim | u64 vocab size
///   | u32 len + bytes for each of the two domain names
///   | f64 U^c, U^p, U^q, V (vocab x dim each, row-major)
///   | f64 s[dim] | f64 prior[vocab]
///   | u64 FNV-1a checksum of every preceding byte
void save_model(const DseModel& model, std::ostream& out);
void save_model(const DseModel& model, const std::filesystem::path& path);
DseModel load_model(std::istream& in);
DseModel load_model(const std::filesystem::path& path);

/// word2vec text format: `<rows> <dim>` header, then `word v1 ... vk` with
/// values printed to 6 significant digits.
void write_text_embeddings(std::ostream& out, const Vocabulary& vocab, const Matrix& vectors);
void export_embeddings(const DseModel& model, const Vocabulary& vocab, Variant variant, Domain domain,
                       std::ostream& out);

/// A word -> vector table read back from the text format.
struct EmbeddingTable {
    std::vector<std::string> words;
    Matrix vectors;
};
EmbeddingTable read_text_embeddings(std::istream& in);
EmbeddingTable read_text_embeddings(const std::filesystem::path& path);

}  // namespace dse
