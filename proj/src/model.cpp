#include "dse/model.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>

namespace dse {

std::string_view to_string(Variant v) {
    switch (v) {
        case Variant::dse_c: return "dse_c";
        case Variant::dse_w: return "dse_w";
        case Variant::common_only: return "common";
        case Variant::specific_only: return "specific";
    }
    return "?";
}

Variant parse_variant(std::string_view name) {
    if (name == "dse_c") return Variant::dse_c;
    if (name == "dse_w") return Variant::dse_w;
    if (name == "common" || name == "common_only") return Variant::common_only;
    if (name == "specific" || name == "specific_only") return Variant::specific_only;
    throw InputError("unknown variant '" + std::string(name) + "' (dse_c, dse_w, common, specific)");
}

std::size_t composed_dim(Variant v, std::size_t dim) {
    return (v == Variant::dse_c || v == Variant::dse_w) ? 2 * dim : dim;
}

std::span<const double> DseModel::input(WordId w, Branch b, Domain d) const {
    const auto row = static_cast<std::size_t>(w);
    return b == Branch::common ? common.row(row) : specific[index(d)].row(row);
}

std::span<double> DseModel::input(WordId w, Branch b, Domain d) {
    const auto row = static_cast<std::size_t>(w);
    return b == Branch::common ? common.row(row) : specific[index(d)].row(row);
}

void DseModel::check_invariants() const {
    for (const Matrix* m : {&common, &specific[0], &specific[1], &output})
        if (!all_finite(m->data())) throw NumericError("model contains non-finite embedding values");
    if (!all_finite(sentiment)) throw NumericError("sentiment vector contains non-finite values");
    for (std::size_t w = 0; w < prior.size(); ++w) {
        const double p1 = prior[w];
        const double p0 = 1.0 - p1;
        if (!(p1 >= 0.0 && p1 <= 1.0) || !(p0 >= 0.0 && p0 <= 1.0))
            throw NumericError("prior of word " + std::to_string(w) + " outside [0, 1]");
    }
}

DseModel init_model(std::size_t vocab_size, std::size_t dim, std::uint64_t seed, DomainNames domains) {
    if (dim == 0) throw InputError("embedding dimension must be >= 1");
    if (vocab_size == 0) throw InputError("cannot initialize a model over an empty vocabulary");

    DseModel m;
    m.dim = dim;
    m.domains = std::move(domains);
    m.common = Matrix(vocab_size, dim);
    m.specific = {Matrix(vocab_size, dim), Matrix(vocab_size, dim)};
    m.output = Matrix(vocab_size, dim);
    m.sentiment.assign(dim, 0.0);
    m.prior.assign(vocab_size, 0.5);

    std::mt19937_64 rng(seed);
    const double r = 0.5 / static_cast<double>(dim);
    std::uniform_real_distribution<double> uni(-r, r);
    for (Matrix* mat : {&m.common, &m.specific[0], &m.specific[1]})
        for (double& v : mat->data()) v = uni(rng);
    for (double& v : m.sentiment) v = uni(rng);
    return m;
}

DseModel init_model(const Vocabulary& vocab, std::size_t dim, std::uint64_t seed, DomainNames domains) {
    return init_model(vocab.size(), dim, seed, std::move(domains));
}

void compose(const DseModel& model, WordId w, Domain domain, Variant variant, std::span<double> out) {
    if (w < 0 || static_cast<std::size_t>(w) >= model.vocab_size())
        throw InputError("word id " + std::to_string(w) + " is not in the vocabulary");
    const std::size_t d = model.dim;
    if (out.size() != composed_dim(variant, d)) throw InputError("compose: output span has the wrong size");

    const auto uc = model.input(w, Branch::common, domain);
    const auto us = model.input(w, Branch::specific, domain);
    const double pc = model.prior[static_cast<std::size_t>(w)];
    switch (variant) {
        case Variant::common_only:
            std::copy(uc.begin(), uc.end(), out.begin());
            break;
        case Variant::specific_only:
            std::copy(us.begin(), us.end(), out.begin());
            break;
        case Variant::dse_c:
            std::copy(uc.begin(), uc.end(), out.begin());
            std::copy(us.begin(), us.end(), out.begin() + static_cast<std::ptrdiff_t>(d));
            break;
        case Variant::dse_w:
            for (std::size_t i = 0; i < d; ++i) {
                out[i] = uc[i] * pc;
                out[d + i] = us[i] * (1.0 - pc);
            }
            break;
    }
}

std::vector<double> compose(const DseModel& model, WordId w, Domain domain, Variant variant) {
    std::vector<double> out(composed_dim(variant, model.dim));
    compose(model, w, domain, variant, out);
    return out;
}

// ---------------------------------------------------------------------------
// Binary format

namespace {

constexpr char kMagic[4] = {'D', 'S', 'E', 'M'};
constexpr std::uint32_t kVersion = 1;

class Writer {
public:
    void u32(std::uint32_t v) { le(v, 4); }
    void u64(std::uint64_t v) { le(v, 8); }
    void f64(double v) { le(std::bit_cast<std::uint64_t>(v), 8); }
    void bytes(std::string_view s) { buf_.append(s); }
    void f64s(std::span<const double> v) {
        for (double x : v) f64(x);
    }
    std::string& buffer() { return buf_; }

private:
    void le(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
    std::string buf_;
};

class Reader {
public:
    explicit Reader(std::string_view buf) : buf_(buf) {}

    std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
    std::uint64_t u64() { return le(8); }
    double f64() { return std::bit_cast<double>(le(8)); }
    std::string bytes(std::size_t n) {
        need(n);
        std::string s(buf_.substr(pos_, n));
        pos_ += n;
        return s;
    }
    void f64s(std::span<double> out) {
        need(out.size() * 8);
        for (double& x : out) x = f64();
    }
    std::size_t pos() const { return pos_; }
    std::size_t remaining() const { return buf_.size() - pos_; }

    void need(std::size_t n) const {
        if (remaining() < n) throw ModelFormatError(ModelFormatError::Code::truncated, "model file is truncated");
    }

private:
    std::uint64_t le(int n) {
        need(static_cast<std::size_t>(n));
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
        pos_ += static_cast<std::size_t>(n);
        return v;
    }

    std::string_view buf_;
    std::size_t pos_ = 0;
};

std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

void save_model(const DseModel& model, std::ostream& out) {
    Writer w;
    w.bytes(std::string_view(kMagic, 4));
    w.u32(kVersion);
    w.u32(static_cast<std::uint32_t>(model.dim));
    w.u64(model.vocab_size());
    for (const auto& name : model.domains.names) {
        w.u32(static_cast<std::uint32_t>(name.size()));
        w.bytes(name);
    }
    w.f64s(model.common.data());
    w.f64s(model.specific[0].data());
    w.f64s(model.specific[1].data());
    w.f64s(model.output.data());
    w.f64s(model.sentiment);
    w.f64s(model.prior);
    const std::uint64_t sum = fnv1a(w.buffer());
    w.u64(sum);
    out.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));
    if (!out) throw ModelFormatError(ModelFormatError::Code::io, "failed writing model");
}

void save_model(const DseModel& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ModelFormatError(ModelFormatError::Code::io, "cannot open '" + path.string() + "' for writing");
    save_model(model, out);
}

DseModel load_model(std::istream& in) {
    const std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    Reader r(buf);
    if (buf.size() < 8 || std::memcmp(buf.data(), kMagic, 4) != 0)
        throw ModelFormatError(ModelFormatError::Code::version, "not a DSEM model file (bad magic)");
    r.bytes(4);
    const std::uint32_t version = r.u32();
    if (version != kVersion)
        throw ModelFormatError(ModelFormatError::Code::version,
                               "unsupported model format version " + std::to_string(version));

    DseModel m;
    m.dim = r.u32();
    const std::uint64_t vocab = r.u64();
    for (auto& name : m.domains.names) name = r.bytes(r.u32());
    if (m.dim == 0) throw ModelFormatError(ModelFormatError::Code::version, "model header has zero dimension");

    // Validate the payload size before allocating anything sized by the header.
    const auto doubles = static_cast<unsigned __int128>(vocab) * (4 * static_cast<unsigned __int128>(m.dim) + 1) + m.dim;
    if (static_cast<unsigned __int128>(r.remaining()) < doubles * 8 + 8)
        throw ModelFormatError(ModelFormatError::Code::truncated, "model file is truncated");

    const std::size_t rows = static_cast<std::size_t>(vocab);
    m.common = Matrix(rows, m.dim);
    m.specific = {Matrix(rows, m.dim), Matrix(rows, m.dim)};
    m.output = Matrix(rows, m.dim);
    m.sentiment.resize(m.dim);
    m.prior.resize(rows);
    r.f64s(m.common.data());
    r.f64s(m.specific[0].data());
    r.f64s(m.specific[1].data());
    r.f64s(m.output.data());
    r.f64s(m.sentiment);
    r.f64s(m.prior);

    const std::size_t payload = r.pos();
    const std::uint64_t stored = r.u64();
    if (stored != fnv1a(std::string_view(buf).substr(0, payload)))
        throw ModelFormatError(ModelFormatError::Code::checksum, "model checksum mismatch");
    return m;
}

DseModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ModelFormatError(ModelFormatError::Code::io, "cannot open model file '" + path.string() + "'");
    return load_model(in);
}

// ---------------------------------------------------------------------------
// Text export

namespace {

void write_row(std::ostream& out, std::string_view word, std::span<const double> v) {
    out << word;
    char buf[32];
    for (double x : v) {
        std::snprintf(buf, sizeof buf, " %.6g", x);
        out << buf;
    }
    out << '\n';
}

}  // namespace

void write_text_embeddings(std::ostream& out, const Vocabulary& vocab, const Matrix& vectors) {
    if (vectors.rows() != vocab.size()) throw InputError("embedding rows do not match vocabulary size");
    out << vocab.size() << ' ' << vectors.cols() << '\n';
    for (std::size_t w = 0; w < vocab.size(); ++w) write_row(out, vocab.word(static_cast<WordId>(w)), vectors.row(w));
}

void export_embeddings(const DseModel& model, const Vocabulary& vocab, Variant variant, Domain domain,
                       std::ostream& out) {
    if (model.vocab_size() != vocab.size()) throw InputError("model and vocabulary sizes differ");
    const std::size_t dim = composed_dim(variant, model.dim);
    out << vocab.size() << ' ' << dim << '\n';
    std::vector<double> buf(dim);
    for (std::size_t w = 0; w < vocab.size(); ++w) {
        compose(model, static_cast<WordId>(w), domain, variant, buf);
        write_row(out, vocab.word(static_cast<WordId>(w)), buf);
    }
    if (!out) throw InputError("failed writing embeddings");
}

EmbeddingTable read_text_embeddings(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw InputError("embedding file is empty");
    std::istringstream header(line);
    std::size_t rows = 0, cols = 0;
    if (!(header >> rows >> cols) || cols == 0) throw InputError("bad embedding header '" + line + "'");

    EmbeddingTable t;
    t.vectors = Matrix(rows, cols);
    t.words.reserve(rows);
    for (std::size_t i = 0; i < rows; ++i) {
        if (!std::getline(in, line)) throw InputError("embedding file has fewer rows than its header");
        std::istringstream ls(line);
        std::string word;
        ls >> word;
        auto row = t.vectors.row(i);
        for (std::size_t j = 0; j < cols; ++j)
            if (!(ls >> row[j])) throw InputError("embedding row " + std::to_string(i + 1) + " is short");
        t.words.push_back(std::move(word));
    }
    return t;
}

EmbeddingTable read_text_embeddings(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open embedding file '" + path.string() + "'");
    return read_text_embeddings(in);
}

}  // namespace dse
