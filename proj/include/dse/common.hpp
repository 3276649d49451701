#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace dse {

using WordId = std::int32_t;

/// Index of a domain within a two-domain experiment: 0 is D^p, 1 is D^q.
enum class Domain : std::uint8_t { p = 0, q = 1 };

constexpr std::size_t index(Domain d) noexcept { return static_cast<std::size_t>(d); }

/// Bad user input: malformed files, unknown domains, invalid options.
/// The CLI maps this to exit code 2.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite values or other numerical breakdown during training.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The two configured domain identifiers of an experiment.
struct DomainNames {
    std::array<std::string, 2> names;

    const std::string& operator[](Domain d) const { return names[index(d)]; }

    /// Throws InputError when `name` is neither configured identifier.
    Domain resolve(std::string_view name) const {
        if (name == names[0]) return Domain::p;
        if (name == names[1]) return Domain::q;
        throw InputError("unknown domain '" + std::string(name) + "' (expected '" + names[0] +
                         "' or '" + names[1] + "')");
    }

    bool contains(std::string_view name) const { return name == names[0] || name == names[1]; }

    bool operator==(const DomainNames&) const = default;
};

}  // namespace dse
