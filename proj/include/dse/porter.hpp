#pragma once

#include <string>
#include <string_view>

namespace dse {

/// Porter (1980) suffix-stripping stemmer, steps 1a through 5b.
///
/// Follows Martin Porter's reference implementation, including its two
/// departures from the published rule table in step 2 ("bli" -> "ble" in
/// place of "abli" -> "able", and the extra "logi" -> "log" rule), so the
/// output agrees with the published test vocabulary.
///
/// Input is expected to be lowercase ASCII letters. Words of length <= 2 and
/// words containing any other character are returned unchanged.
std::string porter_stem(std::string_view word);

}  // namespace dse
