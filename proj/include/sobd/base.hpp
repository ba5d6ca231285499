#pragma once

#include <cstdint>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>

namespace sobd {

// All recoverable failures surface as sobd::Error with a human-readable
// message; the CLI turns them into diagnostics + nonzero exit.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

namespace detail {
inline void format_parts(std::ostringstream&) {}
template <typename T, typename... Rest>
void format_parts(std::ostringstream& os, T&& v, Rest&&... rest) {
    os << std::forward<T>(v);
    format_parts(os, std::forward<Rest>(rest)...);
}
}  // namespace detail

template <typename... Parts>
std::string str_cat(Parts&&... parts) {
    std::ostringstream os;
    detail::format_parts(os, std::forward<Parts>(parts)...);
    return os.str();
}

template <typename... Parts>
[[noreturn]] void fail(Parts&&... parts) {
    throw Error(str_cat(std::forward<Parts>(parts)...));
}

template <typename... Parts>
void require(bool cond, Parts&&... parts) {
    if (!cond) fail(std::forward<Parts>(parts)...);
}

// Non-fatal diagnostics (degenerate inputs, re-seeded clusters, skipped
// images) are reported through an optional sink so library code never
// writes to stderr behind the caller's back.
using WarnSink = std::function<void(const std::string&)>;

inline void warn(const WarnSink& sink, const std::string& msg) {
    if (sink) sink(msg);
}

}  // namespace sobd
