#include "ratrack/common.hpp"

#include <charconv>
#include <cmath>
#include <system_error>

namespace ratrack {

std::string format_double(double v) {
    if (!std::isfinite(v)) {
        throw ValidationError("refusing to serialize non-finite value");
    }
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
    const char* first = s.data();
    const char* last = s.data() + s.size();
    // from_chars does not skip leading whitespace and rejects "+1";
    // tolerate an explicit plus sign since hand-written configs use it.
    if (first != last && *first == '+') ++first;
    double v = 0.0;
    auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last || first == last) {
        throw ValidationError("not a number: '" + s + "'");
    }
    return v;
}

long long parse_int(const std::string& s) {
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (first != last && *first == '+') ++first;
    long long v = 0;
    auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last || first == last) {
        throw ValidationError("not an integer: '" + s + "'");
    }
    return v;
}

}  // namespace ratrack
