#include "ggan/rng.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>

#include "ggan/error.hpp"

namespace ggan {

std::uint64_t Rng::below(std::uint64_t n) {
    // Rejection sampling keeps the draw unbiased.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return x % n;
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u, v, s;
    do {
        u = 2.0 * uniform() - 1.0;
        v = 2.0 * uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double scale = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * scale;
    has_spare_ = true;
    return u * scale;
}

std::string Rng::serialize() const {
    std::ostringstream out;
    out << engine_ << ' ' << (has_spare_ ? 1 : 0) << ' ';
    std::uint64_t bits;
    std::memcpy(&bits, &spare_, sizeof bits);
    out << bits;
    return out.str();
}

Rng Rng::deserialize(const std::string& text) {
    Rng rng;
    std::istringstream in(text);
    int spare_flag = 0;
    std::uint64_t bits = 0;
    in >> rng.engine_ >> spare_flag >> bits;
    if (in.fail()) {
        fail(ErrorKind::Parse, "corrupted rng state");
    }
    rng.has_spare_ = spare_flag != 0;
    std::memcpy(&rng.spare_, &bits, sizeof bits);
    return rng;
}

bool Rng::operator==(const Rng& other) const {
    return engine_ == other.engine_ && has_spare_ == other.has_spare_ &&
           (!has_spare_ || std::memcmp(&spare_, &other.spare_, sizeof spare_) == 0);
}

}  // namespace ggan
