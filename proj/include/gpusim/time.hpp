#pragma once

#include <charconv>
#include <cmath>
#include <compare>
#include <cstdint>
#include <limits>
#include <string>

namespace gpusim {

/// Simulation time (instant or duration) with microsecond resolution.
///
/// Integer ticks keep event ordering and service accounting exact: 812.5 s is
/// 812'500'000 ticks. Quanta that do not divide evenly are rounded to the
/// nearest microsecond once, when they are converted to a Time.
struct Time {
    static constexpr std::int64_t ticks_per_second = 1'000'000;

    std::int64_t us = 0;

    static constexpr Time zero() noexcept { return {}; }
    static constexpr Time micros(std::int64_t v) noexcept { return Time{v}; }
    static constexpr Time seconds(std::int64_t s) noexcept { return Time{s * ticks_per_second}; }
    static constexpr Time max() noexcept { return Time{std::numeric_limits<std::int64_t>::max()}; }

    static Time from_seconds(double s) {
        return Time{static_cast<std::int64_t>(std::llround(s * static_cast<double>(ticks_per_second)))};
    }

    constexpr double to_seconds() const noexcept {
        return static_cast<double>(us) / static_cast<double>(ticks_per_second);
    }

    constexpr auto operator<=>(const Time&) const = default;

    constexpr Time& operator+=(Time o) noexcept { us += o.us; return *this; }
    constexpr Time& operator-=(Time o) noexcept { us -= o.us; return *this; }
    friend constexpr Time operator+(Time a, Time b) noexcept { return Time{a.us + b.us}; }
    friend constexpr Time operator-(Time a, Time b) noexcept { return Time{a.us - b.us}; }
    friend constexpr Time min(Time a, Time b) noexcept { return a < b ? a : b; }
    friend constexpr Time max(Time a, Time b) noexcept { return a < b ? b : a; }
};

/// Exact decimal rendering of a Time in seconds: "3608", "812.5", "0.000001".
inline std::string format_seconds(Time t) {
    std::string out;
    std::int64_t v = t.us;
    if (v < 0) {
        out.push_back('-');
        v = -v;
    }
    out += std::to_string(v / Time::ticks_per_second);
    std::int64_t frac = v % Time::ticks_per_second;
    if (frac != 0) {
        std::string digits = std::to_string(frac);
        digits.insert(0, 6 - digits.size(), '0');
        while (!digits.empty() && digits.back() == '0') digits.pop_back();
        out += '.';
        out += digits;
    }
    return out;
}

/// Parses the output of format_seconds (and plain integers / decimals up to
/// microsecond precision). Returns false on malformed input.
inline bool parse_seconds(const std::string& text, Time& out) {
    if (text.empty()) return false;
    std::size_t pos = 0;
    bool negative = false;
    if (text[0] == '-') {
        negative = true;
        pos = 1;
    }
    auto dot = text.find('.', pos);
    std::string whole = text.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
    std::string frac = dot == std::string::npos ? std::string{} : text.substr(dot + 1);
    if (whole.empty() || frac.size() > 6 || (dot != std::string::npos && frac.empty())) return false;
    std::int64_t w = 0;
    auto [p, ec] = std::from_chars(whole.data(), whole.data() + whole.size(), w);
    if (ec != std::errc{} || p != whole.data() + whole.size()) return false;
    std::int64_t f = 0;
    if (!frac.empty()) {
        for (char c : frac)
            if (c < '0' || c > '9') return false;
        std::string padded = frac + std::string(6 - frac.size(), '0');
        f = std::stoll(padded);
    }
    std::int64_t total = w * Time::ticks_per_second + f;
    out = Time{negative ? -total : total};
    return true;
}

/// Shortest round-trip rendering of a double, always containing a decimal
/// point for finite integral values ("8.0", "5.333333333333333").
inline std::string format_real(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    std::string s(buf, end);
    if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
    return s;
}

}  // namespace gpusim
