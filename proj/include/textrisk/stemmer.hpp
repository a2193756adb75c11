#pragma once

#include <memory>
#include <string>
#include <string_view>

namespace textrisk {

// Pluggable stemming step of the text pipeline. Implementations must be pure.
class Stemmer {
public:
    virtual ~Stemmer() = default;
    virtual std::string stem(std::string_view token) const = 0;
    virtual std::string name() const = 0;
};

// Martin Porter's suffix-stripping algorithm (steps 1a through 5b), following
// the reference ANSI C release, which includes the "bli" -> "ble" and
// "logi" -> "log" rules and leaves words of one or two letters untouched.
class PorterStemmer final : public Stemmer {
public:
    std::string stem(std::string_view token) const override;
    std::string name() const override { return "porter"; }
};

class IdentityStemmer final : public Stemmer {
public:
    std::string stem(std::string_view token) const override { return std::string(token); }
    std::string name() const override { return "none"; }
};

// "porter" or "none".
std::unique_ptr<Stemmer> make_stemmer(std::string_view name);

} // namespace textrisk
