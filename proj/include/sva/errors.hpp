#pragma once

#include <stdexcept>
#include <string>

namespace sva {

/// Objects from different backends/contexts were mixed.
struct context_error : std::logic_error {
    explicit context_error(const std::string& m) : std::logic_error(m) {}
};

/// A rewrite or recursion budget was exhausted; carries a diagnostic.
struct budget_error : std::runtime_error {
    explicit budget_error(const std::string& m) : std::runtime_error(m) {}
};

/// Malformed input (parse errors, bad scenario files, bad check ids).
struct usage_error : std::runtime_error {
    explicit usage_error(const std::string& m) : std::runtime_error(m) {}
};

}  // namespace sva
