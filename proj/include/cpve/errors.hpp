#pragma once

#include <stdexcept>
#include <string>

namespace cpve {

// Invalid parameters or malformed input. Mapped to process exit code 2.
class validation_error : public std::runtime_error {
public:
    explicit validation_error(const std::string& msg) : std::runtime_error(msg) {}
};

// A computation would exceed a configured resource budget (state cap, truncation
// budget). The caller must raise eps, lower the horizon, or raise the cap.
// Mapped to process exit code 3.
class budget_error : public std::runtime_error {
public:
    explicit budget_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Broken internal invariant; always a bug. Mapped to process exit code 4.
class internal_error : public std::runtime_error {
public:
    explicit internal_error(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace cpve
