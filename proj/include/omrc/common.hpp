#pragma once

#include <array>
#include <stdexcept>
#include <string>

namespace omrc {

// The four rhetorical roles of a scientific paper.
enum class Role { Objective = 0, Method = 1, Result = 2, Conclusion = 3 };

inline constexpr std::array<Role, 4> kAllRoles = {Role::Objective, Role::Method, Role::Result,
                                                  Role::Conclusion};

inline const char* role_key(Role r) {
    switch (r) {
        case Role::Objective: return "O";
        case Role::Method: return "M";
        case Role::Result: return "R";
        case Role::Conclusion: return "C";
    }
    return "?";
}

inline const char* role_name(Role r) {
    switch (r) {
        case Role::Objective: return "Objective";
        case Role::Method: return "Method";
        case Role::Result: return "Result";
        case Role::Conclusion: return "Conclusion";
    }
    return "?";
}

inline Role role_from_key(const std::string& key) {
    if (key == "O") return Role::Objective;
    if (key == "M") return Role::Method;
    if (key == "R") return Role::Result;
    if (key == "C") return Role::Conclusion;
    throw std::invalid_argument("unknown role key: " + key);
}

inline std::size_t role_index(Role r) { return static_cast<std::size_t>(r); }

// Error taxonomy, mapped to CLI exit codes: usage=1, data=2, provider=3.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ProviderError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ProviderAuthError : public ProviderError {
public:
    using ProviderError::ProviderError;
};

}  // namespace omrc
